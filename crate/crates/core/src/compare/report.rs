use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::field::{normalize_at, ScalarField};
use crate::error::{Error, Result};
use crate::fe::StrainField;
use crate::strain::principal;

/// Named point at which both fields are reported.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub name: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub name: String,
    pub x: f64,
    pub y: f64,
    /// `None` where the field is masked or absent.
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub a_normalized: Option<f64>,
    pub b_normalized: Option<f64>,
    /// `(b - a) / a`.
    pub relative: Option<f64>,
    /// Same, after normalizing both fields at the reference point.
    pub relative_normalized: Option<f64>,
}

/// RMS and maximum of `|b - a|` divided by `max |a|` over the overlap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    pub rms: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub p0: [f64; 2],
    pub a_p0: f64,
    pub b_p0: f64,
    /// Least-squares `k` in `a ≈ k b`.
    pub k: f64,
    /// Samples of `a`'s grid where both fields are defined.
    pub overlap: usize,
    pub raw: Deviation,
    /// `k b` against `a`.
    pub fitted: Deviation,
    /// `b / b(p0)` against `a / a(p0)`.
    pub normalized: Deviation,
    pub probes: Vec<ProbeResult>,
}

fn deviation(pairs: &[(f64, f64)]) -> Deviation {
    let peak = pairs.iter().fold(0.0_f64, |m, p| m.max(p.0.abs()));
    let scale = if peak > 0.0 { peak } else { 1.0 };
    let mut sum = 0.0;
    let mut max = 0.0_f64;
    for &(a, b) in pairs {
        let d = (b - a).abs() / scale;
        sum += d * d;
        max = max.max(d);
    }
    Deviation {
        rms: (sum / pairs.len() as f64).sqrt(),
        max,
    }
}

/// Compares `b` against the reference `a` on the samples of `a`'s grid.
pub fn compare(a: &ScalarField, b: &ScalarField, p0: [f64; 2], probes: &[Probe], eps: f64) -> Result<ComparisonReport> {
    let mut pairs = Vec::new();
    for (i, va) in a.values.iter().enumerate() {
        let Some(va) = *va else { continue };
        let (x, y) = a.grid.xy(i);
        if let Some(vb) = b.sample(x, y) {
            pairs.push((va, vb));
        }
    }
    if pairs.is_empty() {
        return Err(Error::Precondition("the fields have no unmasked overlap".into()));
    }
    let an = normalize_at(a, p0, eps)?;
    let bn = normalize_at(b, p0, eps)?;
    let a_p0 = a.sample(p0[0], p0[1]).expect("normalized above");
    let b_p0 = b.sample(p0[0], p0[1]).expect("normalized above");

    let ab: f64 = pairs.iter().map(|p| p.0 * p.1).sum();
    let bb: f64 = pairs.iter().map(|p| p.1 * p.1).sum();
    if bb == 0.0 {
        return Err(Error::Precondition("field b vanishes on the overlap; no scale factor".into()));
    }
    let k = ab / bb;
    let fitted: Vec<(f64, f64)> = pairs.iter().map(|&(x, y)| (x, k * y)).collect();
    let normalized: Vec<(f64, f64)> = pairs.iter().map(|&(x, y)| (x / a_p0, y / b_p0)).collect();

    let probes = probes
        .iter()
        .map(|p| {
            let (va, vb) = (a.sample(p.x, p.y), b.sample(p.x, p.y));
            let (na, nb) = (an.sample(p.x, p.y), bn.sample(p.x, p.y));
            let rel = |a: Option<f64>, b: Option<f64>| match (a, b) {
                (Some(a), Some(b)) if a != 0.0 => Some((b - a) / a),
                _ => None,
            };
            ProbeResult {
                name: p.name.clone(),
                x: p.x,
                y: p.y,
                a: va,
                b: vb,
                a_normalized: na,
                b_normalized: nb,
                relative: rel(va, vb),
                relative_normalized: rel(na, nb),
            }
        })
        .collect();

    Ok(ComparisonReport {
        p0,
        a_p0,
        b_p0,
        k,
        overlap: pairs.len(),
        raw: deviation(&pairs),
        fitted: deviation(&fitted),
        normalized: deviation(&normalized),
        probes,
    })
}

impl ComparisonReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let opt = |v: Option<f64>| v.map_or("NA".to_string(), |v| format!("{v:.6e}"));
        writeln!(s, "reference point      ({}, {})", self.p0[0], self.p0[1]).unwrap();
        writeln!(s, "a(p0) / b(p0)        {:.6e} / {:.6e}", self.a_p0, self.b_p0).unwrap();
        writeln!(s, "best-fit k (a = k b) {:.12e}", self.k).unwrap();
        writeln!(s, "overlap samples      {}", self.overlap).unwrap();
        writeln!(s, "deviation            rms          max").unwrap();
        for (name, d) in [("raw", self.raw), ("fitted", self.fitted), ("normalized", self.normalized)] {
            writeln!(s, "  {name:<18} {:.6e} {:.6e}", d.rms, d.max).unwrap();
        }
        if !self.probes.is_empty() {
            writeln!(s, "probes               a            b            rel          rel(norm)").unwrap();
            for p in &self.probes {
                writeln!(
                    s,
                    "  {:<18} {} {} {} {}",
                    format!("{} ({}, {})", p.name, p.x, p.y),
                    opt(p.a),
                    opt(p.b),
                    opt(p.relative),
                    opt(p.relative_normalized)
                )
                .unwrap();
            }
        }
        s
    }
}

/// Area fraction of the surface where the largest absolute principal strain
/// stays strictly below `threshold`. Nodes carry their tributary area.
pub fn min_strain_audit(strains: &StrainField, threshold: f64) -> f64 {
    let g = strains.grid;
    let weight = |k: usize, n: usize| if n > 1 && (k == 0 || k == n - 1) { 0.5 } else { 1.0 };
    let mut below = 0.0;
    let mut total = 0.0;
    for (idx, t) in strains.tensors.iter().enumerate() {
        let (i, j) = (idx % g.nx, idx / g.nx);
        let w = weight(i, g.nx) * weight(j, g.ny);
        let p = principal(t);
        total += w;
        if p.e1.abs().max(p.e2.abs()) < threshold {
            below += w;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        below / total
    }
}
