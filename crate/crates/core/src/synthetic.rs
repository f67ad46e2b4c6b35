//! Target deflection fields with known ground truth.

use std::f64::consts::PI;
use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::compare::ScalarField;
use crate::error::{Error, Result};
use crate::fe::{LoadCase, LoadDirection, PointLoad};
use crate::grid::GridSpec;
use crate::model::Model;

/// Concentrated force at a mesh position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadSpec {
    pub x: f64,
    pub y: f64,
    /// Magnitude [N].
    pub force: f64,
    #[serde(default = "down")]
    pub direction: LoadDirection,
}

fn down() -> LoadDirection {
    LoadDirection::NegZ
}

/// Parameters of the simply supported rectangular plate under uniform
/// pressure. Edges lie on the rectangle `[0, a] x [0, b]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlateParams {
    pub a: f64,
    pub b: f64,
    /// Pressure in -z [N/mm²].
    pub q: f64,
    pub e: f64,
    pub nu: f64,
    pub thickness: f64,
}

impl PlateParams {
    pub fn rigidity(&self) -> f64 {
        self.e * self.thickness.powi(3) / (12.0 * (1.0 - self.nu * self.nu))
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [("a", self.a), ("b", self.b), ("e", self.e), ("thickness", self.thickness)];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Precondition(format!("plate parameter {name} must be positive, got {v}")));
            }
        }
        if !self.q.is_finite() {
            return Err(Error::Precondition(format!("pressure must be finite, got {}", self.q)));
        }
        if !(self.nu > -1.0 && self.nu < 0.5) {
            return Err(Error::Precondition(format!("Poisson ratio {} outside (-1, 0.5)", self.nu)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TargetSource {
    /// Solve the model under known loads.
    ForwardSolve { loads: Vec<LoadSpec> },
    /// Closed-form plate solution evaluated on the mesh grid.
    Analytic { benchmark: String, parameters: PlateParams },
    /// Existing field file.
    File { path: PathBuf },
}

/// Additive Gaussian noise on every unmasked value.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSpec {
    /// Standard deviation [mm].
    pub sigma: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetRecipe {
    #[serde(flatten)]
    pub source: TargetSource,
    #[serde(default)]
    pub noise: NoiseSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedTarget {
    pub field: ScalarField,
    /// Loads that produced the field, for forward solves.
    pub truth: Option<LoadCase>,
}

pub const SS_UNIFORM: &str = "simply-supported-uniform";

/// Deflection (positive along the pressure) of the simply supported plate
/// from the single-series solution, summed until terms stop contributing.
pub fn levy_deflection(p: &PlateParams, x: f64, y: f64) -> f64 {
    let d = p.rigidity();
    // Series written for y measured from the plate's mid-line.
    let eta = ((2.0 * y - p.b) / p.b).abs().min(1.0);
    let lead = 4.0 * p.q * p.a.powi(4) / (PI.powi(5) * d);
    let mut sum = 0.0;
    let mut m = 1;
    loop {
        let mf = m as f64;
        let alpha = mf * PI * p.b / (2.0 * p.a);
        // cosh(α η)/cosh(α) and η sinh(α η)/cosh(α), without overflow.
        let e2 = (-2.0 * alpha).exp();
        let decay = (alpha * (eta - 1.0)).exp() / (1.0 + e2);
        let em = (-2.0 * alpha * eta).exp();
        let ch = decay * (1.0 + em);
        let sh = decay * (1.0 - em);
        let bracket = 1.0 - 0.5 * (alpha * alpha.tanh() + 2.0) * ch + 0.5 * alpha * eta * sh;
        let term = bracket * (mf * PI * x / p.a).sin() / mf.powi(5);
        sum += term;
        if mf.powi(-5) < 1e-17 * sum.abs().max(f64::MIN_POSITIVE) || m > 100_001 {
            break;
        }
        m += 2;
    }
    lead * sum
}

fn add_noise(field: &mut ScalarField, noise: &NoiseSpec) -> Result<()> {
    if !(noise.sigma.is_finite() && noise.sigma >= 0.0) {
        return Err(Error::Precondition(format!("noise sigma must be >= 0, got {}", noise.sigma)));
    }
    if noise.sigma == 0.0 {
        return Ok(());
    }
    let dist = Normal::new(0.0, noise.sigma).map_err(|e| Error::Precondition(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    for v in field.values.iter_mut().flatten() {
        *v += dist.sample(&mut rng);
    }
    Ok(())
}

/// Resolves load positions to nodes of `model`.
pub fn load_case(model: &Model, loads: &[LoadSpec]) -> Result<LoadCase> {
    let mut out = Vec::with_capacity(loads.len());
    for l in loads {
        let node = model.mesh.node_at(l.x, l.y).ok_or_else(|| {
            Error::Precondition(format!("load position ({}, {}) is not a mesh node", l.x, l.y))
        })?;
        if !(l.force.is_finite() && l.force >= 0.0) {
            return Err(Error::Precondition(format!("load magnitude must be >= 0, got {}", l.force)));
        }
        out.push(PointLoad {
            node,
            force: l.force,
            direction: l.direction,
        });
    }
    let lc = LoadCase::new(out);
    lc.validate(model.mesh.node_count())?;
    Ok(lc)
}

/// Field on the model's node grid (or the file's own grid) plus ground truth.
pub fn generate(recipe: &TargetRecipe, model: &Model) -> Result<GeneratedTarget> {
    let (mut field, truth) = match &recipe.source {
        TargetSource::ForwardSolve { loads } => {
            let lc = load_case(model, loads)?;
            let disp = model.assemble()?.solve(&lc)?;
            let w: Vec<f64> = (0..model.mesh.node_count()).map(|n| disp.w(n)).collect();
            (ScalarField::from_mesh_values(&model.mesh, &w)?, Some(lc))
        }
        TargetSource::Analytic { benchmark, parameters } => {
            if benchmark != SS_UNIFORM {
                return Err(Error::Unknown {
                    kind: "analytic benchmark",
                    id: benchmark.clone(),
                });
            }
            parameters.validate()?;
            let grid = GridSpec::of_mesh(&model.mesh);
            let ext = grid.extent();
            if ext.x[1] > parameters.a * (1.0 + 1e-12) || ext.y[1] > parameters.b * (1.0 + 1e-12) {
                return Err(Error::Precondition(format!(
                    "mesh extent {:?} exceeds the {} x {} plate",
                    ext, parameters.a, parameters.b
                )));
            }
            // Pressure acts in -z, so the surface moves down.
            (ScalarField::from_fn(grid, |x, y| -levy_deflection(parameters, x, y))?, None)
        }
        TargetSource::File { path } => (ScalarField::load(path)?, None),
    };
    add_noise(&mut field, &recipe.noise)?;
    Ok(GeneratedTarget { field, truth })
}
