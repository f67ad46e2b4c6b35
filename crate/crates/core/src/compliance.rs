//! Unit-load compliance (influence) matrices and their text format.
//!
//! Column `c` holds the out-of-plane deflection `w` at every evaluation node
//! caused by a unit force at candidate `c`, divided by the force magnitude.
//! Values are stored with their sign, so a downward unit load gives negative
//! entries near its own node.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fe::{LoadCase, LoadDirection, PointLoad, SystemMatrix};
use crate::model::{Dof, NodeSets, SetLabel};

pub const FORMAT_TAG: &str = "#platefit-compliance";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub node: usize,
    pub set: SetLabel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplianceMatrix {
    /// Fingerprint of the model the columns were computed on.
    pub fingerprint: String,
    pub unit: f64,
    pub direction: LoadDirection,
    pub eval_nodes: Vec<usize>,
    pub candidates: Vec<Candidate>,
    /// Columns whose candidate node has `w` constrained (all zero).
    pub degenerate: Vec<usize>,
    /// Column-major, `eval_nodes.len()` rows.
    values: Vec<f64>,
}

impl ComplianceMatrix {
    pub fn new(
        fingerprint: String,
        unit: f64,
        direction: LoadDirection,
        eval_nodes: Vec<usize>,
        candidates: Vec<Candidate>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if values.len() != eval_nodes.len() * candidates.len() {
            return Err(Error::Dimension(format!(
                "{} values for {} x {} matrix",
                values.len(),
                eval_nodes.len(),
                candidates.len()
            )));
        }
        if !(unit.is_finite() && unit > 0.0) {
            return Err(Error::Precondition(format!("unit load must be positive, got {unit}")));
        }
        Ok(Self {
            fingerprint,
            unit,
            direction,
            eval_nodes,
            candidates,
            degenerate: Vec::new(),
            values,
        })
    }

    pub fn rows(&self) -> usize {
        self.eval_nodes.len()
    }

    pub fn cols(&self) -> usize {
        self.candidates.len()
    }

    pub fn column(&self, c: usize) -> &[f64] {
        let n = self.rows();
        &self.values[c * n..(c + 1) * n]
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[col * self.rows() + row]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Entry measured along the load direction (positive when the node moves
    /// with the applied force).
    pub fn along_load(&self, row: usize, col: usize) -> f64 {
        self.direction.sign() * self.get(row, col)
    }

    pub fn row_of(&self, node: usize) -> Option<usize> {
        self.eval_nodes.iter().position(|&n| n == node)
    }

    pub fn column_of(&self, node: usize) -> Option<usize> {
        self.candidates.iter().position(|c| c.node == node)
    }

    /// Column indices belonging to `set`, in column order.
    pub fn set_columns(&self, set: SetLabel) -> Vec<usize> {
        (0..self.cols()).filter(|&c| self.candidates[c].set == set).collect()
    }

    /// Keeps only the rows whose evaluation node satisfies `keep`.
    pub fn restrict_rows(&self, keep: impl Fn(usize) -> bool) -> Self {
        let rows: Vec<usize> = (0..self.rows()).filter(|&r| keep(self.eval_nodes[r])).collect();
        let mut values = Vec::with_capacity(rows.len() * self.cols());
        for c in 0..self.cols() {
            let col = self.column(c);
            values.extend(rows.iter().map(|&r| col[r]));
        }
        Self {
            eval_nodes: rows.iter().map(|&r| self.eval_nodes[r]).collect(),
            values,
            ..self.clone()
        }
    }

    pub fn check_fingerprint(&self, expected: &str) -> Result<()> {
        if self.fingerprint != expected {
            return Err(Error::ModelMismatch {
                expected: expected.to_string(),
                found: self.fingerprint.clone(),
            });
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let join = |it: &mut dyn Iterator<Item = String>| it.collect::<Vec<_>>().join(" ");
        let _ = writeln!(s, "{FORMAT_TAG} v{FORMAT_VERSION}");
        let _ = writeln!(s, "fingerprint {}", self.fingerprint);
        let _ = writeln!(s, "unit {:?}", self.unit);
        let _ = writeln!(s, "direction {}", direction_str(self.direction));
        let _ = writeln!(s, "shape {} {}", self.rows(), self.cols());
        let _ = writeln!(s, "eval {}", join(&mut self.eval_nodes.iter().map(|n| n.to_string())));
        let _ = writeln!(
            s,
            "candidates {}",
            join(&mut self.candidates.iter().map(|c| format!("{}:{}", c.set.as_str(), c.node)))
        );
        let _ = writeln!(s, "degenerate {}", join(&mut self.degenerate.iter().map(|c| c.to_string())));
        for r in 0..self.rows() {
            let _ = writeln!(s, "{}", join(&mut (0..self.cols()).map(|c| format!("{:?}", self.get(r, c)))));
        }
        let _ = writeln!(s, "end {}", self.rows());
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Loads and checks that the matrix belongs to the model with `fingerprint`.
    pub fn load_for(path: &Path, fingerprint: &str) -> Result<Self> {
        let m = Self::load(path)?;
        m.check_fingerprint(fingerprint)?;
        Ok(m)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let corrupt = |reason: String| Error::Corrupt {
            path: path.to_path_buf(),
            reason,
        };
        let format = |reason: String| Error::format(path, reason);
        let mut lines = text.lines();
        let mut next = |what: &str| lines.next().ok_or_else(|| corrupt(format!("missing {what}")));

        let tag = next("header")?;
        let expected = format!("{FORMAT_TAG} v{FORMAT_VERSION}");
        if tag != expected {
            return Err(if tag.starts_with(FORMAT_TAG) {
                Error::Schema {
                    path: path.to_path_buf(),
                    reason: format!("found `{tag}`, expected `{expected}`"),
                }
            } else {
                format(format!("not a compliance matrix file (first line `{tag}`)"))
            });
        }
        let mut field = |key: &str| -> Result<String> {
            let line = next(key)?;
            match line.split_once(' ').map(|(k, v)| (k, v)).or_else(|| (line == key).then_some((line, ""))) {
                Some((k, v)) if k == key => Ok(v.to_string()),
                _ => Err(format(format!("expected `{key}` line, found `{line}`"))),
            }
        };
        let fingerprint = field("fingerprint")?;
        let unit: f64 = field("unit")?.parse().map_err(|_| format("bad unit".into()))?;
        let direction = parse_direction(&field("direction")?).ok_or_else(|| format("bad direction".into()))?;
        let shape = field("shape")?;
        let dims: Vec<usize> = shape
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| format(format!("bad shape `{shape}`"))))
            .collect::<Result<_>>()?;
        let [rows, cols] = dims[..] else {
            return Err(format(format!("bad shape `{shape}`")));
        };
        let eval_nodes: Vec<usize> = field("eval")?
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| format(format!("bad node id `{t}`"))))
            .collect::<Result<_>>()?;
        let candidates: Vec<Candidate> = field("candidates")?
            .split_whitespace()
            .map(|t| {
                let (set, node) = t.split_once(':').ok_or_else(|| format(format!("bad candidate `{t}`")))?;
                Ok(Candidate {
                    set: SetLabel::parse(set).ok_or_else(|| format(format!("bad set `{set}`")))?,
                    node: node.parse().map_err(|_| format(format!("bad node id `{node}`")))?,
                })
            })
            .collect::<Result<_>>()?;
        let degenerate: Vec<usize> = field("degenerate")?
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| format(format!("bad column `{t}`"))))
            .collect::<Result<_>>()?;
        if eval_nodes.len() != rows || candidates.len() != cols {
            return Err(format(format!(
                "header declares {rows} x {cols} but lists {} evaluation nodes and {} candidates",
                eval_nodes.len(),
                candidates.len()
            )));
        }

        let mut values = vec![0.0; rows * cols];
        for r in 0..rows {
            let line = next("row")?;
            if line.starts_with("end") {
                return Err(corrupt(format!("{r} of {rows} rows present")));
            }
            let mut count = 0;
            for (c, tok) in line.split_whitespace().enumerate() {
                if c >= cols {
                    return Err(corrupt(format!("row {r} has more than {cols} values")));
                }
                let v: f64 = tok.parse().map_err(|_| corrupt(format!("row {r}: bad value `{tok}`")))?;
                if !v.is_finite() {
                    return Err(corrupt(format!("row {r}: non-finite value")));
                }
                values[c * rows + r] = v;
                count += 1;
            }
            if count != cols {
                return Err(corrupt(format!("row {r} has {count} of {cols} values")));
            }
        }
        let end = next("end marker")?;
        if end != format!("end {rows}") {
            return Err(corrupt(format!("expected `end {rows}`, found `{end}`")));
        }
        let mut m = Self::new(fingerprint, unit, direction, eval_nodes, candidates, values)?;
        m.degenerate = degenerate;
        Ok(m)
    }
}

fn direction_str(d: LoadDirection) -> &'static str {
    match d {
        LoadDirection::NegZ => "-z",
        LoadDirection::PosZ => "+z",
    }
}

fn parse_direction(s: &str) -> Option<LoadDirection> {
    match s {
        "-z" => Some(LoadDirection::NegZ),
        "+z" => Some(LoadDirection::PosZ),
        _ => None,
    }
}

/// Nodes whose deflection is free: the default evaluation set.
pub fn default_eval_nodes(sys: &SystemMatrix) -> Vec<usize> {
    (0..sys.node_count()).filter(|&n| !sys.is_constrained(n, Dof::W)).collect()
}

#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub unit: f64,
    pub direction: LoadDirection,
    /// Worker threads; 0 uses the global pool.
    pub workers: usize,
    pub fingerprint: String,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            unit: 1.0,
            direction: LoadDirection::NegZ,
            workers: 0,
            fingerprint: String::new(),
        }
    }
}

/// Result of a sweep, with the number of columns taken from a previous run.
#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub matrix: ComplianceMatrix,
    pub solved: usize,
    pub reused: usize,
}

/// One unit-load solve per candidate of `sets`, recording `w` at `eval_nodes`.
pub fn sweep(sys: &SystemMatrix, sets: &NodeSets, eval_nodes: &[usize], opts: &SweepOptions) -> Result<ComplianceMatrix> {
    Ok(sweep_resume(sys, sets, eval_nodes, opts, None)?.matrix)
}

/// Like [`sweep`], reusing columns of `previous` when it was built for the
/// same model, evaluation nodes, unit and direction.
pub fn sweep_resume(
    sys: &SystemMatrix,
    sets: &NodeSets,
    eval_nodes: &[usize],
    opts: &SweepOptions,
    previous: Option<&ComplianceMatrix>,
) -> Result<SweepOutcome> {
    if eval_nodes.is_empty() {
        return Err(Error::Precondition("no evaluation nodes".into()));
    }
    if let Some(&bad) = eval_nodes.iter().find(|&&n| n >= sys.node_count()) {
        return Err(Error::UnknownNode(bad));
    }
    let candidates: Vec<Candidate> = sets
        .candidates()
        .into_iter()
        .map(|(node, set)| Candidate { node, set })
        .collect();
    if let Some(&bad) = candidates.iter().find(|c| c.node >= sys.node_count()) {
        return Err(Error::UnknownNode(bad.node));
    }

    let reusable: BTreeMap<usize, &[f64]> = match previous {
        Some(p)
            if p.fingerprint == opts.fingerprint
                && p.eval_nodes == eval_nodes
                && p.unit.to_bits() == opts.unit.to_bits()
                && p.direction == opts.direction =>
        {
            (0..p.cols()).map(|c| (p.candidates[c].node, p.column(c))).collect()
        }
        Some(_) => {
            log::info!("previous compliance matrix does not match this sweep; recomputing all columns");
            BTreeMap::new()
        }
        None => BTreeMap::new(),
    };

    let solve_column = |c: &Candidate| -> Result<Vec<f64>> {
        if let Some(col) = reusable.get(&c.node) {
            return Ok(col.to_vec());
        }
        let lc = LoadCase::new(vec![PointLoad {
            node: c.node,
            force: opts.unit,
            direction: opts.direction,
        }]);
        let disp = sys.solve(&lc)?;
        Ok(disp.extract_w(eval_nodes)?.into_iter().map(|w| w / opts.unit).collect())
    };
    let columns: Vec<Vec<f64>> = if opts.workers == 0 {
        candidates.par_iter().map(solve_column).collect::<Result<_>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.workers)
            .build()
            .map_err(|e| Error::Precondition(format!("cannot start {} workers: {e}", opts.workers)))?;
        pool.install(|| candidates.par_iter().map(solve_column).collect::<Result<_>>())?
    };

    let reused = candidates.iter().filter(|c| reusable.contains_key(&c.node)).count();
    let degenerate: Vec<usize> = (0..candidates.len())
        .filter(|&c| sys.is_constrained(candidates[c].node, Dof::W))
        .collect();
    for &c in &degenerate {
        log::warn!(
            "candidate node {} ({}) has w constrained; its column is zero",
            candidates[c].node,
            candidates[c].set.as_str()
        );
    }
    let mut matrix = ComplianceMatrix::new(
        opts.fingerprint.clone(),
        opts.unit,
        opts.direction,
        eval_nodes.to_vec(),
        candidates,
        columns.concat(),
    )?;
    matrix.degenerate = degenerate;
    Ok(SweepOutcome {
        solved: matrix.cols() - reused,
        reused,
        matrix,
    })
}
