//! Placement of three concentrated loads.
//!
//! For every node triple `(j, k, l)` from the sets J, K, L the amplitudes are
//! fitted by bounded least squares against the target deflections; the
//! triple minimizing `(F_j + F_k + F_l) * SSE` wins.
//!
//! Inner solvers and outer strategies are looked up by name in a
//! [`Registry`], so that front ends can select them at run time.

pub mod inner;
pub mod outer;
pub mod scale;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::compliance::ComplianceMatrix;
use crate::error::{Error, Result};
use crate::fe::LoadCase;
use crate::model::{Mesh, SetLabel};

pub use inner::{residual_sse, ActiveSet, InnerProblem, InnerSolution, InnerSolver, NelderMead};
pub use outer::{CoordinateDescent, Evaluation, Exhaustive, GapReport, OuterStrategy, SearchOutcome, SearchProblem};
pub use scale::{scale_to_allowable, ScaledLoads};

/// Amplitude box `[lower, upper]` [N], shared by all three loads.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: f64,
    pub upper: f64,
}

impl Default for Bounds {
    fn default() -> Self {
        Self {
            lower: 0.0,
            upper: 5000.0,
        }
    }
}

impl Bounds {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        let b = Self { lower, upper };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lower >= 0.0 && self.lower < self.upper && self.upper.is_finite()) {
            return Err(Error::Precondition(format!(
                "amplitude bounds must satisfy 0 <= lower < upper < inf, got [{}, {}]",
                self.lower, self.upper
            )));
        }
        Ok(())
    }
}

/// Bounded least squares over three columns with the exact solver.
pub fn inner_solve(columns: [&[f64]; 3], target: &[f64], bounds: &Bounds) -> Result<InnerSolution> {
    solve_with(&ActiveSet, columns, target, bounds)
}

/// Same problem with the simplex solver.
pub fn inner_solve_simplex(columns: [&[f64]; 3], target: &[f64], bounds: &Bounds) -> Result<InnerSolution> {
    solve_with(&NelderMead::default(), columns, target, bounds)
}

fn solve_with(solver: &dyn InnerSolver, columns: [&[f64]; 3], target: &[f64], bounds: &Bounds) -> Result<InnerSolution> {
    bounds.validate()?;
    let problem = InnerProblem::from_columns(columns, target)?;
    let mut s = solver.solve(&problem, bounds);
    s.sse = residual_sse(columns, target, &s.forces);
    Ok(s)
}

pub type InnerFactory = fn(&OptimizeOptions) -> Box<dyn InnerSolver>;
pub type OuterFactory = fn(&OptimizeOptions) -> Box<dyn OuterStrategy>;

/// Named inner solvers and outer strategies.
#[derive(Clone)]
pub struct Registry {
    inner: BTreeMap<String, InnerFactory>,
    outer: BTreeMap<String, OuterFactory>,
}

impl Default for Registry {
    fn default() -> Self {
        let mut r = Self {
            inner: BTreeMap::new(),
            outer: BTreeMap::new(),
        };
        r.register_inner("exact", |_| Box::new(ActiveSet));
        r.register_inner("simplex", |o| {
            Box::new(NelderMead {
                start: o.simplex_start,
                ..NelderMead::default()
            })
        });
        r.register_outer("exhaustive", |_| Box::new(Exhaustive));
        r.register_outer("coordinate-descent", |_| Box::new(CoordinateDescent));
        r
    }
}

impl Registry {
    pub fn register_inner(&mut self, name: &str, factory: InnerFactory) {
        self.inner.insert(name.to_string(), factory);
    }

    pub fn register_outer(&mut self, name: &str, factory: OuterFactory) {
        self.outer.insert(name.to_string(), factory);
    }

    pub fn inner_names(&self) -> Vec<&str> {
        self.inner.keys().map(String::as_str).collect()
    }

    pub fn outer_names(&self) -> Vec<&str> {
        self.outer.keys().map(String::as_str).collect()
    }

    pub fn inner(&self, name: &str, opts: &OptimizeOptions) -> Result<Box<dyn InnerSolver>> {
        self.inner.get(name).map(|f| f(opts)).ok_or_else(|| Error::Unknown {
            kind: "inner solver",
            id: format!("{name} (available: {})", self.inner_names().join(", ")),
        })
    }

    pub fn outer(&self, name: &str, opts: &OptimizeOptions) -> Result<Box<dyn OuterStrategy>> {
        self.outer.get(name).map(|f| f(opts)).ok_or_else(|| Error::Unknown {
            kind: "search strategy",
            id: format!("{name} (available: {})", self.outer_names().join(", ")),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizeOptions {
    pub bounds: Bounds,
    pub strategy: String,
    pub solver: String,
    /// Number of ranked triples kept for the report.
    pub top_n: usize,
    pub tie_rtol: f64,
    pub seed: u64,
    /// Random restarts of coordinate descent.
    pub restarts: usize,
    /// Coordinate descent is checked against exhaustive search up to this many triples.
    pub gap_limit: usize,
    /// 0 uses all cores.
    pub workers: usize,
    pub simplex_start: Option<[f64; 3]>,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self {
            bounds: Bounds::default(),
            strategy: "exhaustive".into(),
            solver: "exact".into(),
            top_n: 10,
            tie_rtol: 1e-10,
            seed: 0,
            restarts: 4,
            gap_limit: 1000,
            workers: 0,
            simplex_start: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadPoint {
    pub set: SetLabel,
    pub node: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<f64>,
    /// Amplitude [N], acting in the sweep's load direction.
    pub force: f64,
    /// Below the reporting threshold `1e-6 * upper`.
    pub zero: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedTriple {
    pub rank: usize,
    pub nodes: [usize; 3],
    pub forces: [f64; 3],
    pub sse: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub loads: [LoadPoint; 3],
    /// Residual sum of squares [mm^2], recomputed from the residual vector.
    pub sse: f64,
    /// `(F_j + F_k + F_l) * sse` [N mm^2].
    pub objective: f64,
    pub strategy: String,
    pub solver: String,
    pub bounds: Bounds,
    pub eval_rows: usize,
    pub triples: u64,
    /// Inner solves performed, repeats included.
    pub evaluated: u64,
    /// All-zero target, or no triple fits with a non-zero amplitude.
    pub degenerate: bool,
    pub non_unique: bool,
    pub converged: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap: Option<GapReport>,
    /// Rank 1 is the selected triple; the rest follow by objective, SSE and node ids.
    pub diagnostics: Vec<RankedTriple>,
    pub fingerprint: String,
}

impl OptimizationResult {
    pub fn nodes(&self) -> [usize; 3] {
        self.loads.each_ref().map(|l| l.node)
    }

    pub fn forces(&self) -> [f64; 3] {
        self.loads.each_ref().map(|l| l.force)
    }

    /// Adds node coordinates.
    pub fn locate(&mut self, mesh: &Mesh) {
        for l in &mut self.loads {
            let (x, y) = mesh.node_xy(l.node);
            l.x = Some(x);
            l.y = Some(y);
        }
    }

    /// The optimized loads as a load case (zero amplitudes included).
    pub fn load_case(&self, direction: crate::fe::LoadDirection) -> LoadCase {
        let mut lc = LoadCase::new(
            self.loads
                .iter()
                .map(|l| crate::fe::PointLoad {
                    node: l.node,
                    force: l.force,
                    direction,
                })
                .collect(),
        );
        lc.description = "optimized loads".into();
        lc
    }
}

/// Gram matrix and right-hand side of all candidate columns.
fn normal_equations(zeta: &ComplianceMatrix, target: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let m = zeta.cols();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let upper: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|a| (a..m).map(|b| dot(zeta.column(a), zeta.column(b))).collect())
        .collect();
    let mut gram = vec![0.0; m * m];
    for (a, row) in upper.iter().enumerate() {
        for (off, &v) in row.iter().enumerate() {
            gram[a * m + a + off] = v;
            gram[(a + off) * m + a] = v;
        }
    }
    let rhs = (0..m).into_par_iter().map(|a| dot(zeta.column(a), target)).collect();
    (gram, rhs)
}

/// Searches the node triple and amplitudes that best reproduce `target`.
pub fn outer_search(zeta: &ComplianceMatrix, target: &[f64], opts: &OptimizeOptions) -> Result<OptimizationResult> {
    outer_search_with(&Registry::default(), zeta, target, opts)
}

pub fn outer_search_with(
    registry: &Registry,
    zeta: &ComplianceMatrix,
    target: &[f64],
    opts: &OptimizeOptions,
) -> Result<OptimizationResult> {
    opts.bounds.validate()?;
    if !(opts.tie_rtol >= 0.0 && opts.tie_rtol.is_finite()) {
        return Err(Error::Precondition(format!("tie_rtol must be >= 0, got {}", opts.tie_rtol)));
    }
    let inner = registry.inner(&opts.solver, opts)?;
    let strategy = registry.outer(&opts.strategy, opts)?;
    if target.len() != zeta.rows() {
        return Err(Error::Dimension(format!(
            "target has {} values, compliance matrix has {} rows",
            target.len(),
            zeta.rows()
        )));
    }
    if zeta.rows() < 3 {
        return Err(Error::Precondition(format!("need at least 3 evaluation rows, got {}", zeta.rows())));
    }
    if let Some(i) = target.iter().position(|v| !v.is_finite()) {
        return Err(Error::Precondition(format!("target value {i} is not finite")));
    }
    let sets: [Vec<usize>; 3] = SetLabel::ALL.map(|s| zeta.set_columns(s));
    for (label, cols) in SetLabel::ALL.iter().zip(&sets) {
        if cols.is_empty() {
            return Err(Error::NodeSet {
                set: label.as_str().into(),
                reason: "no candidate columns".into(),
            });
        }
    }

    let run = || -> Result<OptimizationResult> {
        let (gram, rhs) = normal_equations(zeta, target);
        let problem = SearchProblem {
            gram,
            rhs,
            ww: target.iter().map(|w| w * w).sum(),
            sets,
            nodes: zeta.candidates.iter().map(|c| c.node).collect(),
            bounds: opts.bounds,
            inner: inner.as_ref(),
            tie_rtol: opts.tie_rtol,
            top_n: opts.top_n,
            seed: opts.seed,
            restarts: opts.restarts,
            gap_limit: opts.gap_limit,
        };
        let outcome = if problem.ww == 0.0 {
            let lowest = [0, 1, 2].map(|s| problem.sets[s][0]);
            let e = problem.evaluate(lowest);
            SearchOutcome {
                best: e,
                top: vec![e],
                evaluated: 1,
                degenerate: true,
                gap: None,
            }
        } else {
            strategy.search(&problem)
        };
        Ok(finish(zeta, target, opts, &problem, outcome, strategy.name(), inner.name()))
    };
    if opts.workers == 0 {
        run()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(opts.workers)
            .build()
            .map_err(|e| Error::Precondition(format!("cannot start {} workers: {e}", opts.workers)))?
            .install(run)
    }
}

fn finish(
    zeta: &ComplianceMatrix,
    target: &[f64],
    opts: &OptimizeOptions,
    problem: &SearchProblem,
    outcome: SearchOutcome,
    strategy: &str,
    solver: &str,
) -> OptimizationResult {
    let best = outcome.best;
    let cols = best.cols.map(|c| zeta.column(c));
    let sse = residual_sse(cols, target, &best.forces);
    let objective = best.forces.iter().sum::<f64>() * sse;
    let zero_threshold = 1e-6 * opts.bounds.upper;
    let loads = [0, 1, 2].map(|a| {
        let c = zeta.candidates[best.cols[a]];
        LoadPoint {
            set: c.set,
            node: c.node,
            x: None,
            y: None,
            force: best.forces[a],
            zero: best.forces[a] < zero_threshold,
        }
    });
    let mut diagnostics = vec![RankedTriple {
        rank: 1,
        nodes: best.nodes,
        forces: best.forces,
        sse,
        objective,
    }];
    for e in outcome.top.iter().filter(|e| e.cols != best.cols) {
        if diagnostics.len() >= opts.top_n.max(1) {
            break;
        }
        diagnostics.push(RankedTriple {
            rank: diagnostics.len() + 1,
            nodes: e.nodes,
            forces: e.forces,
            sse: e.sse,
            objective: e.objective,
        });
    }
    OptimizationResult {
        loads,
        sse,
        objective,
        strategy: strategy.to_string(),
        solver: solver.to_string(),
        bounds: opts.bounds,
        eval_rows: zeta.rows(),
        triples: problem.triple_count(),
        evaluated: outcome.evaluated,
        degenerate: outcome.degenerate,
        non_unique: best.non_unique,
        converged: best.converged,
        gap: outcome.gap,
        diagnostics,
        fingerprint: zeta.fingerprint.clone(),
    }
}
