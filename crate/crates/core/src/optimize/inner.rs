//! Three-amplitude bounded least squares.

use nalgebra::{DMatrix, SymmetricEigen};

use super::Bounds;
use crate::error::{Error, Result};

/// Normal-equation form of `min |F_0 c_0 + F_1 c_1 + F_2 c_2 - w|^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerProblem {
    /// `G[a][b] = c_a . c_b`.
    pub gram: [[f64; 3]; 3],
    /// `b[a] = c_a . w`.
    pub rhs: [f64; 3],
    /// `w . w`.
    pub ww: f64,
}

impl InnerProblem {
    pub fn from_columns(columns: [&[f64]; 3], target: &[f64]) -> Result<Self> {
        let n = target.len();
        if n < 3 {
            return Err(Error::Precondition(format!("need at least 3 target values, got {n}")));
        }
        if let Some(c) = columns.iter().find(|c| c.len() != n) {
            return Err(Error::Dimension(format!("column has {} rows, target has {n}", c.len())));
        }
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let mut gram = [[0.0; 3]; 3];
        for a in 0..3 {
            for b in a..3 {
                gram[a][b] = dot(columns[a], columns[b]);
                gram[b][a] = gram[a][b];
            }
        }
        Ok(Self {
            gram,
            rhs: columns.map(|c| dot(c, target)),
            ww: dot(target, target),
        })
    }

    /// Residual sum of squares from the normal-equation form, clipped at 0.
    pub fn sse(&self, f: &[f64; 3]) -> f64 {
        let mut quad = 0.0;
        for a in 0..3 {
            for b in 0..3 {
                quad += f[a] * self.gram[a][b] * f[b];
            }
        }
        let lin: f64 = (0..3).map(|a| self.rhs[a] * f[a]).sum();
        (self.ww - 2.0 * lin + quad).max(0.0)
    }

    /// Gradient of the SSE, `2 (G F - b)`.
    pub fn gradient(&self, f: &[f64; 3]) -> [f64; 3] {
        std::array::from_fn(|a| 2.0 * ((0..3).map(|b| self.gram[a][b] * f[b]).sum::<f64>() - self.rhs[a]))
    }
}

/// Exact residual sum of squares of an amplitude triple.
pub fn residual_sse(columns: [&[f64]; 3], target: &[f64], f: &[f64; 3]) -> f64 {
    target
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            let r = f[0] * columns[0][i] + f[1] * columns[1][i] + f[2] * columns[2][i] - w;
            r * r
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerSolution {
    pub forces: [f64; 3],
    pub sse: f64,
    /// The minimizer is not unique (dependent columns along a free direction).
    pub non_unique: bool,
    pub converged: bool,
    pub iterations: usize,
}

/// Inner amplitude solver for a fixed node triple.
pub trait InnerSolver: Send + Sync {
    fn name(&self) -> &'static str;
    fn solve(&self, problem: &InnerProblem, bounds: &Bounds) -> InnerSolution;
}

/// Relative pivot size below which a free block counts as singular.
const RANK_TOL: f64 = 1e-12;

#[derive(Clone, Copy, PartialEq)]
enum State {
    Free,
    Lower,
    Upper,
}

/// Exact solver: the minimum of a convex quadratic over a box lies in the
/// relative interior of one of its 27 faces, where it is the unconstrained
/// minimizer over the free variables. Every face is tried and the best
/// feasible point kept; the all-free face is tried first and accepted
/// directly when feasible.
#[derive(Debug, Clone, Copy, Default)]
pub struct ActiveSet;

impl ActiveSet {
    fn face(problem: &InnerProblem, bounds: &Bounds, states: [State; 3]) -> Option<([f64; 3], bool)> {
        let mut f = [0.0; 3];
        let mut free = Vec::with_capacity(3);
        for a in 0..3 {
            match states[a] {
                State::Free => free.push(a),
                State::Lower => f[a] = bounds.lower,
                State::Upper => f[a] = bounds.upper,
            }
        }
        if free.is_empty() {
            return Some((f, false));
        }
        let k = free.len();
        let mut m = [[0.0; 3]; 3];
        let mut r = [0.0; 3];
        for (p, &a) in free.iter().enumerate() {
            r[p] = problem.rhs[a];
            for b in 0..3 {
                match states[b] {
                    State::Free => {}
                    _ => r[p] -= problem.gram[a][b] * f[b],
                }
            }
            for (q, &b) in free.iter().enumerate() {
                m[p][q] = problem.gram[a][b];
            }
        }
        let (x, singular) = solve_small(k, &m, &r);
        let span = bounds.upper - bounds.lower;
        let slack = 1e-12 * span;
        for (p, &a) in free.iter().enumerate() {
            if !(x[p] >= bounds.lower - slack && x[p] <= bounds.upper + slack) {
                return None;
            }
            f[a] = x[p].clamp(bounds.lower, bounds.upper);
        }
        Some((f, singular))
    }
}

impl InnerSolver for ActiveSet {
    fn name(&self) -> &'static str {
        "exact"
    }

    fn solve(&self, problem: &InnerProblem, bounds: &Bounds) -> InnerSolution {
        let all_free = [State::Free; 3];
        if let Some((f, false)) = Self::face(problem, bounds, all_free) {
            return InnerSolution {
                forces: f,
                sse: problem.sse(&f),
                non_unique: false,
                converged: true,
                iterations: 1,
            };
        }
        let states = [State::Free, State::Lower, State::Upper];
        let mut best: Option<([f64; 3], f64, bool)> = None;
        let mut tried = 0;
        for s0 in states {
            for s1 in states {
                for s2 in states {
                    tried += 1;
                    let Some((f, singular)) = Self::face(problem, bounds, [s0, s1, s2]) else {
                        continue;
                    };
                    let sse = problem.sse(&f);
                    if best.is_none_or(|(_, b, _)| sse < b) {
                        best = Some((f, sse, singular));
                    }
                }
            }
        }
        // The vertex faces are always feasible.
        let (forces, sse, non_unique) = best.expect("box vertices are feasible");
        InnerSolution {
            forces,
            sse,
            non_unique,
            converged: true,
            iterations: tried,
        }
    }
}

/// Solves the leading `k x k` block of `m x = r`; singular blocks get the
/// minimum-norm least-squares solution.
fn solve_small(k: usize, m: &[[f64; 3]; 3], r: &[f64; 3]) -> ([f64; 3], bool) {
    let scale = (0..k).map(|i| m[i][i].abs()).fold(0.0, f64::max);
    // Cholesky with a relative pivot test.
    let mut l = [[0.0; 3]; 3];
    let mut ok = scale > 0.0;
    'outer: for i in 0..k {
        for j in 0..=i {
            let mut s = m[i][j];
            for p in 0..j {
                s -= l[i][p] * l[j][p];
            }
            if i == j {
                if !ok || s <= RANK_TOL * scale {
                    ok = false;
                    break 'outer;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    if ok {
        let mut y = [0.0; 3];
        for i in 0..k {
            let s: f64 = (0..i).map(|p| l[i][p] * y[p]).sum();
            y[i] = (r[i] - s) / l[i][i];
        }
        let mut x = [0.0; 3];
        for i in (0..k).rev() {
            let s: f64 = (i + 1..k).map(|p| l[p][i] * x[p]).sum();
            x[i] = (y[i] - s) / l[i][i];
        }
        return (x, false);
    }
    let mat = DMatrix::from_fn(k, k, |i, j| m[i][j]);
    let eig = SymmetricEigen::new(mat);
    let lmax = eig.eigenvalues.iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
    let mut x = [0.0; 3];
    for (e, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda.abs() <= RANK_TOL * lmax || lambda == 0.0 {
            continue;
        }
        let v = eig.eigenvectors.column(e);
        let proj: f64 = (0..k).map(|i| v[i] * r[i]).sum::<f64>() / lambda;
        for i in 0..k {
            x[i] += proj * v[i];
        }
    }
    (x, true)
}

/// Derivative-free simplex search with a sine transform onto the box.
#[derive(Debug, Clone, Copy)]
pub struct NelderMead {
    /// Start point; the box centre when `None`.
    pub start: Option<[f64; 3]>,
    /// Simplex diameter tolerance [N].
    pub tol_x: f64,
    /// Relative tolerance on the spread of objective values.
    pub tol_f: f64,
    pub max_iterations: usize,
    pub max_restarts: usize,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self {
            start: None,
            tol_x: 1e-6,
            tol_f: 1e-10,
            max_iterations: 20_000,
            max_restarts: 20,
        }
    }
}

impl NelderMead {
    fn to_box(z: &[f64; 3], bounds: &Bounds) -> [f64; 3] {
        let span = bounds.upper - bounds.lower;
        z.map(|zi| (bounds.lower + span * (zi.sin() + 1.0) / 2.0).clamp(bounds.lower, bounds.upper))
    }

    fn from_box(x: &[f64; 3], bounds: &Bounds) -> [f64; 3] {
        let span = bounds.upper - bounds.lower;
        x.map(|xi| {
            let s = (2.0 * (xi - bounds.lower) / span - 1.0).clamp(-1.0, 1.0);
            2.0 * std::f64::consts::PI + s.asin()
        })
    }

    fn initial_simplex(z0: [f64; 3]) -> Vec<[f64; 3]> {
        let mut simplex = vec![z0];
        for i in 0..3 {
            let mut z = z0;
            z[i] = if z[i] != 0.0 { 1.05 * z[i] } else { 0.00025 };
            simplex.push(z);
        }
        simplex
    }

    /// One simplex run; returns the best point and whether the tolerances
    /// were met before `budget` iterations ran out.
    fn run(
        &self,
        objective: &dyn Fn(&[f64; 3]) -> f64,
        bounds: &Bounds,
        z0: [f64; 3],
        budget: usize,
    ) -> ([f64; 3], f64, usize, bool) {
        let mut pts = Self::initial_simplex(z0);
        let mut vals: Vec<f64> = pts.iter().map(objective).collect();
        let mut iterations = 0;
        loop {
            let mut order: Vec<usize> = (0..4).collect();
            order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
            pts = order.iter().map(|&i| pts[i]).collect();
            vals = order.iter().map(|&i| vals[i]).collect();

            let best_x = Self::to_box(&pts[0], bounds);
            let diameter = pts[1..]
                .iter()
                .map(|z| {
                    let x = Self::to_box(z, bounds);
                    (0..3).map(|a| (x[a] - best_x[a]).abs()).fold(0.0, f64::max)
                })
                .fold(0.0, f64::max);
            let spread = vals[3] - vals[0];
            let f_tol = self.tol_f * vals[0].abs().max(f64::MIN_POSITIVE);
            if diameter <= self.tol_x && spread <= f_tol {
                return (pts[0], vals[0], iterations, true);
            }
            if iterations >= budget {
                return (pts[0], vals[0], iterations, false);
            }
            iterations += 1;

            let centroid: [f64; 3] = std::array::from_fn(|a| (pts[0][a] + pts[1][a] + pts[2][a]) / 3.0);
            let along = |t: f64| -> [f64; 3] { std::array::from_fn(|a| centroid[a] + t * (pts[3][a] - centroid[a])) };
            let xr = along(-1.0);
            let fr = objective(&xr);
            if fr < vals[0] {
                let xe = along(-2.0);
                let fe = objective(&xe);
                if fe < fr {
                    pts[3] = xe;
                    vals[3] = fe;
                } else {
                    pts[3] = xr;
                    vals[3] = fr;
                }
                continue;
            }
            if fr < vals[2] {
                pts[3] = xr;
                vals[3] = fr;
                continue;
            }
            let (xc, fc) = if fr < vals[3] {
                let x = along(-0.5);
                (x, objective(&x))
            } else {
                let x = along(0.5);
                (x, objective(&x))
            };
            if fc < fr.min(vals[3]) {
                pts[3] = xc;
                vals[3] = fc;
                continue;
            }
            for i in 1..4 {
                pts[i] = std::array::from_fn(|a| pts[0][a] + 0.5 * (pts[i][a] - pts[0][a]));
                vals[i] = objective(&pts[i]);
            }
        }
    }
}

impl InnerSolver for NelderMead {
    fn name(&self) -> &'static str {
        "simplex"
    }

    fn solve(&self, problem: &InnerProblem, bounds: &Bounds) -> InnerSolution {
        let objective = |z: &[f64; 3]| problem.sse(&Self::to_box(z, bounds));
        let start = self.start.unwrap_or([0.5 * (bounds.lower + bounds.upper); 3]);
        let mut z = Self::from_box(&start, bounds);
        let mut f = objective(&z);
        let mut used = 0;
        let mut converged = false;
        for _ in 0..=self.max_restarts {
            let (z_new, f_new, it, met) = self.run(&objective, bounds, z, self.max_iterations - used);
            used += it;
            let moved = {
                let (a, b) = (Self::to_box(&z, bounds), Self::to_box(&z_new, bounds));
                (0..3).map(|i| (a[i] - b[i]).abs()).fold(0.0, f64::max)
            };
            let gain = f - f_new;
            let settled = gain <= self.tol_f * f_new.abs().max(f64::MIN_POSITIVE) && moved <= self.tol_x;
            if f_new <= f {
                z = z_new;
                f = f_new;
            }
            if !met {
                converged = false;
                break;
            }
            converged = true;
            if settled {
                break;
            }
        }
        let forces = Self::to_box(&z, bounds);
        InnerSolution {
            forces,
            sse: problem.sse(&forces),
            non_unique: false,
            converged,
            iterations: used,
        }
    }
}
