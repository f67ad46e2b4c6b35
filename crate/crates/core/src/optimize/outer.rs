//! Search over node triples `(j, k, l)`.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::inner::{InnerProblem, InnerSolver};
use super::Bounds;

/// Precomputed normal equations for every candidate column.
pub struct SearchProblem<'a> {
    /// `m x m`, row-major.
    pub gram: Vec<f64>,
    pub rhs: Vec<f64>,
    pub ww: f64,
    /// Column indices of J, K and L.
    pub sets: [Vec<usize>; 3],
    /// Node id of every column.
    pub nodes: Vec<usize>,
    pub bounds: Bounds,
    pub inner: &'a dyn InnerSolver,
    pub tie_rtol: f64,
    pub top_n: usize,
    pub seed: u64,
    pub restarts: usize,
    /// Coordinate descent is compared with exhaustive search up to this many triples.
    pub gap_limit: usize,
}

/// Inner solution for one triple together with its outer objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    /// Column indices.
    pub cols: [usize; 3],
    pub nodes: [usize; 3],
    pub forces: [f64; 3],
    pub sse: f64,
    /// `(F_j + F_k + F_l) * SSE`.
    pub objective: f64,
    /// Objective used for ranking: fits with every amplitude at zero rank last,
    /// since their weighted objective is zero whatever the residual.
    pub rank_objective: f64,
    pub non_unique: bool,
    pub converged: bool,
}

impl Evaluation {
    /// Strict total order: objective, then SSE, then node ids.
    pub fn exact_cmp(&self, other: &Self) -> Ordering {
        self.rank_objective
            .total_cmp(&other.rank_objective)
            .then(self.sse.total_cmp(&other.sse))
            .then(self.nodes.cmp(&other.nodes))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub exhaustive_nodes: [usize; 3],
    pub exhaustive_objective: f64,
    /// `(objective - exhaustive) / |exhaustive|`; zero when both are zero.
    pub relative_gap: f64,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub best: Evaluation,
    /// Best triples in [`Evaluation::exact_cmp`] order.
    pub top: Vec<Evaluation>,
    pub evaluated: u64,
    /// Every triple fits with zero amplitudes (or the target is zero).
    pub degenerate: bool,
    pub gap: Option<GapReport>,
}

pub trait OuterStrategy: Send + Sync {
    fn name(&self) -> &'static str;
    fn search(&self, problem: &SearchProblem) -> SearchOutcome;
}

impl SearchProblem<'_> {
    pub fn columns(&self) -> usize {
        self.nodes.len()
    }

    pub fn triple_count(&self) -> u64 {
        self.sets.iter().map(|s| s.len() as u64).product()
    }

    fn zero_threshold(&self) -> f64 {
        1e-6 * self.bounds.upper
    }

    pub fn evaluate(&self, cols: [usize; 3]) -> Evaluation {
        let m = self.columns();
        let problem = InnerProblem {
            gram: std::array::from_fn(|a| std::array::from_fn(|b| self.gram[cols[a] * m + cols[b]])),
            rhs: cols.map(|c| self.rhs[c]),
            ww: self.ww,
        };
        let s = self.inner.solve(&problem, &self.bounds);
        let objective = s.forces.iter().sum::<f64>() * s.sse;
        let zero_fit = s.forces.iter().all(|&f| f < self.zero_threshold());
        Evaluation {
            cols,
            nodes: cols.map(|c| self.nodes[c]),
            forces: s.forces,
            sse: s.sse,
            objective,
            rank_objective: if zero_fit && self.ww > 0.0 { f64::INFINITY } else { objective },
            non_unique: s.non_unique,
            converged: s.converged,
        }
    }

    /// Objectives closer than this are treated as equal.
    pub fn objective_tie(&self) -> f64 {
        self.tie_rtol * 3.0 * self.bounds.upper * self.ww
    }

    /// SSE values closer than this are treated as equal.
    pub fn sse_tie(&self) -> f64 {
        self.tie_rtol * self.ww
    }

    /// Lowest objective; among near-equal objectives the lowest SSE; among
    /// near-equal SSE the lowest node-id tuple.
    pub fn select(&self, evals: &[Evaluation]) -> Evaluation {
        let min_obj = evals.iter().map(|e| e.rank_objective).fold(f64::INFINITY, f64::min);
        let tied: Vec<&Evaluation> = evals
            .iter()
            .filter(|e| e.rank_objective == min_obj || e.rank_objective <= min_obj + self.objective_tie())
            .collect();
        let min_sse = tied.iter().map(|e| e.sse).fold(f64::INFINITY, f64::min);
        **tied
            .iter()
            .filter(|e| e.sse <= min_sse + self.sse_tie())
            .min_by(|a, b| a.nodes.cmp(&b.nodes))
            .expect("at least one evaluation")
    }

    fn merge_top(&self, mut a: Vec<Evaluation>, b: Vec<Evaluation>) -> Vec<Evaluation> {
        a.extend(b);
        a.sort_by(|x, y| x.exact_cmp(y));
        a.truncate(self.top_n);
        a
    }
}

/// Every triple of `J x K x L`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Exhaustive;

impl OuterStrategy for Exhaustive {
    fn name(&self) -> &'static str {
        "exhaustive"
    }

    fn search(&self, p: &SearchProblem) -> SearchOutcome {
        let [js, ks, ls] = &p.sets;
        let per_j = |&j: &usize| -> (f64, Vec<Evaluation>) {
            let mut min = f64::INFINITY;
            let mut top = Vec::new();
            for &k in ks {
                for &l in ls {
                    let e = p.evaluate([j, k, l]);
                    min = min.min(e.rank_objective);
                    top.push(e);
                    if top.len() > 4 * p.top_n.max(1) {
                        top = p.merge_top(top, Vec::new());
                    }
                }
            }
            (min, p.merge_top(top, Vec::new()))
        };
        let (min_obj, top) = js
            .par_iter()
            .map(per_j)
            .reduce(|| (f64::INFINITY, Vec::new()), |a, b| (a.0.min(b.0), p.merge_top(a.1, b.1)));

        // Second pass: collect everything that ties with the minimum.
        let limit = min_obj + p.objective_tie();
        let tied: Vec<Evaluation> = js
            .par_iter()
            .flat_map_iter(|&j| {
                ks.iter()
                    .flat_map(move |&k| ls.iter().map(move |&l| p.evaluate([j, k, l])))
                    .filter(move |e| e.rank_objective == min_obj || e.rank_objective <= limit)
            })
            .collect();
        let best = if tied.is_empty() {
            // Only reachable when every triple is a zero fit.
            p.select(&top)
        } else {
            p.select(&tied)
        };
        SearchOutcome {
            best,
            top,
            evaluated: 2 * p.triple_count(),
            degenerate: p.ww == 0.0 || min_obj == f64::INFINITY,
            gap: None,
        }
    }
}

/// Cyclic search over one set at a time, from a fixed start plus seeded
/// random restarts.
#[derive(Debug, Clone, Copy, Default)]
pub struct CoordinateDescent;

impl CoordinateDescent {
    fn descend(p: &SearchProblem, start: [usize; 3], evaluated: &mut u64) -> (Evaluation, Vec<Evaluation>) {
        let mut current = p.evaluate(start);
        let mut seen = vec![current];
        *evaluated += 1;
        for _sweep in 0..1000 {
            let mut changed = false;
            for s in 0..3 {
                let scan: Vec<Evaluation> = p.sets[s]
                    .par_iter()
                    .map(|&c| {
                        let mut cols = current.cols;
                        cols[s] = c;
                        p.evaluate(cols)
                    })
                    .collect();
                *evaluated += scan.len() as u64;
                let best = p.select(&scan);
                seen = p.merge_top(seen, scan);
                if best.cols != current.cols {
                    current = best;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        (current, seen)
    }
}

impl OuterStrategy for CoordinateDescent {
    fn name(&self) -> &'static str {
        "coordinate-descent"
    }

    fn search(&self, p: &SearchProblem) -> SearchOutcome {
        let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
        let mut starts = vec![[p.sets[0][0], p.sets[1][0], p.sets[2][0]]];
        for _ in 0..p.restarts {
            starts.push(std::array::from_fn(|s| p.sets[s][rng.random_range(0..p.sets[s].len())]));
        }
        let mut evaluated = 0;
        let mut finals = Vec::new();
        let mut top = Vec::new();
        for start in starts {
            let (best, seen) = Self::descend(p, start, &mut evaluated);
            finals.push(best);
            top = p.merge_top(top, seen);
        }
        let best = p.select(&finals);
        let gap = (p.triple_count() <= p.gap_limit as u64).then(|| {
            let ex = Exhaustive.search(p).best;
            let relative_gap = if best.objective == ex.objective {
                0.0
            } else {
                (best.objective - ex.objective) / ex.objective.abs().max(f64::MIN_POSITIVE)
            };
            log::info!(
                "coordinate descent objective {} vs exhaustive {} (relative gap {relative_gap:e})",
                best.objective,
                ex.objective
            );
            GapReport {
                exhaustive_nodes: ex.nodes,
                exhaustive_objective: ex.objective,
                relative_gap,
            }
        });
        if gap.is_none() {
            log::info!("coordinate descent: {} triples exceed the gap-check limit; no optimality gap computed", p.triple_count());
        }
        SearchOutcome {
            best,
            top,
            evaluated,
            degenerate: p.ww == 0.0 || best.rank_objective == f64::INFINITY,
            gap,
        }
    }
}
