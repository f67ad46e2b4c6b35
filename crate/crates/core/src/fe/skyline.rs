//! Symmetric profile (skyline) storage with an in-place Cholesky factorization.
//!
//! Row `i` stores the lower-triangle entries `a[i][first[i]..=i]` contiguously.
//! Fill-in during factorization stays inside the profile, so the factor reuses
//! the same layout.

/// Relative pivot threshold below which an equation counts as unconstrained.
pub const PIVOT_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Skyline {
    first: Vec<usize>,
    start: Vec<usize>,
    values: Vec<f64>,
}

impl Skyline {
    /// Empty matrix whose row `i` spans columns `first[i]..=i`.
    pub fn with_profile(first: Vec<usize>) -> Self {
        let mut start = Vec::with_capacity(first.len() + 1);
        let mut offset = 0;
        for (i, &f) in first.iter().enumerate() {
            assert!(f <= i, "profile start beyond diagonal in row {i}");
            start.push(offset);
            offset += i - f + 1;
        }
        start.push(offset);
        Self {
            first,
            start,
            values: vec![0.0; offset],
        }
    }

    pub fn dim(&self) -> usize {
        self.first.len()
    }

    pub fn stored(&self) -> usize {
        self.values.len()
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.values[self.start[i]..self.start[i + 1]]
    }

    /// Adds `v` to entry `(i, j)`; callers pass the lower triangle (`j <= i`).
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(j <= i && j >= self.first[i]);
        let idx = self.start[i] + (j - self.first[i]);
        self.values[idx] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if j > i { (j, i) } else { (i, j) };
        if j < self.first[i] {
            0.0
        } else {
            self.values[self.start[i] + (j - self.first[i])]
        }
    }

    pub fn diagonal(&self, i: usize) -> f64 {
        self.values[self.start[i + 1] - 1]
    }

    /// `y = A x` for the symmetric matrix.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        for i in 0..self.dim() {
            let f = self.first[i];
            let row = self.row(i);
            let (off, diag) = row.split_at(row.len() - 1);
            let mut acc = diag[0] * x[i];
            for (k, &a) in off.iter().enumerate() {
                acc += a * x[f + k];
                y[f + k] += a * x[i];
            }
            y[i] += acc;
        }
        y
    }

    /// Non-zero lower-triangle entries `(row, col, value)`.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.dim()).flat_map(move |i| {
            let f = self.first[i];
            self.row(i)
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(move |(k, &v)| (i, f + k, v))
        })
    }

    /// Factorizes in place into `L` with `A = L Lᵀ`.
    ///
    /// Pivots that collapse below [`PIVOT_TOLERANCE`] times the original
    /// diagonal are counted and replaced by a huge value so elimination can
    /// continue; the count is returned as `Err`.
    pub fn factorize(&mut self) -> Result<(), usize> {
        const DEFLATED: f64 = 1e150;
        let n = self.dim();
        let mut singular = 0;
        for i in 0..n {
            let fi = self.first[i];
            let si = self.start[i];
            for j in fi..i {
                let fj = self.first[j];
                let k0 = fi.max(fj);
                let sj = self.start[j];
                let mut dot = 0.0;
                for k in k0..j {
                    dot += self.values[si + (k - fi)] * self.values[sj + (k - fj)];
                }
                let ljj = self.values[sj + (j - fj)];
                let idx = si + (j - fi);
                self.values[idx] = (self.values[idx] - dot) / ljj;
            }
            let diag_idx = si + (i - fi);
            let original = self.values[diag_idx];
            let sq: f64 = self.values[si..diag_idx].iter().map(|v| v * v).sum();
            let pivot = original - sq;
            if !(pivot > PIVOT_TOLERANCE * original.abs()) || !pivot.is_finite() {
                singular += 1;
                self.values[diag_idx] = DEFLATED;
            } else {
                self.values[diag_idx] = pivot.sqrt();
            }
        }
        if singular > 0 {
            Err(singular)
        } else {
            Ok(())
        }
    }

    /// Solves `L Lᵀ x = b` in place; `self` must hold a factor.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            let f = self.first[i];
            let row = self.row(i);
            let (off, diag) = row.split_at(row.len() - 1);
            let dot: f64 = off.iter().zip(&b[f..i]).map(|(l, x)| l * x).sum();
            b[i] = (b[i] - dot) / diag[0];
        }
        for i in (0..n).rev() {
            let f = self.first[i];
            let row = self.row(i);
            let (off, diag) = row.split_at(row.len() - 1);
            b[i] /= diag[0];
            let xi = b[i];
            for (k, &l) in off.iter().enumerate() {
                b[f + k] -= l * xi;
            }
        }
    }
}
