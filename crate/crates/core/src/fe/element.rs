//! Four-node rectangular shear-deformable plate element with membrane coupling.
//!
//! Node-local DOFs are `[u, v, w, rx, ry]`. Section rotations follow
//! `βx = ry`, `βy = -rx`, so that `u(z) = u + z βx` and `v(z) = v + z βy`.
//!
//! Membrane and bending terms use 2x2 Gauss integration. Transverse shear is
//! sampled at the edge midpoints (γxz on the edges η = ±1, γyz on ξ = ±1) and
//! interpolated linearly across the element. On rectangles this matches
//! integrating γxz with a 1x2 and γyz with a 2x1 rule, which removes shear
//! locking without the hourglass mode of one-point shear integration.

use crate::model::ShellStiffness;

pub const NODE_DOFS: usize = 5;
pub const ELEMENT_DOFS: usize = 4 * NODE_DOFS;

const NODE_XI: [f64; 4] = [-1.0, 1.0, 1.0, -1.0];
const NODE_ETA: [f64; 4] = [-1.0, -1.0, 1.0, 1.0];

pub const GAUSS: f64 = 0.577_350_269_189_625_8;

/// 2x2 Gauss points, ordered like the element corners.
pub const GAUSS_POINTS: [(f64, f64); 4] = [(-GAUSS, -GAUSS), (GAUSS, -GAUSS), (GAUSS, GAUSS), (-GAUSS, GAUSS)];

const U: usize = 0;
const V: usize = 1;
const W: usize = 2;
const RX: usize = 3;
const RY: usize = 4;

pub type ElementMatrix = [[f64; ELEMENT_DOFS]; ELEMENT_DOFS];
pub type ElementVector = [f64; ELEMENT_DOFS];

#[derive(Debug, Clone, Copy)]
pub struct RectElement {
    /// Side lengths along x and y [mm].
    pub a: f64,
    pub b: f64,
}

fn shape(xi: f64, eta: f64) -> [f64; 4] {
    std::array::from_fn(|i| 0.25 * (1.0 + xi * NODE_XI[i]) * (1.0 + eta * NODE_ETA[i]))
}

impl RectElement {
    pub fn square(size: f64) -> Self {
        Self { a: size, b: size }
    }

    fn derivatives(&self, xi: f64, eta: f64) -> ([f64; 4], [f64; 4]) {
        let dx = std::array::from_fn(|i| 0.25 * NODE_XI[i] * (1.0 + eta * NODE_ETA[i]) * 2.0 / self.a);
        let dy = std::array::from_fn(|i| 0.25 * NODE_ETA[i] * (1.0 + xi * NODE_XI[i]) * 2.0 / self.b);
        (dx, dy)
    }

    /// Rows mapping element DOFs to `[ε0xx, ε0yy, γ0xy, κxx, κyy, κxy]`.
    pub fn membrane_bending_rows(&self, xi: f64, eta: f64) -> [ElementVector; 6] {
        let (dx, dy) = self.derivatives(xi, eta);
        let mut rows = [[0.0; ELEMENT_DOFS]; 6];
        for i in 0..4 {
            let o = i * NODE_DOFS;
            rows[0][o + U] = dx[i];
            rows[1][o + V] = dy[i];
            rows[2][o + U] = dy[i];
            rows[2][o + V] = dx[i];
            rows[3][o + RY] = dx[i];
            rows[4][o + RX] = -dy[i];
            rows[5][o + RY] = dy[i];
            rows[5][o + RX] = -dx[i];
        }
        rows
    }

    /// Directly evaluated `[γxz, γyz]` rows at `(xi, eta)`.
    fn raw_shear_rows(&self, xi: f64, eta: f64) -> [ElementVector; 2] {
        let (dx, dy) = self.derivatives(xi, eta);
        let n = shape(xi, eta);
        let mut rows = [[0.0; ELEMENT_DOFS]; 2];
        for i in 0..4 {
            let o = i * NODE_DOFS;
            rows[0][o + W] = dx[i];
            rows[0][o + RY] = n[i];
            rows[1][o + W] = dy[i];
            rows[1][o + RX] = -n[i];
        }
        rows
    }

    /// Assumed transverse shear rows interpolated from the edge tying points.
    pub fn shear_rows(&self, xi: f64, eta: f64) -> [ElementVector; 2] {
        let bottom = self.raw_shear_rows(0.0, -1.0)[0];
        let top = self.raw_shear_rows(0.0, 1.0)[0];
        let left = self.raw_shear_rows(-1.0, 0.0)[1];
        let right = self.raw_shear_rows(1.0, 0.0)[1];
        let mut rows = [[0.0; ELEMENT_DOFS]; 2];
        for k in 0..ELEMENT_DOFS {
            rows[0][k] = 0.5 * (1.0 - eta) * bottom[k] + 0.5 * (1.0 + eta) * top[k];
            rows[1][k] = 0.5 * (1.0 - xi) * left[k] + 0.5 * (1.0 + xi) * right[k];
        }
        rows
    }

    pub fn stiffness(&self, section: &ShellStiffness) -> ElementMatrix {
        let mut k = [[0.0; ELEMENT_DOFS]; ELEMENT_DOFS];
        let weight = 0.25 * self.a * self.b;
        for &(xi, eta) in &GAUSS_POINTS {
            let bm = self.membrane_bending_rows(xi, eta);
            accumulate(&mut k, &bm, &section.abd, weight);
            let bs = self.shear_rows(xi, eta);
            accumulate(&mut k, &bs, &section.shear, weight);
        }
        k
    }

    /// Generalized strains `[ε0xx, ε0yy, γ0xy, κxx, κyy, κxy]` at `(xi, eta)`.
    pub fn generalized_strains(&self, dofs: &ElementVector, xi: f64, eta: f64) -> [f64; 6] {
        self.membrane_bending_rows(xi, eta)
            .map(|row| row.iter().zip(dofs).map(|(b, d)| b * d).sum())
    }

    /// Transverse shear strains `[γxz, γyz]` at `(xi, eta)`.
    pub fn transverse_shear(&self, dofs: &ElementVector, xi: f64, eta: f64) -> [f64; 2] {
        self.shear_rows(xi, eta)
            .map(|row| row.iter().zip(dofs).map(|(b, d)| b * d).sum())
    }
}

fn accumulate<const R: usize>(k: &mut ElementMatrix, rows: &[ElementVector; R], c: &[[f64; R]; R], weight: f64) {
    // k += Bᵀ C B w
    let mut cb = [[0.0; ELEMENT_DOFS]; R];
    for i in 0..R {
        for j in 0..R {
            let cij = c[i][j];
            if cij != 0.0 {
                for col in 0..ELEMENT_DOFS {
                    cb[i][col] += cij * rows[j][col];
                }
            }
        }
    }
    for p in 0..ELEMENT_DOFS {
        for i in 0..R {
            let bip = rows[i][p];
            if bip != 0.0 {
                for q in 0..ELEMENT_DOFS {
                    k[p][q] += weight * bip * cb[i][q];
                }
            }
        }
    }
}

/// Bilinear extrapolation from 2x2 Gauss-point values to the corners.
pub fn extrapolate_to_corners<const N: usize>(gauss_values: &[[f64; N]; 4]) -> [[f64; N]; 4] {
    let s = 3f64.sqrt();
    std::array::from_fn(|corner| {
        let (xi, eta) = (NODE_XI[corner] * s, NODE_ETA[corner] * s);
        let n = shape(xi, eta);
        std::array::from_fn(|c| (0..4).map(|g| n[g] * gauss_values[g][c]).sum())
    })
}
