use serde::{Deserialize, Serialize};

use crate::model::{Mesh, Rect};

/// Regular point grid: `nx * ny` samples at `(origin_x + i dx, origin_y + j dy)`,
/// stored row-major (`j * nx + i`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub origin_x: f64,
    pub origin_y: f64,
    pub dx: f64,
    pub dy: f64,
    pub nx: usize,
    pub ny: usize,
}

/// Location of a point inside a grid cell: lower-left sample `(i, j)` and
/// fractional offsets in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellPosition {
    pub i: usize,
    pub j: usize,
    pub fx: f64,
    pub fy: f64,
}

impl CellPosition {
    /// Bilinear weights paired with sample indices `(i, j)`.
    pub fn corners(&self) -> [((usize, usize), f64); 4] {
        let (i, j, fx, fy) = (self.i, self.j, self.fx, self.fy);
        [
            ((i, j), (1.0 - fx) * (1.0 - fy)),
            ((i + 1, j), fx * (1.0 - fy)),
            ((i, j + 1), (1.0 - fx) * fy),
            ((i + 1, j + 1), fx * fy),
        ]
    }
}

impl GridSpec {
    pub fn of_mesh(mesh: &Mesh) -> Self {
        let (nx, ny) = mesh.node_dims();
        Self {
            origin_x: 0.0,
            origin_y: 0.0,
            dx: mesh.element_size,
            dy: mesh.element_size,
            nx,
            ny,
        }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn xy(&self, index: usize) -> (f64, f64) {
        let (i, j) = (index % self.nx, index / self.nx);
        (self.origin_x + i as f64 * self.dx, self.origin_y + j as f64 * self.dy)
    }

    pub fn extent(&self) -> Rect {
        Rect::new(
            self.origin_x,
            self.origin_x + (self.nx.saturating_sub(1)) as f64 * self.dx,
            self.origin_y,
            self.origin_y + (self.ny.saturating_sub(1)) as f64 * self.dy,
        )
    }

    /// Cell containing `(x, y)`, or `None` outside the grid (a tolerance of
    /// 1e-9 cell widths admits points on the boundary).
    pub fn locate(&self, x: f64, y: f64) -> Option<CellPosition> {
        if self.nx < 2 || self.ny < 2 || !x.is_finite() || !y.is_finite() {
            return None;
        }
        let u = (x - self.origin_x) / self.dx;
        let v = (y - self.origin_y) / self.dy;
        let (umax, vmax) = ((self.nx - 1) as f64, (self.ny - 1) as f64);
        const EPS: f64 = 1e-9;
        if u < -EPS || v < -EPS || u > umax + EPS || v > vmax + EPS {
            return None;
        }
        let u = u.clamp(0.0, umax);
        let v = v.clamp(0.0, vmax);
        let i = (u.floor() as usize).min(self.nx - 2);
        let j = (v.floor() as usize).min(self.ny - 2);
        Some(CellPosition {
            i,
            j,
            fx: u - i as f64,
            fy: v - j as f64,
        })
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.locate(x, y).is_some()
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.dx.is_finite() && self.dx > 0.0 && self.dy.is_finite() && self.dy > 0.0) {
            return Err(format!("grid spacing must be positive, got ({}, {})", self.dx, self.dy));
        }
        if !(self.origin_x.is_finite() && self.origin_y.is_finite()) {
            return Err("grid origin must be finite".into());
        }
        if self.nx == 0 || self.ny == 0 {
            return Err("grid must have at least one sample per axis".into());
        }
        Ok(())
    }
}
