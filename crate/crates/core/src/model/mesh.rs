use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Closed axis-aligned rectangle `[x0, x1] × [y0, y1]` in mm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x: [f64; 2],
    pub y: [f64; 2],
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Self {
            x: [x0.min(x1), x0.max(x1)],
            y: [y0.min(y1), y0.max(y1)],
        }
    }

    pub fn point(x: f64, y: f64) -> Self {
        Self::new(x, x, y, y)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        const EPS: f64 = 1e-9;
        x >= self.x[0] - EPS && x <= self.x[1] + EPS && y >= self.y[0] - EPS && y <= self.y[1] + EPS
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        self.x[0] <= other.x[1] && other.x[0] <= self.x[1] && self.y[0] <= other.y[1] && other.y[0] <= self.y[1]
    }

    pub fn expanded(&self, margin: f64) -> Rect {
        Rect::new(self.x[0] - margin, self.x[1] + margin, self.y[0] - margin, self.y[1] + margin)
    }
}

/// Structured grid of square four-node elements.
///
/// Nodes are numbered row-major from the origin: node `row * (nx + 1) + col`
/// sits at `(col * h, row * h)`. Elements follow the same scheme with `nx`
/// columns; element corners run counter-clockwise from the lower-left node.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub width: f64,
    pub height: f64,
    pub element_size: f64,
    /// Symmetry-reduced model; the x = 0 edge is the symmetry plane.
    pub half_model: bool,
    nx: usize,
    ny: usize,
    laminate_names: Vec<String>,
    element_laminate: Vec<usize>,
}

pub const DEFAULT_LAMINATE: &str = "default";

fn divisions(dimension: &'static str, value: f64, element_size: f64) -> Result<usize> {
    if !(value.is_finite() && value > 0.0) {
        return Err(Error::Precondition(format!("{dimension} must be positive, got {value}")));
    }
    let n = (value / element_size).round();
    let remainder = value - n * element_size;
    if n < 1.0 || remainder.abs() > 1e-9 * value.max(element_size) {
        return Err(Error::NonDivisible {
            dimension,
            value,
            element_size,
            remainder: value.rem_euclid(element_size),
        });
    }
    Ok(n as usize)
}

impl Mesh {
    pub fn build_grid(width: f64, height: f64, element_size: f64, half_model: bool) -> Result<Self> {
        if !(element_size.is_finite() && element_size > 0.0) {
            return Err(Error::Precondition(format!(
                "element size must be positive, got {element_size}"
            )));
        }
        let nx = divisions("width", width, element_size)?;
        let ny = divisions("height", height, element_size)?;
        Ok(Self {
            width,
            height,
            element_size,
            half_model,
            nx,
            ny,
            laminate_names: vec![DEFAULT_LAMINATE.to_string()],
            element_laminate: vec![0; nx * ny],
        })
    }

    /// Element columns and rows.
    pub fn element_dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    /// Node columns and rows.
    pub fn node_dims(&self) -> (usize, usize) {
        (self.nx + 1, self.ny + 1)
    }

    pub fn node_count(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    pub fn element_count(&self) -> usize {
        self.nx * self.ny
    }

    pub fn node_xy(&self, node: usize) -> (f64, f64) {
        let cols = self.nx + 1;
        let (row, col) = (node / cols, node % cols);
        (col as f64 * self.element_size, row as f64 * self.element_size)
    }

    pub fn node_index(&self, col: usize, row: usize) -> usize {
        row * (self.nx + 1) + col
    }

    /// Node located exactly (to 1e-6 mm) at `(x, y)`.
    pub fn node_at(&self, x: f64, y: f64) -> Option<usize> {
        let col = (x / self.element_size).round();
        let row = (y / self.element_size).round();
        if col < 0.0 || row < 0.0 || col > self.nx as f64 || row > self.ny as f64 {
            return None;
        }
        let node = self.node_index(col as usize, row as usize);
        let (nx, ny) = self.node_xy(node);
        ((nx - x).abs() < 1e-6 && (ny - y).abs() < 1e-6).then_some(node)
    }

    pub fn element_nodes(&self, element: usize) -> [usize; 4] {
        let (row, col) = (element / self.nx, element % self.nx);
        let n0 = self.node_index(col, row);
        let n1 = n0 + 1;
        let n3 = self.node_index(col, row + 1);
        [n0, n1, n3 + 1, n3]
    }

    pub fn element_origin(&self, element: usize) -> (f64, f64) {
        self.node_xy(self.element_nodes(element)[0])
    }

    pub fn element_centroid(&self, element: usize) -> (f64, f64) {
        let (x, y) = self.element_origin(element);
        (x + 0.5 * self.element_size, y + 0.5 * self.element_size)
    }

    /// Elements sharing a node.
    pub fn node_elements(&self, node: usize) -> Vec<usize> {
        let cols = self.nx + 1;
        let (row, col) = (node / cols, node % cols);
        let mut out = Vec::with_capacity(4);
        for (dr, dc) in [(1usize, 1usize), (1, 0), (0, 1), (0, 0)] {
            if row >= dr && col >= dc && row - dr < self.ny && col - dc < self.nx {
                out.push((row - dr) * self.nx + (col - dc));
            }
        }
        out.sort_unstable();
        out
    }

    pub fn footprint(&self) -> Rect {
        Rect::new(0.0, self.width, 0.0, self.height)
    }

    pub fn nodes_in(&self, rect: &Rect) -> Vec<usize> {
        (0..self.node_count())
            .filter(|&n| {
                let (x, y) = self.node_xy(n);
                rect.contains(x, y)
            })
            .collect()
    }

    /// Assigns `laminate` to every element whose centroid lies in `rect`.
    /// Later assignments override earlier ones. Returns the element count hit.
    pub fn assign_laminate(&mut self, rect: &Rect, laminate: &str) -> usize {
        let id = match self.laminate_names.iter().position(|n| n == laminate) {
            Some(id) => id,
            None => {
                self.laminate_names.push(laminate.to_string());
                self.laminate_names.len() - 1
            }
        };
        let mut hit = 0;
        for e in 0..self.element_count() {
            let (cx, cy) = self.element_centroid(e);
            if rect.contains(cx, cy) {
                self.element_laminate[e] = id;
                hit += 1;
            }
        }
        hit
    }

    /// Renames the catch-all laminate.
    pub fn set_default_laminate(&mut self, laminate: &str) {
        self.laminate_names[0] = laminate.to_string();
    }

    pub fn element_laminate(&self, element: usize) -> &str {
        &self.laminate_names[self.element_laminate[element]]
    }

    pub fn laminate_names(&self) -> &[String] {
        &self.laminate_names
    }

    pub fn element_laminate_id(&self, element: usize) -> usize {
        self.element_laminate[element]
    }
}
