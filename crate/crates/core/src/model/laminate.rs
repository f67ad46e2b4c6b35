use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::material::MaterialSpec;
use crate::error::{Error, Result};

/// Shear correction factor applied to the transverse shear stiffness.
pub const SHEAR_CORRECTION: f64 = 5.0 / 6.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub material: String,
    /// Layer thickness [mm].
    pub thickness: f64,
    /// Fiber angle from the x-axis [deg].
    #[serde(default)]
    pub angle: f64,
}

/// Layer stack, listed from the bottom surface (most negative z) upwards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaminateSpec {
    pub layers: Vec<Layer>,
}

impl LaminateSpec {
    pub fn new(layers: Vec<Layer>) -> Self {
        Self { layers }
    }

    /// Total thickness h [mm].
    pub fn thickness(&self) -> f64 {
        self.layers.iter().map(|l| l.thickness).sum()
    }

    /// `(z_bottom, z_top)` of every layer, measured from the mid-surface.
    pub fn interfaces(&self) -> Vec<(f64, f64)> {
        let mut z = -0.5 * self.thickness();
        self.layers
            .iter()
            .map(|l| {
                let bottom = z;
                z += l.thickness;
                (bottom, z)
            })
            .collect()
    }

    pub fn validate(&self, id: &str, materials: &BTreeMap<String, MaterialSpec>) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Laminate {
                id: id.into(),
                reason: "no layers".into(),
            });
        }
        for (i, layer) in self.layers.iter().enumerate() {
            if !(layer.thickness.is_finite() && layer.thickness > 0.0) {
                return Err(Error::Laminate {
                    id: id.into(),
                    reason: format!("layer {i} has non-positive thickness {}", layer.thickness),
                });
            }
            if !layer.angle.is_finite() {
                return Err(Error::Laminate {
                    id: id.into(),
                    reason: format!("layer {i} has a non-finite angle"),
                });
            }
            if !materials.contains_key(&layer.material) {
                return Err(Error::Unknown {
                    kind: "material",
                    id: layer.material.clone(),
                });
            }
        }
        Ok(())
    }
}

/// Equivalent-single-layer shell stiffness.
///
/// `abd` acts on `[ε0xx, ε0yy, γ0xy, κxx, κyy, κxy]` (engineering shear,
/// curvatures with `κxy = ∂βx/∂y + ∂βy/∂x`). `shear` acts on `[γxz, γyz]`
/// and already includes [`SHEAR_CORRECTION`].
#[derive(Debug, Clone, PartialEq)]
pub struct ShellStiffness {
    pub abd: [[f64; 6]; 6],
    pub shear: [[f64; 2]; 2],
    pub thickness: f64,
}

impl ShellStiffness {
    pub fn a(&self, i: usize, j: usize) -> f64 {
        self.abd[i][j]
    }

    pub fn b(&self, i: usize, j: usize) -> f64 {
        self.abd[i][j + 3]
    }

    pub fn d(&self, i: usize, j: usize) -> f64 {
        self.abd[i + 3][j + 3]
    }

    /// Symmetric eigenvalues of the 6x6 ABD block followed by the 2x2 shear block.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let abd = nalgebra::Matrix6::from_fn(|i, j| self.abd[i][j]);
        let shear = nalgebra::Matrix2::from_fn(|i, j| self.shear[i][j]);
        let mut out: Vec<f64> = abd.symmetric_eigenvalues().iter().copied().collect();
        out.extend(shear.symmetric_eigenvalues().iter().copied());
        out
    }
}

/// Classical lamination theory A/B/D plus first-order transverse shear.
pub fn laminate_stiffness(
    spec: &LaminateSpec,
    materials: &BTreeMap<String, MaterialSpec>,
) -> Result<ShellStiffness> {
    spec.validate("<anonymous>", materials)?;
    let mut abd = [[0.0; 6]; 6];
    let mut shear = [[0.0; 2]; 2];
    for (layer, (z0, z1)) in spec.layers.iter().zip(spec.interfaces()) {
        let mat = &materials[&layer.material];
        let q = mat.rotated_in_plane(layer.angle);
        let t = z1 - z0;
        let first = 0.5 * (z1 * z1 - z0 * z0);
        let second = (z1 * z1 * z1 - z0 * z0 * z0) / 3.0;
        for i in 0..3 {
            for j in 0..3 {
                abd[i][j] += q[i][j] * t;
                abd[i][j + 3] += q[i][j] * first;
                abd[i + 3][j] += q[i][j] * first;
                abd[i + 3][j + 3] += q[i][j] * second;
            }
        }
        let qs = mat.rotated_shear(layer.angle);
        for i in 0..2 {
            for j in 0..2 {
                shear[i][j] += SHEAR_CORRECTION * qs[i][j] * t;
            }
        }
    }
    Ok(ShellStiffness {
        abd,
        shear,
        thickness: spec.thickness(),
    })
}
