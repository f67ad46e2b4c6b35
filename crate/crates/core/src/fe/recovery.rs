use serde::{Deserialize, Serialize};

use super::element::{extrapolate_to_corners, RectElement, GAUSS_POINTS};
use super::system::DisplacementField;
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::model::Model;
use crate::strain::StrainTensor2D;

/// Through-thickness position at which strains are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurfaceOffset {
    /// `z = +h/2` of each element's own laminate.
    Top,
    /// `z = -h/2`.
    Bottom,
    Mid,
    /// Absolute offset from the mid-surface [mm].
    At(f64),
}

impl SurfaceOffset {
    fn resolve(self, half_thickness: f64, element: usize) -> Result<f64> {
        let z = match self {
            SurfaceOffset::Top => half_thickness,
            SurfaceOffset::Bottom => -half_thickness,
            SurfaceOffset::Mid => 0.0,
            SurfaceOffset::At(z) => z,
        };
        if !z.is_finite() || z.abs() > half_thickness * (1.0 + 1e-12) {
            return Err(Error::OffsetOutsideLaminate {
                z,
                half_thickness,
                element,
            });
        }
        Ok(z)
    }
}

/// Nodal strain tensors at a fixed through-thickness position.
#[derive(Debug, Clone, PartialEq)]
pub struct StrainField {
    pub grid: GridSpec,
    pub offset: SurfaceOffset,
    pub tensors: Vec<StrainTensor2D>,
}

impl StrainField {
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            grid: self.grid,
            offset: self.offset,
            tensors: self.tensors.iter().map(|t| t.scaled(c)).collect(),
        }
    }

    /// Bilinear interpolation of the tensor components.
    pub fn interpolate(&self, x: f64, y: f64) -> Option<StrainTensor2D> {
        let cell = self.grid.locate(x, y)?;
        let mut out = StrainTensor2D::ZERO;
        for ((i, j), w) in cell.corners() {
            let t = self.tensors[self.grid.index(i, j)];
            out.exx += w * t.exx;
            out.eyy += w * t.eyy;
            out.exy += w * t.exy;
        }
        Some(out)
    }
}

/// Generalized strains `[ε0xx, ε0yy, γ0xy, κxx, κyy, κxy]` at the corners of
/// `element`, extrapolated from the 2x2 Gauss points.
pub fn element_corner_strains(model: &Model, disp: &DisplacementField, element: usize) -> [[f64; 6]; 4] {
    let el = RectElement::square(model.mesh.element_size);
    let dofs = disp.element_dofs(&model.mesh, element);
    let gauss = GAUSS_POINTS.map(|(xi, eta)| el.generalized_strains(&dofs, xi, eta));
    extrapolate_to_corners(&gauss)
}

fn at_offset(g: &[f64; 6], z: f64) -> StrainTensor2D {
    StrainTensor2D::new(g[0] + z * g[3], g[1] + z * g[4], 0.5 * (g[2] + z * g[5]))
}

/// Strain tensors at offset `z`, averaged over the elements sharing each node.
pub fn surface_strain(disp: &DisplacementField, model: &Model, offset: SurfaceOffset) -> Result<StrainField> {
    let mesh = &model.mesh;
    if disp.values.len() != mesh.node_count() {
        return Err(Error::Dimension(format!(
            "displacement field has {} nodes, mesh has {}",
            disp.values.len(),
            mesh.node_count()
        )));
    }
    let mut per_element = Vec::with_capacity(mesh.element_count());
    for e in 0..mesh.element_count() {
        let z = offset.resolve(0.5 * model.element_stiffness(e).thickness, e)?;
        let corners = element_corner_strains(model, disp, e);
        per_element.push(corners.map(|g| at_offset(&g, z)));
    }
    let tensors = (0..mesh.node_count())
        .map(|n| {
            let elements = mesh.node_elements(n);
            let mut acc = StrainTensor2D::ZERO;
            for &e in &elements {
                let corner = mesh.element_nodes(e).iter().position(|&m| m == n).unwrap();
                let t = per_element[e][corner];
                acc.exx += t.exx;
                acc.eyy += t.eyy;
                acc.exy += t.exy;
            }
            acc.scaled(1.0 / elements.len() as f64)
        })
        .collect();
    Ok(StrainField {
        grid: disp.grid,
        offset,
        tensors,
    })
}

/// Peak in-plane stress found for one material.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialStressPeak {
    pub material: String,
    /// Largest principal stress magnitude [MPa].
    pub max_stress: f64,
    pub element: usize,
    /// Location of the peak (element corner) [mm].
    pub x: f64,
    pub y: f64,
    pub layer: usize,
}

/// Largest principal in-plane stress magnitude per material, checked at the
/// bottom and top of every layer at every element corner.
pub fn layer_stress_peaks(model: &Model, disp: &DisplacementField) -> Vec<MaterialStressPeak> {
    let mesh = &model.mesh;
    let mut peaks: std::collections::BTreeMap<String, MaterialStressPeak> = Default::default();
    for e in 0..mesh.element_count() {
        let corners = element_corner_strains(model, disp, e);
        let lam = model.element_laminate(e);
        let nodes = mesh.element_nodes(e);
        for (li, (layer, (z0, z1))) in lam.layers.iter().zip(lam.interfaces()).enumerate() {
            let q = model.material(&layer.material).rotated_in_plane(layer.angle);
            for (c, g) in corners.iter().enumerate() {
                for z in [z0, z1] {
                    let t = at_offset(g, z);
                    let strain = [t.exx, t.eyy, 2.0 * t.exy];
                    let s: [f64; 3] = std::array::from_fn(|i| (0..3).map(|j| q[i][j] * strain[j]).sum());
                    let mean = 0.5 * (s[0] + s[1]);
                    let r = (0.5 * (s[0] - s[1])).hypot(s[2]);
                    let peak = mean.abs() + r;
                    let entry = peaks.entry(layer.material.clone()).or_insert_with(|| MaterialStressPeak {
                        material: layer.material.clone(),
                        max_stress: -1.0,
                        element: e,
                        x: 0.0,
                        y: 0.0,
                        layer: li,
                    });
                    if peak > entry.max_stress {
                        let (x, y) = mesh.node_xy(nodes[c]);
                        *entry = MaterialStressPeak {
                            material: layer.material.clone(),
                            max_stress: peak,
                            element: e,
                            x,
                            y,
                            layer: li,
                        };
                    }
                }
            }
        }
    }
    peaks.into_values().collect()
}
