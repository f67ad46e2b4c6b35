use serde::{Deserialize, Serialize};

use super::mesh::{Mesh, Rect};

/// Nodal degrees of freedom, in storage order.
///
/// `Rx` and `Ry` are right-handed rotations about the x and y axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dof {
    U,
    V,
    W,
    Rx,
    Ry,
}

pub const DOFS_PER_NODE: usize = 5;

impl Dof {
    pub const ALL: [Dof; DOFS_PER_NODE] = [Dof::U, Dof::V, Dof::W, Dof::Rx, Dof::Ry];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Edge of the plate treated as a mirror plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymmetryEdge {
    XMin,
    XMax,
    YMin,
    YMax,
}

impl SymmetryEdge {
    /// Normal translation and the rotation that tilts the edge out of the mirror plane.
    pub fn constrained(self) -> [Dof; 2] {
        match self {
            SymmetryEdge::XMin | SymmetryEdge::XMax => [Dof::U, Dof::Ry],
            SymmetryEdge::YMin | SymmetryEdge::YMax => [Dof::V, Dof::Rx],
        }
    }

    pub fn rect(self, mesh: &Mesh) -> Rect {
        let (w, h) = (mesh.width, mesh.height);
        match self {
            SymmetryEdge::XMin => Rect::new(0.0, 0.0, 0.0, h),
            SymmetryEdge::XMax => Rect::new(w, w, 0.0, h),
            SymmetryEdge::YMin => Rect::new(0.0, w, 0.0, 0.0),
            SymmetryEdge::YMax => Rect::new(0.0, w, h, h),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    #[serde(default)]
    pub name: String,
    pub rect: Rect,
    pub dofs: Vec<Dof>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundaryConditions {
    #[serde(default)]
    pub constraints: Vec<Constraint>,
    #[serde(default)]
    pub symmetry: Vec<SymmetryEdge>,
}

impl BoundaryConditions {
    pub fn fix(mut self, name: &str, rect: Rect, dofs: &[Dof]) -> Self {
        self.constraints.push(Constraint {
            name: name.into(),
            rect,
            dofs: dofs.to_vec(),
        });
        self
    }

    pub fn with_symmetry(mut self, edge: SymmetryEdge) -> Self {
        self.symmetry.push(edge);
        self
    }

    /// Per-node flags, indexed by [`Dof::index`].
    pub fn constrained_mask(&self, mesh: &Mesh) -> Vec<[bool; DOFS_PER_NODE]> {
        let mut mask = vec![[false; DOFS_PER_NODE]; mesh.node_count()];
        let mut apply = |rect: &Rect, dofs: &[Dof]| {
            for n in mesh.nodes_in(rect) {
                for d in dofs {
                    mask[n][d.index()] = true;
                }
            }
        };
        for c in &self.constraints {
            apply(&c.rect, &c.dofs);
        }
        for edge in &self.symmetry {
            apply(&edge.rect(mesh), &edge.constrained());
        }
        mask
    }
}
