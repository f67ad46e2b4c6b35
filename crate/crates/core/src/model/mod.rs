//! Plate geometry, materials, laminates, candidate node sets and supports.

pub mod boundary;
pub mod config;
pub mod laminate;
pub mod material;
pub mod mesh;
pub mod sets;

pub use boundary::{BoundaryConditions, Constraint, Dof, SymmetryEdge, DOFS_PER_NODE};
pub use config::{GeometryConfig, Model, ModelConfig, NodeSetConfig, RegionConfig, MODEL_SCHEMA_VERSION};
pub use laminate::{laminate_stiffness, Layer, LaminateSpec, ShellStiffness};
pub use material::MaterialSpec;
pub use mesh::{Mesh, Rect};
pub use sets::{define_node_sets, NodeSets, SetLabel};
