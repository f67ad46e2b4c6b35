//! Linear static plate analysis: assembly, direct solution and strain recovery.

pub mod element;
pub mod recovery;
pub mod skyline;
pub mod system;

pub use element::{RectElement, ELEMENT_DOFS, NODE_DOFS};
pub use recovery::{element_corner_strains, layer_stress_peaks, surface_strain, MaterialStressPeak, StrainField, SurfaceOffset};
pub use system::{assemble, extract_w, DisplacementField, LoadCase, LoadDirection, PointLoad, SystemMatrix};
