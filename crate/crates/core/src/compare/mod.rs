//! Target fields: file format, resampling onto the mesh, normalization and
//! deviation reports.

pub mod field;
pub mod report;

pub use field::{normalize_at, resample_to_mesh, Resampled, ScalarField, Transform, DEFAULT_NORMALIZE_EPS, MASKED};
pub use report::{compare, min_strain_audit, ComparisonReport, Deviation, Probe, ProbeResult};
