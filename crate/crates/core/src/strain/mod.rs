//! Strain directions, direction fields and trajectory tracing.

pub mod direction;
pub mod tensor;
pub mod trace;

pub use direction::{
    direction_field, directions_at, quantize_deg, Branch, Direction, DirectionEntry, DirectionField, DirectionMode, FieldMode,
    Island, ANGLE_QUANTUM,
};
pub use tensor::{canonical_deg, principal, zero_strain, Principal, StrainTensor2D, ZeroStrain};
pub use trace::{trace, trace_many, Termination, TraceParams, Trajectory, Vertex};
