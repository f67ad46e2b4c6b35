//! Concentrated-load placement on sandwich plates.
//!
//! The crate builds a shear-deformable plate model of a sandwich panel,
//! computes compliance (influence) matrices for candidate load nodes, picks
//! a small number of concentrated loads whose superposed deflection best
//! matches a target field, and analyses the resulting surface strain state
//! through principal and zero-strain directions and traced trajectories.

pub mod compare;
pub mod compliance;
pub mod error;
pub mod fe;
pub mod grid;
pub mod model;
pub mod optimize;
pub mod strain;
pub mod synthetic;

pub use error::{Error, Result};
