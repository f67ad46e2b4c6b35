use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the pipeline.
///
/// Variants split into two families: bad input (configuration, files,
/// preconditions) and numerical/model failures. [`Error::is_usage`] tells
/// them apart so front ends can choose an exit code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{dimension} = {value} mm is not a multiple of element size {element_size} mm (remainder {remainder} mm)")]
    NonDivisible {
        dimension: &'static str,
        value: f64,
        element_size: f64,
        remainder: f64,
    },

    #[error("invalid material `{id}`: {reason}")]
    Material { id: String, reason: String },

    #[error("invalid laminate `{id}`: {reason}")]
    Laminate { id: String, reason: String },

    #[error("unknown {kind} `{id}`")]
    Unknown { kind: &'static str, id: String },

    #[error("node set {set}: {reason}")]
    NodeSet { set: String, reason: String },

    #[error("node {0} does not exist in the mesh")]
    UnknownNode(usize),

    #[error("stiffness matrix is singular: {modes} unconstrained mode(s)")]
    Singular { modes: usize },

    #[error("surface offset z = {z} mm lies outside the laminate (|z| <= {half_thickness} mm) of element {element}")]
    OffsetOutsideLaminate {
        z: f64,
        half_thickness: f64,
        element: usize,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("{path}: file is truncated or corrupt: {reason}")]
    Corrupt { path: PathBuf, reason: String },

    #[error("{path}: schema mismatch: {reason}")]
    Schema { path: PathBuf, reason: String },

    #[error("model fingerprint mismatch: file was built for {found}, current model is {expected}")]
    ModelMismatch { expected: String, found: String },

    #[error("{0}")]
    Precondition(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True for errors caused by the caller's input rather than the numerics.
    pub fn is_usage(&self) -> bool {
        !matches!(
            self,
            Error::Singular { .. } | Error::Numerical(_) | Error::OffsetOutsideLaminate { .. }
        )
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
