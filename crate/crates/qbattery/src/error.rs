//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("corrupted state: {0}")]
    CorruptedState(String),

    /// The integrator produced a state violating trace or positivity bounds.
    #[error("physicality failure at t = {time}: {what}")]
    PhysicalityFailure { time: f64, what: String },

    #[error("integration failure at t = {time}: {what}")]
    Integration { time: f64, what: String },

    #[error("degenerate timing: stored energy is maximal at t = 0 ({0})")]
    DegenerateTiming(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unphysical coherence times: {0}")]
    UnphysicalCoherence(String),

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("config schema error: {}", .0.join("; "))]
    Schema(Vec<String>),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}
