//! Error type shared by all simulator modules.

use thiserror::Error;

/// Alias used throughout the crate.
pub type Result<T> = std::result::Result<T, CoreError>;

#[derive(Debug, Clone, Error)]
pub enum CoreError {
    #[error("dimension error: {context}: index {index} out of range for dimension {dim}")]
    OutOfRange {
        context: &'static str,
        index: usize,
        dim: usize,
    },

    #[error("dimension mismatch: {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("states live on different composite spaces")]
    SpaceMismatch,

    #[error("qubit index {k} out of range for an {n}-qubit register")]
    QubitOutOfRange { k: usize, n: usize },

    #[error(
        "guard-band violation: components {label_a} ({freq_a:.6} rad/us) and {label_b} \
         ({freq_b:.6} rad/us) are separated by {separation:.6} < {guard:.6} rad/us"
    )]
    GuardBand {
        label_a: String,
        label_b: String,
        freq_a: f64,
        freq_b: f64,
        separation: f64,
        guard: f64,
    },

    #[error("no positive evolution time for winding {k}; try winding {}", k + 1)]
    NoPositiveDuration { k: u32 },

    #[error(
        "integration failure: norm drift {drift:.3e} exceeds tolerance {tolerance:.3e} \
         after {steps} steps (t = {t:.6} us)"
    )]
    NormDrift {
        drift: f64,
        tolerance: f64,
        steps: u64,
        t: f64,
    },

    #[error("leakage {leak:.3e} into the top Fock levels exceeds tolerance {tolerance:.3e}")]
    Leakage { leak: f64, tolerance: f64 },

    #[error("state has support outside the allowed photon-number set: {context}")]
    SupportViolation { context: String },

    #[error("precondition violated: {0}")]
    Precondition(String),
}

impl CoreError {
    pub fn precondition(msg: impl Into<String>) -> Self {
        CoreError::Precondition(msg.into())
    }
}
