use thiserror::Error;

use crate::dynamics::SystemState;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("mode index ({j}, {k}) outside 1..={n}")]
    ModeIndex { j: usize, k: usize, n: usize },

    #[error("shape mismatch: expected {expected}, found {found}")]
    Shape { expected: usize, found: usize },

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("dealiasing budget exceeded: bandwidth {bandwidth} needs {needed} but grid resolves {limit}")]
    Dealiasing {
        bandwidth: usize,
        needed: usize,
        limit: usize,
    },

    #[error("noise covariance is not trace class: {0}")]
    TraceClass(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("stability guard violated: {0}")]
    Stability(String),

    #[error("non-finite state at step {step}")]
    NonFinite { step: u64 },

    #[error("blow-up at t = {t}: {reason}")]
    BlowUp {
        t: f64,
        reason: String,
        last_finite: Box<SystemState>,
    },

    #[error("misaligned ensemble: {0}")]
    Misaligned(String),

    #[error("insufficient data: {0}")]
    Insufficient(String),
}
