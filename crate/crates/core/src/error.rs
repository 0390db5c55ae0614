use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("integrator step size underflow at t = {t}")]
    StepUnderflow { t: f64 },

    #[error("state invariant violated at t = {t}: {what}")]
    InvariantViolation { t: f64, what: String },

    #[error("wavefunction norm underflow between jumps at t = {t}")]
    NormUnderflow { t: f64 },

    #[error("eigensolver did not converge")]
    EigenNonConvergence,

    #[error("invalid POVM: {0}")]
    InvalidPovm(String),

    #[error("quantum Fisher information is zero or singular; variance bound is unbounded")]
    Unbounded,

    #[error("numerical fault: {0}")]
    Numerical(String),

    #[error("empty input: {0}")]
    Empty(&'static str),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
