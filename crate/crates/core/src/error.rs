use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A collocation grid cannot represent the requested product without aliasing.
    #[error("grid size {grid} is too small for degree {degree} at cutoff {cutoff} (need grid > {required})")]
    Aliasing {
        grid: usize,
        cutoff: usize,
        degree: usize,
        required: usize,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("cutoff mismatch: expected at most {expected}, found {found}")]
    CutoffMismatch { expected: usize, found: usize },

    /// The integrator produced a NaN or infinity.
    #[error("integration failed: non-finite state at t = {time}")]
    NonFinite { time: f64 },

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
