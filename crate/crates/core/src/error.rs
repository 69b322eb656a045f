use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("timestep {t} outside the schedule range [1, {max}]")]
    StepOutOfRange { t: usize, max: usize },

    #[error("degenerate schedule: {0}")]
    DegenerateSchedule(String),

    #[error("gallery is empty")]
    EmptyGallery,

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("patch box {top},{left} side {side} does not fit a {height}x{width} image")]
    BoxOutOfBounds {
        top: usize,
        left: usize,
        side: usize,
        height: usize,
        width: usize,
    },

    #[error("denoiser model error: {0}")]
    Model(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn shape(expected: impl ToString, actual: impl ToString) -> Self {
        Error::ShapeMismatch {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    /// True for failures of the numerics rather than of the caller's input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NonFinite(_) | Error::DegenerateSchedule(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
