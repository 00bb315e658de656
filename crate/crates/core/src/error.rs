use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },

    #[error("stripe is not saturated along its width (internal field {internal_field:.3} G)")]
    Unsaturated { internal_field: f64 },

    #[error("rejected sequence: {0}")]
    Sequence(String),

    #[error("{segment} segment has {samples} samples, at least 4 are required")]
    SegmentTooShort { segment: &'static str, samples: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Error {
    Error::Invalid {
        what,
        reason: reason.into(),
    }
}
