use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SvlError {
    /// An argument lies outside the domain on which the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A caller violated a structural precondition (dimensions, counts, enum values).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A trajectory produced a non-finite component.
    #[error("integration blew up at step {step} (t = {time}) of trajectory {trajectory:?}")]
    Blowup {
        step: u64,
        time: f64,
        trajectory: Option<u64>,
    },

    /// An iterative numerical method failed to reach its tolerance.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, SvlError>;

pub(crate) fn domain(msg: impl Into<String>) -> SvlError {
    SvlError::Domain(msg.into())
}

pub(crate) fn contract(msg: impl Into<String>) -> SvlError {
    SvlError::Contract(msg.into())
}
