use alloc::string::String;
use core::fmt;

/// Errors surfaced by the simulation core.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CoreError {
    /// Two vectors or a vector and a model disagree on length.
    DimensionMismatch { expected: usize, actual: usize },
    /// An operation received an empty dataset, batch, or update list.
    EmptyInput(&'static str),
    /// A class label is outside `0..num_classes`.
    LabelOutOfRange { label: usize, num_classes: usize },
    /// A configuration value violates its documented range.
    InvalidConfig(String),
    /// A dataset is too small for the requested operation.
    DatasetTooSmall { required: usize, actual: usize },
    /// A computed value came out non-finite.
    NonFinite(&'static str),
}

impl fmt::Display for CoreError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoreError::DimensionMismatch { expected, actual } => {
                write!(f, "dimension mismatch: expected {expected}, got {actual}")
            }
            CoreError::EmptyInput(what) => write!(f, "empty input: {what}"),
            CoreError::LabelOutOfRange { label, num_classes } => {
                write!(f, "label {label} out of range for {num_classes} classes")
            }
            CoreError::InvalidConfig(msg) => write!(f, "invalid config: {msg}"),
            CoreError::DatasetTooSmall { required, actual } => {
                write!(f, "dataset too small: need at least {required} samples, have {actual}")
            }
            CoreError::NonFinite(what) => write!(f, "non-finite value in {what}"),
        }
    }
}

pub type Result<T> = core::result::Result<T, CoreError>;
