use thiserror::Error;

/// Errors raised by the imputation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("outcome vector has length {actual}, expected {expected}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("outcome vector contains a non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("pair ({context}, {action}) is already observed")]
    DuplicateEntry { context: String, action: String },

    #[error("unknown context `{0}`")]
    UnknownContext(String),

    #[error("unknown action `{0}`")]
    UnknownAction(String),

    #[error("identifier set must be nonempty")]
    EmptySet,

    #[error("pair ({context}, {action}) is not observed")]
    MissingPair { context: String, action: String },

    #[error("no donors available for ({context}, {action})")]
    EmptyDonorSet { context: String, action: String },

    #[error("no training fibers available for ({context}, {action})")]
    EmptyTrainingSet { context: String, action: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("donor count {count} exceeds the exhaustive-search bound {max}")]
    TooManyDonors { count: usize, max: usize },

    #[error("tensor has no observations")]
    EmptyTensor,

    #[error("unknown estimator `{0}`")]
    UnknownEstimator(String),

    #[error("instance construction failed after {attempts} attempts: {reason}")]
    ConstructionFailed { attempts: usize, reason: String },

    #[error("requested counts exceed availability: {0}")]
    CountsExceedAvailability(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Short machine-readable tag for error objects.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::NonFinite { .. } => "non_finite",
            Error::DuplicateEntry { .. } => "duplicate_entry",
            Error::UnknownContext(_) => "unknown_context",
            Error::UnknownAction(_) => "unknown_action",
            Error::EmptySet => "empty_set",
            Error::MissingPair { .. } => "missing_pair",
            Error::EmptyDonorSet { .. } => "empty_donor_set",
            Error::EmptyTrainingSet { .. } => "empty_training_set",
            Error::DimensionMismatch(_) => "dimension_mismatch",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::TooManyDonors { .. } => "too_many_donors",
            Error::EmptyTensor => "empty_tensor",
            Error::UnknownEstimator(_) => "unknown_estimator",
            Error::ConstructionFailed { .. } => "construction_failed",
            Error::CountsExceedAvailability(_) => "counts_exceed_availability",
            Error::Parse { .. } => "parse",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
