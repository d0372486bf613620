use thiserror::Error;

/// Errors raised across the crate.
///
/// The variants map onto the CLI exit codes: validation problems are
/// configuration errors, accuracy failures signal a convergence problem and
/// model errors denote unsupported combinations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("validation failed: {0}")]
    Validation(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("conditioning on outcome {label} is impossible: P(y) = {probability:e}")]
    ConditioningImpossible { label: f64, probability: f64 },

    #[error("model error: {0}")]
    Model(String),

    #[error("accuracy error: {0}")]
    Accuracy(String),

    #[error("unsupported series order {requested} (maximum {maximum})")]
    UnsupportedOrder { requested: usize, maximum: usize },

    #[error("internal consistency violated: {0}")]
    Consistency(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}
