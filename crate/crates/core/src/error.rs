use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter, state or configuration violated its documented range.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A delay/abscissa grid was not strictly increasing or had bad geometry.
    #[error("bad grid: {0}")]
    Grid(String),

    /// A text input failed to parse.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// A file was readable but did not match the expected schema.
    #[error("schema error: {0}")]
    Schema(String),

    /// The normal matrix of a least-squares step could not be inverted.
    #[error("singular normal matrix (reciprocal condition estimate {rcond:.3e})")]
    SingularNormalMatrix { rcond: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
