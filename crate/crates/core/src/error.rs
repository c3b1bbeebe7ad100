use thiserror::Error;

/// Errors raised while talking to a prediction model.
#[derive(Debug, Error)]
pub enum PredictError {
    #[error("point {index} has {got} coordinates, model expects {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("point {index} has a non-finite coordinate")]
    NonFiniteInput { index: usize },
    #[error("model returned a non-finite prediction for point {index}")]
    NonFiniteOutput { index: usize },
    #[error("transport error: {message}")]
    Transport {
        message: String,
        /// Raw line received from the remote side, when there was one.
        line: Option<String>,
    },
    #[error("protocol error: {message} (line: {line:?})")]
    Protocol { message: String, line: String },
    #[error("unsupported protocol version {0}")]
    UnsupportedVersion(u64),
    #[error("remote model reported an error: {0}")]
    Remote(String),
}

/// Errors raised when reading a model description file.
#[derive(Debug, Error)]
pub enum ModelFileError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Errors raised by the explanation pipeline.
#[derive(Debug, Error)]
pub enum RbxError {
    #[error(transparent)]
    Predict(#[from] PredictError),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("prediction {f0} lies exactly on the decision boundary, side is ambiguous")]
    AmbiguousSide { f0: f64 },
    #[error("no ε-far context points: no boundary information")]
    NoBoundaryInformation,
    #[error("every shrunken point had a degenerate gradient; no halfspace could be formed")]
    DegenerateModel,
    #[error("target is outside the trusted region (ratio {ratio} < beta {beta})")]
    UntrustedTarget { ratio: f64, beta: f64 },
    #[error("context points are all identical; the bounding box is degenerate")]
    DegenerateHull,
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = RbxError> = std::result::Result<T, E>;
