use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite feature for candidate {index}")]
    NonFiniteFeature { index: usize },
    #[error(
        "old-policy probability {prob} of candidate {index} is below the support floor {floor}"
    )]
    BelowSupportFloor { index: usize, prob: f64, floor: f64 },
    #[error("objective configuration mismatch: {0}")]
    ConfigMismatch(String),
    #[error("scenario set exhausted with buffer at {filled}/{capacity} records")]
    PartialBuffer { filled: usize, capacity: usize },
    #[error("non-finite gradient: {0}")]
    NonFiniteGradient(String),
    #[error("need at least {required} samples, got {got}")]
    InsufficientSamples { required: usize, got: usize },
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("malformed input: {0}")]
    Parse(String),
    #[error("iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
