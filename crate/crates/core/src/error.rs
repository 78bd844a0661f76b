use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library reports.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("size mismatch: expected {expected} values, found {found}")]
    SizeMismatch { expected: usize, found: usize },
    #[error("non-finite value at band {band}, pixel {pixel}")]
    NonFiniteValue { band: usize, pixel: usize },
    #[error("unsupported data type: {0}")]
    UnsupportedDtype(String),
    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("band removal would leave no bands")]
    EmptyResult,
    #[error("subset is empty")]
    EmptySubset,
    #[error("band {0} is constant")]
    ConstantBand(usize),
    #[error("next subset is not the previous subset plus exactly one band")]
    NotSuccessor,
    #[error("illegal action {0}")]
    IllegalAction(usize),
    #[error("episode already holds the target number of bands")]
    EpisodeFinished,
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("non-finite gradient")]
    NonFiniteGradient,
    #[error("no legal action available")]
    NoLegalAction,
    #[error("training loss diverged at episode {0}")]
    DivergedLoss(usize),
    #[error("search space of {candidates} subsets exceeds budget {budget}")]
    BudgetExceeded { candidates: u128, budget: u128 },
    #[error("class {0} has no labeled samples")]
    EmptyClass(u32),
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("confusion matrix is empty")]
    EmptyConfusion,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("checkpoint format error: {0}")]
    Checkpoint(String),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command-line front end: 2 for configuration
    /// problems, 3 for data problems, 4 for training divergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::IndexOutOfRange { .. }
            | Error::EmptyResult
            | Error::EmptySubset
            | Error::NotSuccessor
            | Error::IllegalAction(_)
            | Error::EpisodeFinished
            | Error::NoLegalAction
            | Error::BudgetExceeded { .. }
            | Error::ShapeMismatch { .. } => 2,
            Error::DivergedLoss(_) | Error::NonFiniteGradient => 4,
            _ => 3,
        }
    }
}
