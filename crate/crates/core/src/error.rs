use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised anywhere in the analysis pipeline.
///
/// Every variant maps onto one of three process exit codes through
/// [`Error::exit_code`]: configuration problems (2), data problems (3) and
/// numerical failures (4).
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("value {value} outside the domain {domain}")]
    Domain { value: f64, domain: &'static str },

    #[error("data error: {0}")]
    Data(String),

    #[error("{path}:{line}: {message}")]
    MalformedRow { path: String, line: u64, message: String },

    #[error("fit failure: {reason} ({diagnostics})")]
    FitFailure { reason: String, diagnostics: String },

    #[error("calibration failure: accepted {accepted} members, floor is {floor}")]
    Calibration { accepted: usize, floor: usize },

    #[error("MCMC chain rejected: {0}")]
    InvalidChain(String),

    #[error("model evaluation failed at sample {sample:?}: {source}")]
    ModelEvaluation {
        sample: Vec<f64>,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn degenerate(msg: impl Into<String>) -> Self {
        Error::Degenerate(msg.into())
    }

    pub fn fit(reason: impl Into<String>, diagnostics: impl Into<String>) -> Self {
        Error::FitFailure {
            reason: reason.into(),
            diagnostics: diagnostics.into(),
        }
    }

    /// Process exit code for the CLI: 2 config, 3 data, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter(_) | Error::Config(_) | Error::Json(_) => 2,
            Error::Degenerate(_) | Error::Data(_) | Error::MalformedRow { .. } | Error::Io(_) | Error::Csv(_) => 3,
            Error::Domain { .. } | Error::FitFailure { .. } | Error::Calibration { .. } | Error::InvalidChain(_) => 4,
            Error::ModelEvaluation { source, .. } => source.exit_code(),
        }
    }
}
