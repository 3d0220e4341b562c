use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("snapshot dates must differ and advance: {0} -> {1}")]
    HorizonZero(chrono::NaiveDate, chrono::NaiveDate),

    #[error("duplicate user id {user:?} in snapshot")]
    DuplicateUser { user: String },

    #[error("malformed input at line {line}: {msg}")]
    Malformed { line: usize, msg: String },

    #[error("insufficient data: need at least {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("degenerate tail: all values equal to the threshold")]
    DegenerateTail,

    #[error("fit did not converge after {iterations} iterations (best mu={best_mu}, sigma={best_sigma}, loglik={best_loglik})")]
    FitFailure {
        iterations: usize,
        best_mu: f64,
        best_sigma: f64,
        best_loglik: f64,
    },

    #[error("singular regression design: {0}")]
    SingularDesign(&'static str),

    #[error("bin means change sign; split regimes before fitting")]
    RegimeMix,

    #[error("no bins retained with at least {min_count} rows; try a smaller minimum count (--min-count)")]
    NoRetainedBins { min_count: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config key {key:?}: {msg}")]
    Config { key: String, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
