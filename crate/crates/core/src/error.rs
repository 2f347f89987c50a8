use thiserror::Error;

/// Errors produced by the learner, the metrics and the data layer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate model: {0}")]
    DegenerateModel(String),

    #[error("matrix `{name}` is ill-conditioned: Cholesky failed with jitter up to {jitter:e}")]
    IllConditioned { name: String, jitter: f64 },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("parse error at row {row}{}: {message}", .column.map(|c| format!(", column {c}")).unwrap_or_default())]
    Parse {
        row: usize,
        column: Option<usize>,
        message: String,
    },

    #[error("unknown {kind} `{name}`")]
    UnknownStrategy { kind: &'static str, name: String },

    /// Carries the inner error in its message rather than as a `source`, so
    /// chained reports do not print it twice.
    #[error("iteration {iteration}: {inner}")]
    AtIteration { iteration: usize, inner: Box<Error> },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// The innermost error, looking through iteration context.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtIteration { inner, .. } => inner.root(),
            other => other,
        }
    }

    pub fn at_iteration(self, iteration: usize) -> Self {
        Error::AtIteration {
            iteration,
            inner: Box::new(self),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
