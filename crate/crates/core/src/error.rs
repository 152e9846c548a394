use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the inference pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the function (distinct from a
    /// log-density of `-inf`, which is a value).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("prior construction failed: {0}")]
    Prior(String),

    #[error("chain initialization failed: {0}")]
    ChainInit(String),

    #[error("sampler failure at iteration {iteration}: {message}")]
    Sampler { iteration: usize, message: String },

    #[error("degenerate credible region: {0}")]
    Region(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("scenario {scenario} aborted: {message}")]
    Scenario { scenario: String, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

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

    /// Process exit code used by the command-line front end.
    ///
    /// 2: input or parse error, 3: numerical or chain failure, 4: config error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. } | Error::Io { .. } | Error::Csv(_) | Error::Json(_) => 2,
            Error::Domain(_) => 2,
            Error::Config(_) => 4,
            Error::Estimation(_)
            | Error::Prior(_)
            | Error::ChainInit(_)
            | Error::Sampler { .. }
            | Error::Region(_)
            | Error::Numerical(_)
            | Error::Scenario { .. } => 3,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
