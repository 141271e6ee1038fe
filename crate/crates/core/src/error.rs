use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{0}")]
    Domain(String),

    #[error("cannot normalize: node {node} has no outgoing weight")]
    Normalization { node: usize },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    Iteration { iterations: usize, residual: f64 },

    #[error("{n} nodes exceeds the enumeration limit of {limit}")]
    Size { n: usize, limit: usize },

    #[error("config: {0}")]
    Config(String),

    #[error("monotonicity violated at round {round}, node {node}: {detail}")]
    NonMonotone {
        round: usize,
        node: usize,
        detail: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Whether the error stems from user configuration rather than the run itself.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Parse { .. } | Error::Io { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
