use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("i/o error: {0}")]
    Stream(#[from] std::io::Error),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("line {line}: node id {id} out of range for graph with {n} nodes")]
    NodeOutOfRange { line: usize, id: u64, n: usize },

    #[error("{what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value in {what} at row {row}, column {col}")]
    NonFinite {
        what: &'static str,
        row: usize,
        col: usize,
    },

    #[error("eigensolver did not converge after {iterations} iterations (residual norms: {residuals:?})")]
    EigenNoConvergence {
        iterations: usize,
        residuals: Vec<f64>,
    },

    #[error("pagerank did not converge after {iterations} iterations (last L1 change {residual:e})")]
    PageRankNoConvergence { iterations: usize, residual: f64 },

    #[error("labels need at least one positive and one negative example")]
    SingleClass,

    #[error("not enough {class} nodes: need {needed}, have {available}")]
    InsufficientClass {
        class: &'static str,
        needed: usize,
        available: usize,
    },

    #[error("table header: {0}")]
    Header(String),

    #[error("backend process exited with {status}: {stderr}")]
    BackendFailed { status: String, stderr: String },

    #[error("backend process timed out after {secs:.1}s")]
    BackendTimeout { secs: f64 },

    #[error("backend output line {line}: {msg}")]
    BackendOutput { line: usize, msg: String },

    #[error("backend output line {line}: probability {value} outside [0, 1]")]
    ScoreOutOfRange { line: usize, value: f64 },

    #[error("backend returned {found} scores for {expected} queries")]
    ScoreCount { expected: usize, found: usize },

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}
