use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("node {0} has zero degree")]
    IsolatedNode(usize),
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("eigensolver did not converge after {0} sweeps")]
    NoConvergence(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("graph is disconnected")]
    Disconnected,
    #[error("graph still disconnected after {0} resampling attempts")]
    DisconnectedAfterRetries(usize),
    #[error("signal has zero energy")]
    ZeroSignal,
    #[error("reference signal is not binary (entry {index} = {value})")]
    NonBinary { index: usize, value: f64 },
    #[error("cluster {0} has no edges to any other cluster")]
    IsolatedCluster(usize),
    #[error("dendrogram cannot be cut into {0} clusters")]
    UnachievableSize(usize),
    #[error("operator row {0} is zero")]
    ZeroRow(usize),
    #[error("non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("conjugate gradient did not converge in {iterations} iterations (residual {residual:e})")]
    SolverNonConvergence { iterations: usize, residual: f64 },
    #[error("step size violates eta * sigma_1^2 <= 1 ({0})")]
    StepTooLarge(f64),
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("config error: {0}")]
    Config(String),
    #[error("csv schema violation in {file}: {msg}")]
    Schema { file: String, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Whether the error originates from user-provided configuration or input
    /// files rather than from a failed computation.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::Parse { .. } | Error::InvalidArgument(_)
        )
    }
}
