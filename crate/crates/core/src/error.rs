use thiserror::Error;

/// Errors raised by the search engine and its supporting modules.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("network must have at least one node")]
    EmptyNetwork,
    #[error("self-loop on node {0}")]
    SelfLoop(usize),
    #[error("edge endpoint {node} out of range for {node_count} nodes")]
    EndpointOutOfRange { node: usize, node_count: usize },
    #[error("unknown node label `{0}`")]
    UnknownLabel(String),
    #[error("duplicate node label `{0}`")]
    DuplicateLabel(String),
    #[error("unknown edge {0}")]
    UnknownEdge(String),
    #[error("relevant count {y} exceeds screened count {n}")]
    InconsistentCounts { n: u64, y: u64 },
    #[error("network has {nodes} nodes; exact enumeration is capped at {cap}")]
    NodeCapExceeded { nodes: usize, cap: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("infeasible prior: {0}")]
    InfeasiblePrior(String),
    #[error("inconsistent moments: {0}")]
    InconsistentMoments(String),
    #[error("matrix is singular: {0}")]
    Singular(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("no available edges")]
    NoAvailableEdges,
    #[error("undefined statistic: {0}")]
    Undefined(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
