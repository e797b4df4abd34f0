use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input violates a documented precondition.
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("node index {index} out of range for tree with {len} nodes")]
    NodeOutOfRange { index: usize, len: usize },

    #[error("measures are defined on different trees")]
    TreeMismatch,

    #[error("support point {point} is not mapped in slice {slice}")]
    UnmappedPoint { point: usize, slice: usize },

    #[error("dimension {dim} is too large for hypercube partitioning (max {max}); use clustering-based trees")]
    DimensionTooLarge { dim: usize, max: usize },

    #[error("problem size {size} exceeds the limit of {limit}")]
    SizeLimit { size: usize, limit: usize },

    #[error("cardinality mismatch: {left} vs {right}")]
    Cardinality { left: usize, right: usize },

    #[error("transport problem is infeasible")]
    Infeasible,

    #[error("separation depth exceeds cap of {0}")]
    DepthCap(usize),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}
