use thiserror::Error;

/// Errors raised by every module of the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("no isometry possible: domain dimension {in_dim} exceeds codomain dimension {out_dim}")]
    NoIsometry { in_dim: usize, out_dim: usize },

    #[error("singular matrix: smallest singular value {smallest:e}")]
    Singular { smallest: f64 },

    #[error("directed cycle through edges {edges:?}")]
    Cycle { edges: Vec<usize> },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("unsupported topology: {0}")]
    UnsupportedTopology(String),

    #[error("objective is +inf: zero amplitude on sequence {sequence:?}")]
    InfiniteObjective { sequence: Vec<usize> },

    #[error("divergence is +inf: q vanishes on sequence {sequence:?} where p > 0")]
    InfiniteDivergence { sequence: Vec<usize> },

    #[error("singular gradient: zero amplitude on sequence {sequence:?}")]
    SingularGradient { sequence: Vec<usize> },

    #[error("cannot condition on zero-probability prefix {prefix:?}")]
    Conditioning { prefix: Vec<usize> },

    #[error("fit error: {0}")]
    Fit(String),

    #[error("empty multiset: {0}")]
    EmptyMultiset(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn shape_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Shape(msg.into()))
}

pub(crate) fn arg_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Argument(msg.into()))
}
