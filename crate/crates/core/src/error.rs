use thiserror::Error;

use crate::graph::ValidationReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(ValidationReport),

    #[error("graph has {0} nodes, dense representation is limited to {max}", max = crate::graph::MAX_NODES)]
    GraphTooLarge(usize),

    #[error("empty graph")]
    EmptyGraph,

    #[error("node {0} is isolated (zero degree)")]
    IsolatedNode(usize),

    #[error("total degree is zero")]
    ZeroTotalDegree,

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("matrix is not square: {0} x {1}")]
    NotSquare(usize, usize),

    #[error("eigensolver did not converge after {0} sweeps")]
    NoConvergence(usize),

    #[error("matrix is not positive semidefinite (eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("gamma {0} is outside (0, 1]")]
    GammaOutOfRange(f64),

    #[error("fractional adjacency has negative entry {value:e} at ({row}, {col})")]
    NegativeOffDiagonal { row: usize, col: usize, value: f64 },

    #[error("fractional Laplacian has zero trace")]
    ZeroTrace,

    #[error("graph has {0} nodes, at least 3 are required")]
    TooSmall(usize),

    #[error("walk-count oracle limited to n <= 8 and k <= 6 (got n = {n}, k = {k})")]
    OracleScaleExceeded { n: usize, k: usize },

    #[error("unknown category {value:?} for attribute {attribute:?}")]
    UnknownCategory { attribute: String, value: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("ensemble is empty")]
    EmptyEnsemble,

    #[error("degenerate labels: {0}")]
    DegenerateLabels(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Stable variant name, used in CLI diagnostics and error reports.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidGraph(_) => "InvalidGraph",
            Error::GraphTooLarge(_) => "GraphTooLarge",
            Error::EmptyGraph => "EmptyGraph",
            Error::IsolatedNode(_) => "IsolatedNode",
            Error::ZeroTotalDegree => "ZeroTotalDegree",
            Error::NotSymmetric(_) => "NotSymmetric",
            Error::NotSquare(..) => "NotSquare",
            Error::NoConvergence(_) => "NoConvergence",
            Error::NotPsd(_) => "NotPsd",
            Error::GammaOutOfRange(_) => "GammaOutOfRange",
            Error::NegativeOffDiagonal { .. } => "NegativeOffDiagonal",
            Error::ZeroTrace => "ZeroTrace",
            Error::TooSmall(_) => "TooSmall",
            Error::OracleScaleExceeded { .. } => "OracleScaleExceeded",
            Error::UnknownCategory { .. } => "UnknownCategory",
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::NonFiniteLoss { .. } => "NonFiniteLoss",
            Error::EmptyEnsemble => "EmptyEnsemble",
            Error::DegenerateLabels(_) => "DegenerateLabels",
            Error::Parse(_) => "Parse",
            Error::Io(_) => "Io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
