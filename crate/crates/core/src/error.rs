use thiserror::Error;

use crate::NodeId;

pub type Result<T> = std::result::Result<T, OqwError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OqwError {
    #[error("matrix must be square and non-empty, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        found: usize,
    },

    #[error("non-finite entry in {0}")]
    NonFinite(String),

    #[error("unknown node {0}")]
    UnknownNode(NodeId),

    #[error("duplicate node or transition: {0}")]
    Duplicate(String),

    /// The structure is fine but the Kraus completeness condition fails.
    #[error("transition operators leaving node {node} are not normalized: deviation {deviation:.6e} exceeds tolerance {tol:.1e}")]
    NotNormalized {
        node: NodeId,
        deviation: f64,
        tol: f64,
    },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("capacity exceeded for {what}: dimension {required} exceeds limit {limit}")]
    Capacity {
        what: &'static str,
        required: usize,
        limit: usize,
    },

    #[error("{context} is not unitary (defect {defect:.6e})")]
    NotUnitary { context: String, defect: f64 },

    #[error("coins are not simultaneously diagonalizable: {0}")]
    NotSimultaneouslyDiagonalizable(String),

    #[error("unitary walk condition violated: ||C^dag B|| = {cross_norm:.6e}")]
    UqwConditionViolated { cross_norm: f64 },

    #[error("no convergence after {steps} steps (last residual {residual:.6e})")]
    NotConverged { steps: usize, residual: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty distribution")]
    EmptyDistribution,

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error("parse error: {0}")]
    Parse(String),
}
