use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("size mismatch: expected {expected} points per axis, got {got}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("mesh size mismatch: operator h = {op}, field h = {field}")]
    MeshMismatch { op: f64, field: f64 },
    #[error("dense assembly guard exceeded: {unknowns} unknowns > {limit}")]
    GuardExceeded { unknowns: usize, limit: usize },
    #[error("stencil has a zero diagonal entry")]
    ZeroDiagonal,
    #[error("stencil symbol is not of one sign over high frequencies")]
    IndefiniteSymbol,
    #[error("line search failed after {halvings} halvings")]
    LineSearchFailure { halvings: usize },
    #[error("need at least {needed} trace records, have {have}")]
    InsufficientRecords { needed: usize, have: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("hypotheses violated: {0}")]
    Hypotheses(String),
    #[error("hierarchy misconfigured: {0}")]
    Hierarchy(String),
    #[error("matrix is singular or not positive definite")]
    Singular,
    #[error("conjugate gradient breakdown: non-positive curvature {0}")]
    Breakdown(f64),
    #[error("operation requires a quadratic (linear) problem")]
    NotQuadratic,
}

pub type Result<T> = std::result::Result<T, Error>;
