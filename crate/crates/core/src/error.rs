use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid knot vector: {0}")]
    InvalidKnots(String),
    #[error("basis index {index} out of range 0..{len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("parameter {t} outside of the domain [{a}, {b})")]
    OutOfDomain { t: f64, a: f64, b: f64 },
    #[error("derivative requires degree >= 1")]
    DegreeZeroDerivative,
    #[error("weights must be positive, got {0}")]
    NonPositiveWeight(f64),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("multiplicity of knot {knot} would exceed {max}")]
    MultiplicityExceeded { knot: f64, max: usize },
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("degenerate curve derivative at t = {0}")]
    DegenerateDerivative(f64),
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("knot vector is not a refinement: {0}")]
    NotARefinement(String),
    #[error("quadrature order must be at least 1")]
    InvalidOrder,
    #[error("duplicate interpolation nodes")]
    DuplicateNodes,
    #[error("matrix is not symmetric positive definite")]
    NotPositiveDefinite,
    #[error("invalid ansatz space: {0}")]
    InvalidSpace(String),
    #[error("evaluation at geometry corner t = {0}")]
    CornerEvaluation(f64),
    #[error("invalid data: {0}")]
    InvalidData(String),
    #[error("unknown name '{0}'")]
    UnknownName(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
