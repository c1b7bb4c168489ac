use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid algebra: {0}")]
    InvalidAlgebra(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("operator is not self-adjoint (|x - x*| = {defect:.3e})")]
    NotSelfAdjoint { defect: f64 },

    #[error("operator is not a projection (defect {defect:.3e})")]
    NotProjection { defect: f64 },

    #[error("trace has non-negligible imaginary part {0:.3e}")]
    ComplexTrace(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("function undefined at eigenvalue {0}")]
    FunctionUndefined(f64),

    #[error("subalgebra closure did not stabilise within {0} rounds")]
    ClosureNotReached(usize),

    #[error("dimension cap exceeded: {requested} > {cap}")]
    DimensionCap { requested: usize, cap: usize },

    #[error("martingale check failed: {0}")]
    NotMartingale(String),

    #[error("quadrature did not converge (estimated error {0:.3e})")]
    Quadrature(f64),

    #[error("horizon too short: {0}")]
    Horizon(String),

    #[error("json: {0}")]
    Json(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e.to_string())
    }
}
