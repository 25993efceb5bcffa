use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("malformed expression `{expr}`: {reason}")]
    Expression { expr: String, reason: String },

    #[error("expression `{expr}` is not finite at ({x}, {y})")]
    NonFiniteSample { expr: String, x: f64, y: f64 },

    #[error("non-finite value at index {0}")]
    NonFinite(usize),

    #[error("exponent bound violated: p = {value} at quadrature point {index} (need p > 1)")]
    ExponentBound { index: usize, value: f64 },

    #[error("invalid coefficients: {0}")]
    InvalidCoefficients(String),

    #[error("field does not vanish on the boundary (max |u| = {0:e})")]
    BoundaryViolation(f64),

    #[error("field is identically zero")]
    ZeroField,

    #[error("ball (center {center:?}, radius {radius}) is not contained in the domain")]
    BallOutsideDomain { center: Vec<f64>, radius: f64 },

    #[error("root search did not converge after {0} iterations")]
    NoConvergence(usize),

    #[error("B(u) <= 0 for every trial field: b+ is degenerate")]
    DegenerateB,

    #[error("shooting bracket failure: {0}")]
    ShootingBracket(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("linear solve failed: {0}")]
    Singular(String),
}

pub type Result<T> = std::result::Result<T, Error>;
