use thiserror::Error;

/// Errors raised by the update formulas, oracles and the minimizer.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite value encountered: {0}")]
    NonFinite(&'static str),

    #[error("curvature condition violated (s'y = {sty:e}, beta = {beta})")]
    CurvatureViolation { sty: f64, beta: String },

    #[error("inverse update denominator {0:e} is below tolerance")]
    SingularDenominator(f64),

    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),

    #[error("normal equations are singular or rank deficient")]
    SingularSystem,

    #[error("matrix is numerically singular: {0}")]
    SingularInput(&'static str),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid dimension {n} for problem {problem}")]
    BadDimension { problem: &'static str, n: usize },

    #[error("problem metadata missing: {0}")]
    MissingMetadata(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
