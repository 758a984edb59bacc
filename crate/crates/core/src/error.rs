use thiserror::Error;

/// Errors produced by model construction, density evaluation, sampling and
/// the verification harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension must be at least 2, got {0}")]
    DimensionTooSmall(usize),

    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("{what} contains a non-finite value")]
    NonFinite { what: &'static str },

    #[error("diffusion operator B is not symmetric (max |B - B^T| = {max_asymmetry:e})")]
    NotSymmetric { max_asymmetry: f64 },

    #[error("diffusion operator B is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("membrane normal nu must have unit length (|nu| = {norm})")]
    NotUnitNormal { norm: f64 },

    #[error("tangential drift alpha must lie in the membrane plane ((alpha, nu) = {dot:e})")]
    AlphaNotInPlane { dot: f64 },

    #[error("skewness q must lie in [-1, 1], got {0}")]
    SkewOutOfRange(f64),

    #[error("time must be positive, got {0}")]
    NonPositiveTime(f64),

    #[error("local time value must be nonnegative, got {0}")]
    NegativeLocalTime(f64),

    #[error("the no-hit branch requires a start off the membrane (x_nu = {0})")]
    StartsOnMembrane(f64),

    #[error("quadrature did not converge within {panels} panels (residual estimate {residual:e})")]
    QuadratureNotConverged { panels: usize, residual: f64 },

    #[error("invalid quadrature settings: {0}")]
    InvalidQuadrature(String),

    #[error("invalid test function support: {0}")]
    InvalidSupport(String),

    #[error("sampler tabulation failed: {0}")]
    Tabulation(String),

    #[error("time grid must start at 0 and be strictly increasing: {0}")]
    InvalidGrid(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown verification suite '{0}'")]
    UnknownSuite(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
