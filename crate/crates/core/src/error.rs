use thiserror::Error;

/// Errors raised by the library layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid interval [{a}, {b}]")]
    InvalidInterval { a: f64, b: f64 },

    #[error("{what} did not converge (achieved {achieved:e})")]
    NonConvergence { what: String, achieved: f64 },

    #[error("curvature violation at s = {s}, theta = {theta}: density {value:e}")]
    CurvatureViolation { s: f64, theta: f64, value: f64 },

    #[error("C2 matching failure: residual {residual:e}")]
    MatchingFailure { residual: f64 },

    #[error("index {index} out of range 1..={max}")]
    IndexOutOfRange { index: usize, max: usize },

    #[error("degenerate dimension d_p = {0}")]
    DegenerateDimension(i64),

    #[error("rank deficiency at column {column}: residual norm {residual:e}")]
    RankDeficient { column: usize, residual: f64 },

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("s = {s} lies outside the cusp region s <= {limit}")]
    Region { s: f64, limit: f64 },

    #[error("empty schedule at p = {p}; first admissible p is {min_p}")]
    EmptySchedule { p: u32, min_p: u32 },

    #[error("differentiation instability: series {series:e} vs finite difference {fd:e}")]
    Differentiation { series: f64, fd: f64 },

    #[error("root finder failed on sample {sample}: backward error {residual:e}")]
    RootFinder { sample: usize, residual: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
