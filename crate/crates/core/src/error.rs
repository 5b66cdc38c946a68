use thiserror::Error;

/// Errors raised by the numerical kernels.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("drift pole at ({x}, {y}): |cosh 2y - cos 2x| = {gap:e}")]
    Pole { x: f64, y: f64, gap: f64 },

    #[error("quadrature did not reach tolerance {tol:e} (estimated error {estimate:e})")]
    Quadrature { tol: f64, estimate: f64 },

    #[error("sample overflow: |z| exceeded {threshold:e}")]
    Overflow { threshold: f64 },

    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("not converged after t = {max_t} (last residual {residual:e})")]
    NotConverged { max_t: f64, residual: f64 },

    #[error("cascade level {level} did not converge (last residual {residual:e})")]
    CascadeNotConverged { level: usize, residual: f64 },

    #[error("fit window [{lo}, {hi}] contains {count} usable points")]
    EmptyWindow { lo: f64, hi: f64, count: usize },

    #[error("non-positive values in fit window at coordinate {at}")]
    NonPositiveValues { at: f64 },

    #[error("values below the noise floor {floor:e}")]
    BelowNoiseFloor { floor: f64 },

    #[error("row y = {y} lies outside the grid")]
    RowOutOfRange { y: f64 },

    #[error("unsupported group dimension n = {0}")]
    Unsupported(usize),

    #[error("ill-conditioned matrix (condition number {0:e})")]
    IllConditioned(f64),

    #[error("eigenvalue collision: min |lambda_j - lambda_k| = {0:e}")]
    Collision(f64),

    #[error("boundary values reach {ratio:e} of the maximum; periodic box too small")]
    Alias { ratio: f64 },

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
