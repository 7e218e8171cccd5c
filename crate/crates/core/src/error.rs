use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    /// A state or generator invariant failed during time stepping.
    #[error("physics invariant violated at t = {t:.4} ps: {what}")]
    Physics { t: f64, what: String },

    #[error("time {t:.4} ps is outside the cached propagator grid [{start:.4}, {end:.4}] ps")]
    CacheMiss { t: f64, start: f64, end: f64 },

    #[error("{0}")]
    Domain(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
