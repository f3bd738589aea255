use thiserror::Error;

/// Failure modes of the numeric kernels and the functionals built on them.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("series did not converge after {iterations} terms (last term {last_term:e})")]
    Convergence { iterations: usize, last_term: f64 },

    #[error("quadrature tolerance not met: value {value}, error estimate {estimate:e}")]
    ToleranceNotMet { value: f64, estimate: f64 },

    #[error("target {target} not bracketed by [{lo}, {hi}] (f values {f_lo}, {f_hi})")]
    Bracket {
        target: f64,
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },

    #[error("point maps to infinity under the isometry")]
    Singularity,

    #[error("level {level} is at or above the maximum {max}")]
    LevelAboveMax { level: f64, max: f64 },

    #[error("derivative of the distribution function is not resolvable at level {level}")]
    DegenerateLevel { level: f64 },

    #[error("u* and v* do not cross: the function is the extremizer")]
    NoCrossing,

    #[error("invalid parameters: {0}")]
    Parameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
