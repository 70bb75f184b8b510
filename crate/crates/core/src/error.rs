use thiserror::Error;

use crate::kernels::Vec3;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A kernel was evaluated closer than the singularity guard to its source.
    #[error("kernel evaluated at a singular point (|x| = {distance:e} < {guard:e})")]
    Singular { distance: f64, guard: f64 },

    /// A flow evaluation hit the source of one particle in a suspension sum.
    #[error("evaluation point {point:?} hits a singular source of particle {particle}")]
    SingularParticle { particle: usize, point: Vec3 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Force-offset admissibility violated in strict mode.
    #[error("beta = {beta} is not admissible: need 1 < beta < {upper}")]
    Admissibility { beta: f64, upper: f64 },

    #[error("packing failure: placed {placed} of {requested} particles after {attempts} attempts")]
    PackingFailure {
        placed: usize,
        requested: usize,
        attempts: usize,
    },

    #[error("quadrature did not reach tolerance {tolerance:e} (last change {achieved:e})")]
    Quadrature { tolerance: f64, achieved: f64 },

    #[error("dipole calibration failed: remainder decay exponent {exponent:.3} is shallower than {required}")]
    Calibration { exponent: f64, required: f64 },

    #[error("no convergence: {0}")]
    Convergence(String),

    #[error("operation not supported by this field: {0}")]
    Unsupported(&'static str),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<toml::de::Error> for Error {
    fn from(e: toml::de::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<toml::ser::Error> for Error {
    fn from(e: toml::ser::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
