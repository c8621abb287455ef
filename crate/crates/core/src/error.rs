use thiserror::Error;

/// Errors raised by the simulation and analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("lattice {nx}x{ny} has {sites} site(s); at least 2 are required")]
    TooFewSites { nx: usize, ny: usize, sites: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("site index {index} is outside a lattice of {sites} sites")]
    InvalidSite { index: usize, sites: usize },

    #[error("coupling matrix is tagged {found:?}, expected {expected:?}")]
    ModelMismatch {
        expected: crate::lattice::Model,
        found: crate::lattice::Model,
    },

    #[error("sample times must be finite, non-negative and strictly increasing")]
    InvalidTimeGrid,

    #[error(
        "integrator step underflow at t = {time}: step {step:e} still violates \
         conservation (norm drift {norm_drift:e}, energy drift {energy_drift:e})"
    )]
    StepUnderflow {
        time: f64,
        step: f64,
        norm_drift: f64,
        energy_drift: f64,
    },

    #[error("{sites} spins exceed the state-vector cap of {cap}")]
    TooManySpins { sites: usize, cap: usize },

    #[error("state vector has norm {norm}, expected 1")]
    NotNormalized { norm: f64 },

    #[error("Krylov propagator failed to converge at t = {time} (error estimate {estimate:e})")]
    PropagatorDiverged { time: f64, estimate: f64 },

    #[error("power-law fit needs at least 3 crossed separations with j >= {j_min}, found {found}")]
    InsufficientPoints { j_min: usize, found: usize },

    #[error("contours use different thresholds ({a} vs {b})")]
    ThresholdMismatch { a: f64, b: f64 },

    #[error("contours cover different separations")]
    SeparationMismatch,
}

pub type Result<T> = std::result::Result<T, Error>;
