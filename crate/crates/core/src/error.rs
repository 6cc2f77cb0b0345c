use thiserror::Error;

/// Errors raised by the model, spectral, dynamics and analysis layers.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("invalid system: {0}")]
    InvalidSystem(String),

    #[error("invalid pulse parameters: {0}")]
    InvalidPulses(String),

    #[error("detuning of intermediate state {index} is exactly zero and cannot enter an S-sum")]
    ZeroDetuningInSum { index: usize },

    #[error("pump and Stokes envelopes are both zero at t = {t}")]
    BothEnvelopesZero { t: f64 },

    #[error("matrix is not symmetric (max deviation {max_deviation:.3e})")]
    NonSymmetricInput { max_deviation: f64 },

    #[error("Jacobi iteration did not converge after {sweeps} sweeps")]
    NotConverged { sweeps: usize },

    #[error("ambiguous eigenvector tracking at t = {t}: best overlap {overlap:.3} < 0.5")]
    AmbiguousTracking { t: f64, overlap: f64 },

    #[error("time grid must be strictly increasing with at least one point")]
    InvalidTimeGrid,

    #[error("asymptotic formula needs a nonzero {which} sum")]
    DegenerateSums { which: &'static str },

    #[error("expected exactly one resonant intermediate state at index {index}")]
    NotSingleResonance { index: usize },

    #[error("expected {expected} resonant intermediate states, found {found}")]
    WrongResonanceCount { expected: usize, found: usize },

    #[error("resonant couplings are not proportional")]
    NotProportional,

    #[error("no level crossing: S_a2*S_b2 = {product:.6e} <= 0")]
    NoCrossing { product: f64 },

    #[error("integrator could not meet tolerances at t = {t} (step {step:.3e})")]
    ToleranceNotMet { t: f64, step: f64 },

    #[error("norm drift {drift:.3e} exceeds 1e-6")]
    NormDriftExceeded { drift: f64 },

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("invalid integrator configuration: {0}")]
    InvalidIntegrator(String),
}

pub type Result<T> = std::result::Result<T, Error>;
