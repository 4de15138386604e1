use thiserror::Error;

/// Errors surfaced by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum TebeError {
    #[error("twist parameter zeta = {0} outside [0, 1/2)")]
    ZetaOutOfRange(f64),

    #[error("charge k must be at least 1 (got {0})")]
    InvalidCharge(u32),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value in {context} at tau = {tau}")]
    NonFinite { context: &'static str, tau: f64 },

    #[error("series evaluated at tau = {tau} beyond its seed radius {tau_seed}")]
    OutsideSeriesRange { tau: f64, tau_seed: f64 },

    #[error("resonant recurrence step at power tau^{power} (residual {residual:e})")]
    Resonance { power: usize, residual: f64 },

    #[error("trajectory escaped at tau = {tau}")]
    Escape { tau: f64 },

    #[error("step size underflow at tau = {tau}")]
    StepUnderflow { tau: f64 },

    #[error("singular shooting Jacobian (condition estimate {cond:e})")]
    SingularJacobian { cond: f64 },

    #[error("point at tau = {tau} outside profile range [0, {tau_max}]")]
    Extrapolation { tau: f64, tau_max: f64 },

    #[error("operator output leaves the (gamma, delta) form by {deviation:e} at psi = {psi}")]
    StructureViolation { psi: f64, deviation: f64 },

    #[error("continuation stalled at zeta = {last_good} (step {step:e})")]
    Stall { last_good: f64, step: f64 },

    #[error("constant fit failed: {0}")]
    FitFailure(String),
}

pub type Result<T, E = TebeError> = std::result::Result<T, E>;
