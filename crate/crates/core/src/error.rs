use thiserror::Error;

/// Errors produced by the simulator.
#[derive(Debug, Error)]
pub enum Error {
    /// A basis index or photon number does not fit in the truncated space.
    #[error("{what} = {value} is out of range for dimension {dim}")]
    OutOfRange {
        what: &'static str,
        value: usize,
        dim: usize,
    },

    /// Two objects that must share a Hilbert-space dimension do not.
    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },

    /// A scalar or structural argument violates a precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An operator required to be Hermitian deviates beyond tolerance.
    #[error("operator is not Hermitian: max |O - O^dag| = {deviation:.3e} exceeds {tolerance:.1e}")]
    NotHermitian { deviation: f64, tolerance: f64 },

    /// The probe state carries no information about the parameter.
    #[error("state is insensitive to the parameter (zero generator variance)")]
    ZeroVariance,

    /// A precision formula was evaluated where it is undefined.
    #[error("undefined precision: {0}")]
    UndefinedPrecision(String),

    /// The fixed-step integrator left its validity regime.
    #[error("integrator unstable: trace drift {drift:.3e} exceeds 1e-6; retry with dt smaller than {dt:.3e}")]
    IntegratorUnstable { drift: f64, dt: f64 },

    /// Nonlinear least squares did not reach the gradient tolerance.
    #[error("fringe fit did not converge after {iterations} iterations (gradient {gradient:.3e})")]
    FitNotConverged { iterations: usize, gradient: f64 },

    /// The fitted parameters violate the fringe-model constraints.
    #[error("invalid fit: {0}")]
    InvalidFit(String),

    /// The optimizer found no working point with a usable slope.
    #[error("degenerate optimization: {0}")]
    DegenerateOptimization(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
