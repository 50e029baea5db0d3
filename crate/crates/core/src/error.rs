use thiserror::Error;

/// Errors raised by the solver, estimators and experiment drivers.
#[derive(Debug, Error)]
pub enum Error {
    /// A value lies outside the domain on which an operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A non-finite number entered or left a numerical kernel.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// An inconsistent or unsupported configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Two inputs that must agree in length do not.
    #[error("length mismatch: expected {expected}, got {actual} ({what})")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    /// A discretisation outside the mean-square stability region where one is required.
    #[error("unstable discretisation: {0}")]
    Unstable(String),

    /// The tranche notional is zero at every payment date, so no spread exists.
    #[error("degenerate tranche: discounted outstanding notional is zero")]
    DegenerateTranche,

    /// The multilevel estimator hit its finest allowed level with the bias still too large.
    #[error(
        "no convergence: bias estimate {bias_estimate:.3e} exceeds target {target:.3e} at finest level {level}"
    )]
    NoConvergence {
        level: usize,
        bias_estimate: f64,
        target: f64,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
