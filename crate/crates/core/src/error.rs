use thiserror::Error;

/// Errors reported by the simulation and theory routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("spectral argument must be non-real, got {re}{im:+}i")]
    RealArgument { re: f64, im: f64 },

    #[error("quadrature did not converge for {what}: estimate {estimate:e}, error {error:e}")]
    Quadrature {
        what: String,
        estimate: f64,
        error: f64,
    },

    #[error("stable profile inversion produced negative density {value:e} at t = {t}")]
    StableInversion { t: f64, value: f64 },

    #[error("small-p expansion fit failed: relative residual {residual:e} exceeds {tolerance:e}")]
    ExpansionFit { residual: f64, tolerance: f64 },

    #[error("tridiagonal eigenvalue iteration did not converge at index {index}")]
    NonConvergence { index: usize },

    #[error("dense solve failed: matrix is numerically singular")]
    Singular,

    #[error("epsilon extrapolation did not settle: successive estimates {previous:e} and {current:e}")]
    Extrapolation { previous: f64, current: f64 },

    #[error("scaling fit aborted: correlation changes sign across the separation range")]
    SignChange,

    #[error("test function `{function}` has no derivative of order {order}")]
    DerivativeUnavailable { function: String, order: usize },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
