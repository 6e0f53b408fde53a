//! Crate-wide error type. Conditions that do not invalidate a result
//! (degenerate pole clusters, unstable means, truncated 1D mode sets) are
//! reported as flags on the result structs instead.

use crate::C64;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Mode frequencies must be finite, strictly positive, and sorted.
    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),

    /// Coupling amplitudes must be finite and dimensionally consistent.
    #[error("invalid coupling: {0}")]
    InvalidCoupling(String),

    /// Mismatched mode/channel counts between model components.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Adaptive quadrature failed to reach the requested tolerance.
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    /// D(ω) is numerically singular (ω sits on a real pole).
    #[error("response matrix singular at omega = {omega}: condition estimate {cond:.3e}")]
    SingularResponse { omega: f64, cond: f64 },

    /// Newton refinement of a pole did not converge.
    #[error("pole refinement failed: {msg} (last iterate {last_iterate}, last step {last_step:.3e})")]
    PoleRefinement {
        msg: String,
        last_iterate: C64,
        last_step: f64,
    },

    /// The Lyapunov equation has no damped steady state.
    #[error("no steady state: {0}")]
    NoSteadyState(String),

    /// Explicit stochastic stepping would be unstable at the requested dt.
    #[error("step size too large: {0}")]
    StepSize(String),

    /// The discretized bath cannot resolve the requested decay.
    #[error("bath too coarse: {0}")]
    BathTooCoarse(String),

    /// The decay fit was not exponential to the required quality.
    #[error("fit rejected: R^2 = {r_squared:.6}, gamma estimate {gamma_estimate:.6e}")]
    FitRejected { r_squared: f64, gamma_estimate: f64 },

    /// Backend (LAPACK) failure.
    #[error("linear algebra: {0}")]
    Linalg(String),
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Linalg(e.to_string())
    }
}
