use boundent_linalg::LinalgError;
use boundent_sdp::{SdpError, SdpSolution, SdpStatus};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Linalg(#[from] LinalgError),

    #[error(transparent)]
    Sdp(#[from] SdpError),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid measurement: {0}")]
    InvalidPovm(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported dimension d = {d}: {reason}")]
    Unsupported { d: usize, reason: String },

    #[error("no violation: score {value} does not exceed bound {bound}")]
    NoViolation { value: f64, bound: f64 },

    #[error("solver did not reach optimality: {0}")]
    Solver(String),

    #[error("certificate rejected: {0}")]
    Certificate(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Accepts an optimal solution, or one that stalled within a thousand times
/// the requested tolerance.
pub(crate) fn check_solution(sol: &SdpSolution, tol: f64, what: &str) -> Result<()> {
    let usable = sol.status == SdpStatus::Optimal
        || (sol.status == SdpStatus::NumericalLimit
            && sol.gap <= 1e3 * tol
            && sol.primal_infeasibility <= 1e3 * tol
            && sol.dual_infeasibility <= 1e3 * tol);
    if usable {
        Ok(())
    } else {
        Err(Error::Solver(format!(
            "{what}: status {:?}, gap {:.2e}, residuals {:.2e}/{:.2e}",
            sol.status, sol.gap, sol.primal_infeasibility, sol.dual_infeasibility
        )))
    }
}
