use alloc::boxed::Box;
use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(&'static str),
    #[error("singular phase evaluation at theta = {theta}")]
    SingularEvaluation { theta: f64 },
    #[error("phase solver failed: winding count {found} != degree {expected}")]
    SolverFailure { expected: usize, found: i64 },
    #[error("near-singular pivot {pivot:e} at z = {re} + {im}i")]
    NearSingular { re: f64, im: f64, pivot: f64 },
    #[error("inverse iteration did not converge (residual {residual:e})")]
    NoConvergence { residual: f64 },
    #[error("rejection rate {rejected}/{attempts} exceeds the allowed fraction")]
    Diagnostics { rejected: usize, attempts: usize },
    #[error("trial {trial}: {source}")]
    Trial { trial: u64, source: Box<Error> },
}

impl Error {
    /// Tag an error with the ensemble trial it came from.
    pub fn in_trial(self, trial: u64) -> Self {
        Error::Trial {
            trial,
            source: Box::new(self),
        }
    }
}
