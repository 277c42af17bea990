use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("element {element} is degenerate or inverted (signed measure {measure:e})")]
    DegenerateElement { element: usize, measure: f64 },

    #[error("non-positive conductivity {value:e} in element {element}")]
    NonPositiveConductivity { element: usize, value: f64 },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("non-conforming mesh: {0}")]
    NonConforming(String),

    #[error("linear solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("system matrix is not positive definite (curvature {curvature:e} at iteration {iteration})")]
    Indefinite { iteration: usize, curvature: f64 },

    #[error("relaxation diverged at step {step} (residual {residual:e})")]
    Diverged { step: usize, residual: f64 },

    #[error("region {0} contains no elements")]
    EmptyRegion(usize),

    #[error("measurement {id}: {source}")]
    Measurement {
        id: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("descent aborted at iteration {iteration} ({} history records kept): {source}", history.records.len())]
    Descent {
        iteration: usize,
        history: Box<crate::inversion::ConvergenceHistory>,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn for_measurement(self, id: usize) -> Self {
        Error::Measurement {
            id,
            source: Box::new(self),
        }
    }
}
