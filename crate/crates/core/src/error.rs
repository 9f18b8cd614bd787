use thiserror::Error;

use crate::funcspace::C1Fn;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    Shape(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("state leaves V: component {component} has value {value}, violating {bound}")]
    OutsideV {
        component: usize,
        value: f64,
        bound: String,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("projection onto the solution manifold failed: {0}")]
    Projection(String),

    #[error("transversal family: {0}")]
    Transversal(String),

    #[error("chart inversion failed after {iterations} iterations: {reason}")]
    Inversion {
        iterations: usize,
        reason: String,
        last: Box<C1Fn>,
    },

    #[error("no convergence after {iterations} iterations (last increment {increment:e})")]
    NonConvergence { iterations: usize, increment: f64 },

    #[error("not on the solution manifold: residual {0:e}")]
    NotOnManifold(f64),

    #[error("integration: {0}")]
    Integration(String),

    #[error("scenario: {0}")]
    Scenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
