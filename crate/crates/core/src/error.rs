use thiserror::Error;

use crate::model::Theta;

/// Errors produced anywhere in the testing pipeline.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("cell probability {prob:e} for category {category} is below the floor {floor:e}")]
    CellFloor {
        category: usize,
        prob: f64,
        floor: f64,
    },

    #[error("regressor process with coefficient {0} is not stationary")]
    NonStationary(f64),

    #[error("maximum likelihood did not converge after {iterations} iterations: {reason}")]
    NonConvergence {
        iterations: usize,
        reason: String,
        last: Box<Theta>,
    },

    #[error("threshold gap {gap:e} between categories {lower} and {upper} collapsed")]
    ThresholdCollapse {
        lower: usize,
        upper: usize,
        gap: f64,
    },

    #[error("degenerate series: {0}")]
    DegenerateSeries(String),

    #[error("{failed} of {total} bootstrap fits failed, report is unreliable")]
    UnreliableBootstrap { failed: usize, total: usize },

    #[error("{0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
