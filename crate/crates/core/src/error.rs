use thiserror::Error;

use crate::dynamics::TrajectoryRecord;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("requested {requested} modes but the grid represents only {available}")]
    ModeCount { requested: usize, available: usize },

    #[error("fields are defined on different grids")]
    GridMismatch,

    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("controller cannot be used here: {0}")]
    Controller(String),

    /// Non-finite values or blow-up during integration. The record holds every
    /// sample taken before the failure.
    #[error("simulation diverged at t = {time}")]
    Diverged {
        time: f64,
        partial: Box<TrajectoryRecord>,
    },

    #[error("certificate: {0}")]
    Certificate(String),

    #[error("analysis: {0}")]
    Analysis(String),
}
