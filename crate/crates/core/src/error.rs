//! Error types, one enum per module.

use thiserror::Error;

use crate::dynamics::Bounds;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("invalid bounds {0:?}")]
    InvalidBounds(Bounds),
    #[error("integration needs dt > 0 and horizon > 0 (dt={dt}, horizon={horizon})")]
    InvalidStep { dt: f64, horizon: f64 },
    #[error("policy returned a non-finite value at t={t}")]
    NonFinitePolicy { t: f64 },
    #[error("trajectory is empty")]
    EmptyTrajectory,
    #[error(transparent)]
    Field(#[from] LevelSetError),
}

#[derive(Debug, Error)]
pub enum LevelSetError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("field has {got} values, grid needs {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("query ({x}, {y}) outside grid bounds")]
    OutOfDomain { x: f64, y: f64 },
    #[error("horizon {t} outside [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },
    #[error("invalid solver parameters: {0}")]
    InvalidParameters(String),
    #[error(
        "output step {dt_out} is smaller than the requested internal step {internal_dt} \
         (stable bound {cfl_dt})"
    )]
    Cfl {
        dt_out: f64,
        internal_dt: f64,
        cfl_dt: f64,
    },
    #[error("value-field format error: {0}")]
    Format(String),
    #[error("value-field file truncated in {0}")]
    Truncated(&'static str),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum ReachError {
    #[error("point ({x}, {y}) outside the anchor's local frame")]
    OutOfLocalFrame { x: f64, y: f64 },
    #[error("masks live on different grids or time samplings")]
    GridMismatch,
    #[error("feasible region needs at least one anchor")]
    NoAnchors,
    #[error("raster error: {0}")]
    Raster(String),
    #[error(transparent)]
    Field(#[from] LevelSetError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum SurrogateError {
    #[error("weight file format error: {0}")]
    Format(String),
    #[error("weight file truncated in {0}")]
    Truncated(String),
    #[error("non-finite entry in {0}")]
    NonFinite(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("certification needs at least one test scenario")]
    NoScenarios,
    #[error(transparent)]
    Field(#[from] LevelSetError),
    #[error(transparent)]
    Reach(#[from] ReachError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RouterError {
    #[error("no feasible tour")]
    NoFeasibleTour,
    #[error("{0} goals exceed the exact-solver cap of {1}")]
    TooManyGoals(usize, usize),
    #[error("cost matrix is not square or is empty")]
    BadMatrix,
    #[error("start index {0} out of range or marked invalid")]
    BadStart(usize),
}

#[derive(Debug, Error)]
pub enum ContingencyError {
    #[error(transparent)]
    Field(#[from] LevelSetError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Reach(#[from] ReachError),
    #[error(transparent)]
    Surrogate(#[from] SurrogateError),
    #[error("providers disagree on grid or horizon")]
    DomainMismatch,
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("scenario invalid:\n{}", .0.join("\n"))]
    Invalid(Vec<String>),
    #[error("unsupported scenario_version {0}")]
    Version(u32),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Field(#[from] LevelSetError),
    #[error(transparent)]
    Reach(#[from] ReachError),
    #[error(transparent)]
    Surrogate(#[from] SurrogateError),
    #[error(transparent)]
    Contingency(#[from] ContingencyError),
    #[error(transparent)]
    Router(#[from] RouterError),
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("unsupported dataset_version {0}")]
    Version(u32),
    #[error("invalid dataset config: {0}")]
    Config(String),
    #[error("sample {index}: {reason}")]
    Sample { index: usize, reason: String },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Field(#[from] LevelSetError),
}
