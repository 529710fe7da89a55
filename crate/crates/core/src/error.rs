use std::path::{Path, PathBuf};

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Where and why an integration run stopped.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SimulationFailure {
    pub step: usize,
    pub time: f64,
    pub reason: String,
}

impl std::fmt::Display for SimulationFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "simulation failed at step {} (t = {} days): {}",
            self.step, self.time, self.reason
        )
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(#[from] ScheduleError),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("{0}")]
    Simulation(SimulationFailure),

    #[error("hypervolume reference point {reference:?} is not dominated by member {member:?}")]
    Reference { reference: (f64, f64), member: (f64, f64) },

    #[error("malformed input: {0}")]
    Parse(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error, serde::Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScheduleError {
    #[error("schedule has {actual} doses but the horizon is {expected} days")]
    Length { expected: usize, actual: usize },

    #[error("dose {value} at index {index} is outside [{min}, {max}]")]
    OutOfBounds {
        index: usize,
        value: f64,
        min: f64,
        max: f64,
    },
}
