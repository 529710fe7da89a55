//! Chemotherapy dose scheduling: coupled PK / tumor / myelosuppression
//! models, a multi-objective particle swarm optimizer over 21-day dosing
//! plans, and the exports, CLI and HTTP service built on them.

// `!(a < b)` is used deliberately so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod export;
pub mod model;
pub mod mopso;
pub mod plan;
pub mod service;
pub mod sim;

pub use error::{Error, Result};
pub use model::{default_patient, PatientModel};
pub use sim::{DoseSchedule, ObjectiveVector, SimConfig};
