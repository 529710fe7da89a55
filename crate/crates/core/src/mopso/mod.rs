//! Multi-objective particle swarm optimizer with an external grid archive.
//!
//! The optimizer is generic over any evaluator `Fn(&[f64]) -> ObjectiveVector`;
//! [`crate::sim::evaluate_or_failed`] plugs the treatment model in.

pub mod archive;
pub mod dominance;
pub mod hypervolume;
pub mod swarm;

pub use archive::{assign_grid, ArchiveMember, GridBounds, GridCell, ParetoArchive, UpdateOutcome};
pub use dominance::{dominates, non_dominated_indices};
pub use hypervolume::{clipped_hypervolume, hypervolume};
pub use swarm::{
    next_velocity, run, run_with_observer, update_pbest, update_position, update_velocity, Draws, GenerationStats,
    Particle, RunOutcome, SwarmConfig, STATS_CSV_HEADER,
};
