//! The swarm loop: particles, velocity/position updates, personal bests and
//! the generation driver.

use std::ops::ControlFlow;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::archive::{ArchiveMember, ParetoArchive};
use super::dominance::dominates;
use super::hypervolume::clipped_hypervolume;
use crate::error::{Error, Result};
use crate::sim::{DoseBounds, ObjectiveVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SwarmConfig {
    pub population: usize,
    pub generations: usize,
    /// Decision-vector length (one dose per day).
    pub dimensions: usize,
    pub inertia_w: f64,
    /// Cognitive coefficient. 1 reproduces the update without coefficients.
    pub c1: f64,
    /// Social coefficient.
    pub c2: f64,
    /// `None` leaves the archive unbounded.
    pub archive_capacity: Option<usize>,
    pub grid_divisions: usize,
    /// Hypercube fitness is `leader_fitness_numerator / occupants`.
    pub leader_fitness_numerator: f64,
    pub bounds: DoseBounds,
    pub seed: u64,
    /// Draw r1/r2 per dimension instead of once per particle.
    pub per_dimension_random: bool,
    /// Probability per coordinate of a uniform reset after each move. 0 disables it.
    pub mutation_rate: f64,
    /// Evaluate particles on the rayon pool. Results do not depend on it.
    pub parallel: bool,
    /// Hypervolume reference (f1, f2). Derived from the initial swarm when unset.
    pub hv_reference: Option<(f64, f64)>,
}

impl Default for SwarmConfig {
    fn default() -> Self {
        SwarmConfig {
            population: 1000,
            generations: 100,
            dimensions: 21,
            inertia_w: 0.4,
            c1: 1.0,
            c2: 1.0,
            archive_capacity: Some(100),
            grid_divisions: 30,
            leader_fitness_numerator: 10.0,
            bounds: DoseBounds::default(),
            seed: 1,
            per_dimension_random: false,
            mutation_rate: 0.0,
            parallel: true,
            hv_reference: None,
        }
    }
}

impl SwarmConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidConfig(m));
        if self.population < 2 {
            return fail(format!("population must be >= 2, got {}", self.population));
        }
        if self.dimensions == 0 {
            return fail("dimensions must be >= 1".into());
        }
        if !(self.inertia_w > 0.0 && self.inertia_w < 1.0) {
            return fail(format!("inertia_w must lie in (0, 1), got {}", self.inertia_w));
        }
        if self.grid_divisions < 2 {
            return fail(format!("grid_divisions must be >= 2, got {}", self.grid_divisions));
        }
        if !(self.leader_fitness_numerator > 1.0) {
            return fail(format!(
                "leader_fitness_numerator must be > 1, got {}",
                self.leader_fitness_numerator
            ));
        }
        if self.archive_capacity == Some(0) {
            return fail("archive_capacity must be >= 1".into());
        }
        if !(self.bounds.min < self.bounds.max) {
            return fail(format!("bounds [{}, {}] are empty", self.bounds.min, self.bounds.max));
        }
        if !(0.0..=1.0).contains(&self.mutation_rate) {
            return fail(format!("mutation_rate must lie in [0, 1], got {}", self.mutation_rate));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    pub objectives: ObjectiveVector,
    pub pbest_position: Vec<f64>,
    pub pbest_objectives: ObjectiveVector,
}

/// Random factors for one velocity update: length 1 (shared by every
/// dimension) or one per dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Draws {
    pub r1: Vec<f64>,
    pub r2: Vec<f64>,
}

impl Draws {
    pub fn scalar(r1: f64, r2: f64) -> Self {
        Draws {
            r1: vec![r1],
            r2: vec![r2],
        }
    }

    fn sample<R: Rng + ?Sized>(dims: usize, per_dimension: bool, rng: &mut R) -> Self {
        let n = if per_dimension { dims } else { 1 };
        let r1 = (0..n).map(|_| rng.gen::<f64>()).collect();
        let r2 = (0..n).map(|_| rng.gen::<f64>()).collect();
        Draws { r1, r2 }
    }

    fn at(r: &[f64], i: usize) -> f64 {
        if r.len() == 1 {
            r[0]
        } else {
            r[i]
        }
    }
}

/// `v' = w·v + c1·r1·(pbest − x) + c2·r2·(leader − x)`, per dimension.
pub fn next_velocity(p: &Particle, leader: &[f64], config: &SwarmConfig, draws: &Draws) -> Vec<f64> {
    (0..p.position.len())
        .map(|i| {
            let x = p.position[i];
            config.inertia_w * p.velocity[i]
                + config.c1 * Draws::at(&draws.r1, i) * (p.pbest_position[i] - x)
                + config.c2 * Draws::at(&draws.r2, i) * (leader[i] - x)
        })
        .collect()
}

/// Draws fresh random factors and replaces the particle's velocity.
pub fn update_velocity<R: Rng + ?Sized>(p: &mut Particle, leader: &[f64], config: &SwarmConfig, rng: &mut R) {
    let draws = Draws::sample(p.position.len(), config.per_dimension_random, rng);
    p.velocity = next_velocity(p, leader, config, &draws);
}

/// Moves the particle, then clamps any coordinate that left the box to the
/// violated bound and reverses that coordinate's velocity.
pub fn update_position(p: &mut Particle, bounds: DoseBounds) {
    for (x, v) in p.position.iter_mut().zip(p.velocity.iter_mut()) {
        *x += *v;
        if *x > bounds.max {
            *x = bounds.max;
            *v = -*v;
        } else if *x < bounds.min {
            *x = bounds.min;
            *v = -*v;
        }
    }
}

/// Personal-best memory update. Mutually non-dominated pairs are resolved by
/// a fair coin. Returns whether the memory changed.
pub fn update_pbest<R: Rng + ?Sized>(p: &mut Particle, new_objectives: ObjectiveVector, rng: &mut R) -> bool {
    p.objectives = new_objectives;
    let replace = if dominates(&new_objectives, &p.pbest_objectives) {
        true
    } else if dominates(&p.pbest_objectives, &new_objectives) {
        false
    } else {
        rng.gen_bool(0.5)
    };
    if replace {
        p.pbest_position.clone_from(&p.position);
        p.pbest_objectives = new_objectives;
    }
    replace
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub gen: usize,
    pub archive_size: usize,
    pub hypervolume: f64,
    pub best_f1: f64,
    pub best_f2: f64,
}

pub const STATS_CSV_HEADER: &str = "gen,archive_size,hypervolume,best_f1,best_f2";

impl GenerationStats {
    fn of(gen: usize, archive: &ParetoArchive, reference: (f64, f64)) -> Self {
        let objs = archive.objectives();
        GenerationStats {
            gen,
            archive_size: archive.len(),
            hypervolume: clipped_hypervolume(&objs, reference),
            best_f1: objs.iter().map(|o| o.f1).fold(f64::INFINITY, f64::min),
            best_f2: objs.iter().map(|o| o.f2).fold(f64::NEG_INFINITY, f64::max),
        }
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.gen, self.archive_size, self.hypervolume, self.best_f1, self.best_f2
        )
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub archive: ParetoArchive,
    /// Entry 0 describes the archive seeded from the initial swarm.
    pub stats: Vec<GenerationStats>,
    pub swarm: Vec<Particle>,
    pub hv_reference: (f64, f64),
    /// False when the observer stopped the run early.
    pub completed: bool,
}

fn sanitize(o: ObjectiveVector) -> ObjectiveVector {
    if o.f1.is_nan() || o.f2.is_nan() || o.min_circ.is_nan() || !o.f1.is_finite() {
        ObjectiveVector::failed()
    } else {
        o
    }
}

fn evaluate_all<E>(positions: &[Vec<f64>], evaluator: &E, parallel: bool) -> Vec<ObjectiveVector>
where
    E: Fn(&[f64]) -> ObjectiveVector + Sync,
{
    if parallel {
        positions.par_iter().map(|x| sanitize(evaluator(x))).collect()
    } else {
        positions.iter().map(|x| sanitize(evaluator(x))).collect()
    }
}

fn initial_reference(objs: &[ObjectiveVector]) -> (f64, f64) {
    let finite: Vec<_> = objs.iter().filter(|o| !o.is_failed()).collect();
    if finite.is_empty() {
        return (0.0, 0.0);
    }
    let f1 = finite.iter().map(|o| o.f1).fold(f64::NEG_INFINITY, f64::max);
    let f2 = finite.iter().map(|o| o.f2).fold(f64::INFINITY, f64::min);
    (f1, f2)
}

/// Runs the optimizer to completion.
pub fn run<E>(evaluator: E, config: &SwarmConfig) -> Result<RunOutcome>
where
    E: Fn(&[f64]) -> ObjectiveVector + Sync,
{
    run_with_observer(evaluator, config, |_, _| ControlFlow::Continue(()))
}

/// Runs the optimizer, calling `observer` after the initial archive and after
/// every generation. Returning `Break` stops the run with what has been
/// found so far.
///
/// All randomness is drawn serially in particle order and archive/pbest
/// updates follow that order, so parallel evaluation gives the same result
/// as serial evaluation.
pub fn run_with_observer<E, O>(evaluator: E, config: &SwarmConfig, mut observer: O) -> Result<RunOutcome>
where
    E: Fn(&[f64]) -> ObjectiveVector + Sync,
    O: FnMut(&GenerationStats, &ParetoArchive) -> ControlFlow<()>,
{
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let bounds = config.bounds;
    let n = config.dimensions;

    let positions: Vec<Vec<f64>> = (0..config.population)
        .map(|_| (0..n).map(|_| rng.gen_range(bounds.min..=bounds.max)).collect())
        .collect();
    let objectives = evaluate_all(&positions, &evaluator, config.parallel);
    let mut swarm: Vec<Particle> = positions
        .into_iter()
        .zip(&objectives)
        .map(|(position, &o)| Particle {
            velocity: vec![0.0; n],
            pbest_position: position.clone(),
            position,
            objectives: o,
            pbest_objectives: o,
        })
        .collect();

    let mut archive = ParetoArchive::new(config.archive_capacity, config.grid_divisions);
    for p in &swarm {
        archive.update(
            ArchiveMember {
                position: p.position.clone(),
                objectives: p.objectives,
            },
            &mut rng,
        );
    }

    let reference = config.hv_reference.unwrap_or_else(|| initial_reference(&objectives));
    let mut stats = vec![GenerationStats::of(0, &archive, reference)];
    let mut completed = observer(&stats[0], &archive).is_continue();

    if completed {
        for gen in 1..=config.generations {
            for p in swarm.iter_mut() {
                let leader = archive.select_leader(config.leader_fitness_numerator, &mut rng);
                let leader = archive.members()[leader].position.clone();
                update_velocity(p, &leader, config, &mut rng);
                update_position(p, bounds);
                if config.mutation_rate > 0.0 {
                    for x in p.position.iter_mut() {
                        if rng.gen_bool(config.mutation_rate) {
                            *x = rng.gen_range(bounds.min..=bounds.max);
                        }
                    }
                }
            }

            let positions: Vec<Vec<f64>> = swarm.iter().map(|p| p.position.clone()).collect();
            let objectives = evaluate_all(&positions, &evaluator, config.parallel);

            for (p, &o) in swarm.iter().zip(&objectives) {
                archive.update(
                    ArchiveMember {
                        position: p.position.clone(),
                        objectives: o,
                    },
                    &mut rng,
                );
            }
            for (p, &o) in swarm.iter_mut().zip(&objectives) {
                update_pbest(p, o, &mut rng);
            }

            let s = GenerationStats::of(gen, &archive, reference);
            stats.push(s);
            if observer(&s, &archive).is_break() {
                completed = gen == config.generations;
                break;
            }
        }
    }

    Ok(RunOutcome {
        archive,
        stats,
        swarm,
        hv_reference: reference,
        completed,
    })
}
