//! Bounded external archive of non-dominated solutions with an adaptive
//! hypercube grid over objective space.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dominance::dominates;
use crate::sim::ObjectiveVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveMember {
    pub position: Vec<f64>,
    #[serde(flatten)]
    pub objectives: ObjectiveVector,
}

/// Hypercube coordinates: (bin along f1, bin along f2). Bin indices grow with
/// the raw objective value on both axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GridCell(pub usize, pub usize);

/// Span of the finite objective values the grid was built on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridBounds {
    pub f1: (f64, f64),
    pub f2: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateOutcome {
    /// Dominated by, or a duplicate of, an existing member.
    Rejected,
    Inserted {
        /// Members removed because the candidate dominates them.
        displaced: usize,
        /// Whether a crowded member was dropped to respect the capacity.
        evicted: bool,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParetoArchive {
    members: Vec<ArchiveMember>,
    cells: Vec<GridCell>,
    bounds: Option<GridBounds>,
    capacity: Option<usize>,
    divisions: usize,
}

impl ParetoArchive {
    /// `capacity = None` keeps every non-dominated candidate.
    pub fn new(capacity: Option<usize>, divisions: usize) -> Self {
        assert!(divisions >= 1, "grid needs at least one division");
        ParetoArchive {
            members: Vec::new(),
            cells: Vec::new(),
            bounds: None,
            capacity,
            divisions,
        }
    }

    /// Rebuilds an archive from exported members, dropping dominated ones.
    pub fn from_members(members: Vec<ArchiveMember>, capacity: Option<usize>, divisions: usize) -> Self {
        let mut a = ParetoArchive::new(None, divisions);
        for m in members {
            a.insert_unbounded(m);
        }
        a.capacity = capacity;
        a.rebuild_grid();
        a
    }

    pub fn members(&self) -> &[ArchiveMember] {
        &self.members
    }

    pub fn into_members(self) -> Vec<ArchiveMember> {
        self.members
    }

    pub fn cells(&self) -> &[GridCell] {
        &self.cells
    }

    pub fn bounds(&self) -> Option<GridBounds> {
        self.bounds
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn capacity(&self) -> Option<usize> {
        self.capacity
    }

    pub fn divisions(&self) -> usize {
        self.divisions
    }

    pub fn objectives(&self) -> Vec<ObjectiveVector> {
        self.members.iter().map(|m| m.objectives).collect()
    }

    /// Offers a candidate. Dominated candidates and exact position
    /// duplicates are rejected; members the candidate dominates are dropped.
    /// On overflow one member of the most crowded hypercube is evicted at
    /// random.
    pub fn update<R: Rng + ?Sized>(&mut self, candidate: ArchiveMember, rng: &mut R) -> UpdateOutcome {
        let before = self.members.len();
        if !self.insert_unbounded(candidate) {
            return UpdateOutcome::Rejected;
        }
        let displaced = before + 1 - self.members.len();
        self.rebuild_grid();
        let mut evicted = false;
        if let Some(cap) = self.capacity {
            while self.members.len() > cap {
                self.evict_crowded(rng);
                evicted = true;
            }
        }
        UpdateOutcome::Inserted { displaced, evicted }
    }

    fn insert_unbounded(&mut self, candidate: ArchiveMember) -> bool {
        let c = &candidate.objectives;
        if self
            .members
            .iter()
            .any(|m| dominates(&m.objectives, c) || m.position == candidate.position)
        {
            return false;
        }
        self.members.retain(|m| !dominates(c, &m.objectives));
        self.members.push(candidate);
        true
    }

    fn evict_crowded<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let occupancy = self.occupancy();
        let most = occupancy.values().map(Vec::len).max().unwrap_or(0);
        let crowded: Vec<&Vec<usize>> = occupancy.values().filter(|v| v.len() == most).collect();
        let cell = crowded[rng.gen_range(0..crowded.len())];
        let victim = cell[rng.gen_range(0..cell.len())];
        self.members.remove(victim);
        self.rebuild_grid();
    }

    fn rebuild_grid(&mut self) {
        let (cells, bounds) = assign_grid(&self.members, self.divisions);
        self.cells = cells;
        self.bounds = bounds;
    }

    /// Member indices per occupied cell, in cell order.
    pub fn occupancy(&self) -> BTreeMap<GridCell, Vec<usize>> {
        let mut map: BTreeMap<GridCell, Vec<usize>> = BTreeMap::new();
        for (i, &cell) in self.cells.iter().enumerate() {
            map.entry(cell).or_default().push(i);
        }
        map
    }

    /// Roulette probability of each occupied cell when its fitness is
    /// `numerator / occupants`.
    pub fn cell_probabilities(&self, numerator: f64) -> Vec<(GridCell, f64)> {
        let fitness: Vec<(GridCell, f64)> = self
            .occupancy()
            .into_iter()
            .map(|(c, m)| (c, numerator / m.len() as f64))
            .collect();
        let total: f64 = fitness.iter().map(|(_, f)| f).sum();
        fitness.into_iter().map(|(c, f)| (c, f / total)).collect()
    }

    /// Picks a leader: a hypercube by roulette wheel on `numerator / occupants`,
    /// then one of its members uniformly. Returns the member index.
    pub fn select_leader<R: Rng + ?Sized>(&self, numerator: f64, rng: &mut R) -> usize {
        assert!(!self.members.is_empty(), "leader selection needs a non-empty archive");
        let occupancy = self.occupancy();
        let wheel: Vec<(f64, &Vec<usize>)> = occupancy.values().map(|m| (numerator / m.len() as f64, m)).collect();
        let total: f64 = wheel.iter().map(|(f, _)| f).sum();
        let spin = rng.gen::<f64>() * total;
        let mut acc = 0.0;
        let mut chosen = wheel[wheel.len() - 1].1;
        for (fit, members) in &wheel {
            acc += fit;
            if spin < acc {
                chosen = members;
                break;
            }
        }
        chosen[rng.gen_range(0..chosen.len())]
    }
}

/// Maps each member to its hypercube. Each objective axis is split into
/// `divisions` equal bins spanning the members' finite min/max; a degenerate
/// axis puts everyone in bin 0 and non-finite values land in the last bin.
pub fn assign_grid(members: &[ArchiveMember], divisions: usize) -> (Vec<GridCell>, Option<GridBounds>) {
    let span = |values: &mut dyn Iterator<Item = f64>| {
        values
            .filter(|v| v.is_finite())
            .fold(None, |acc: Option<(f64, f64)>, v| match acc {
                None => Some((v, v)),
                Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
            })
    };
    let f1 = span(&mut members.iter().map(|m| m.objectives.f1));
    let f2 = span(&mut members.iter().map(|m| m.objectives.f2));
    let bounds = match (f1, f2) {
        (Some(f1), Some(f2)) => Some(GridBounds { f1, f2 }),
        _ => None,
    };
    let bin = |v: f64, range: Option<(f64, f64)>| -> usize {
        let Some((lo, hi)) = range else { return 0 };
        if !v.is_finite() {
            return divisions - 1;
        }
        if !(hi > lo) {
            return 0;
        }
        let idx = ((v - lo) / (hi - lo) * divisions as f64).floor();
        (idx.max(0.0) as usize).min(divisions - 1)
    };
    let cells = members
        .iter()
        .map(|m| GridCell(bin(m.objectives.f1, f1), bin(m.objectives.f2, f2)))
        .collect();
    (cells, bounds)
}
