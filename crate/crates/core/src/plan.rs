//! Treatment-planning layer: run configuration, the simulator-backed
//! evaluator, region labelling of the front, and plan comparison tables.

use std::fmt::Write as _;
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::PatientModel;
use crate::mopso::{self, ArchiveMember, GenerationStats, ParetoArchive, RunOutcome, SwarmConfig};
use crate::sim::{self, DoseSchedule, ObjectiveVector, PlanReport, SimConfig};

/// Where the patient parameters come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PatientSource {
    File(PathBuf),
    Inline(Box<PatientModel>),
}

/// How the front is split into treatment-intent regions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum RegionCuts {
    /// Fractions of the f1-sorted front; must satisfy 0 < q1 < q2 < 1.
    Quantiles { q1: f64, q2: f64 },
    /// Absolute tumor-cell thresholds: f1 < cure_below is cure, f1 < control_below is control.
    AbsoluteF1 { cure_below: f64, control_below: f64 },
}

impl Default for RegionCuts {
    fn default() -> Self {
        RegionCuts::Quantiles {
            q1: 1.0 / 3.0,
            q2: 2.0 / 3.0,
        }
    }
}

impl RegionCuts {
    pub fn validate(&self) -> Result<()> {
        match *self {
            RegionCuts::Quantiles { q1, q2 } if !(0.0 < q1 && q1 < q2 && q2 < 1.0) => Err(Error::InvalidConfig(
                format!("region quantiles must satisfy 0 < q1 < q2 < 1, got ({q1}, {q2})"),
            )),
            RegionCuts::AbsoluteF1 {
                cure_below,
                control_below,
            } if !(cure_below < control_below) => Err(Error::InvalidConfig(format!(
                "absolute region cuts must increase, got ({cure_below}, {control_below})"
            ))),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub patient: Option<PatientSource>,
    pub sim: SimConfig,
    pub swarm: SwarmConfig,
    pub output_dir: PathBuf,
    pub regions: RegionCuts,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            patient: None,
            sim: SimConfig::default(),
            swarm: SwarmConfig::default(),
            output_dir: PathBuf::from("out"),
            regions: RegionCuts::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: RunConfig = serde_json::from_str(&text)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        self.swarm.validate()?;
        self.regions.validate()?;
        if self.swarm.dimensions != self.sim.horizon_days {
            return Err(Error::InvalidConfig(format!(
                "swarm.dimensions ({}) must equal sim.horizon_days ({})",
                self.swarm.dimensions, self.sim.horizon_days
            )));
        }
        let (s, b) = (self.swarm.bounds, self.sim.dose_bounds);
        if s.min < b.min || s.max > b.max {
            return Err(Error::InvalidConfig(format!(
                "swarm bounds [{}, {}] exceed the dose bounds [{}, {}]",
                s.min, s.max, b.min, b.max
            )));
        }
        Ok(())
    }

    pub fn resolve_patient(&self) -> Result<PatientModel> {
        match &self.patient {
            None => Ok(crate::model::default_patient()),
            Some(PatientSource::File(p)) => PatientModel::load(p),
            Some(PatientSource::Inline(p)) => {
                p.validate()?;
                Ok((**p).clone())
            }
        }
    }
}

/// Evaluator handed to the swarm: simulate the schedule, failures rank worst.
pub fn schedule_evaluator<'a>(
    patient: &'a PatientModel,
    sim: &'a SimConfig,
) -> impl Fn(&[f64]) -> ObjectiveVector + Sync + 'a {
    move |x| {
        DoseSchedule::new(x.to_vec(), sim.dose_bounds)
            .map(|s| sim::evaluate_or_failed(&s, patient, sim))
            .unwrap_or_else(|_| ObjectiveVector::failed())
    }
}

/// Runs the swarm against the treatment model.
pub fn optimize<O>(patient: &PatientModel, sim: &SimConfig, swarm: &SwarmConfig, observer: O) -> Result<RunOutcome>
where
    O: FnMut(&GenerationStats, &ParetoArchive) -> ControlFlow<()>,
{
    sim.validate()?;
    mopso::run_with_observer(schedule_evaluator(patient, sim), swarm, observer)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionLabel {
    /// Aggressive plans: fewest tumor cells, most toxicity.
    Cure,
    Control,
    /// Gentle plans: least toxicity, most tumor left.
    Palliation,
}

impl RegionLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            RegionLabel::Cure => "cure",
            RegionLabel::Control => "control",
            RegionLabel::Palliation => "palliation",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelledMember {
    #[serde(flatten)]
    pub member: ArchiveMember,
    pub region: RegionLabel,
}

/// Sorts the front by f1 (ties: higher f2 first) and labels each member.
pub fn classify_regions(members: &[ArchiveMember], cuts: RegionCuts) -> Vec<LabelledMember> {
    let mut sorted: Vec<ArchiveMember> = members.to_vec();
    sorted.sort_by(|a, b| {
        a.objectives
            .f1
            .total_cmp(&b.objectives.f1)
            .then(b.objectives.f2.total_cmp(&a.objectives.f2))
    });
    let n = sorted.len();
    sorted
        .into_iter()
        .enumerate()
        .map(|(i, member)| {
            let region = match cuts {
                RegionCuts::Quantiles { q1, q2 } => {
                    let rank = i as f64 / n as f64;
                    if rank < q1 {
                        RegionLabel::Cure
                    } else if rank < q2 {
                        RegionLabel::Control
                    } else {
                        RegionLabel::Palliation
                    }
                }
                RegionCuts::AbsoluteF1 {
                    cure_below,
                    control_below,
                } => {
                    let f1 = member.objectives.f1;
                    if f1 < cure_below {
                        RegionLabel::Cure
                    } else if f1 < control_below {
                        RegionLabel::Control
                    } else {
                        RegionLabel::Palliation
                    }
                }
            };
            LabelledMember { member, region }
        })
        .collect()
}

pub fn front_to_json(front: &[LabelledMember]) -> String {
    let mut s = serde_json::to_string_pretty(front).expect("front always serializes");
    s.push('\n');
    s
}

/// Index of a representative member per region: the median of each label's
/// run in the f1-sorted front.
pub fn representatives(front: &[LabelledMember]) -> Vec<usize> {
    [RegionLabel::Cure, RegionLabel::Control, RegionLabel::Palliation]
        .iter()
        .filter_map(|label| {
            let idx: Vec<usize> = (0..front.len()).filter(|&i| front[i].region == *label).collect();
            idx.get(idx.len() / 2).copied()
        })
        .collect()
}

/// One row of a plan comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanRow {
    pub label: String,
    #[serde(flatten)]
    pub report: PlanReport,
}

/// Re-simulates a member's schedule and summarizes it.
pub fn plan_row(label: String, position: &[f64], patient: &PatientModel, sim: &SimConfig) -> Result<PlanRow> {
    let schedule = DoseSchedule::new(position.to_vec(), sim.dose_bounds)?;
    let trajectory = sim::simulate(&schedule, patient, sim)?;
    Ok(PlanRow {
        label,
        report: sim::report(&schedule, &trajectory, patient),
    })
}

const TABLE_COLUMNS: [&str; 6] = [
    "Solution",
    "Avg Drug Dose",
    "Avg Drug Concentration",
    "Avg Neutrophil Count",
    "Cells Remaining",
    "% Reduction",
];

/// Plain-text comparison table, one row per plan.
pub fn format_table(rows: &[PlanRow]) -> String {
    let cells: Vec<[String; 6]> = rows
        .iter()
        .map(|r| {
            let pct = if r.report.tumor_grew {
                "0 (grew)".to_string()
            } else if r.report.pct_reduction > 99.99 {
                format!("≈100 ({:.10})", r.report.pct_reduction)
            } else {
                format!("{:.4}", r.report.pct_reduction)
            };
            [
                r.label.clone(),
                format!("{:.4}", r.report.avg_dose),
                format!("{:.4}", r.report.avg_concentration),
                format!("{:.4e}", r.report.avg_circ),
                r.report.cells_remaining.to_string(),
                pct,
            ]
        })
        .collect();
    let mut widths: Vec<usize> = TABLE_COLUMNS.iter().map(|h| h.chars().count()).collect();
    for row in &cells {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, fields: &mut dyn Iterator<Item = &str>| {
        let parts: Vec<String> = fields
            .zip(&widths)
            .map(|(f, w)| format!("{f}{}", " ".repeat(w - f.chars().count())))
            .collect();
        let _ = writeln!(out, "| {} |", parts.join(" | "));
    };
    line(&mut out, &mut TABLE_COLUMNS.iter().copied());
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    let _ = writeln!(out, "|-{}-|", rule.join("-|-"));
    for row in &cells {
        line(&mut out, &mut row.iter().map(String::as_str));
    }
    out
}

pub fn rows_to_csv(rows: &[PlanRow]) -> String {
    let mut out = String::from("solution,avg_dose,avg_concentration,avg_circ,cells_remaining,pct_reduction\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.label,
            r.report.avg_dose,
            r.report.avg_concentration,
            r.report.avg_circ,
            r.report.cells_remaining,
            r.report.pct_reduction
        );
    }
    out
}
