//! Fixed-step RK4 integration of the coupled PK / tumor / marrow system with
//! bolus dosing, plus objective extraction and plan summaries.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result, ScheduleError, SimulationFailure};
use crate::model::{
    drug_effect, drug_kill_rate, myelo_rhs, pk_rhs, plasma_concentration, tumor_rhs, MyeloState, PatientModel,
    PkParams, PkState, TumorState,
};

/// Grade-2 neutropenia limit (cells/L).
pub const CIRC_THRESHOLD_GRADE2: f64 = 1.5e9;
/// Grade-3 neutropenia limit (cells/L).
pub const CIRC_THRESHOLD_GRADE3: f64 = 1.0e9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoseBounds {
    pub min: f64,
    pub max: f64,
}

impl Default for DoseBounds {
    fn default() -> Self {
        DoseBounds { min: 0.0, max: 5.0 }
    }
}

impl DoseBounds {
    pub fn contains(&self, dose: f64) -> bool {
        dose >= self.min && dose <= self.max
    }
}

/// Per-day doses (mg/m²), one entry per treatment day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DoseSchedule {
    doses: Vec<f64>,
}

impl DoseSchedule {
    /// Checks every dose against `bounds`. Length is checked against the
    /// horizon by [`SimConfig::check_schedule`].
    pub fn new(doses: Vec<f64>, bounds: DoseBounds) -> std::result::Result<Self, ScheduleError> {
        for (index, &value) in doses.iter().enumerate() {
            if !bounds.contains(value) {
                return Err(ScheduleError::OutOfBounds {
                    index,
                    value,
                    min: bounds.min,
                    max: bounds.max,
                });
            }
        }
        Ok(DoseSchedule { doses })
    }

    pub fn uniform(dose: f64, days: usize) -> Self {
        DoseSchedule {
            doses: vec![dose; days],
        }
    }

    pub fn zeros(days: usize) -> Self {
        Self::uniform(0.0, days)
    }

    pub fn doses(&self) -> &[f64] {
        &self.doses
    }

    pub fn len(&self) -> usize {
        self.doses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doses.is_empty()
    }

    pub fn mean(&self) -> f64 {
        if self.doses.is_empty() {
            0.0
        } else {
            self.doses.iter().sum::<f64>() / self.doses.len() as f64
        }
    }

    /// Reads either a JSON array of numbers or a single-column CSV (an
    /// optional non-numeric header row is skipped).
    pub fn parse(text: &str, bounds: DoseBounds) -> Result<Self> {
        let trimmed = text.trim_start();
        let doses = if trimmed.starts_with('[') {
            serde_json::from_str::<Vec<f64>>(trimmed).map_err(|e| Error::Parse(format!("schedule JSON: {e}")))?
        } else {
            parse_csv_column(text)?
        };
        Ok(Self::new(doses, bounds)?)
    }

    pub fn load(path: &Path, bounds: DoseBounds) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, bounds)
    }
}

fn parse_csv_column(text: &str) -> Result<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut doses = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse(format!("schedule CSV: {e}")))?;
        let Some(field) = record.get(0) else { continue };
        if field.is_empty() {
            continue;
        }
        if record.len() > 1 {
            return Err(Error::Parse(format!(
                "schedule CSV row {} has {} columns, expected 1",
                row + 1,
                record.len()
            )));
        }
        match field.parse::<f64>() {
            Ok(v) => doses.push(v),
            Err(_) if row == 0 => {}
            Err(_) => {
                return Err(Error::Parse(format!(
                    "schedule CSV row {}: `{field}` is not a number",
                    row + 1
                )))
            }
        }
    }
    Ok(doses)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub horizon_days: usize,
    /// Integration step in hours. Must divide 24 evenly.
    pub step_hours: f64,
    /// Dose times in days, one per schedule entry. `None` means days 0..n-1.
    pub dose_times: Option<Vec<f64>>,
    /// Record every `record_stride`-th step. The final state is always recorded.
    pub record_stride: usize,
    pub dose_bounds: DoseBounds,
    /// Nadir below this makes a plan infeasible (cells/L).
    pub circ_threshold: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            horizon_days: 21,
            step_hours: 0.24,
            dose_times: None,
            record_stride: 1,
            dose_bounds: DoseBounds::default(),
            circ_threshold: CIRC_THRESHOLD_GRADE2,
        }
    }
}

impl SimConfig {
    pub fn steps_per_day(&self) -> Result<usize> {
        if !(self.step_hours.is_finite() && self.step_hours > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "step_hours must be > 0, got {}",
                self.step_hours
            )));
        }
        let per_day = 24.0 / self.step_hours;
        let rounded = per_day.round();
        if rounded < 1.0 || (per_day - rounded).abs() > 1e-9 * rounded {
            return Err(Error::InvalidConfig(format!(
                "step of {} h does not divide one day evenly",
                self.step_hours
            )));
        }
        Ok(rounded as usize)
    }

    /// Same config with the step scaled down by an integer factor.
    pub fn refined(&self, factor: usize) -> SimConfig {
        SimConfig {
            step_hours: self.step_hours / factor as f64,
            record_stride: self.record_stride * factor,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.steps_per_day()?;
        if self.horizon_days == 0 {
            return Err(Error::InvalidConfig("horizon_days must be >= 1".into()));
        }
        if self.record_stride == 0 {
            return Err(Error::InvalidConfig("record_stride must be >= 1".into()));
        }
        if !(self.dose_bounds.min <= self.dose_bounds.max) || self.dose_bounds.min < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "dose bounds [{}, {}] are invalid",
                self.dose_bounds.min, self.dose_bounds.max
            )));
        }
        if let Some(times) = &self.dose_times {
            if times.len() != self.horizon_days {
                return Err(Error::InvalidConfig(format!(
                    "{} dose times given for a {}-day horizon",
                    times.len(),
                    self.horizon_days
                )));
            }
        }
        self.dose_steps()?;
        Ok(())
    }

    pub fn check_schedule(&self, schedule: &DoseSchedule) -> std::result::Result<(), ScheduleError> {
        if schedule.len() != self.horizon_days {
            return Err(ScheduleError::Length {
                expected: self.horizon_days,
                actual: schedule.len(),
            });
        }
        let b = self.dose_bounds;
        for (index, &value) in schedule.doses().iter().enumerate() {
            if !b.contains(value) {
                return Err(ScheduleError::OutOfBounds {
                    index,
                    value,
                    min: b.min,
                    max: b.max,
                });
            }
        }
        Ok(())
    }

    fn total_steps(&self) -> Result<usize> {
        Ok(self.horizon_days * self.steps_per_day()?)
    }

    /// Step index at which each schedule entry is injected.
    fn dose_steps(&self) -> Result<Vec<usize>> {
        let per_day = self.steps_per_day()?;
        let total = self.horizon_days * per_day;
        match &self.dose_times {
            None => Ok((0..self.horizon_days).map(|d| d * per_day).collect()),
            Some(times) => times
                .iter()
                .map(|&t| {
                    let exact = t * per_day as f64;
                    let step = exact.round();
                    if !(t >= 0.0) || (exact - step).abs() > 1e-6 || step as usize >= total {
                        Err(Error::InvalidConfig(format!(
                            "dose time {t} is not a grid point inside the horizon"
                        )))
                    } else {
                        Ok(step as usize)
                    }
                })
                .collect(),
        }
    }
}

/// One recorded point of the coupled system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t_days: f64,
    pub pk: PkState,
    pub tumor: TumorState,
    pub myelo: MyeloState,
    pub conc: f64,
}

/// Flat row used by the CSV export and the HTTP payload.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub t_days: f64,
    pub xc: f64,
    pub xp: f64,
    pub conc: f64,
    pub x1: f64,
    pub x2: f64,
    pub prol: f64,
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub circ: f64,
}

impl From<&Sample> for SampleRow {
    fn from(s: &Sample) -> Self {
        SampleRow {
            t_days: s.t_days,
            xc: s.pk.xc,
            xp: s.pk.xp,
            conc: s.conc,
            x1: s.tumor.x1,
            x2: s.tumor.x2,
            prol: s.myelo.prol,
            t1: s.myelo.t1,
            t2: s.myelo.t2,
            t3: s.myelo.t3,
            circ: s.myelo.circ,
        }
    }
}

pub const TRAJECTORY_CSV_HEADER: &str = "t_days,xc,xp,conc,x1,x2,prol,t1,t2,t3,circ";

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    /// Sum of every bolus added to the central compartment.
    pub total_injected: f64,
    /// Nadir of circulating neutrophils over every integration step.
    pub min_circ: f64,
    /// Integral of plasma concentration over the horizon (mg·day/L).
    pub auc_conc: f64,
    /// Integral of circulating neutrophils over the horizon (cells·day/L).
    pub auc_circ: f64,
    pub horizon_days: f64,
}

impl Trajectory {
    pub fn initial(&self) -> &Sample {
        &self.samples[0]
    }

    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectory always holds the initial sample")
    }

    pub fn rows(&self) -> impl Iterator<Item = SampleRow> + '_ {
        self.samples.iter().map(SampleRow::from)
    }

    /// Uniform-stride subsample with at most `max_points` rows; the first and
    /// last samples are always kept.
    pub fn downsampled(&self, max_points: usize) -> Vec<SampleRow> {
        let n = self.samples.len();
        if n <= max_points || max_points < 2 {
            return self.rows().collect();
        }
        let stride = (n - 1).div_ceil(max_points - 2).max(1);
        let mut out: Vec<SampleRow> = self.samples.iter().step_by(stride).map(SampleRow::from).collect();
        if !(n - 1).is_multiple_of(stride) {
            out.push(SampleRow::from(self.last()));
        }
        out
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{TRAJECTORY_CSV_HEADER}")?;
        for r in self.rows() {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.t_days, r.xc, r.xp, r.conc, r.x1, r.x2, r.prol, r.t1, r.t2, r.t3, r.circ
            )?;
        }
        Ok(())
    }
}

/// Objective values of one schedule: tumor burden (minimized) and
/// circulating neutrophils (maximized), both read at the end of the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveVector {
    /// Tumor cells remaining. `+inf` marks a failed simulation.
    #[serde(serialize_with = "ser_inf_as_null", deserialize_with = "de_null_as_inf")]
    pub f1: f64,
    /// Circulating neutrophils (cells/L).
    pub f2: f64,
    /// Lowest neutrophil count over the horizon.
    pub min_circ: f64,
    pub feasible: bool,
}

impl ObjectiveVector {
    /// Feasible point with `min_circ` set to `f2`, for problems without a nadir.
    pub fn unconstrained(f1: f64, f2: f64) -> Self {
        ObjectiveVector {
            f1,
            f2,
            min_circ: f2,
            feasible: true,
        }
    }

    /// Worst-ranked sentinel for a schedule whose simulation failed.
    pub fn failed() -> Self {
        ObjectiveVector {
            f1: f64::INFINITY,
            f2: 0.0,
            min_circ: 0.0,
            feasible: false,
        }
    }

    pub fn is_failed(&self) -> bool {
        !self.f1.is_finite()
    }
}

fn ser_inf_as_null<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_none()
    }
}

fn de_null_as_inf<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
}

/// End-of-treatment summary in the layout clinicians compare plans with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanReport {
    pub avg_dose: f64,
    pub avg_concentration: f64,
    pub avg_circ: f64,
    pub cells_remaining: u64,
    /// Clamped at 0 when the tumor grew; see `tumor_grew`.
    pub pct_reduction: f64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub tumor_grew: bool,
}

// Layout of the integrated vector: 9 physiological states followed by two
// running integrals used for time averages.
const XC: usize = 0;
const XP: usize = 1;
const X1: usize = 2;
const X2: usize = 3;
const PROL: usize = 4;
const T1: usize = 5;
const T2: usize = 6;
const T3: usize = 7;
const CIRC: usize = 8;
const AUC_CONC: usize = 9;
const AUC_CIRC: usize = 10;
const FULL_DIM: usize = 11;

type Rhs<'a, const N: usize> = dyn Fn(&[f64; N]) -> std::result::Result<[f64; N], String> + 'a;

fn rk4_step<const N: usize>(y: &[f64; N], h: f64, f: &Rhs<'_, N>) -> std::result::Result<[f64; N], String> {
    let axpy = |base: &[f64; N], k: &[f64; N], a: f64| -> [f64; N] { std::array::from_fn(|i| base[i] + a * k[i]) };
    let k1 = f(y)?;
    let k2 = f(&axpy(y, &k1, 0.5 * h))?;
    let k3 = f(&axpy(y, &k2, 0.5 * h))?;
    let k4 = f(&axpy(y, &k3, h))?;
    Ok(std::array::from_fn(|i| {
        y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    }))
}

struct Integration<const N: usize> {
    samples: Vec<(f64, [f64; N])>,
    injected: f64,
    final_state: [f64; N],
}

/// Fixed-step driver: boluses are added to `dose_index` at the start of their
/// step, the state is recorded before any dose at t=0, and `check` runs on
/// every accepted step.
fn integrate<const N: usize>(
    y0: [f64; N],
    schedule: &DoseSchedule,
    config: &SimConfig,
    dose_index: usize,
    rhs: &Rhs<'_, N>,
    mut check: impl FnMut(&[f64; N]) -> std::result::Result<(), String>,
) -> Result<Integration<N>> {
    config.validate()?;
    config.check_schedule(schedule)?;
    let per_day = config.steps_per_day()?;
    let total = config.total_steps()?;
    let h = 1.0 / per_day as f64;

    let mut dose_at = vec![0.0; total];
    for (&step, &dose) in config.dose_steps()?.iter().zip(schedule.doses()) {
        dose_at[step] += dose;
    }

    let mut y = y0;
    let mut injected = 0.0;
    let mut samples = Vec::with_capacity(total / config.record_stride + 2);
    samples.push((0.0, y));

    for (k, &dose) in dose_at.iter().enumerate() {
        if dose != 0.0 {
            y[dose_index] += dose;
            injected += dose;
        }
        let fail = |reason: String| {
            Error::Simulation(SimulationFailure {
                step: k + 1,
                time: (k + 1) as f64 / per_day as f64,
                reason,
            })
        };
        y = rk4_step(&y, h, rhs).map_err(fail)?;
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(fail(format!("state component {i} became non-finite")));
        }
        check(&y).map_err(fail)?;
        let step = k + 1;
        if step % config.record_stride == 0 || step == total {
            samples.push((step as f64 / per_day as f64, y));
        }
    }

    Ok(Integration {
        samples,
        injected,
        final_state: y,
    })
}

fn full_rhs(patient: &PatientModel) -> impl Fn(&[f64; FULL_DIM]) -> std::result::Result<[f64; FULL_DIM], String> + '_ {
    move |y| {
        let pk = PkState { xc: y[XC], xp: y[XP] };
        let conc = plasma_concentration(&pk, &patient.pk);
        let dpk = pk_rhs(&pk, &patient.pk);
        let tumor = TumorState { x1: y[X1], x2: y[X2] };
        let dt = tumor_rhs(&tumor, drug_kill_rate(conc, &patient.tumor), &patient.tumor);
        let myelo = myelo_from(y);
        let dm = myelo_rhs(&myelo, drug_effect(conc, &patient.myelo), &patient.myelo).map_err(|e| e.to_string())?;
        Ok([
            dpk.xc, dpk.xp, dt.x1, dt.x2, dm.prol, dm.t1, dm.t2, dm.t3, dm.circ, conc, myelo.circ,
        ])
    }
}

fn myelo_from(y: &[f64; FULL_DIM]) -> MyeloState {
    MyeloState {
        prol: y[PROL],
        t1: y[T1],
        t2: y[T2],
        t3: y[T3],
        circ: y[CIRC],
    }
}

fn initial_vector(patient: &PatientModel) -> [f64; FULL_DIM] {
    let m = &patient.initial_myelo;
    [
        patient.initial_pk.xc,
        patient.initial_pk.xp,
        patient.initial_tumor.x1,
        patient.initial_tumor.x2,
        m.prol,
        m.t1,
        m.t2,
        m.t3,
        m.circ,
        0.0,
        0.0,
    ]
}

fn sample_from(t: f64, y: &[f64; FULL_DIM], pk: &PkParams) -> Sample {
    let pk_state = PkState { xc: y[XC], xp: y[XP] };
    Sample {
        t_days: t,
        conc: plasma_concentration(&pk_state, pk),
        pk: pk_state,
        tumor: TumorState { x1: y[X1], x2: y[X2] },
        myelo: myelo_from(y),
    }
}

/// Integrates the coupled nine-state system over the horizon.
pub fn simulate(schedule: &DoseSchedule, patient: &PatientModel, config: &SimConfig) -> Result<Trajectory> {
    let rhs = full_rhs(patient);
    let mut min_circ = patient.initial_myelo.circ;
    let run = integrate(initial_vector(patient), schedule, config, XC, &rhs, |y| {
        if y[CIRC] <= 0.0 {
            return Err(format!("circulating neutrophils dropped to {}", y[CIRC]));
        }
        min_circ = min_circ.min(y[CIRC]);
        Ok(())
    })?;
    let samples = run
        .samples
        .iter()
        .map(|(t, y)| sample_from(*t, y, &patient.pk))
        .collect();
    Ok(Trajectory {
        samples,
        total_injected: run.injected,
        min_circ,
        auc_conc: run.final_state[AUC_CONC],
        auc_circ: run.final_state[AUC_CIRC],
        horizon_days: config.horizon_days as f64,
    })
}

/// PK-only integration, the other subsystems being one-way coupled to it.
pub fn simulate_pk(
    schedule: &DoseSchedule,
    pk: &PkParams,
    initial: PkState,
    config: &SimConfig,
) -> Result<Vec<(f64, PkState)>> {
    let rhs = pk_only_rhs(pk);
    let run = integrate([initial.xc, initial.xp], schedule, config, 0, &rhs, |_| Ok(()))?;
    Ok(run
        .samples
        .into_iter()
        .map(|(t, y)| (t, PkState { xc: y[0], xp: y[1] }))
        .collect())
}

fn pk_only_rhs(pk: &PkParams) -> impl Fn(&[f64; 2]) -> std::result::Result<[f64; 2], String> + '_ {
    move |y| {
        let d = pk_rhs(&PkState { xc: y[0], xp: y[1] }, pk);
        Ok([d.xc, d.xp])
    }
}

/// Objectives from the final state plus feasibility from the nadir.
pub fn objectives_of(trajectory: &Trajectory, config: &SimConfig) -> ObjectiveVector {
    let last = trajectory.last();
    ObjectiveVector {
        f1: last.tumor.total(),
        f2: last.myelo.circ,
        min_circ: trajectory.min_circ,
        feasible: trajectory.min_circ >= config.circ_threshold,
    }
}

pub fn evaluate(schedule: &DoseSchedule, patient: &PatientModel, config: &SimConfig) -> Result<ObjectiveVector> {
    simulate(schedule, patient, config).map(|t| objectives_of(&t, config))
}

/// Like [`evaluate`] but maps a failed simulation to [`ObjectiveVector::failed`].
pub fn evaluate_or_failed(schedule: &DoseSchedule, patient: &PatientModel, config: &SimConfig) -> ObjectiveVector {
    evaluate(schedule, patient, config).unwrap_or_else(|_| ObjectiveVector::failed())
}

pub fn report(schedule: &DoseSchedule, trajectory: &Trajectory, patient: &PatientModel) -> PlanReport {
    let initial_total = patient.initial_tumor.total();
    let remaining = trajectory.last().tumor.total().max(0.0).round();
    let horizon = trajectory.horizon_days;
    let raw_pct = if initial_total > 0.0 {
        100.0 * (1.0 - remaining / initial_total)
    } else {
        0.0
    };
    PlanReport {
        avg_dose: schedule.mean(),
        avg_concentration: trajectory.auc_conc / horizon,
        avg_circ: trajectory.auc_circ / horizon,
        cells_remaining: remaining as u64,
        pct_reduction: raw_pct.max(0.0),
        tumor_grew: remaining > initial_total,
    }
}

/// Outcome of an integrator self-convergence test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Convergence {
    /// `‖y(h) − y(h/2)‖ / ‖y(h/2) − y(h/4)‖`; close to 16 for RK4.
    Ratio(f64),
    /// The finest-step difference is at round-off level, so no ratio is meaningful.
    BelowNoiseFloor,
}

impl Convergence {
    pub fn ratio(&self) -> Option<f64> {
        match self {
            Convergence::Ratio(r) => Some(*r),
            Convergence::BelowNoiseFloor => None,
        }
    }
}

const NOISE_FLOOR: f64 = 1e-12;

/// Component-wise relative distance, each component scaled by `max(|b|, 1)`.
fn scaled_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| ((x - y) / y.abs().max(1.0)).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn ratio_of(coarse: &[f64], mid: &[f64], fine: &[f64]) -> Convergence {
    let num = scaled_distance(coarse, mid);
    let den = scaled_distance(mid, fine);
    if den < NOISE_FLOOR {
        Convergence::BelowNoiseFloor
    } else {
        Convergence::Ratio(num / den)
    }
}

/// Self-convergence ratio of the full system at steps h, h/2 and h/4.
pub fn convergence_check(schedule: &DoseSchedule, patient: &PatientModel, config: &SimConfig) -> Result<Convergence> {
    let finals: Vec<[f64; 9]> = [1, 2, 4]
        .iter()
        .map(|&f| {
            let t = simulate(schedule, patient, &config.refined(f))?;
            let s = t.last();
            Ok([
                s.pk.xc,
                s.pk.xp,
                s.tumor.x1,
                s.tumor.x2,
                s.myelo.prol,
                s.myelo.t1,
                s.myelo.t2,
                s.myelo.t3,
                s.myelo.circ,
            ])
        })
        .collect::<Result<_>>()?;
    Ok(ratio_of(&finals[0], &finals[1], &finals[2]))
}

/// Self-convergence ratio of the PK subsystem alone.
pub fn convergence_check_pk(schedule: &DoseSchedule, pk: &PkParams, config: &SimConfig) -> Result<Convergence> {
    let finals: Vec<[f64; 2]> = [1, 2, 4]
        .iter()
        .map(|&f| {
            let run = simulate_pk(schedule, pk, PkState::default(), &config.refined(f))?;
            let (_, s) = run.last().copied().expect("non-empty");
            Ok([s.xc, s.xp])
        })
        .collect::<Result<_>>()?;
    Ok(ratio_of(&finals[0], &finals[1], &finals[2]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::default_patient;

    #[test]
    fn schedule_bounds_are_enforced() {
        let err = DoseSchedule::new(vec![1.0, 6.0], DoseBounds::default()).unwrap_err();
        assert_eq!(
            err,
            ScheduleError::OutOfBounds {
                index: 1,
                value: 6.0,
                min: 0.0,
                max: 5.0
            }
        );
        assert!(DoseSchedule::new(vec![0.0, 5.0], DoseBounds::default()).is_ok());
    }

    #[test]
    fn schedule_parses_json_and_csv() {
        let b = DoseBounds::default();
        assert_eq!(DoseSchedule::parse("[1, 2.5, 0]", b).unwrap().doses(), &[1.0, 2.5, 0.0]);
        assert_eq!(
            DoseSchedule::parse("dose\n1\n2.5\n0\n", b).unwrap().doses(),
            &[1.0, 2.5, 0.0]
        );
        assert_eq!(DoseSchedule::parse("1\n2\n", b).unwrap().doses(), &[1.0, 2.0]);
        assert!(DoseSchedule::parse("1\nabc\n", b).is_err());
        assert!(DoseSchedule::parse("1,2\n", b).is_err());
        assert!(DoseSchedule::parse("[1, 9]", b).is_err());
    }

    #[test]
    fn wrong_length_is_rejected() {
        let err = simulate(&DoseSchedule::zeros(20), &default_patient(), &SimConfig::default()).unwrap_err();
        match err {
            Error::InvalidSchedule(ScheduleError::Length {
                expected: 21,
                actual: 20,
            }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn step_must_divide_a_day() {
        let cfg = SimConfig {
            step_hours: 0.7,
            ..SimConfig::default()
        };
        assert!(cfg.validate().is_err());
        assert_eq!(SimConfig::default().steps_per_day().unwrap(), 100);
    }

    #[test]
    fn custom_dose_times_must_be_on_grid() {
        let mut cfg = SimConfig {
            dose_times: Some((0..21).map(|d| d as f64 + 0.5).collect()),
            ..SimConfig::default()
        };
        cfg.validate().unwrap();
        cfg.dose_times = Some((0..21).map(|d| d as f64 + 0.005).collect());
        assert!(cfg.validate().is_err());
        cfg.dose_times = Some(vec![0.0; 3]);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn first_sample_is_initial_state_and_last_is_horizon() {
        let p = default_patient();
        let cfg = SimConfig {
            record_stride: 7,
            ..SimConfig::default()
        };
        let t = simulate(&DoseSchedule::uniform(2.0, 21), &p, &cfg).unwrap();
        let first = t.initial();
        assert_eq!(first.t_days, 0.0);
        assert_eq!(first.pk, p.initial_pk);
        assert_eq!(first.tumor, p.initial_tumor);
        assert_eq!(first.myelo, p.initial_myelo);
        assert_eq!(t.last().t_days, 21.0);
        assert!(t.samples.windows(2).all(|w| w[0].t_days < w[1].t_days));
    }

    #[test]
    fn zero_schedule_keeps_drug_at_zero() {
        let p = default_patient();
        let t = simulate(&DoseSchedule::zeros(21), &p, &SimConfig::default()).unwrap();
        assert!(t.samples.iter().all(|s| s.conc == 0.0));
        assert_eq!(t.total_injected, 0.0);
        assert_eq!(t.min_circ, p.myelo.circ0);
    }

    #[test]
    fn injected_total_matches_schedule_sum() {
        let doses: Vec<f64> = (0..21).map(|i| (i as f64 * 0.37) % 5.0).collect();
        let sum: f64 = doses.iter().sum();
        let s = DoseSchedule::new(doses, DoseBounds::default()).unwrap();
        let t = simulate(&s, &default_patient(), &SimConfig::default()).unwrap();
        assert_eq!(t.total_injected, sum);
    }

    #[test]
    fn simulation_is_bit_reproducible() {
        let s = DoseSchedule::uniform(3.3, 21);
        let p = default_patient();
        let a = simulate(&s, &p, &SimConfig::default()).unwrap();
        let b = simulate(&s, &p, &SimConfig::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn negative_circ_fails_the_simulation() {
        let mut p = default_patient();
        p.myelo.slope = 50.0;
        let cfg = SimConfig {
            step_hours: 24.0,
            ..SimConfig::default()
        };
        let err = simulate(&DoseSchedule::uniform(5.0, 21), &p, &cfg).unwrap_err();
        assert!(matches!(err, Error::Simulation(_)), "{err:?}");
        let obj = evaluate_or_failed(&DoseSchedule::uniform(5.0, 21), &p, &cfg);
        assert_eq!(obj, ObjectiveVector::failed());
    }

    #[test]
    fn report_of_untreated_plan_flags_growth() {
        let p = default_patient();
        let s = DoseSchedule::zeros(21);
        let t = simulate(&s, &p, &SimConfig::default()).unwrap();
        let r = report(&s, &t, &p);
        assert_eq!(r.avg_dose, 0.0);
        assert_eq!(r.pct_reduction, 0.0);
        assert!(r.tumor_grew);
        assert_eq!(r.avg_concentration, 0.0);
        assert!((r.avg_circ / 5e9 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn report_of_uniform_plan() {
        let p = default_patient();
        let s = DoseSchedule::uniform(3.0, 21);
        let t = simulate(&s, &p, &SimConfig::default()).unwrap();
        let r = report(&s, &t, &p);
        assert_eq!(r.avg_dose, 3.0);
        assert!(r.avg_concentration > 0.0);
        let expected = 100.0 * (1.0 - r.cells_remaining as f64 / 1e12);
        assert_eq!(r.pct_reduction, expected.max(0.0));
    }

    #[test]
    fn report_json_has_the_five_fields() {
        let r = PlanReport {
            avg_dose: 3.048,
            avg_concentration: 4.3201,
            avg_circ: 7.6436e8,
            cells_remaining: 48,
            pct_reduction: 99.9999999999952,
            tumor_grew: false,
        };
        let v = serde_json::to_value(&r).unwrap();
        let keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        assert_eq!(keys.len(), 5);
        for k in [
            "avg_dose",
            "avg_concentration",
            "avg_circ",
            "cells_remaining",
            "pct_reduction",
        ] {
            assert!(keys.contains(&k.to_string()));
        }
    }

    #[test]
    fn failed_objective_round_trips_through_json() {
        let text = serde_json::to_string(&ObjectiveVector::failed()).unwrap();
        assert!(text.contains("\"f1\":null"));
        let back: ObjectiveVector = serde_json::from_str(&text).unwrap();
        assert_eq!(back, ObjectiveVector::failed());
    }

    #[test]
    fn downsampling_keeps_endpoints() {
        let t = simulate(
            &DoseSchedule::uniform(1.0, 21),
            &default_patient(),
            &SimConfig::default(),
        )
        .unwrap();
        assert_eq!(t.samples.len(), 2101);
        let rows = t.downsampled(2000);
        assert!(rows.len() <= 2000);
        assert_eq!(rows[0], SampleRow::from(t.initial()));
        assert_eq!(*rows.last().unwrap(), SampleRow::from(t.last()));
        assert!(rows.windows(2).all(|w| w[0].t_days < w[1].t_days));
    }

    #[test]
    fn csv_has_expected_header_and_rows() {
        let cfg = SimConfig {
            record_stride: 100,
            ..SimConfig::default()
        };
        let t = simulate(&DoseSchedule::zeros(21), &default_patient(), &cfg).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), TRAJECTORY_CSV_HEADER);
        assert_eq!(lines.count(), 22);
    }

    #[test]
    fn below_noise_floor_is_reported() {
        // Nothing moves in an empty, drug-free system.
        let mut p = default_patient();
        p.initial_tumor = TumorState::default();
        let c = convergence_check(&DoseSchedule::zeros(21), &p, &SimConfig::default()).unwrap();
        assert_eq!(c, Convergence::BelowNoiseFloor);
    }
}
