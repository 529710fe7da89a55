//! C ABI over `chemoplan`.
//!
//! Handles are opaque and owned by the caller once returned; release them
//! with the matching `*_free`. Every fallible call returns a [`ChemoStatus`];
//! on failure [`chemo_last_error_message`] describes the error for the
//! calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use chemoplan::mopso::{ArchiveMember, SwarmConfig};
use chemoplan::sim::{self, DoseSchedule, SimConfig};
use chemoplan::{plan, Error, PatientModel};

/// Result codes shared by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChemoStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    SimulationFailure = 3,
    Io = 4,
    Panic = 5,
}

/// A patient parameter set.
pub struct ChemoPatient {
    model: PatientModel,
    sim: SimConfig,
}

/// A non-dominated set of schedules.
pub struct ChemoArchive {
    members: Vec<ArchiveMember>,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ChemoObjectives {
    /// Tumor cells at the end of treatment (minimized; +inf for failed runs).
    pub f1: f64,
    /// Neutrophils at the end of treatment (maximized).
    pub f2: f64,
    /// Lowest neutrophil count seen.
    pub min_circ: f64,
    pub feasible: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ChemoReport {
    pub avg_dose: f64,
    pub avg_concentration: f64,
    pub avg_circ: f64,
    pub cells_remaining: u64,
    pub pct_reduction: f64,
    pub tumor_grew: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ChemoSwarmOptions {
    pub population: usize,
    pub generations: usize,
    pub seed: u64,
    /// Evaluate particles on all cores; results do not depend on it.
    pub parallel: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

type Failure = (ChemoStatus, String);

fn from_error(e: Error) -> Failure {
    let status = match &e {
        Error::Simulation(_) | Error::Domain(_) => ChemoStatus::SimulationFailure,
        Error::Io { .. } => ChemoStatus::Io,
        _ => ChemoStatus::InvalidArgument,
    };
    (status, e.to_string())
}

fn null(what: &str) -> Failure {
    (ChemoStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> ChemoStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            ChemoStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            ChemoStatus::Panic
        }
    }
}

unsafe fn schedule(doses: *const f64, len: usize, patient: &ChemoPatient) -> Result<DoseSchedule, Failure> {
    if doses.is_null() && len > 0 {
        return Err(null("doses"));
    }
    let slice: &[f64] = if len == 0 {
        &[]
    } else {
        std::slice::from_raw_parts(doses, len)
    };
    let s = DoseSchedule::new(slice.to_vec(), patient.sim.dose_bounds).map_err(|e| from_error(e.into()))?;
    patient.sim.check_schedule(&s).map_err(|e| from_error(e.into()))?;
    Ok(s)
}

fn objectives(o: &chemoplan::ObjectiveVector) -> ChemoObjectives {
    ChemoObjectives {
        f1: o.f1,
        f2: o.f2,
        min_circ: o.min_circ,
        feasible: o.feasible,
    }
}

/// Message for the last failed call on this thread, or null. Valid until the
/// next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn chemo_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Built-in default patient with the default 21-day simulation settings.
#[no_mangle]
pub extern "C" fn chemo_patient_default() -> *mut ChemoPatient {
    Box::into_raw(Box::new(ChemoPatient {
        model: chemoplan::default_patient(),
        sim: SimConfig::default(),
    }))
}

/// Parses a patient parameter JSON document.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn chemo_patient_from_json(json: *const c_char, out: *mut *mut ChemoPatient) -> ChemoStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| (ChemoStatus::InvalidArgument, format!("json is not UTF-8: {e}")))?;
        let model = PatientModel::from_json_str(text).map_err(from_error)?;
        *out = Box::into_raw(Box::new(ChemoPatient {
            model,
            sim: SimConfig::default(),
        }));
        Ok(())
    })
}

/// # Safety
/// `patient` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn chemo_patient_free(patient: *mut ChemoPatient) {
    if !patient.is_null() {
        drop(Box::from_raw(patient));
    }
}

/// Simulates a daily schedule of `len` doses and writes its objectives.
///
/// # Safety
/// `doses` must point to `len` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn chemo_evaluate(
    patient: *const ChemoPatient,
    doses: *const f64,
    len: usize,
    out: *mut ChemoObjectives,
) -> ChemoStatus {
    guard(|| {
        let p = patient.as_ref().ok_or_else(|| null("patient"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let s = schedule(doses, len, p)?;
        *out = objectives(&sim::evaluate(&s, &p.model, &p.sim).map_err(from_error)?);
        Ok(())
    })
}

/// Simulates a daily schedule and writes the plan summary.
///
/// # Safety
/// As for [`chemo_evaluate`].
#[no_mangle]
pub unsafe extern "C" fn chemo_report(
    patient: *const ChemoPatient,
    doses: *const f64,
    len: usize,
    out: *mut ChemoReport,
) -> ChemoStatus {
    guard(|| {
        let p = patient.as_ref().ok_or_else(|| null("patient"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let s = schedule(doses, len, p)?;
        let t = sim::simulate(&s, &p.model, &p.sim).map_err(from_error)?;
        let r = sim::report(&s, &t, &p.model);
        *out = ChemoReport {
            avg_dose: r.avg_dose,
            avg_concentration: r.avg_concentration,
            avg_circ: r.avg_circ,
            cells_remaining: r.cells_remaining,
            pct_reduction: r.pct_reduction,
            tumor_grew: r.tumor_grew,
        };
        Ok(())
    })
}

/// Runs the optimizer; other swarm settings keep their defaults.
///
/// # Safety
/// `options` must be readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn chemo_optimize(
    patient: *const ChemoPatient,
    options: *const ChemoSwarmOptions,
    out: *mut *mut ChemoArchive,
) -> ChemoStatus {
    guard(|| {
        let p = patient.as_ref().ok_or_else(|| null("patient"))?;
        let o = options.as_ref().ok_or_else(|| null("options"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let swarm = SwarmConfig {
            population: o.population,
            generations: o.generations,
            seed: o.seed,
            parallel: o.parallel,
            dimensions: p.sim.horizon_days,
            ..SwarmConfig::default()
        };
        let run =
            plan::optimize(&p.model, &p.sim, &swarm, |_, _| std::ops::ControlFlow::Continue(())).map_err(from_error)?;
        *out = Box::into_raw(Box::new(ChemoArchive {
            members: run.archive.into_members(),
        }));
        Ok(())
    })
}

/// Number of members; 0 for null.
///
/// # Safety
/// `archive` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn chemo_archive_len(archive: *const ChemoArchive) -> usize {
    archive.as_ref().map_or(0, |a| a.members.len())
}

/// Copies member `index`. `position` receives up to `capacity` doses;
/// `position_len` (optional) receives the full schedule length.
///
/// # Safety
/// `position` must hold `capacity` doubles (or be null with capacity 0);
/// `objectives_out` and `position_len` may be null.
#[no_mangle]
pub unsafe extern "C" fn chemo_archive_member(
    archive: *const ChemoArchive,
    index: usize,
    position: *mut f64,
    capacity: usize,
    position_len: *mut usize,
    objectives_out: *mut ChemoObjectives,
) -> ChemoStatus {
    guard(|| {
        let a = archive.as_ref().ok_or_else(|| null("archive"))?;
        let m = a.members.get(index).ok_or_else(|| {
            (
                ChemoStatus::InvalidArgument,
                format!("index {index} is out of range for {} members", a.members.len()),
            )
        })?;
        if capacity > 0 {
            if position.is_null() {
                return Err(null("position"));
            }
            let n = capacity.min(m.position.len());
            ptr::copy_nonoverlapping(m.position.as_ptr(), position, n);
        }
        if let Some(len) = position_len.as_mut() {
            *len = m.position.len();
        }
        if let Some(o) = objectives_out.as_mut() {
            *o = objectives(&m.objectives);
        }
        Ok(())
    })
}

/// Serializes the archive as JSON; free the string with [`chemo_string_free`].
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn chemo_archive_to_json(archive: *const ChemoArchive, out: *mut *mut c_char) -> ChemoStatus {
    guard(|| {
        let a = archive.as_ref().ok_or_else(|| null("archive"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let json = chemoplan::export::archive_to_json(&a.members);
        *out = CString::new(json)
            .map_err(|e| (ChemoStatus::InvalidArgument, e.to_string()))?
            .into_raw();
        Ok(())
    })
}

/// # Safety
/// `archive` must come from this library and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn chemo_archive_free(archive: *mut ChemoArchive) {
    if !archive.is_null() {
        drop(Box::from_raw(archive));
    }
}

/// # Safety
/// `s` must come from this library. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn chemo_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
