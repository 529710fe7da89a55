//! Physiological models: two-compartment pharmacokinetics, a cycling/resting
//! tumor population, and a semi-mechanistic myelosuppression chain.
//!
//! Everything here is a plain value type or a pure function. The simulator
//! couples them; nothing in this module integrates over time.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Two-compartment PK rate constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PkParams {
    /// Central → peripheral transfer rate (1/day).
    pub k12: f64,
    /// Peripheral → central transfer rate (1/day).
    pub k21: f64,
    /// Elimination rate from the central compartment (1/day).
    pub k10: f64,
    /// Central compartment volume (L).
    pub vc: f64,
}

/// Drug amounts (mg) in plasma and in the peripheral compartment.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PkState {
    pub xc: f64,
    pub xp: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TumorParams {
    /// Growth rate of cycling cells (1/day).
    pub alpha: f64,
    /// Cycling → resting transfer (1/day).
    pub mu: f64,
    /// Resting → cycling transfer (1/day).
    pub beta: f64,
    /// Natural decay of cycling cells (1/day).
    pub eta: f64,
    /// Kill coefficient of the drug on cycling cells (L/mg/day).
    pub k1: f64,
}

/// Cycling (`x1`) and resting (`x2`) tumor cell counts.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TumorState {
    pub x1: f64,
    pub x2: f64,
}

impl TumorState {
    pub fn total(&self) -> f64 {
        self.x1 + self.x2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MyeloParams {
    /// Transit rate through the maturation chain (1/day).
    pub ktr: f64,
    /// Proliferation rate of the stem/progenitor pool (1/day).
    pub kprol: f64,
    /// Feedback exponent on `circ0 / circ`.
    pub gamma: f64,
    /// Linear drug-effect coefficient (L/mg).
    pub slope: f64,
    /// Baseline circulating neutrophils (cells/L).
    pub circ0: f64,
    /// Cap the drug effect at 1 so the production term never goes negative.
    #[serde(default)]
    pub clamp_edrug_at_one: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MyeloState {
    pub prol: f64,
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub circ: f64,
}

impl MyeloState {
    /// Homogeneous state with every compartment at `level`.
    pub fn uniform(level: f64) -> Self {
        MyeloState {
            prol: level,
            t1: level,
            t2: level,
            t3: level,
            circ: level,
        }
    }
}

/// Complete parameterization of one virtual patient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientModel {
    pub pk: PkParams,
    pub tumor: TumorParams,
    pub myelo: MyeloParams,
    pub initial_pk: PkState,
    pub initial_tumor: TumorState,
    pub initial_myelo: MyeloState,
}

impl Default for PatientModel {
    fn default() -> Self {
        default_patient()
    }
}

impl PatientModel {
    pub fn validate(&self) -> Result<()> {
        let pk = &self.pk;
        for (name, v) in [("k12", pk.k12), ("k21", pk.k21), ("k10", pk.k10), ("vc", pk.vc)] {
            positive(name, v)?;
        }
        let t = &self.tumor;
        for (name, v) in [
            ("alpha", t.alpha),
            ("mu", t.mu),
            ("beta", t.beta),
            ("eta", t.eta),
            ("k1", t.k1),
        ] {
            non_negative(name, v)?;
        }
        let m = &self.myelo;
        for (name, v) in [
            ("ktr", m.ktr),
            ("kprol", m.kprol),
            ("gamma", m.gamma),
            ("slope", m.slope),
            ("circ0", m.circ0),
        ] {
            positive(name, v)?;
        }
        non_negative("initial_pk.xc", self.initial_pk.xc)?;
        non_negative("initial_pk.xp", self.initial_pk.xp)?;
        non_negative("initial_tumor.x1", self.initial_tumor.x1)?;
        non_negative("initial_tumor.x2", self.initial_tumor.x2)?;
        let im = &self.initial_myelo;
        for (name, v) in [
            ("initial_myelo.prol", im.prol),
            ("initial_myelo.t1", im.t1),
            ("initial_myelo.t2", im.t2),
            ("initial_myelo.t3", im.t3),
            ("initial_myelo.circ", im.circ),
        ] {
            positive(name, v)?;
        }
        Ok(())
    }

    /// Parses a patient from JSON and validates it.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let patient: PatientModel = serde_json::from_str(text)?;
        patient.validate()?;
        Ok(patient)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    /// Loads `path` when given, otherwise falls back to [`default_patient`].
    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => Self::load(p),
            None => Ok(default_patient()),
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be finite and > 0, got {v}"
        )))
    }
}

fn non_negative(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "{name} must be finite and >= 0, got {v}"
        )))
    }
}

/// Etoposide (VP-16) parameterization used throughout the experiments.
///
/// The tumor starts at 1e12 cells split 8e11 cycling / 2e11 resting and the
/// marrow chain starts at its drug-free steady state, every compartment equal
/// to `circ0`. `kprol` equals `ktr`, which makes that state stationary.
pub fn default_patient() -> PatientModel {
    let ktr = 0.7680;
    let circ0 = 5e9;
    PatientModel {
        pk: PkParams {
            k12: 0.14,
            k21: 0.06,
            k10: 1.14,
            vc: 6.0,
        },
        tumor: TumorParams {
            alpha: 0.5,
            mu: 0.218,
            beta: 0.05,
            eta: 0.477,
            k1: 0.03,
        },
        myelo: MyeloParams {
            ktr,
            kprol: ktr,
            gamma: 0.17,
            slope: 0.126,
            circ0,
            clamp_edrug_at_one: false,
        },
        initial_pk: PkState { xc: 0.0, xp: 0.0 },
        initial_tumor: TumorState { x1: 8e11, x2: 2e11 },
        initial_myelo: MyeloState::uniform(circ0),
    }
}

/// Plasma concentration (mg/L).
#[inline]
pub fn plasma_concentration(state: &PkState, params: &PkParams) -> f64 {
    state.xc / params.vc
}

/// Free-decay PK derivatives. Doses enter as impulses in the simulator, not here.
#[inline]
pub fn pk_rhs(state: &PkState, params: &PkParams) -> PkState {
    PkState {
        xc: params.k21 * state.xp - (params.k12 + params.k10) * state.xc,
        xp: params.k12 * state.xc - params.k21 * state.xp,
    }
}

/// Cycle-specific kill rate (1/day) applied to cycling cells.
#[inline]
pub fn drug_kill_rate(concentration: f64, params: &TumorParams) -> f64 {
    params.k1 * concentration
}

#[inline]
pub fn tumor_rhs(state: &TumorState, kill_rate: f64, params: &TumorParams) -> TumorState {
    let p = params;
    TumorState {
        x1: (p.alpha - p.mu - p.eta) * state.x1 + p.beta * state.x2 - kill_rate * state.x1,
        x2: p.mu * state.x1 - p.beta * state.x2,
    }
}

/// Fractional inhibition of marrow proliferation. Linear and unbounded
/// unless `clamp_edrug_at_one` is set.
#[inline]
pub fn drug_effect(concentration: f64, params: &MyeloParams) -> f64 {
    let e = params.slope * concentration;
    if params.clamp_edrug_at_one {
        e.min(1.0)
    } else {
        e
    }
}

pub fn myelo_rhs(state: &MyeloState, e_drug: f64, params: &MyeloParams) -> Result<MyeloState> {
    if !(state.circ > 0.0) {
        return Err(Error::Domain(format!(
            "circulating neutrophils must be > 0 for the feedback term, got {}",
            state.circ
        )));
    }
    let ktr = params.ktr;
    let feedback = (params.circ0 / state.circ).powf(params.gamma);
    Ok(MyeloState {
        prol: params.kprol * state.prol * (1.0 - e_drug) * feedback - ktr * state.prol,
        t1: ktr * (state.prol - state.t1),
        t2: ktr * (state.t1 - state.t2),
        t3: ktr * (state.t2 - state.t3),
        circ: ktr * (state.t3 - state.circ),
    })
}
