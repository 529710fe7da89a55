mod common;

use chemoplan::model::{default_patient, PkState};
use chemoplan::sim::{
    convergence_check, convergence_check_pk, evaluate, simulate, simulate_pk, Convergence, DoseBounds, DoseSchedule,
    SimConfig,
};
use common::{dominant_eigenvalue, expm2_apply};
use proptest::prelude::*;

fn bolus(day: usize, dose: f64) -> DoseSchedule {
    let mut d = vec![0.0; 21];
    d[day] = dose;
    DoseSchedule::new(d, DoseBounds::default()).unwrap()
}

fn pk_matrix() -> [[f64; 2]; 2] {
    let pk = default_patient().pk;
    [[-(pk.k12 + pk.k10), pk.k21], [pk.k12, -pk.k21]]
}

fn tumor_matrix() -> [[f64; 2]; 2] {
    let t = default_patient().tumor;
    [[t.alpha - t.mu - t.eta, t.beta], [t.mu, -t.beta]]
}

#[test]
fn untreated_tumor_grows_like_matrix_exponential() {
    let a = tumor_matrix();
    assert!((a[0][0] + 0.195).abs() < 1e-12);
    assert!(dominant_eigenvalue(a) > 0.0);

    let p = default_patient();
    let traj = simulate(&DoseSchedule::zeros(21), &p, &SimConfig::default()).unwrap();
    for s in traj.samples.iter().step_by(100) {
        let exact = expm2_apply(a, s.t_days, [p.initial_tumor.x1, p.initial_tumor.x2]);
        assert!((s.tumor.x1 / exact[0] - 1.0).abs() < 1e-9, "t={}", s.t_days);
        assert!((s.tumor.x2 / exact[1] - 1.0).abs() < 1e-9, "t={}", s.t_days);
    }
    assert!(traj.last().tumor.total() > 1e12);
}

#[test]
fn pk_bolus_matches_biexponential_solution() {
    let p = default_patient();
    let run = simulate_pk(&bolus(0, 5.0), &p.pk, PkState::default(), &SimConfig::default()).unwrap();
    let a = pk_matrix();
    // t = 0 is recorded before the bolus lands.
    for (t, s) in run.iter().skip(1) {
        let exact = expm2_apply(a, *t, [5.0, 0.0]);
        assert!((s.xc / exact[0] - 1.0).abs() < 1e-8, "xc at t={t}");
        assert!((s.xp / exact[1] - 1.0).abs() < 1e-8, "xp at t={t}");
    }
}

#[test]
fn coupled_pk_matches_pk_only_run() {
    let p = default_patient();
    let s = DoseSchedule::uniform(2.5, 21);
    let full = simulate(&s, &p, &SimConfig::default()).unwrap();
    let pk = simulate_pk(&s, &p.pk, PkState::default(), &SimConfig::default()).unwrap();
    assert_eq!(full.samples.len(), pk.len());
    for (a, (_, b)) in full.samples.iter().zip(&pk) {
        assert_eq!(a.pk, *b);
    }
}

#[test]
fn pk_is_linear_in_boluses() {
    let p = default_patient();
    let cfg = SimConfig::default();
    let a = simulate_pk(&bolus(0, 3.0), &p.pk, PkState::default(), &cfg).unwrap();
    let b = simulate_pk(&bolus(5, 2.0), &p.pk, PkState::default(), &cfg).unwrap();
    let mut both = vec![0.0; 21];
    both[0] = 3.0;
    both[5] = 2.0;
    let ab = simulate_pk(
        &DoseSchedule::new(both, DoseBounds::default()).unwrap(),
        &p.pk,
        PkState::default(),
        &cfg,
    )
    .unwrap();
    for ((x, y), (_, z)) in a.iter().zip(&b).zip(&ab) {
        let sum = x.1.xc + y.1.xc;
        assert!((z.xc - sum).abs() <= 1e-12 * sum.abs().max(1.0));
        let sum = x.1.xp + y.1.xp;
        assert!((z.xp - sum).abs() <= 1e-12 * sum.abs().max(1.0));
    }
}

#[test]
fn daily_max_dose_kills_more_and_suppresses_marrow() {
    let p = default_patient();
    for cfg in [SimConfig::default(), SimConfig::default().refined(10)] {
        let none = evaluate(&DoseSchedule::zeros(21), &p, &cfg).unwrap();
        let max = evaluate(&DoseSchedule::uniform(5.0, 21), &p, &cfg).unwrap();
        assert!(max.f1 < none.f1);
        assert!(max.min_circ < p.myelo.circ0);
        assert!(none.feasible);
        assert!((none.f2 / 5e9 - 1.0).abs() < 1e-9);
    }
    // The coarse and fine runs agree closely.
    let coarse = evaluate(&DoseSchedule::uniform(5.0, 21), &p, &SimConfig::default()).unwrap();
    let fine = evaluate(&DoseSchedule::uniform(5.0, 21), &p, &SimConfig::default().refined(10)).unwrap();
    assert!((coarse.f1 / fine.f1 - 1.0).abs() < 1e-9);
    assert!((coarse.min_circ / fine.min_circ - 1.0).abs() < 1e-9);
}

#[test]
fn rk4_order_is_visible_at_coarse_steps() {
    let p = default_patient();
    for step_hours in [24.0, 12.0, 6.0] {
        let cfg = SimConfig {
            step_hours,
            ..SimConfig::default()
        };
        let r = convergence_check(&DoseSchedule::zeros(21), &p, &cfg)
            .unwrap()
            .ratio()
            .unwrap();
        assert!((12.0..=20.0).contains(&r), "untreated ratio {r} at {step_hours} h");
        let r = convergence_check_pk(&bolus(0, 5.0), &p.pk, &cfg)
            .unwrap()
            .ratio()
            .unwrap();
        assert!((12.0..=20.0).contains(&r), "PK ratio {r} at {step_hours} h");
    }
}

#[test]
fn default_step_is_below_noise_floor_for_untreated_run() {
    let c = convergence_check(&DoseSchedule::zeros(21), &default_patient(), &SimConfig::default()).unwrap();
    assert_eq!(c, Convergence::BelowNoiseFloor);
}

#[test]
fn grade3_threshold_is_looser() {
    let p = default_patient();
    let mut p_sensitive = p.clone();
    p_sensitive.myelo.slope = 2.0;
    let s = DoseSchedule::uniform(5.0, 21);
    let g2 = evaluate(&s, &p_sensitive, &SimConfig::default()).unwrap();
    let g3 = evaluate(
        &s,
        &p_sensitive,
        &SimConfig {
            circ_threshold: chemoplan::sim::CIRC_THRESHOLD_GRADE3,
            ..SimConfig::default()
        },
    )
    .unwrap();
    assert_eq!(g2.min_circ, g3.min_circ);
    assert!(g2.min_circ < 1.5e9, "nadir {}", g2.min_circ);
    assert!(!g2.feasible);
    assert_eq!(g3.feasible, g3.min_circ >= 1e9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn more_drug_never_raises_the_nadir(
        base in prop::collection::vec(0.0..5.0f64, 21),
        extra in prop::collection::vec(0.0..2.0f64, 21),
    ) {
        let p = default_patient();
        let cfg = SimConfig { step_hours: 2.4, ..SimConfig::default() };
        let hi: Vec<f64> = base.iter().zip(&extra).map(|(b, e)| (b + e).min(5.0)).collect();
        let lo = evaluate(&DoseSchedule::new(base, DoseBounds::default()).unwrap(), &p, &cfg).unwrap();
        let hi = evaluate(&DoseSchedule::new(hi, DoseBounds::default()).unwrap(), &p, &cfg).unwrap();
        prop_assert!(hi.min_circ <= lo.min_circ * (1.0 + 1e-12));
        prop_assert!(hi.f1 <= lo.f1 * (1.0 + 1e-12));
    }

    #[test]
    fn zero_dose_keeps_any_stationary_patient_at_baseline(
        circ0 in 1e8..1e11f64, ktr in 0.1..3.0f64, gamma in 0.05..1.0f64,
    ) {
        let mut p = default_patient();
        p.myelo.circ0 = circ0;
        p.myelo.ktr = ktr;
        p.myelo.kprol = ktr;
        p.myelo.gamma = gamma;
        p.initial_myelo = chemoplan::model::MyeloState::uniform(circ0);
        let cfg = SimConfig { step_hours: 2.4, ..SimConfig::default() };
        let t = simulate(&DoseSchedule::zeros(21), &p, &cfg).unwrap();
        for s in &t.samples {
            prop_assert!((s.myelo.circ / circ0 - 1.0).abs() <= 1e-6);
        }
    }

    #[test]
    fn injected_drug_equals_schedule_sum(doses in prop::collection::vec(0.0..5.0f64, 21)) {
        let sum: f64 = doses.iter().sum();
        let s = DoseSchedule::new(doses, DoseBounds::default()).unwrap();
        let cfg = SimConfig { step_hours: 4.8, ..SimConfig::default() };
        let t = simulate(&s, &default_patient(), &cfg).unwrap();
        prop_assert_eq!(t.total_injected, sum);
    }
}
