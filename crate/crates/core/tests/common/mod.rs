//! Test-only oracles, independent of the integrator and archive code paths.
#![allow(dead_code)]

use chemoplan::mopso::ArchiveMember;
use chemoplan::ObjectiveVector;

/// exp(A·t)·x0 for a real 2×2 matrix with distinct real eigenvalues, via
/// Sylvester's formula: exp(At) = (e^{λ1 t}(A − λ2 I) − e^{λ2 t}(A − λ1 I)) / (λ1 − λ2).
pub fn expm2_apply(a: [[f64; 2]; 2], t: f64, x0: [f64; 2]) -> [f64; 2] {
    let tr = a[0][0] + a[1][1];
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    let disc = tr * tr - 4.0 * det;
    assert!(disc > 0.0, "oracle needs distinct real eigenvalues");
    let s = disc.sqrt();
    let (l1, l2) = ((tr + s) / 2.0, (tr - s) / 2.0);
    let (e1, e2) = ((l1 * t).exp(), (l2 * t).exp());
    let m = |i: usize, j: usize| {
        let id = if i == j { 1.0 } else { 0.0 };
        (e1 * (a[i][j] - l2 * id) - e2 * (a[i][j] - l1 * id)) / (l1 - l2)
    };
    [m(0, 0) * x0[0] + m(0, 1) * x0[1], m(1, 0) * x0[0] + m(1, 1) * x0[1]]
}

/// Dominant eigenvalue of a real 2×2 matrix with real spectrum.
pub fn dominant_eigenvalue(a: [[f64; 2]; 2]) -> f64 {
    let tr = a[0][0] + a[1][1];
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    (tr + (tr * tr - 4.0 * det).sqrt()) / 2.0
}

/// Independent restatement of constraint-dominance for cross-checking.
pub fn oracle_dominates(a: &ObjectiveVector, b: &ObjectiveVector) -> bool {
    if a.feasible != b.feasible {
        return a.feasible;
    }
    if !a.feasible {
        return a.min_circ > b.min_circ;
    }
    let no_worse = a.f1 <= b.f1 && a.f2 >= b.f2;
    let better = a.f1 < b.f1 || a.f2 > b.f2;
    no_worse && better
}

/// O(n²) non-dominated filter with position de-duplication (first occurrence kept).
pub fn brute_force_front(stream: &[ArchiveMember]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for (i, c) in stream.iter().enumerate() {
        let dominated = stream.iter().any(|o| oracle_dominates(&o.objectives, &c.objectives));
        let seen = stream[..i].iter().any(|o| o.position == c.position);
        if !dominated && !seen {
            out.push(c.position.clone());
        }
    }
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out
}

pub fn sorted_positions(members: &[ArchiveMember]) -> Vec<Vec<f64>> {
    let mut v: Vec<Vec<f64>> = members.iter().map(|m| m.position.clone()).collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}
