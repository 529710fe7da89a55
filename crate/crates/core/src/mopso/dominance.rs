use crate::sim::ObjectiveVector;

/// Constraint-dominance for (minimize f1, maximize f2).
///
/// Feasible beats infeasible. Two infeasible points are ordered by their
/// nadir alone, the less violated one dominating. Two feasible points use
/// plain Pareto dominance.
pub fn dominates(a: &ObjectiveVector, b: &ObjectiveVector) -> bool {
    match (a.feasible, b.feasible) {
        (true, false) => true,
        (false, true) => false,
        (false, false) => a.min_circ > b.min_circ,
        (true, true) => a.f1 <= b.f1 && a.f2 >= b.f2 && (a.f1 < b.f1 || a.f2 > b.f2),
    }
}

/// Brute-force non-dominated filter, O(n²). Returns indices into `points`.
pub fn non_dominated_indices(points: &[ObjectiveVector]) -> Vec<usize> {
    (0..points.len())
        .filter(|&i| !points.iter().any(|q| dominates(q, &points[i])))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn feasible(f1: f64, f2: f64) -> ObjectiveVector {
        ObjectiveVector {
            f1,
            f2,
            min_circ: 2e9,
            feasible: true,
        }
    }

    #[test]
    fn better_in_both() {
        assert!(dominates(&feasible(100.0, 2e9), &feasible(200.0, 1e9)));
        assert!(!dominates(&feasible(200.0, 1e9), &feasible(100.0, 2e9)));
    }

    #[test]
    fn incomparable_pair() {
        let a = feasible(100.0, 1e9);
        let b = feasible(200.0, 2e9);
        assert!(!dominates(&a, &b));
        assert!(!dominates(&b, &a));
    }

    #[test]
    fn irreflexive() {
        let a = feasible(100.0, 1e9);
        assert!(!dominates(&a, &a));
        let inf = ObjectiveVector { feasible: false, ..a };
        assert!(!dominates(&inf, &inf));
    }

    #[test]
    fn equal_in_one_objective() {
        assert!(dominates(&feasible(100.0, 2e9), &feasible(100.0, 1e9)));
        assert!(dominates(&feasible(50.0, 1e9), &feasible(100.0, 1e9)));
    }

    #[test]
    fn feasibility_first() {
        let good = feasible(1e12, 1.0);
        let bad = ObjectiveVector {
            f1: 0.0,
            f2: 1e10,
            min_circ: 1e9,
            feasible: false,
        };
        assert!(dominates(&good, &bad));
        assert!(!dominates(&bad, &good));
        assert!(dominates(&bad, &ObjectiveVector::failed()));
    }

    #[test]
    fn infeasible_ranked_by_nadir() {
        let a = ObjectiveVector {
            f1: 1e12,
            f2: 1.0,
            min_circ: 1.2e9,
            feasible: false,
        };
        let b = ObjectiveVector {
            f1: 0.0,
            f2: 1e10,
            min_circ: 1.1e9,
            feasible: false,
        };
        assert!(dominates(&a, &b));
        assert!(!dominates(&b, &a));
    }

    #[test]
    fn brute_force_filter() {
        let pts = [
            feasible(1.0, 5.0),
            feasible(2.0, 6.0),
            feasible(2.0, 4.0),
            feasible(3.0, 6.0),
        ];
        assert_eq!(non_dominated_indices(&pts), vec![0, 1]);
    }
}
