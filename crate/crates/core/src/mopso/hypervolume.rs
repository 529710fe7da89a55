use crate::error::{Error, Result};
use crate::sim::ObjectiveVector;

/// Exact 2-D hypervolume of the region weakly dominated by `points` and
/// bounded by `reference`, with f1 minimized and f2 maximized.
///
/// Every point must satisfy `f1 <= ref.f1` and `f2 >= ref.f2`.
pub fn hypervolume(points: &[ObjectiveVector], reference: (f64, f64)) -> Result<f64> {
    for p in points {
        if !(p.f1 <= reference.0 && p.f2 >= reference.1) {
            return Err(Error::Reference {
                reference,
                member: (p.f1, p.f2),
            });
        }
    }
    Ok(sweep(points.iter().map(|p| (p.f1, p.f2)).collect(), reference))
}

/// Hypervolume of the points inside the reference box; points outside it
/// contribute nothing. Used for progress logging where late members can land
/// beyond a reference fixed at the start of a run.
pub fn clipped_hypervolume(points: &[ObjectiveVector], reference: (f64, f64)) -> f64 {
    sweep(
        points
            .iter()
            .filter(|p| p.f1 <= reference.0 && p.f2 >= reference.1)
            .map(|p| (p.f1, p.f2))
            .collect(),
        reference,
    )
}

fn sweep(mut pts: Vec<(f64, f64)>, reference: (f64, f64)) -> f64 {
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut area = 0.0;
    let mut height = reference.1;
    for (i, &(f1, f2)) in pts.iter().enumerate() {
        height = height.max(f2);
        let next = pts.get(i + 1).map_or(reference.0, |p| p.0);
        area += (next - f1) * (height - reference.1);
    }
    area
}
