use super::{DeltaPolicy, PointSet};

/// Mean running time of the points whose size lies within `delta(x)` of `x`,
/// or `None` when the neighbourhood is empty.
pub fn nn_predict(points: &PointSet, x: f64, policy: &DeltaPolicy) -> Option<f64> {
    let width = policy.width(x);
    points.range_mean(x - width, x + width)
}
