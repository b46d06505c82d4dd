//! Four-step prediction: local neighbours, local fit (when good enough),
//! global neighbours, then the global fit that best explains local data.

use serde::{Deserialize, Serialize};

use super::{nn_predict, DeltaPolicy, FitModel, PointSet};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Step {
    LocalNeighbors,
    LocalFit,
    GlobalNeighbors,
    GlobalFit,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prediction {
    pub ms: f64,
    pub step: Step,
}

/// Picks the step-4 model: lowest SSE against `local`, or the best R² when
/// there are no local points yet.
pub fn select_global_fit<'a>(
    local: &PointSet,
    fits: impl IntoIterator<Item = &'a FitModel>,
) -> Option<&'a FitModel> {
    if local.is_empty() {
        fits.into_iter().max_by(|a, b| a.r2.total_cmp(&b.r2))
    } else {
        fits.into_iter()
            .map(|f| (f.sse(local), f))
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .map(|(_, f)| f)
    }
}

/// Per-task predictor with the global inputs resolved once.
#[derive(Clone, Copy, Debug)]
pub struct Combiner<'a> {
    pub local: &'a PointSet,
    pub local_fit: Option<&'a FitModel>,
    pub global_points: &'a PointSet,
    pub global_fit: Option<&'a FitModel>,
    pub policy: DeltaPolicy,
    pub r2_threshold: f64,
}

impl Combiner<'_> {
    pub fn predict(&self, x: f64) -> Result<Prediction> {
        if let Some(ms) = nn_predict(self.local, x, &self.policy) {
            return Ok(Prediction {
                ms,
                step: Step::LocalNeighbors,
            });
        }
        if let Some(fit) = self.local_fit.filter(|f| f.r2 >= self.r2_threshold) {
            return Ok(Prediction {
                ms: fit.predict(x),
                step: Step::LocalFit,
            });
        }
        if let Some(ms) = nn_predict(self.global_points, x, &self.policy) {
            return Ok(Prediction {
                ms,
                step: Step::GlobalNeighbors,
            });
        }
        if let Some(fit) = self.global_fit {
            return Ok(Prediction {
                ms: fit.predict(x),
                step: Step::GlobalFit,
            });
        }
        Err(Error::NoPrediction { size: x })
    }
}

/// One-shot form: `globals` holds every task's points and fitted model.
pub fn combined_predict(
    local: &PointSet,
    local_fit: Option<&FitModel>,
    globals: &[(PointSet, FitModel)],
    x: f64,
    policy: &DeltaPolicy,
    r2_threshold: f64,
) -> Result<Prediction> {
    let union = PointSet::union(globals.iter().map(|g| &g.0));
    let global_fit = select_global_fit(local, globals.iter().map(|g| &g.1));
    Combiner {
        local,
        local_fit,
        global_points: &union,
        global_fit,
        policy: *policy,
        r2_threshold,
    }
    .predict(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fit(a: f64, b: f64, c: f64, r2: f64) -> FitModel {
        FitModel { a, b, c, r2 }
    }

    const POLICY: DeltaPolicy = DeltaPolicy {
        floor_bytes: 1.0,
        fraction: 0.0,
    };

    #[test]
    fn local_neighbours_win() {
        let local = PointSet::from_pairs(&[(10, 5.0)]);
        let good = fit(0.0, 100.0, 1.0, 1.0);
        let p = combined_predict(&local, Some(&good), &[], 10.0, &POLICY, 0.9).unwrap();
        assert_eq!((p.ms, p.step), (5.0, Step::LocalNeighbors));
    }

    #[test]
    fn good_local_fit_is_second() {
        let local = PointSet::from_pairs(&[(10, 5.0)]);
        let f = fit(1.0, 2.0, 1.0, 0.95);
        let p = combined_predict(&local, Some(&f), &[], 50.0, &POLICY, 0.9).unwrap();
        assert_eq!((p.ms, p.step), (101.0, Step::LocalFit));
    }

    #[test]
    fn poor_local_fit_defers_to_global_neighbours() {
        let local = PointSet::from_pairs(&[(10, 5.0)]);
        let weak = fit(1.0, 2.0, 1.0, 0.5);
        let other = PointSet::from_pairs(&[(50, 77.0)]);
        let globals = vec![(other, fit(0.0, 1.0, 1.0, 0.99))];
        let p = combined_predict(&local, Some(&weak), &globals, 50.0, &POLICY, 0.9).unwrap();
        assert_eq!((p.ms, p.step), (77.0, Step::GlobalNeighbors));
    }

    #[test]
    fn global_fit_closest_to_local_data() {
        let local = PointSet::from_pairs(&[(10, 20.0), (20, 40.0)]);
        let globals = vec![
            (PointSet::from_pairs(&[(1, 1.0)]), fit(0.0, 1.0, 1.0, 0.99)),
            (PointSet::from_pairs(&[(2, 4.0)]), fit(0.0, 2.0, 1.0, 0.5)),
        ];
        let p = combined_predict(&local, None, &globals, 100.0, &POLICY, 0.9).unwrap();
        assert_eq!((p.ms, p.step), (200.0, Step::GlobalFit));
    }

    #[test]
    fn unscheduled_task_uses_best_r2() {
        let fits = [fit(0.0, 1.0, 1.0, 0.7), fit(0.0, 3.0, 1.0, 0.97)];
        let chosen = select_global_fit(&PointSet::default(), fits.iter()).unwrap();
        assert_eq!(chosen.b, 3.0);
    }

    #[test]
    fn nothing_applicable() {
        let err = combined_predict(&PointSet::default(), None, &[], 5.0, &POLICY, 0.9);
        assert!(matches!(err, Err(Error::NoPrediction { .. })));
    }
}
