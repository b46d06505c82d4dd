//! Weighted least-squares fit of `a + b * x^c`.
//!
//! Sizes are rescaled to `u = x / x_max` so that `u^c` stays in `[0, 1]`.
//! For a fixed exponent the model is linear in `(a, b)`, which gives both a
//! cheap exponent scan for the starting point and the closed-form solve used
//! there. Refinement is Levenberg-Marquardt on all three parameters with the
//! exponent clamped to `[0, MAX_EXPONENT]`.

use serde::{Deserialize, Serialize};

use super::PointSet;

pub const MAX_EXPONENT: f64 = 6.0;
const MAX_ITERATIONS: usize = 200;
const REL_TOLERANCE: f64 = 1e-9;
const SCAN_STEP: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitModel {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub r2: f64,
}

impl FitModel {
    /// Predicted running time, clamped at zero.
    pub fn predict(&self, x: f64) -> f64 {
        let v = self.a + self.b * x.powf(self.c);
        if v.is_finite() {
            v.max(0.0)
        } else {
            0.0
        }
    }

    /// Count-weighted sum of squared residuals against `points`.
    pub fn sse(&self, points: &PointSet) -> f64 {
        points
            .points()
            .iter()
            .map(|p| {
                let r = p.time_ms - self.predict(p.size_bytes as f64);
                p.count as f64 * r * r
            })
            .sum()
    }
}

struct Problem {
    u: Vec<f64>,
    y: Vec<f64>,
    w: Vec<f64>,
    scale: f64,
}

#[derive(Clone, Copy, Debug)]
struct Params {
    a: f64,
    b: f64,
    c: f64,
}

impl Problem {
    fn sse(&self, p: Params) -> f64 {
        self.u
            .iter()
            .zip(&self.y)
            .zip(&self.w)
            .map(|((&u, &y), &w)| {
                let r = y - (p.a + p.b * u.powf(p.c));
                w * r * r
            })
            .sum()
    }

    /// Best `(a, b)` for a fixed exponent.
    fn solve_linear(&self, c: f64) -> Params {
        let (mut sw, mut sz, mut szz, mut sy, mut szy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for ((&u, &y), &w) in self.u.iter().zip(&self.y).zip(&self.w) {
            let z = u.powf(c);
            sw += w;
            sz += w * z;
            szz += w * z * z;
            sy += w * y;
            szy += w * z * y;
        }
        let det = sw * szz - sz * sz;
        if det.abs() <= 1e-12 * sw * szz.max(1e-300) {
            return Params {
                a: sy / sw,
                b: 0.0,
                c,
            };
        }
        let b = (sw * szy - sz * sy) / det;
        Params {
            a: (sy - b * sz) / sw,
            b,
            c,
        }
    }

    /// Starting point from the log-log slope of `(x, y - min y)`.
    fn loglog_start(&self) -> Params {
        let floor = self.y.iter().copied().fold(f64::INFINITY, f64::min);
        let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        let mut n = 0;
        for ((&u, &y), &w) in self.u.iter().zip(&self.y).zip(&self.w) {
            let lifted = y - floor;
            if u > 0.0 && lifted > 0.0 {
                let (lx, ly) = (u.ln(), lifted.ln());
                sw += w;
                sx += w * lx;
                sy += w * ly;
                sxx += w * lx * lx;
                sxy += w * lx * ly;
                n += 1;
            }
        }
        let det = sw * sxx - sx * sx;
        if n < 2 || det.abs() < 1e-12 {
            return self.solve_linear(1.0);
        }
        let slope = (sw * sxy - sx * sy) / det;
        let intercept = (sy - slope * sx) / sw;
        Params {
            a: floor,
            b: intercept.exp(),
            c: slope.clamp(0.0, MAX_EXPONENT),
        }
    }

    fn scan_start(&self) -> Params {
        let steps = (MAX_EXPONENT / SCAN_STEP).round() as usize;
        (0..=steps)
            .map(|i| self.solve_linear(i as f64 * SCAN_STEP))
            .min_by(|a, b| self.sse(*a).total_cmp(&self.sse(*b)))
            .expect("non-empty scan")
    }

    fn refine(&self, start: Params) -> (Params, f64) {
        let mut p = start;
        let mut sse = self.sse(p);
        let mut mu = 1e-3;
        for _ in 0..MAX_ITERATIONS {
            if sse == 0.0 {
                break;
            }
            // Normal equations J^T W J and J^T W r.
            let mut jtj = [[0.0f64; 3]; 3];
            let mut jtr = [0.0f64; 3];
            for ((&u, &y), &w) in self.u.iter().zip(&self.y).zip(&self.w) {
                let z = u.powf(p.c);
                let dz = if u > 0.0 { p.b * z * u.ln() } else { 0.0 };
                let grad = [1.0, z, dz];
                let r = y - (p.a + p.b * z);
                for i in 0..3 {
                    jtr[i] += w * grad[i] * r;
                    for j in 0..3 {
                        jtj[i][j] += w * grad[i] * grad[j];
                    }
                }
            }
            let mut accepted = false;
            while mu < 1e12 {
                let mut m = jtj;
                for (i, row) in m.iter_mut().enumerate() {
                    row[i] += mu * jtj[i][i].max(1e-12);
                }
                let Some(step) = solve3(m, jtr) else {
                    mu *= 10.0;
                    continue;
                };
                let trial = Params {
                    a: p.a + step[0],
                    b: p.b + step[1],
                    c: (p.c + step[2]).clamp(0.0, MAX_EXPONENT),
                };
                let trial_sse = self.sse(trial);
                if trial_sse.is_finite() && trial_sse < sse {
                    let rel = (sse - trial_sse) / sse;
                    p = trial;
                    sse = trial_sse;
                    mu = (mu * 0.3).max(1e-12);
                    accepted = rel >= REL_TOLERANCE;
                    break;
                }
                mu *= 10.0;
            }
            if !accepted {
                break;
            }
        }
        (p, sse)
    }
}

fn solve3(mut m: [[f64; 3]; 3], mut v: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[pivot][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, pivot);
        v.swap(col, pivot);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            for k in col..3 {
                m[row][k] -= f * m[col][k];
            }
            v[row] -= f * v[col];
        }
    }
    let mut out = [0.0; 3];
    for row in (0..3).rev() {
        let tail: f64 = (row + 1..3).map(|k| m[row][k] * out[k]).sum();
        out[row] = (v[row] - tail) / m[row][row];
    }
    out.iter().all(|x| x.is_finite()).then_some(out)
}

/// Fits `a + b * x^c` to `points`, weighting each point by its count.
/// Needs at least three distinct sizes.
pub fn fit_power(points: &PointSet) -> Option<FitModel> {
    if points.len() < 3 || points.distinct_sizes() < 3 {
        return None;
    }
    let scale = points
        .points()
        .iter()
        .map(|p| p.size_bytes)
        .max()
        .unwrap_or(0) as f64;
    if scale <= 0.0 {
        return None;
    }
    let problem = Problem {
        u: points
            .points()
            .iter()
            .map(|p| p.size_bytes as f64 / scale)
            .collect(),
        y: points.points().iter().map(|p| p.time_ms).collect(),
        w: points.points().iter().map(|p| p.count as f64).collect(),
        scale,
    };

    let (best, sse) = [problem.loglog_start(), problem.scan_start()]
        .into_iter()
        .map(|start| problem.refine(start))
        .min_by(|a, b| a.1.total_cmp(&b.1))?;

    let total_w: f64 = problem.w.iter().sum();
    let mean = problem.y.iter().zip(&problem.w).map(|(y, w)| y * w).sum::<f64>() / total_w;
    let sst: f64 = problem
        .y
        .iter()
        .zip(&problem.w)
        .map(|(y, w)| w * (y - mean) * (y - mean))
        .sum();
    let r2 = if sst <= f64::EPSILON * total_w * mean.abs().max(1.0) {
        if sse <= 1e-9 * total_w.max(1.0) {
            1.0
        } else {
            0.0
        }
    } else {
        1.0 - sse / sst
    };

    Some(FitModel {
        a: best.a,
        b: best.b / problem.scale.powf(best.c),
        c: best.c,
        r2,
    })
}
