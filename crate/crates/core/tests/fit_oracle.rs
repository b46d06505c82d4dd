//! Power-law fits checked against an exhaustive search.

use proptest::prelude::*;
use skewsim::regression::{fit_power, PointSet};

/// Minimum SSE of `a + b * x^c` over `c` in steps of 0.0005 on `[0, 6]`,
/// with `(a, b)` solved exactly for each `c`. Returns `(c, sse)`.
fn grid_search(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mut best = (0.0, f64::INFINITY);
    for step in 0..=12_000 {
        let c = step as f64 * 0.0005;
        let z: Vec<f64> = xs.iter().map(|x| x.powf(c)).collect();
        let sz: f64 = z.iter().sum();
        let sy: f64 = ys.iter().sum();
        let szz: f64 = z.iter().map(|v| v * v).sum();
        let szy: f64 = z.iter().zip(ys).map(|(a, b)| a * b).sum();
        let det = n * szz - sz * sz;
        if det.abs() <= 1e-9 * szz.max(1.0) {
            continue;
        }
        let a = (szz * sy - sz * szy) / det;
        let b = (n * szy - sz * sy) / det;
        let sse: f64 = z.iter().zip(ys).map(|(z, y)| (y - a - b * z).powi(2)).sum();
        if sse < best.1 {
            best = (c, sse);
        }
    }
    best
}

#[test]
fn quadratic_with_intercept_matches_grid() {
    let xs: Vec<f64> = (1..=10).map(|i| (10 * i) as f64).collect();
    let ys: Vec<f64> = xs.iter().map(|x| 5.0 + 0.01 * x * x).collect();
    let pairs: Vec<(u64, f64)> = xs.iter().zip(&ys).map(|(&x, &y)| (x as u64, y)).collect();
    let fit = fit_power(&PointSet::from_pairs(&pairs)).unwrap();
    let (c, _) = grid_search(&xs, &ys);
    assert!((c - 2.0).abs() <= 0.05);
    assert!((fit.c - 2.0).abs() <= 0.05, "{fit:?}");
    assert!(fit.r2 >= 0.999);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn fit_is_no_worse_than_grid(
        a in 0.0f64..500.0,
        c in 0.5f64..3.5,
        noise in proptest::collection::vec(-0.02f64..0.02, 25),
    ) {
        let xs: Vec<f64> = (1..=25).map(|i| (i * 40) as f64).collect();
        let b = 5000.0 / xs[24].powf(c);
        let ys: Vec<f64> = xs
            .iter()
            .zip(&noise)
            .map(|(x, e)| (a + b * x.powf(c)) * (1.0 + e))
            .collect();
        let pairs: Vec<(u64, f64)> = xs.iter().zip(&ys).map(|(&x, &y)| (x as u64, y)).collect();
        let points = PointSet::from_pairs(&pairs);
        let fit = fit_power(&points).unwrap();
        let (_, grid_sse) = grid_search(&xs, &ys);
        // grid resolution is finite, so allow a sliver for float noise only
        prop_assert!(fit.sse(&points) <= grid_sse * (1.0 + 1e-9) + 1e-9,
            "fit {:?} sse {} grid {}", fit, fit.sse(&points), grid_sse);
    }
}
