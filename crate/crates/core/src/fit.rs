//! Log-log least squares for algebraic decay `v ≈ C (1+r)^(-α)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MIN_POINTS: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("need at least {MIN_POINTS} points, got {0}")]
    TooFewPoints(usize),
    #[error("all points share the same distance")]
    DegeneratePoints,
    #[error("point ({r}, {v}) has non-positive or non-finite value")]
    NonPositive { r: f64, v: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub c: f64,
    pub alpha_hat: f64,
    pub rmse: f64,
    pub n_points: usize,
}

impl FitResult {
    /// Fitted log-log slope, `-α̂`.
    pub fn slope(&self) -> f64 {
        -self.alpha_hat
    }

    pub fn predict(&self, r: f64) -> f64 {
        self.c * (1.0 + r).powf(-self.alpha_hat)
    }
}

/// Least squares of `ln v` against `ln(1+r)`.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<FitResult, FitError> {
    if points.len() < MIN_POINTS {
        return Err(FitError::TooFewPoints(points.len()));
    }
    for &(r, v) in points {
        if !(v > 0.0 && v.is_finite() && r.is_finite() && r > -1.0) {
            return Err(FitError::NonPositive { r, v });
        }
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|(r, _)| (1.0 + r).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|(_, v)| v.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx <= f64::EPSILON * n * mx.abs().max(1.0) {
        return Err(FitError::DegeneratePoints);
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rmse = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(FitResult {
        c: intercept.exp(),
        alpha_hat: -slope,
        rmse,
        n_points: points.len(),
    })
}

/// Default decay window: drops `r < 2` and the outer quarter of the
/// distance range, where finite-size effects dominate.
pub fn default_window(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let rmax = points.iter().map(|p| p.0).fold(0.0, f64::max);
    points
        .iter()
        .copied()
        .filter(|&(r, _)| r >= 2.0 && r <= 0.75 * rmax)
        .collect()
}

/// Points with `lo <= r <= hi`.
pub fn range_window(points: &[(f64, f64)], lo: f64, hi: f64) -> Vec<(f64, f64)> {
    points
        .iter()
        .copied()
        .filter(|&(r, _)| r >= lo && r <= hi)
        .collect()
}

/// Maximum value at each distance, sorted by distance.
pub fn envelope(points: impl IntoIterator<Item = (f64, f64)>) -> Vec<(f64, f64)> {
    let mut v: Vec<(f64, f64)> = points.into_iter().collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (r, x) in v {
        match out.last_mut() {
            Some(last) if last.0 == r => last.1 = last.1.max(x),
            _ => out.push((r, x)),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_power_law() {
        let pts: Vec<(f64, f64)> = (1..=32)
            .map(|r| (r as f64, 3.0 * (1.0 + r as f64).powf(-2.5)))
            .collect();
        let f = fit_power_law(&pts).unwrap();
        assert!((f.c - 3.0).abs() < 1e-6);
        assert!((f.alpha_hat - 2.5).abs() < 1e-6);
        assert!(f.rmse < 1e-10);
        assert_eq!(f.n_points, 32);
    }

    #[test]
    fn constant_values() {
        let pts: Vec<(f64, f64)> = (1..=8).map(|r| (r as f64, 0.7)).collect();
        let f = fit_power_law(&pts).unwrap();
        assert!(f.alpha_hat.abs() < 1e-12);
    }

    #[test]
    fn errors() {
        assert_eq!(
            fit_power_law(&[(1.0, 1.0), (2.0, 1.0)]),
            Err(FitError::TooFewPoints(2))
        );
        assert_eq!(
            fit_power_law(&[(3.0, 1.0), (3.0, 2.0), (3.0, 1.5), (3.0, 0.5)]),
            Err(FitError::DegeneratePoints)
        );
        assert!(matches!(
            fit_power_law(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0), (4.0, 1.0)]),
            Err(FitError::NonPositive { .. })
        ));
    }

    #[test]
    fn windows_and_envelope() {
        let pts: Vec<(f64, f64)> = (0..=40).map(|r| (r as f64, 1.0)).collect();
        let w = default_window(&pts);
        assert_eq!(w.first().unwrap().0, 2.0);
        assert_eq!(w.last().unwrap().0, 30.0);
        let e = envelope(vec![(1.0, 0.2), (2.0, 0.1), (1.0, 0.5)]);
        assert_eq!(e, vec![(1.0, 0.5), (2.0, 0.1)]);
    }

    proptest! {
        #[test]
        fn recovers_planted_exponents(c in 0.01f64..100.0, a in -1.0f64..6.0, n in 4usize..60) {
            let pts: Vec<(f64, f64)> = (1..=n).map(|r| (r as f64, c * (1.0 + r as f64).powf(-a))).collect();
            let f = fit_power_law(&pts).unwrap();
            prop_assert!((f.alpha_hat - a).abs() < 1e-9);
            prop_assert!((f.c / c - 1.0).abs() < 1e-9);
        }
    }
}
