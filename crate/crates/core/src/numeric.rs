//! Reductions whose result does not depend on the number of worker threads.
//!
//! Inputs are cut into fixed-size chunks, each chunk is summed sequentially
//! (possibly in parallel with other chunks), and the chunk sums are combined
//! by pairwise summation in a fixed order.

use rayon::prelude::*;

const CHUNK: usize = 4096;

fn pairwise(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        n => {
            let (a, b) = v.split_at(n / 2);
            pairwise(a) + pairwise(b)
        }
    }
}

/// Deterministic sum of `f(i)` for `i in 0..n`.
pub fn sum_by<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    let partial: Vec<f64> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(n);
            pairwise(&(lo..hi).map(&f).collect::<Vec<_>>())
        })
        .collect();
    pairwise(&partial)
}

pub fn sum(v: &[f64]) -> f64 {
    sum_by(v.len(), |i| v[i])
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    sum_by(a.len(), |i| a[i] * b[i])
}

/// `Σ w_i a_i b_i`
pub fn wdot(w: &[f64], a: &[f64], b: &[f64]) -> f64 {
    sum_by(w.len(), |i| w[i] * a[i] * b[i])
}

/// `log Σ exp(v_i)`, stable for large magnitudes.
pub fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + sum_by(v.len(), |i| (v[i] - m).exp()).ln()
}
