//! Block averaging: the multiplicities `p_i`, boundary weights `q_i` and
//! block interactions `κ_kj` obtained by averaging the single-block energy
//! estimate over all block positions `ℓ ∈ B_R(k)`, the coarse matrix `A`
//! on the sub-lattice `2Rℤ^d`, and the decay of `A⁻¹`.
//!
//! All sums run over the finite box `Λ`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fit::{self, FitResult};
use crate::lattice::{tiling_block, Lattice, Site};
use crate::model::ModelSpec;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BlockError {
    #[error("radius {0} is not a positive half-integer with odd 2R")]
    BadRadius(f64),
    #[error("block center {0} lies outside the lattice")]
    CenterOutside(Site),
    #[error("rho and C must be positive and finite")]
    BadParameter,
    #[error("matrix is not strictly diagonally dominant (row {row}, margin {margin:.3e})")]
    NotDominant { row: usize, margin: f64 },
    #[error("matrix is singular")]
    Singular,
    #[error("site index {0} out of range")]
    IndexOutOfRange(usize),
}

/// `R > 0` with `2R` an odd integer.
pub fn check_radius(radius: f64) -> Result<(), BlockError> {
    let two_r = 2.0 * radius;
    let m = two_r.round();
    if !(radius > 0.0) || (two_r - m).abs() > 1e-9 || (m as i64) % 2 == 0 {
        return Err(BlockError::BadRadius(radius));
    }
    Ok(())
}

fn floor_r(radius: f64) -> u64 {
    (radius + 1e-9).floor() as u64
}

/// Side of the tiling, `2R`.
fn side(radius: f64) -> i64 {
    (2.0 * radius).round() as i64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockCoefficients {
    pub center: Site,
    pub radius: f64,
    /// `p_i = |B_R(k) ∩ B_R(i)|`, indexed by site.
    pub p: Vec<u64>,
    /// `q_i = Σ_{ℓ ∈ B_R(k) ∩ B_R(i)} Σ_{j ∉ B_R(ℓ)} |M_ij| / 2`
    pub q: Vec<f64>,
    /// `κ_kj = Σ_{ℓ ∈ B_R(k), j ∉ B_R(ℓ)} Σ_{i ∈ B_R(ℓ)} |M_ij| / 2`
    pub kappa: Vec<f64>,
}

pub fn coefficients(
    model: &ModelSpec,
    center: &Site,
    radius: f64,
) -> Result<BlockCoefficients, BlockError> {
    check_radius(radius)?;
    if !model.lattice().contains(center) {
        return Err(BlockError::CenterOutside(center.clone()));
    }
    Ok(coefficients_unchecked(model, center, radius))
}

/// Same as [`coefficients`] but the center may lie outside `Λ`, as block
/// centers near the boundary do.
pub(crate) fn coefficients_unchecked(
    model: &ModelSpec,
    center: &Site,
    radius: f64,
) -> BlockCoefficients {
    let lat = model.lattice();
    let m = model.interaction();
    let n = lat.len();
    let fr = floor_r(radius);
    let positions = lat.ball(center, radius);
    let balls: Vec<Vec<usize>> = positions
        .iter()
        .map(|&l| lat.ball(&lat.site(l), radius))
        .collect();
    let row_abs: Vec<f64> = (0..n)
        .map(|i| (0..n).filter(|&j| j != i).map(|j| m[(i, j)].abs()).sum())
        .collect();

    let per_site: Vec<(u64, f64, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut p = 0u64;
            let mut q = 0.0;
            let mut kappa = 0.0;
            for (&l, ball) in positions.iter().zip(&balls) {
                let inner: f64 = ball
                    .iter()
                    .filter(|&&j| j != i)
                    .map(|&j| m[(i, j)].abs())
                    .sum();
                if lat.dist_idx(i, l) <= fr {
                    p += 1;
                    q += 0.5 * (row_abs[i] - inner);
                } else {
                    kappa += 0.5 * inner;
                }
            }
            (p, q, kappa)
        })
        .collect();
    BlockCoefficients {
        center: center.clone(),
        radius,
        p: per_site.iter().map(|t| t.0).collect(),
        q: per_site.iter().map(|t| t.1).collect(),
        kappa: per_site.iter().map(|t| t.2).collect(),
    }
}

/// ℓ∞ distance from a site to the ball `B_r(center)` in `ℤ^d`.
fn dist_to_ball(lat: &Lattice, i: usize, center: &Site, r: f64) -> f64 {
    let d = lat.dist_to(i, center);
    d.saturating_sub(floor_r(r)) as f64
}

fn offset_label(lat: &Lattice, i: usize, center: &Site) -> String {
    lat.coords_of(i)
        .iter()
        .zip(center.coords())
        .map(|(a, b)| (a - b).to_string())
        .collect::<Vec<_>>()
        .join(",")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRow {
    pub d: usize,
    pub radius: f64,
    pub quantity: String,
    pub offset: String,
    pub value: f64,
    pub bound: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiusSummary {
    pub radius: f64,
    /// Interior sites of `B_R(k)` checked against `p_i >= (⌊R⌋+1)^d`.
    pub p_checked: usize,
    pub p_min_ratio: f64,
    pub p_ok: bool,
    pub q_sup: f64,
    pub kappa_short_sup: f64,
    pub kappa_long_sup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientReport {
    pub d: usize,
    pub alpha: f64,
    pub alpha_bar: f64,
    pub epsilon: f64,
    pub center: Site,
    pub summaries: Vec<RadiusSummary>,
    pub rows: Vec<CoefficientRow>,
    pub q_grows: bool,
    pub kappa_short_grows: bool,
    pub kappa_long_grows: bool,
}

impl CoefficientReport {
    pub fn passed(&self) -> bool {
        self.summaries.iter().all(|s| s.p_ok)
            && !self.q_grows
            && !self.kappa_short_grows
            && !self.kappa_long_grows
    }
}

/// Strictly increasing across the whole list.
fn grows(values: &[f64]) -> bool {
    values.len() >= 2 && values.windows(2).all(|w| w[1] > w[0])
}

/// Decay exponent `α` of the model, read from `|M_ij| <= C(1+r)^-(2d+α)`.
pub fn model_alpha(model: &ModelSpec) -> f64 {
    model
        .decay_claim()
        .map(|c| c.exponent - 2.0 * model.dim() as f64)
        .unwrap_or(0.0)
}

/// Coefficients around the lattice midpoint for every radius, with the
/// ratio families of the coefficient lemma.
pub fn verify_coefficient_bounds(
    model: &ModelSpec,
    radii: &[f64],
    epsilon: f64,
) -> Result<CoefficientReport, BlockError> {
    for &r in radii {
        check_radius(r)?;
    }
    let lat = model.lattice();
    let d = lat.dim();
    let df = d as f64;
    let alpha = model_alpha(model);
    let alpha_bar = alpha.min(1.0);
    let center = Site::new(lat.extents().iter().map(|&e| (e / 2) as i64).collect::<Vec<_>>());
    let mut summaries = Vec::new();
    let mut rows = Vec::new();
    for &r in radii {
        let co = coefficients(model, &center, r)?;
        let fr = floor_r(r);
        let p_bound = ((fr + 1) as f64).powi(d as i32);
        let mut p_checked = 0;
        let mut p_min_ratio = f64::INFINITY;
        let mut q_sup: f64 = 0.0;
        let mut ks_sup: f64 = 0.0;
        let mut kl_sup: f64 = 0.0;
        for i in 0..lat.len() {
            let di = lat.dist_to(i, &center);
            let off = || offset_label(lat, i, &center);
            if di <= fr && lat.dist_to_boundary(i) as f64 > 4.0 * r {
                let ratio = co.p[i] as f64 / p_bound;
                p_checked += 1;
                p_min_ratio = p_min_ratio.min(ratio);
                rows.push(CoefficientRow {
                    d,
                    radius: r,
                    quantity: "p".into(),
                    offset: off(),
                    value: co.p[i] as f64,
                    bound: p_bound,
                    ratio,
                });
            }
            if di as f64 <= 2.0 * r {
                let bound = r.powf(df - 1.0);
                let ratio = co.q[i] / bound;
                q_sup = q_sup.max(ratio);
                if co.q[i] > 0.0 {
                    rows.push(CoefficientRow {
                        d,
                        radius: r,
                        quantity: "q".into(),
                        offset: off(),
                        value: co.q[i],
                        bound,
                        ratio,
                    });
                }
            }
            if co.kappa[i] > 0.0 {
                let dist = dist_to_ball(lat, i, &center, 2.0 * r);
                let short = r.powf(df - alpha_bar + epsilon) / (1.0 + dist).powf(df + epsilon);
                let long = r.powf(2.0 * df) / (1.0 + dist).powf(2.0 * df + alpha);
                ks_sup = ks_sup.max(co.kappa[i] / short);
                kl_sup = kl_sup.max(co.kappa[i] / long);
                rows.push(CoefficientRow {
                    d,
                    radius: r,
                    quantity: "kappa_short".into(),
                    offset: off(),
                    value: co.kappa[i],
                    bound: short,
                    ratio: co.kappa[i] / short,
                });
                rows.push(CoefficientRow {
                    d,
                    radius: r,
                    quantity: "kappa_long".into(),
                    offset: off(),
                    value: co.kappa[i],
                    bound: long,
                    ratio: co.kappa[i] / long,
                });
            }
        }
        summaries.push(RadiusSummary {
            radius: r,
            p_checked,
            p_min_ratio,
            p_ok: p_min_ratio >= 1.0,
            q_sup,
            kappa_short_sup: ks_sup,
            kappa_long_sup: kl_sup,
        });
    }
    let series = |f: fn(&RadiusSummary) -> f64| summaries.iter().map(f).collect::<Vec<_>>();
    Ok(CoefficientReport {
        d,
        alpha,
        alpha_bar,
        epsilon,
        center,
        q_grows: grows(&series(|s| s.q_sup)),
        kappa_short_grows: grows(&series(|s| s.kappa_short_sup)),
        kappa_long_grows: grows(&series(|s| s.kappa_long_sup)),
        summaries,
        rows,
    })
}

/// The coarse matrix on the block lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockMatrix {
    pub radius: f64,
    pub rho: f64,
    pub c: f64,
    /// Block indices `k`; the block is `B_R(2Rk) ∩ Λ`.
    pub blocks: Vec<Site>,
    pub kappa_bar: DMatrix<f64>,
    pub a: DMatrix<f64>,
}

impl BlockMatrix {
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn center(&self, k: usize) -> Site {
        self.blocks[k].scaled(side(self.radius))
    }

    pub fn index_of(&self, block: &Site) -> Option<usize> {
        self.blocks.iter().position(|b| b == block)
    }

    /// `min_k (A_kk - Σ_{j≠k} |A_kj|)`
    pub fn dominance_margin(&self) -> f64 {
        dominance(&self.a).1
    }
}

/// Row with the smallest dominance margin, and that margin.
fn dominance(a: &DMatrix<f64>) -> (usize, f64) {
    let mut worst = (0, f64::INFINITY);
    for k in 0..a.nrows() {
        let off: f64 = (0..a.ncols()).filter(|&j| j != k).map(|j| a[(k, j)].abs()).sum();
        let margin = a[(k, k)] - off;
        if margin < worst.1 {
            worst = (k, margin);
        }
    }
    worst
}

/// Block indices `k ∈ ℤ^d` with `B_R(2Rk) ∩ Λ ≠ ∅`, axis 0 fastest.
pub fn block_indices(lat: &Lattice, radius: f64) -> Vec<Site> {
    let s = side(radius);
    let fr = floor_r(radius) as i64;
    let ranges: Vec<(i64, i64)> = lat
        .extents()
        .iter()
        .map(|&n| {
            let lo = (-fr).div_euclid(s) + i64::from((-fr).rem_euclid(s) != 0);
            let hi = (n as i64 - 1 + fr).div_euclid(s);
            (lo, hi)
        })
        .collect();
    let mut out = Vec::new();
    let mut cur: Vec<i64> = ranges.iter().map(|r| r.0).collect();
    loop {
        out.push(Site::new(cur.clone()));
        let mut a = 0;
        loop {
            if a == cur.len() {
                return out;
            }
            if cur[a] < ranges[a].1 {
                cur[a] += 1;
                break;
            }
            cur[a] = ranges[a].0;
            a += 1;
        }
    }
}

/// `A_kk = ϱ²`, `A_kj = -Cϱ κ̄_kj` with
/// `κ̃_ki = κ_ki + q_i 1[i ∈ B_2R ∖ B_R]` and
/// `κ̄_kj = max_{i ∈ B_R(2Rj)} κ̃_{(2Rk) i} / R^d`.
///
/// The annulus term is the boundary weight `q_i` itself rather than its
/// bound `C R^{d-1}`, so decoupled sites give a diagonal `A`.
pub fn assemble_block_matrix(
    model: &ModelSpec,
    radius: f64,
    rho: f64,
    c: f64,
) -> Result<BlockMatrix, BlockError> {
    check_radius(radius)?;
    if !(rho > 0.0 && rho.is_finite() && c > 0.0 && c.is_finite()) {
        return Err(BlockError::BadParameter);
    }
    let lat = model.lattice();
    let df = lat.dim() as f64;
    let blocks = block_indices(lat, radius);
    let nb = blocks.len();
    let s = side(radius);
    let fr = floor_r(radius);
    let members: Vec<Vec<usize>> = blocks
        .iter()
        .map(|b| lat.ball(&b.scaled(s), radius))
        .collect();
    let rd = radius.powf(df);
    let rows: Vec<Vec<f64>> = blocks
        .par_iter()
        .map(|b| {
            let center = b.scaled(s);
            let co = coefficients_unchecked(model, &center, radius);
            let tilde: Vec<f64> = (0..lat.len())
                .map(|i| {
                    let di = lat.dist_to(i, &center);
                    let ring = di > fr && di as f64 <= 2.0 * radius;
                    co.kappa[i] + if ring { co.q[i] } else { 0.0 }
                })
                .collect();
            members
                .iter()
                .map(|mem| mem.iter().map(|&i| tilde[i] / rd).fold(0.0, f64::max))
                .collect()
        })
        .collect();
    let kappa_bar = DMatrix::from_fn(nb, nb, |k, j| rows[k][j]);
    let a = DMatrix::from_fn(nb, nb, |k, j| {
        if k == j {
            rho * rho
        } else {
            -c * rho * kappa_bar[(k, j)]
        }
    });
    Ok(BlockMatrix {
        radius,
        rho,
        c,
        blocks,
        kappa_bar,
        a,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct InverseDecay {
    pub inverse: DMatrix<f64>,
    /// `(|k - j|, (A⁻¹)_kj)` for all ordered pairs.
    pub table: Vec<(u64, f64)>,
    /// Largest entry at each positive distance.
    pub envelope: Vec<(f64, f64)>,
    pub min_entry: f64,
    pub nonnegative: bool,
    /// Power-law fit of the envelope on the default window; `None` when not
    /// applicable (no positive off-diagonal entries or too few points).
    pub fit: Option<FitResult>,
}

impl InverseDecay {
    /// Fitted log-log slope of the envelope.
    pub fn exponent(&self) -> Option<f64> {
        self.fit.map(|f| f.slope())
    }
}

pub fn inverse_decay(bm: &BlockMatrix) -> Result<InverseDecay, BlockError> {
    inverse_decay_matrix(&bm.a, &bm.blocks)
}

/// Dense inverse of a strictly diagonally dominant matrix whose rows are
/// attached to the given positions.
pub fn inverse_decay_matrix(
    a: &DMatrix<f64>,
    positions: &[Site],
) -> Result<InverseDecay, BlockError> {
    let (row, margin) = dominance(a);
    if !(margin > 0.0) {
        return Err(BlockError::NotDominant { row, margin });
    }
    let inverse = a.clone().try_inverse().ok_or(BlockError::Singular)?;
    let n = a.nrows();
    let scale = inverse.amax();
    let mut table = Vec::with_capacity(n * n);
    for k in 0..n {
        for j in 0..n {
            let r = crate::lattice::coord_dist(positions[k].coords(), positions[j].coords());
            table.push((r, inverse[(k, j)]));
        }
    }
    let min_entry = inverse.min();
    let envelope: Vec<(f64, f64)> = fit::envelope(
        table
            .iter()
            .filter(|(r, _)| *r > 0)
            .map(|&(r, v)| (r as f64, v)),
    );
    let positive: Vec<(f64, f64)> = envelope.iter().copied().filter(|p| p.1 > 0.0).collect();
    let fitted = fit::fit_power_law(&fit::default_window(&positive)).ok();
    Ok(InverseDecay {
        inverse,
        table,
        envelope,
        min_entry,
        nonnegative: min_entry >= -1e-12 * scale,
        fit: fitted,
    })
}

/// Predicted `∫|∇_i φ|²` per unit `∫|∇f|²`: `Φ = A⁻¹ Σ_{k ∈ B_f} e_k` with
/// `B_f = {k : supp f ∩ B_2R(2Rk) ≠ ∅}`, each site reading the entry of its
/// own block. Uses `C = 1`.
pub fn directional_bound(
    model: &ModelSpec,
    radius: f64,
    rho: f64,
    support: &[usize],
) -> Result<Vec<f64>, BlockError> {
    directional_bound_with(model, radius, rho, 1.0, support)
}

pub fn directional_bound_with(
    model: &ModelSpec,
    radius: f64,
    rho: f64,
    c: f64,
    support: &[usize],
) -> Result<Vec<f64>, BlockError> {
    let lat = model.lattice();
    if let Some(&bad) = support.iter().find(|&&i| i >= lat.len()) {
        return Err(BlockError::IndexOutOfRange(bad));
    }
    let bm = assemble_block_matrix(model, radius, rho, c)?;
    let (row, margin) = dominance(&bm.a);
    if !(margin > 0.0) {
        return Err(BlockError::NotDominant { row, margin });
    }
    let nb = bm.len();
    let mut rhs = nalgebra::DVector::zeros(nb);
    for k in 0..nb {
        let center = bm.center(k);
        if support
            .iter()
            .any(|&i| lat.dist_to(i, &center) as f64 <= 2.0 * radius)
        {
            rhs[k] = 1.0;
        }
    }
    let phi = bm.a.clone().lu().solve(&rhs).ok_or(BlockError::Singular)?;
    Ok((0..lat.len())
        .map(|i| {
            let b = tiling_block(&lat.site(i), radius);
            bm.index_of(&b).map(|k| phi[k]).unwrap_or(0.0)
        })
        .collect())
}
