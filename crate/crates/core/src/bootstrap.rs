//! Correlation bootstrap: a monotone operator on covariance bound fields
//! built from the Lebowitz inequality
//!
//! ```text
//! cov(x_i, x_j) <= Σ_{k∈A, n∉A} c|M_kn| [B(i,k) B(n,j) + B(i,n) B(k,j)]
//! ```
//!
//! for `i ∈ A`, `j ∉ A`, together with an exact check of that inequality on
//! small systems.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exact::{build_grid_measure, ExactError, GridSpec, DEFAULT_STATE_BUDGET};
use crate::fit::{self, FitResult};
use crate::model::ModelSpec;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BootstrapError {
    #[error("model violates the Lebowitz conditions: {0}")]
    ConditionViolated(String),
    #[error("no half-integer L up to {max} makes the J row and column sums at most {threshold}")]
    NoAdmissibleL { max: f64, threshold: f64 },
    #[error("bad split: i must lie in A and j outside it")]
    BadSplit,
    #[error("bound field is invalid: {0}")]
    BadField(String),
    #[error("exact verification needs at most 4 sites, got {0}")]
    TooLarge(usize),
    #[error(transparent)]
    Exact(#[from] ExactError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    InitialPowerLaw,
    Propagated(usize),
    ExactOracle,
}

/// Symmetric nonnegative bounds `B(i, j) >= |cov(x_i, x_j)|`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundField {
    bounds: DMatrix<f64>,
    pub provenance: Provenance,
}

impl BoundField {
    pub fn new(bounds: DMatrix<f64>, provenance: Provenance) -> Result<Self, BootstrapError> {
        if !bounds.is_square() {
            return Err(BootstrapError::BadField("not square".into()));
        }
        let n = bounds.nrows();
        for i in 0..n {
            if !(bounds[(i, i)] > 0.0) {
                return Err(BootstrapError::BadField(format!(
                    "diagonal entry {i} is not positive"
                )));
            }
            for j in 0..n {
                let v = bounds[(i, j)];
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(BootstrapError::BadField(format!("entry ({i}, {j}) = {v}")));
                }
                if v != bounds[(j, i)] {
                    return Err(BootstrapError::BadField(format!(
                        "asymmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(BoundField { bounds, provenance })
    }

    /// `B(i, j) = C₀ (1+|i-j|)^(-exponent)` off the diagonal.
    pub fn power_law(
        model: &ModelSpec,
        c0: f64,
        exponent: f64,
        diagonal: &[f64],
    ) -> Result<Self, BootstrapError> {
        let lat = model.lattice();
        let n = lat.len();
        if diagonal.len() != n {
            return Err(BootstrapError::BadField("diagonal has wrong length".into()));
        }
        let b = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                diagonal[i]
            } else {
                c0 * (1.0 + lat.dist_idx(i, j) as f64).powf(-exponent)
            }
        });
        BoundField::new(b, Provenance::InitialPowerLaw)
    }

    /// Absolute values of a covariance matrix.
    pub fn from_covariance(cov: &DMatrix<f64>) -> Result<Self, BootstrapError> {
        let sym = (cov + cov.transpose()) * 0.5;
        BoundField::new(sym.map(f64::abs), Provenance::ExactOracle)
    }

    pub fn len(&self) -> usize {
        self.bounds.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.bounds[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.bounds
    }

    /// `B(i, j) >= |truth(i, j)| - tol` for all pairs.
    pub fn dominates(&self, truth: &DMatrix<f64>, tol: f64) -> bool {
        self.bounds
            .iter()
            .zip(truth.iter())
            .all(|(b, t)| *b >= t.abs() - tol)
    }

    /// `(r, max_{|i-j| = r} B(i, j))` for `r >= 1`.
    pub fn envelope(&self, model: &ModelSpec) -> Vec<(f64, f64)> {
        let lat = model.lattice();
        let n = self.len();
        fit::envelope((0..n).flat_map(|i| {
            (0..n)
                .filter(move |&j| j != i)
                .map(move |j| (lat.dist_idx(i, j) as f64, self.bounds[(i, j)]))
        }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapParams {
    /// Block radius; `None` selects the smallest admissible one.
    pub l: Option<f64>,
    pub coupling_factor: f64,
    pub max_iterations: usize,
    /// Target decay `(C, α)` of `cov ~ C (1+r)^-(d+α)`; `α` sets the
    /// iteration cap. Defaults to the model's decay exponent minus `d`.
    pub target: Option<(f64, f64)>,
}

impl Default for BootstrapParams {
    fn default() -> Self {
        BootstrapParams {
            l: None,
            coupling_factor: 2.0,
            max_iterations: 64,
            target: None,
        }
    }
}

pub fn ensure_lebowitz(model: &ModelSpec) -> Result<(), BootstrapError> {
    if !model.potentials().iter().all(|p| p.is_even()) {
        return Err(BootstrapError::ConditionViolated(
            "single-site potential is not even".into(),
        ));
    }
    if model.field().iter().any(|&s| s != 0.0) {
        return Err(BootstrapError::ConditionViolated("nonzero field".into()));
    }
    if model.boundary().iter().any(|(_, w)| *w != 0.0) {
        return Err(BootstrapError::ConditionViolated(
            "nonzero boundary values".into(),
        ));
    }
    if !model.is_ferromagnetic() {
        return Err(BootstrapError::ConditionViolated(
            "interaction is not ferromagnetic".into(),
        ));
    }
    Ok(())
}

fn check_l(l: f64) -> Result<(), BootstrapError> {
    crate::blockavg::check_radius(l)
        .map_err(|_| BootstrapError::BadField(format!("L = {l} is not a half-integer")))
}

fn check_len(model: &ModelSpec, b: &BoundField) -> Result<(), BootstrapError> {
    if b.len() != model.len() {
        return Err(BootstrapError::BadField(format!(
            "field has {} sites, model has {}",
            b.len(),
            model.len()
        )));
    }
    Ok(())
}

/// `J_ik = Σ_{n∉B_L(i)} c|M_kn| B(i,n)` for `k ∈ B_L(i)` and
/// `Σ_{n∈B_L(i)} c|M_kn| B(i,n)` otherwise.
pub fn compute_j(
    model: &ModelSpec,
    b: &BoundField,
    l: f64,
    c: f64,
) -> Result<DMatrix<f64>, BootstrapError> {
    ensure_lebowitz(model)?;
    check_len(model, b)?;
    check_l(l)?;
    Ok(j_matrix(model, b, l, c))
}

fn j_matrix(model: &ModelSpec, b: &BoundField, l: f64, c: f64) -> DMatrix<f64> {
    let lat = model.lattice();
    let m = model.interaction();
    let n = lat.len();
    let fl = l.floor() as u64;
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let inside: Vec<bool> = (0..n).map(|k| lat.dist_idx(i, k) <= fl).collect();
            (0..n)
                .map(|k| {
                    (0..n)
                        .filter(|&q| inside[q] != inside[k])
                        .map(|q| c * m[(k, q)].abs() * b.get(i, q))
                        .sum()
                })
                .collect()
        })
        .collect();
    DMatrix::from_fn(n, n, |i, k| rows[i][k])
}

fn j_admissible(j: &DMatrix<f64>, threshold: f64) -> bool {
    let n = j.nrows();
    (0..n).all(|m| j.row(m).sum() <= threshold) && (0..n).all(|k| j.column(k).sum() <= threshold)
}

/// Whether `L` keeps every row and column sum of `J` at most `threshold`.
pub fn l_admissible(
    model: &ModelSpec,
    b: &BoundField,
    l: f64,
    c: f64,
    threshold: f64,
) -> Result<bool, BootstrapError> {
    Ok(j_admissible(&compute_j(model, b, l, c)?, threshold))
}

/// Smallest half-integer `L <= extent/2` with all row and column sums of
/// `J` at most `threshold`.
pub fn find_l(
    model: &ModelSpec,
    b: &BoundField,
    c: f64,
    threshold: f64,
) -> Result<f64, BootstrapError> {
    ensure_lebowitz(model)?;
    check_len(model, b)?;
    let max = *model.lattice().extents().iter().max().unwrap_or(&1) as f64 / 2.0;
    let mut l = 0.5;
    while l <= max {
        if j_admissible(&j_matrix(model, b, l, c), threshold) {
            return Ok(l);
        }
        l += 1.0;
    }
    Err(BootstrapError::NoAdmissibleL { max, threshold })
}

/// `Σ_{k∈A, n∉A} c|M_kn| [B(i,k) B(n,j) + B(i,n) B(k,j)]`
pub fn lebowitz_rhs(
    b: &BoundField,
    model: &ModelSpec,
    i: usize,
    j: usize,
    a: &[usize],
    c: f64,
) -> Result<f64, BootstrapError> {
    let n = model.len();
    let mut in_a = vec![false; n];
    for &k in a {
        if k >= n {
            return Err(BootstrapError::BadSplit);
        }
        in_a[k] = true;
    }
    if i >= n || j >= n || !in_a[i] || in_a[j] {
        return Err(BootstrapError::BadSplit);
    }
    let m = model.interaction();
    let mut s = 0.0;
    for k in (0..n).filter(|&k| in_a[k]) {
        for q in (0..n).filter(|&q| !in_a[q]) {
            let w = m[(k, q)].abs();
            if w != 0.0 {
                s += c * w * (b.get(i, k) * b.get(q, j) + b.get(i, q) * b.get(k, j));
            }
        }
    }
    Ok(s)
}

/// One simultaneous sweep: for `|i-j| > 3L`,
/// `B'(i,j) = min(B(i,j), rhs(i, j; B_L(i)), rhs(j, i; B_L(j)))`.
/// With `A = B_L(i)` the right-hand side equals `(J B)_ij`.
pub fn propagate(
    b: &BoundField,
    model: &ModelSpec,
    l: f64,
    c: f64,
) -> Result<BoundField, BootstrapError> {
    ensure_lebowitz(model)?;
    check_len(model, b)?;
    check_l(l)?;
    let lat = model.lattice();
    let n = lat.len();
    let jb = j_matrix(model, b, l, c) * b.matrix();
    let sep = 3.0 * l;
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| {
                    let old = b.get(i, j);
                    if (lat.dist_idx(i, j) as f64) > sep {
                        old.min(jb[(i, j)]).min(jb[(j, i)])
                    } else {
                        old
                    }
                })
                .collect()
        })
        .collect();
    let next = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    let step = match b.provenance {
        Provenance::Propagated(k) => k + 1,
        _ => 1,
    };
    Ok(BoundField {
        bounds: next,
        provenance: Provenance::Propagated(step),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRow {
    pub iteration: usize,
    pub dist: f64,
    pub max_bound: f64,
    pub c_fit: f64,
    pub alpha_fit: f64,
    pub coupling: f64,
    pub l: f64,
}

#[derive(Debug, Clone)]
pub struct BootstrapResult {
    pub field: BoundField,
    pub l: f64,
    pub iterations: usize,
    pub cap: usize,
    /// Fitted `(C, α̂)` of the final envelope, with `cov ~ C(1+r)^-(d+α̂)`.
    pub c_fit: f64,
    pub alpha_hat: f64,
    pub fit: Option<FitResult>,
    /// `α̂` after each sweep, starting with the seed.
    pub alpha_history: Vec<f64>,
    pub rows: Vec<IterationRow>,
}

fn fit_envelope(env: &[(f64, f64)]) -> Option<FitResult> {
    let positive: Vec<(f64, f64)> = env.iter().copied().filter(|p| p.1 > 0.0).collect();
    fit::fit_power_law(&fit::default_window(&positive)).ok()
}

/// Seed `B = C₀(1+r)^-(d+α₀)` with the given diagonal, choose `L`, and
/// sweep until the cap `min(max_iterations, ⌈(d+α) log₂(1+diam Λ)⌉)` or a
/// fixed point.
pub fn run_bootstrap(
    model: &ModelSpec,
    initial: (f64, f64),
    diagonal: &[f64],
    params: &BootstrapParams,
) -> Result<BootstrapResult, BootstrapError> {
    ensure_lebowitz(model)?;
    let d = model.dim() as f64;
    let (c0, alpha0) = initial;
    let seed = BoundField::power_law(model, c0, d + alpha0, diagonal)?;
    let c = params.coupling_factor;
    let l = match params.l {
        Some(l) => {
            check_l(l)?;
            l
        }
        None => find_l(model, &seed, c, 0.5)?,
    };
    let alpha = params.target.map(|t| t.1).unwrap_or_else(|| {
        model
            .decay_claim()
            .map(|cl| cl.exponent - d)
            .unwrap_or(alpha0)
    });
    let diam = model.lattice().diameter() as f64;
    let depth = ((d + alpha) * (1.0 + diam).log2()).ceil().max(1.0) as usize;
    let cap = params.max_iterations.min(depth);

    let mut rows = Vec::new();
    let record = |it: usize, f: &BoundField, rows: &mut Vec<IterationRow>| {
        let env = f.envelope(model);
        let fitted = fit_envelope(&env);
        let (cf, af) = fitted.map(|x| (x.c, x.alpha_hat - d)).unwrap_or((f64::NAN, f64::NAN));
        for &(r, v) in &env {
            rows.push(IterationRow {
                iteration: it,
                dist: r,
                max_bound: v,
                c_fit: cf,
                alpha_fit: af,
                coupling: c,
                l,
            });
        }
        (fitted, af)
    };
    let (mut fitted, a0) = record(0, &seed, &mut rows);
    let mut history = vec![a0];
    let mut field = seed;
    let mut iterations = 0;
    for it in 1..=cap {
        let next = propagate(&field, model, l, c)?;
        let unchanged = next.bounds == field.bounds;
        field = next;
        iterations = it;
        let (f, a) = record(it, &field, &mut rows);
        fitted = f;
        history.push(a);
        if unchanged {
            break;
        }
    }
    let (c_fit, alpha_hat) = fitted
        .map(|f| (f.c, f.alpha_hat - d))
        .unwrap_or((0.0, f64::INFINITY));
    Ok(BootstrapResult {
        field,
        l,
        iterations,
        cap,
        c_fit,
        alpha_hat,
        fit: fitted,
        alpha_history: history,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRow {
    pub i: usize,
    pub j: usize,
    pub a: Vec<usize>,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    /// Smallest coupling factor for which this split holds.
    pub min_c: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LebowitzReport {
    pub coupling: f64,
    pub covariance: DMatrix<f64>,
    pub min_covariance: f64,
    pub nonnegative: bool,
    pub splits: Vec<SplitRow>,
    /// Smallest coupling factor that passes every split.
    pub min_c: f64,
    pub all_hold: bool,
}

impl LebowitzReport {
    pub fn split(&self, i: usize, j: usize, a: &[usize]) -> Option<&SplitRow> {
        self.splits
            .iter()
            .find(|s| s.i == i && s.j == j && s.a == a)
    }

    pub fn passed(&self) -> bool {
        self.nonnegative && self.all_hold
    }
}

const LEBOWITZ_TOL: f64 = 1e-10;

/// Exact-quadrature check of the Lebowitz inequality on every split with
/// `B = cov`, and of nonnegative correlations.
pub fn verify_lebowitz_exact(model: &ModelSpec, c: f64) -> Result<LebowitzReport, BootstrapError> {
    let n = model.len();
    if n > 4 {
        return Err(BootstrapError::TooLarge(n));
    }
    ensure_lebowitz(model)?;
    let points = ((DEFAULT_STATE_BUDGET as f64).powf(1.0 / n as f64).floor() as usize).clamp(8, 256);
    let gm = build_grid_measure(model, GridSpec::auto(model, points))?;
    let covariance = gm.covariance_matrix();
    verify_lebowitz_with(model, &covariance, c)
}

/// Same check against a supplied covariance matrix.
pub fn verify_lebowitz_with(
    model: &ModelSpec,
    covariance: &DMatrix<f64>,
    c: f64,
) -> Result<LebowitzReport, BootstrapError> {
    let n = model.len();
    let b = BoundField::from_covariance(covariance)?;
    let min_covariance = covariance.min();
    let mut splits = Vec::new();
    for mask in 1u32..(1 << n) - 1 {
        let a: Vec<usize> = (0..n).filter(|&k| mask & (1 << k) != 0).collect();
        for &i in &a {
            for j in (0..n).filter(|&j| mask & (1 << j) == 0) {
                let lhs = covariance[(i, j)];
                let rhs1 = lebowitz_rhs(&b, model, i, j, &a, 1.0)?;
                let rhs = c * rhs1;
                let min_c = if lhs <= LEBOWITZ_TOL {
                    0.0
                } else if rhs1 > 0.0 {
                    lhs / rhs1
                } else {
                    f64::INFINITY
                };
                splits.push(SplitRow {
                    i,
                    j,
                    a: a.clone(),
                    lhs,
                    rhs,
                    holds: lhs <= rhs + LEBOWITZ_TOL,
                    min_c,
                });
            }
        }
    }
    let min_c = splits.iter().map(|s| s.min_c).fold(0.0, f64::max);
    let all_hold = splits.iter().all(|s| s.holds);
    Ok(LebowitzReport {
        coupling: c,
        covariance: covariance.clone(),
        min_covariance,
        nonnegative: min_covariance >= -LEBOWITZ_TOL,
        splits,
        min_c,
        all_hold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::gaussian_oracle;
    use crate::lattice::Lattice;
    use crate::model::{Kernel, ModelBuilder};
    use crate::potential::SitePotential;
    use nalgebra::dmatrix;
    use proptest::prelude::*;

    fn nn(n: usize, amplitude: f64) -> ModelSpec {
        ModelBuilder::new(
            Lattice::new(vec![n]).unwrap(),
            Kernel::NearestNeighbor {
                amplitude,
                diagonal: 1.0,
                ferromagnetic: true,
            },
        )
        .build()
        .unwrap()
    }

    fn geometric_field(n: usize) -> BoundField {
        let b = DMatrix::from_fn(n, n, |i, j| 0.6 * 2f64.powi(-(i.abs_diff(j) as i32)));
        BoundField::new(b, Provenance::InitialPowerLaw).unwrap()
    }

    fn three_site() -> (ModelSpec, DMatrix<f64>) {
        let m = dmatrix![1.0, -0.2, 0.0; -0.2, 1.0, -0.2; 0.0, -0.2, 1.0];
        let model = ModelSpec::gaussian_chain(&m).unwrap();
        let cov = gaussian_oracle(&m, &[0.0; 3]).unwrap().covariance;
        (model, cov)
    }

    #[test]
    fn j_nearest_neighbour_example() {
        let model = nn(12, 0.1);
        let b = geometric_field(12);
        let j = compute_j(&model, &b, 1.5, 2.0).unwrap();
        let i = 6;
        assert_eq!(j[(i, i)], 0.0);
        assert!((j[(i, i + 1)] - 0.030).abs() < 1e-15);
        assert!((j[(i, i - 1)] - 0.030).abs() < 1e-15);
        let inner: f64 = (i - 1..=i + 1).map(|k| j[(i, k)]).sum();
        assert!((inner - 0.060).abs() < 1e-15);
        assert!((j[(i, i + 2)] - 0.060).abs() < 1e-15);
        assert!(l_admissible(&model, &b, 1.5, 2.0, 0.5).unwrap());
        assert_eq!(find_l(&model, &b, 2.0, 0.5).unwrap(), 0.5);
    }

    #[test]
    fn j_vanishes() {
        let model = nn(8, 0.0);
        let j = compute_j(&model, &geometric_field(8), 1.5, 2.0).unwrap();
        assert!(j.iter().all(|&v| v == 0.0));
        assert_eq!(find_l(&model, &geometric_field(8), 2.0, 0.5).unwrap(), 0.5);
        let zero = BoundField::new(DMatrix::from_diagonal_element(8, 8, 1e-300), Provenance::ExactOracle)
            .unwrap();
        let j = compute_j(&nn(8, 0.3), &zero, 1.5, 2.0).unwrap();
        assert!(j.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn no_admissible_l() {
        let model = nn(6, 0.45);
        let b = BoundField::new(DMatrix::from_element(6, 6, 10.0), Provenance::InitialPowerLaw).unwrap();
        assert!(matches!(
            find_l(&model, &b, 2.0, 0.5),
            Err(BootstrapError::NoAdmissibleL { .. })
        ));
    }

    #[test]
    fn rhs_on_three_sites() {
        let (model, cov) = three_site();
        let b = BoundField::from_covariance(&cov).unwrap();
        let r2 = lebowitz_rhs(&b, &model, 0, 2, &[0], 2.0).unwrap();
        let r1 = lebowitz_rhs(&b, &model, 0, 2, &[0], 1.0).unwrap();
        let hand = 2.0 * 0.2 * (cov[(0, 0)] * cov[(1, 2)] + cov[(0, 1)] * cov[(0, 2)]);
        assert!((r2 - hand).abs() < 1e-15);
        assert!((r2 - 0.02363).abs() < 1e-5);
        assert!((r1 - 0.011815).abs() < 1e-5);
        assert!(r1 < cov[(0, 2)] && cov[(0, 2)] < r2);
        assert!(matches!(
            lebowitz_rhs(&b, &model, 0, 2, &[1], 2.0),
            Err(BootstrapError::BadSplit)
        ));
        assert!(matches!(
            lebowitz_rhs(&b, &model, 0, 2, &[0, 2], 2.0),
            Err(BootstrapError::BadSplit)
        ));
        let zero = BoundField::new(DMatrix::from_diagonal_element(3, 3, 1e-300), Provenance::ExactOracle)
            .unwrap();
        assert_eq!(lebowitz_rhs(&zero, &model, 0, 2, &[0], 2.0).unwrap(), 0.0);
    }

    #[test]
    fn propagate_keeps_truth() {
        let (model, cov) = three_site();
        let b = BoundField::from_covariance(&cov).unwrap();
        let next = propagate(&b, &model, 0.5, 2.0).unwrap();
        assert_eq!(next.get(0, 2), b.get(0, 2));
        assert!(next.dominates(&cov, 1e-15), "{} {}", next.matrix(), cov);
        assert_eq!(next.provenance, Provenance::Propagated(1));
        let diag = BoundField::new(DMatrix::from_diagonal_element(3, 3, 0.5), Provenance::ExactOracle)
            .unwrap();
        assert_eq!(propagate(&diag, &model, 0.5, 2.0).unwrap().matrix(), diag.matrix());
    }

    #[test]
    fn conditions_enforced() {
        let m = ModelSpec::gaussian_chain(&dmatrix![1.0, 0.2; 0.2, 1.0]).unwrap();
        let b = BoundField::from_covariance(&DMatrix::identity(2, 2)).unwrap();
        assert!(matches!(
            propagate(&b, &m, 0.5, 2.0),
            Err(BootstrapError::ConditionViolated(_))
        ));
    }

    #[test]
    fn decoupled_bootstrap_collapses() {
        let model = nn(16, 0.0);
        let r = run_bootstrap(&model, (0.3, 0.5), &vec![0.5; 16], &BootstrapParams::default())
            .unwrap();
        for i in 0..16 {
            for j in 0..16 {
                if model.lattice().dist_idx(i, j) as f64 > 3.0 * r.l {
                    assert_eq!(r.field.get(i, j), 0.0);
                }
            }
        }
    }

    #[test]
    fn lebowitz_exact_gaussian() {
        let (model, cov) = three_site();
        let rep = verify_lebowitz_exact(&model, 2.0).unwrap();
        assert!(rep.passed());
        assert!((rep.covariance.clone() - cov).amax() < 1e-6);
        let s = rep.split(0, 2, &[0]).unwrap();
        assert!((s.lhs - 0.021739).abs() < 1e-3);
        assert!((s.rhs - 0.02363).abs() < 1e-3);
        // minimal factor for this split is lhs / rhs(c = 1)
        assert!((s.min_c - 0.021739 / 0.011815).abs() < 2e-3);
        let one = verify_lebowitz_exact(&model, 1.0).unwrap();
        assert!(!one.split(0, 2, &[0]).unwrap().holds);
        assert!(rep.min_c <= 2.0 && rep.min_c > 1.0);
    }

    #[test]
    fn lebowitz_exact_quartic_and_independent() {
        let m = dmatrix![1.0, -0.15, 0.0; -0.15, 1.0, -0.15; 0.0, -0.15, 1.0];
        let model = ModelSpec::chain(&m, SitePotential::Quartic).unwrap();
        let rep = verify_lebowitz_exact(&model, 2.0).unwrap();
        assert!(rep.nonnegative && rep.all_hold, "{rep:?}");
        let indep = ModelSpec::gaussian_chain(&DMatrix::identity(3, 3)).unwrap();
        let rep = verify_lebowitz_exact(&indep, 2.0).unwrap();
        assert!(rep.all_hold);
        assert!(rep.splits.iter().all(|s| s.lhs.abs() < 1e-10 && s.rhs == 0.0));
    }

    fn random_field(n: usize, seed: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(n, n, |i, j| {
            let (a, b) = if i <= j { (i, j) } else { (j, i) };
            let base = 0.5 * 0.7f64.powi((b - a) as i32);
            base * (1.0 + seed[(a * 7 + b) % seed.len()])
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn propagate_is_monotone_and_nonincreasing(
            s1 in proptest::collection::vec(0.0f64..1.0, 16),
            s2 in proptest::collection::vec(0.0f64..1.0, 16),
        ) {
            let n = 12;
            let model = nn(n, 0.2);
            let lo = random_field(n, &s1);
            let hi = lo.clone() + random_field(n, &s2).map(|v| v * 0.5);
            let b1 = BoundField::new(lo, Provenance::InitialPowerLaw).unwrap();
            let b2 = BoundField::new(hi, Provenance::InitialPowerLaw).unwrap();
            let p1 = propagate(&b1, &model, 0.5, 2.0).unwrap();
            let p2 = propagate(&b2, &model, 0.5, 2.0).unwrap();
            for (a, b) in p1.matrix().iter().zip(p2.matrix().iter()) {
                prop_assert!(a <= b);
            }
            for (a, b) in p1.matrix().iter().zip(b1.matrix().iter()) {
                prop_assert!(a <= b);
            }
            prop_assert_eq!(p1.matrix().clone(), p1.matrix().transpose());
        }
    }
}
