//! Markov chain Monte Carlo for models too large for the grid oracle.
//!
//! One step is one sweep: `|Λ|` random-scan single-site Metropolis updates,
//! or one full-configuration MALA proposal. Sweep `t` draws all of its
//! randomness from the ChaCha stream `t` keyed by the chain seed, so a chain
//! is a pure function of `(model, config)` and two chains with equal seeds
//! consume identical random numbers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::Site;
use crate::model::{grad_energy, BoundarySpec, ModelError, ModelSpec};

pub const DEFAULT_BATCHES: usize = 32;
pub const MIN_BATCHES: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplerError {
    #[error("energy became non-finite at sweep {sweep}")]
    NonFiniteEnergy { sweep: usize },
    #[error("{got} batches requested, at least {MIN_BATCHES} required")]
    TooFewBatches { got: usize },
    #[error("batch of {samples} samples cannot be split into {batches} batches")]
    TooFewSamples { samples: usize, batches: usize },
    #[error("invalid chain configuration: {0}")]
    BadConfig(String),
    #[error("site index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("site {0} is not exterior to the lattice")]
    NotExterior(Site),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    RandomScanMetropolis,
    FullStepMala,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub steps: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub proposal_sd: f64,
    pub seed: u64,
    pub scheme: Scheme,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            steps: 110_000,
            burn_in: 10_000,
            thin: 1,
            proposal_sd: 1.0,
            seed: 0,
            scheme: Scheme::RandomScanMetropolis,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<(), SamplerError> {
        if self.steps <= self.burn_in {
            return Err(SamplerError::BadConfig(format!(
                "steps ({}) must exceed burn_in ({})",
                self.steps, self.burn_in
            )));
        }
        if self.thin == 0 {
            return Err(SamplerError::BadConfig("thin must be at least 1".into()));
        }
        if !(self.proposal_sd.is_finite() && self.proposal_sd > 0.0) {
            return Err(SamplerError::BadConfig(format!(
                "proposal_sd must be positive, got {}",
                self.proposal_sd
            )));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Post burn-in, thinned trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBatch {
    sites: usize,
    data: Vec<f64>,
    pub accept_rate: f64,
    pub seed: u64,
    pub fingerprint: String,
    pub config: ChainConfig,
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        if self.sites == 0 {
            0
        } else {
            self.data.len() / self.sites
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn sample(&self, t: usize) -> &[f64] {
        &self.data[t * self.sites..(t + 1) * self.sites]
    }

    /// Trajectory of one coordinate.
    pub fn series(&self, i: usize) -> Vec<f64> {
        self.data.iter().skip(i).step_by(self.sites).copied().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateWithError {
    pub value: f64,
    pub stderr: f64,
    pub n_batches: usize,
}

impl EstimateWithError {
    /// `|value - target| <= k·stderr`
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.stderr
    }
}

/// Metropolis acceptance probability for an energy increase `dh`.
pub fn metropolis_accept(dh: f64) -> f64 {
    if dh <= 0.0 {
        1.0
    } else {
        (-dh).exp()
    }
}

struct Energy<'a> {
    model: &'a ModelSpec,
    lin: Vec<f64>,
}

impl<'a> Energy<'a> {
    fn new(model: &'a ModelSpec) -> Self {
        Energy {
            model,
            lin: model.effective_field(),
        }
    }

    /// `H(x with x_i = y) - H(x)`
    fn site_delta(&self, x: &[f64], i: usize, y: f64) -> f64 {
        let m = self.model.interaction();
        let xi = x[i];
        let mut cross = 0.0;
        for (j, &xj) in x.iter().enumerate() {
            if j != i {
                cross += (m[(i, j)] + m[(j, i)]) * xj;
            }
        }
        let psi = &self.model.potentials()[i];
        psi.value(y) - psi.value(xi) + (self.lin[i] + cross) * (y - xi) + m[(i, i)] * (y * y - xi * xi)
    }
}

pub fn run_chain(model: &ModelSpec, cfg: &ChainConfig) -> Result<SampleBatch, SamplerError> {
    cfg.validate()?;
    let n = model.len();
    let energy = Energy::new(model);
    let base = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut x = vec![0.0; n];
    let mut h = model.energy(&x);
    let mut grad = grad_energy(model, &x);
    let kept = (cfg.steps - cfg.burn_in).div_ceil(cfg.thin);
    let mut data = Vec::with_capacity(kept * n);
    let mut accepted = 0u64;
    let mut proposed = 0u64;
    let sd = cfg.proposal_sd;
    let mut y = vec![0.0; n];

    for sweep in 0..cfg.steps {
        let mut rng = base.clone();
        rng.set_stream(sweep as u64);
        match cfg.scheme {
            Scheme::RandomScanMetropolis => {
                for _ in 0..n {
                    let i = rng.random_range(0..n);
                    let z: f64 = rng.sample(StandardNormal);
                    let u: f64 = rng.random();
                    let cand = x[i] + sd * z;
                    let dh = energy.site_delta(&x, i, cand);
                    proposed += 1;
                    if u < metropolis_accept(dh) {
                        x[i] = cand;
                        accepted += 1;
                    }
                }
                if !x.iter().all(|v| v.is_finite()) {
                    return Err(SamplerError::NonFiniteEnergy { sweep });
                }
            }
            Scheme::FullStepMala => {
                let tau = sd * sd;
                for k in 0..n {
                    let z: f64 = rng.sample(StandardNormal);
                    y[k] = x[k] - 0.5 * tau * grad[k] + sd * z;
                }
                let u: f64 = rng.random();
                let hy = model.energy(&y);
                if !hy.is_finite() {
                    return Err(SamplerError::NonFiniteEnergy { sweep });
                }
                let gy = grad_energy(model, &y);
                // log q(x | y) - log q(y | x)
                let mut back = 0.0;
                let mut fwd = 0.0;
                for k in 0..n {
                    let a = x[k] - y[k] + 0.5 * tau * gy[k];
                    let b = y[k] - x[k] + 0.5 * tau * grad[k];
                    back += a * a;
                    fwd += b * b;
                }
                let log_ratio = -(hy - h) - (back - fwd) / (2.0 * tau);
                proposed += 1;
                if u.ln() < log_ratio {
                    x.copy_from_slice(&y);
                    h = hy;
                    grad = gy;
                    accepted += 1;
                }
            }
        }
        if sweep >= cfg.burn_in && (sweep - cfg.burn_in) % cfg.thin == 0 {
            data.extend_from_slice(&x);
        }
    }
    Ok(SampleBatch {
        sites: n,
        data,
        accept_rate: accepted as f64 / proposed.max(1) as f64,
        seed: cfg.seed,
        fingerprint: model.fingerprint(),
        config: *cfg,
    })
}

/// Batch-means estimate of `E[g]` from per-sample values. The error bar is
/// never reported below the rounding resolution `ε·√N·mean|g|` of the
/// accumulated sum.
pub fn batch_means(values: &[f64], batches: usize) -> Result<EstimateWithError, SamplerError> {
    if batches < MIN_BATCHES {
        return Err(SamplerError::TooFewBatches { got: batches });
    }
    let size = values.len() / batches;
    if size == 0 {
        return Err(SamplerError::TooFewSamples {
            samples: values.len(),
            batches,
        });
    }
    let means: Vec<f64> = values[..size * batches]
        .chunks(size)
        .map(|c| c.iter().sum::<f64>() / size as f64)
        .collect();
    let b = batches as f64;
    let value = means.iter().sum::<f64>() / b;
    let var = means.iter().map(|m| (m - value).powi(2)).sum::<f64>() / (b - 1.0);
    let used = &values[..size * batches];
    let resolution =
        f64::EPSILON * (used.len() as f64).sqrt() * used.iter().map(|v| v.abs()).sum::<f64>()
            / used.len() as f64;
    Ok(EstimateWithError {
        value,
        stderr: (var / b).sqrt().max(resolution),
        n_batches: batches,
    })
}

fn check_index(batch: &SampleBatch, i: usize) -> Result<(), SamplerError> {
    if i >= batch.sites() {
        Err(SamplerError::IndexOutOfRange(i))
    } else {
        Ok(())
    }
}

pub fn estimate_mean(batch: &SampleBatch, i: usize) -> Result<EstimateWithError, SamplerError> {
    check_index(batch, i)?;
    batch_means(&batch.series(i), DEFAULT_BATCHES)
}

pub fn estimate_cov(
    batch: &SampleBatch,
    i: usize,
    j: usize,
) -> Result<EstimateWithError, SamplerError> {
    estimate_cov_with(batch, i, j, DEFAULT_BATCHES)
}

/// Covariance about the global sample means, with batch-means error bars.
pub fn estimate_cov_with(
    batch: &SampleBatch,
    i: usize,
    j: usize,
    batches: usize,
) -> Result<EstimateWithError, SamplerError> {
    check_index(batch, i)?;
    check_index(batch, j)?;
    let xi = batch.series(i);
    let xj = batch.series(j);
    let n = xi.len().max(1) as f64;
    let mi = xi.iter().sum::<f64>() / n;
    let mj = xj.iter().sum::<f64>() / n;
    let prod: Vec<f64> = xi.iter().zip(&xj).map(|(a, b)| (a - mi) * (b - mj)).collect();
    batch_means(&prod, batches)
}

fn boundary_value(model: &ModelSpec, site: &Site) -> f64 {
    model
        .boundary()
        .iter()
        .find(|(s, _)| s == site)
        .map(|(_, w)| *w)
        .unwrap_or(0.0)
}

/// `E_{ω̃}[x_obs] - E_ω[x_obs]` where `ω̃` moves the boundary spin at
/// `boundary_site` by `delta`. Both chains share every random number, and
/// the error bar is the batch-means error of the paired difference.
pub fn ds_influence(
    model: &ModelSpec,
    observable: usize,
    boundary_site: &Site,
    delta: f64,
    cfg: &ChainConfig,
) -> Result<EstimateWithError, SamplerError> {
    if observable >= model.len() {
        return Err(SamplerError::IndexOutOfRange(observable));
    }
    if model.lattice().contains(boundary_site) {
        return Err(SamplerError::NotExterior(boundary_site.clone()));
    }
    let moved = model.with_boundary_value(
        boundary_site,
        boundary_value(model, boundary_site) + delta,
    )?;
    let (a, b) = rayon::join(|| run_chain(model, cfg), || run_chain(&moved, cfg));
    let (a, b) = (a?, b?);
    let diff: Vec<f64> = a
        .series(observable)
        .iter()
        .zip(b.series(observable))
        .map(|(x, y)| y - x)
        .collect();
    batch_means(&diff, DEFAULT_BATCHES)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceRow {
    pub boundary: usize,
    pub site: usize,
    pub value: f64,
    pub stderr: f64,
}

/// Chain seed for member `index` of a family, derived from the base seed.
pub fn derived_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-boundary, per-site variance estimates. Chains run in parallel, one
/// per boundary condition, each with a seed derived from `cfg.seed`.
pub fn variance_sweep(
    model: &ModelSpec,
    family: &[BoundarySpec],
    cfg: &ChainConfig,
) -> Result<Vec<VarianceRow>, SamplerError> {
    let per: Vec<Result<Vec<VarianceRow>, SamplerError>> = family
        .par_iter()
        .enumerate()
        .map(|(b, omega)| {
            let m = model.with_boundary(omega.clone())?;
            let batch = run_chain(&m, &cfg.with_seed(derived_seed(cfg.seed, b as u64)))?;
            (0..m.len())
                .map(|i| {
                    let e = estimate_cov(&batch, i, i)?;
                    Ok(VarianceRow {
                        boundary: b,
                        site: i,
                        value: e.value,
                        stderr: e.stderr,
                    })
                })
                .collect()
        })
        .collect();
    let mut rows = Vec::new();
    for r in per {
        rows.extend(r?);
    }
    Ok(rows)
}
