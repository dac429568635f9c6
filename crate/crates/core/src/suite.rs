//! Built-in Gaussian verification suite: each check compares a module
//! against a closed form or an exact identity.

use nalgebra::{dmatrix, DMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::blockavg::{self, BlockError};
use crate::bootstrap::{self, BootstrapError, BootstrapParams};
use crate::exact::{
    build_generator, build_grid_measure, gaussian_oracle, solve_poisson, spectral_gap,
    ExactError, GridMeasure, GridSpec,
};
use crate::fit::{self, FitError};
use crate::lattice::{Lattice, Site};
use crate::model::{Kernel, ModelBuilder, ModelError, ModelSpec};
use crate::report::Table;
use crate::sampler::{self, ChainConfig, SamplerError, Scheme};

#[derive(Debug, Error)]
pub enum SuiteError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Exact(#[from] ExactError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Block(#[from] BlockError),
    #[error(transparent)]
    Bootstrap(#[from] BootstrapError),
    #[error(transparent)]
    Fit(#[from] FitError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub reference: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    /// `|value - reference| <= tolerance`.
    fn close(name: &str, value: f64, reference: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            value,
            reference,
            tolerance,
            passed: (value - reference).abs() <= tolerance,
        }
    }

    /// `value <= bound + tolerance`.
    fn below(name: &str, value: f64, bound: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            value,
            reference: bound,
            tolerance,
            passed: value <= bound + tolerance,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SuiteReport {
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn table(&self) -> Table {
        let mut t = Table::new("verify", &["check", "value", "reference", "tolerance", "passed"]);
        for c in &self.checks {
            t.push(vec![
                c.name.as_str().into(),
                c.value.into(),
                c.reference.into(),
                c.tolerance.into(),
                c.passed.into(),
            ]);
        }
        t
    }
}

/// Random smooth observables on the grid: linear, quadratic and bounded
/// terms with coefficients in `[-1, 1]`.
pub fn random_observables(gm: &GridMeasure, seed: u64, count: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = gm.sites();
    (0..count)
        .map(|_| {
            let lin: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let quad: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let bump = rng.random_range(-1.0..1.0);
            let freq = rng.random_range(0.5..2.0);
            gm.tabulate(|x| {
                let mut v = bump * (freq * x[0]).sin();
                for k in 0..n {
                    v += lin[k] * x[k] + quad[k] * x[k] * x[(k + 1) % n];
                }
                v
            })
        })
        .collect()
}

fn two_site() -> DMatrix<f64> {
    dmatrix![1.0, -0.2; -0.2, 1.0]
}

fn three_site() -> DMatrix<f64> {
    dmatrix![1.0, -0.2, 0.0; -0.2, 1.0, -0.2; 0.0, -0.2, 1.0]
}

pub fn run_gaussian_suite(seed: u64) -> Result<SuiteReport, SuiteError> {
    let mut checks = Vec::new();

    // quadrature against the closed-form covariance
    let m2 = two_site();
    let model2 = ModelSpec::gaussian_chain(&m2)?;
    let oracle2 = gaussian_oracle(&m2, &[0.0; 2])?;
    let gm = build_grid_measure(&model2, GridSpec::new(6.0, 128))?;
    let err = (gm.covariance_matrix() - &oracle2.covariance).amax();
    checks.push(Check::close("grid_covariance_2site", err, 0.0, 1e-3));

    let gm = build_grid_measure(&model2, GridSpec::new(6.0, 96))?;
    let gen = build_generator(&gm)?;
    let gap = spectral_gap(&gen)?;
    checks.push(Check::close("spectral_gap_2site", gap.gap, oracle2.gap, 0.02 * oracle2.gap));

    if let Some(ef) = &gap.eigenfunction {
        let ratio = gen.dirichlet(ef, ef) / (gap.gap * gm.variance(ef));
        checks.push(Check::close("poincare_equality_at_eigenfunction", ratio, 1.0, 0.01));
    }

    // covariance representation and the two Poincaré inequalities
    let m3 = three_site();
    let model3 = ModelSpec::gaussian_chain(&m3)?;
    let gm3 = build_grid_measure(&model3, GridSpec::new(6.0, 28))?;
    let gen3 = build_generator(&gm3)?;
    let gap3 = spectral_gap(&gen3)?.gap;
    let obs = random_observables(&gm3, seed, 8);
    let mut rep_err: f64 = 0.0;
    let mut pi_slack = f64::INFINITY;
    let mut dual_slack = f64::INFINITY;
    for pair in obs.chunks(2) {
        let (f, g) = (&pair[0], &pair[1]);
        let sol = solve_poisson(&gen3, f)?;
        let cov = gm3.covariance(f, g);
        let rep = gen3.dirichlet(&sol.phi, g);
        rep_err = rep_err.max((cov - rep).abs() / cov.abs().max(1e-300));
        let eff = gen3.dirichlet(f, f);
        pi_slack = pi_slack.min(eff / gap3 - gm3.variance(f));
        dual_slack = dual_slack.min(eff / (gap3 * gap3) - gen3.dirichlet(&sol.phi, &sol.phi));
    }
    checks.push(Check::below("covariance_representation_rel_err", rep_err, 0.0, 1e-8));
    checks.push(Check::below("poincare_slack_neg", -pi_slack, 0.0, 1e-10));
    checks.push(Check::below("dual_poincare_slack_neg", -dual_slack, 0.0, 1e-10));

    // Lebowitz inequality with the default coupling factor
    let leb = bootstrap::verify_lebowitz_exact(&model3, 2.0)?;
    checks.push(Check::below("lebowitz_min_coupling", leb.min_c, 2.0, 0.0));
    checks.push(Check::below("lebowitz_min_covariance_neg", -leb.min_covariance, 0.0, 1e-10));

    // inverse of a dominant power-law matrix
    let n = 64;
    let a = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0
        } else {
            -0.2 * (1.0 + i.abs_diff(j) as f64).powi(-3)
        }
    });
    let pos: Vec<Site> = (0..n as i64).map(|i| Site::new(vec![i])).collect();
    let inv = blockavg::inverse_decay_matrix(&a, &pos)?;
    checks.push(Check::below("inverse_min_entry_neg", -inv.min_entry, 0.0, 0.0));
    if let Some(slope) = inv.exponent() {
        checks.push(Check::below("inverse_decay_slope", slope, -3.0, 0.2));
    }

    // bootstrap soundness on a ferromagnetic chain
    let chain = ModelBuilder::new(
        Lattice::new(vec![32]).map_err(ModelError::from)?,
        Kernel::PowerLaw {
            amplitude: 0.05,
            exponent: 2.0,
            diagonal: 1.0,
            ferromagnetic: true,
        },
    )
    .build()?;
    let oc = crate::exact::gaussian_oracle_for(&chain)?;
    let nc = chain.len();
    let mut c0: f64 = 0.0;
    for i in 0..nc {
        for j in 0..nc {
            if i != j {
                c0 = c0.max(oc.cov(i, j) * (1.0 + i.abs_diff(j) as f64).powf(1.4));
            }
        }
    }
    let diag: Vec<f64> = (0..nc).map(|i| oc.cov(i, i)).collect();
    let boot = bootstrap::run_bootstrap(&chain, (c0, 0.4), &diag, &BootstrapParams::default())?;
    let worst = (0..nc)
        .flat_map(|i| (0..nc).map(move |j| (i, j)))
        .map(|(i, j)| oc.cov(i, j).abs() - boot.field.get(i, j))
        .fold(f64::NEG_INFINITY, f64::max);
    checks.push(Check::below("bootstrap_domination_gap", worst, 0.0, 1e-12));

    // planted power law
    let pts: Vec<(f64, f64)> = (1..=32)
        .map(|r| (r as f64, 3.0 * (1.0 + r as f64).powf(-2.5)))
        .collect();
    let f = fit::fit_power_law(&pts)?;
    checks.push(Check::close("fit_planted_exponent", f.alpha_hat, 2.5, 1e-6));

    // Monte Carlo covariance against the closed form
    let cfg = ChainConfig {
        steps: 42_000,
        burn_in: 2_000,
        thin: 1,
        proposal_sd: 1.2,
        seed,
        scheme: Scheme::RandomScanMetropolis,
    };
    let batch = sampler::run_chain(&model2, &cfg)?;
    for (i, j) in [(0, 0), (0, 1), (1, 1)] {
        let est = sampler::estimate_cov(&batch, i, j)?;
        let z = (est.value - oracle2.cov(i, j)).abs() / est.stderr.max(f64::MIN_POSITIVE);
        checks.push(Check::below(&format!("mcmc_cov_{i}{j}_zscore"), z, 4.0, 0.0));
    }

    Ok(SuiteReport { checks })
}
