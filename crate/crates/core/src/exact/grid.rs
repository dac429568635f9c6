use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ExactError;
use crate::model::ModelSpec;
use crate::numeric;

/// Default cap on the number of product-grid states.
pub const DEFAULT_STATE_BUDGET: usize = 200_000;

/// Discretisation of one spin: `points_per_site` uniform nodes on
/// `[-half_width, half_width]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub half_width: f64,
    pub points_per_site: usize,
    pub budget: usize,
}

impl GridSpec {
    pub fn new(half_width: f64, points_per_site: usize) -> Self {
        GridSpec {
            half_width,
            points_per_site,
            budget: DEFAULT_STATE_BUDGET,
        }
    }

    /// Half width `6/√δ`: six standard deviations of the Gaussian envelope
    /// with curvature `δ`.
    pub fn auto(model: &ModelSpec, points_per_site: usize) -> Self {
        GridSpec::new(6.0 / model.delta().sqrt(), points_per_site)
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }

    pub fn step(&self) -> f64 {
        2.0 * self.half_width / (self.points_per_site - 1) as f64
    }

    /// Same truncation with twice the resolution.
    pub fn refined(&self) -> Self {
        GridSpec {
            points_per_site: 2 * self.points_per_site,
            ..*self
        }
    }
}

/// The Gibbs measure restricted to a tensor grid.
///
/// State `u` has site `s` at node `(u / n^s) % n`.
#[derive(Debug, Clone)]
pub struct GridMeasure {
    spec: GridSpec,
    sites: usize,
    nodes: Vec<f64>,
    energies: Vec<f64>,
    weights: Vec<f64>,
    log_mass: f64,
}

pub fn build_grid_measure(model: &ModelSpec, spec: GridSpec) -> Result<GridMeasure, ExactError> {
    let n = spec.points_per_site;
    if n < 8 {
        return Err(ExactError::GridTooCoarse(n));
    }
    if !(spec.half_width.is_finite() && spec.half_width > 0.0) {
        return Err(ExactError::BadHalfWidth(spec.half_width));
    }
    let sites = model.len();
    let states = (n as u128).checked_pow(sites as u32).unwrap_or(u128::MAX);
    if states > spec.budget as u128 {
        return Err(ExactError::BudgetExceeded {
            states: states.min(usize::MAX as u128) as usize,
            budget: spec.budget,
        });
    }
    let states = states as usize;
    let h = spec.step();
    let nodes: Vec<f64> = (0..n).map(|k| -spec.half_width + h * k as f64).collect();

    // site-local energy tables and pair couplings 2·M_ij
    let m = model.interaction();
    let lin = model.effective_field();
    let local: Vec<Vec<f64>> = (0..sites)
        .map(|i| {
            nodes
                .iter()
                .map(|&x| model.potentials()[i].value(x) + lin[i] * x + m[(i, i)] * x * x)
                .collect()
        })
        .collect();
    let pairs: Vec<(usize, usize, f64)> = (0..sites)
        .flat_map(|i| (i + 1..sites).map(move |j| (i, j)))
        .map(|(i, j)| (i, j, m[(i, j)] + m[(j, i)]))
        .filter(|p| p.2 != 0.0)
        .collect();

    let energies: Vec<f64> = (0..states)
        .into_par_iter()
        .map_init(
            || vec![0usize; sites],
            |idx, u| {
                let mut rem = u;
                for slot in idx.iter_mut() {
                    *slot = rem % n;
                    rem /= n;
                }
                let mut e = 0.0;
                for (s, &k) in idx.iter().enumerate() {
                    e += local[s][k];
                }
                for &(i, j, c) in &pairs {
                    e += c * nodes[idx[i]] * nodes[idx[j]];
                }
                e
            },
        )
        .collect();
    if energies.iter().any(|e| !e.is_finite()) {
        return Err(ExactError::Overflow);
    }
    let neg: Vec<f64> = energies.iter().map(|e| -e).collect();
    let log_mass = numeric::log_sum_exp(&neg);
    if !log_mass.is_finite() {
        return Err(ExactError::Overflow);
    }
    let weights: Vec<f64> = energies.par_iter().map(|e| (-e - log_mass).exp()).collect();
    Ok(GridMeasure {
        spec,
        sites,
        nodes,
        energies,
        weights,
        log_mass,
    })
}

impl GridMeasure {
    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn states(&self) -> usize {
        self.weights.len()
    }

    pub fn points_per_site(&self) -> usize {
        self.spec.points_per_site
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn step(&self) -> f64 {
        self.spec.step()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// `log π(u)` for state `u`.
    pub fn log_weight(&self, u: usize) -> f64 {
        -self.energies[u] - self.log_mass
    }

    /// Discretised `log Z`: the Riemann sum `log Σ_u exp(-H(u)) h^|Λ|`.
    pub fn log_norm(&self) -> f64 {
        self.log_mass + self.sites as f64 * self.step().ln()
    }

    pub fn stride(&self, site: usize) -> usize {
        self.spec.points_per_site.pow(site as u32)
    }

    pub fn node_index(&self, u: usize, site: usize) -> usize {
        (u / self.stride(site)) % self.spec.points_per_site
    }

    pub fn coord(&self, u: usize, site: usize) -> f64 {
        self.nodes[self.node_index(u, site)]
    }

    /// Configuration of state `u`.
    pub fn config(&self, u: usize) -> Vec<f64> {
        (0..self.sites).map(|s| self.coord(u, s)).collect()
    }

    /// Evaluate `f` on every grid state.
    pub fn tabulate<F>(&self, f: F) -> Vec<f64>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        (0..self.states())
            .into_par_iter()
            .map_init(
                || vec![0.0; self.sites],
                |x, u| {
                    for (s, xs) in x.iter_mut().enumerate() {
                        *xs = self.coord(u, s);
                    }
                    f(x)
                },
            )
            .collect()
    }

    /// The coordinate function `x_i` as a grid function.
    pub fn coordinate(&self, i: usize) -> Vec<f64> {
        (0..self.states()).map(|u| self.coord(u, i)).collect()
    }

    pub fn expect(&self, f: &[f64]) -> f64 {
        numeric::dot(&self.weights, f)
    }

    pub fn covariance(&self, f: &[f64], g: &[f64]) -> f64 {
        let ef = self.expect(f);
        let eg = self.expect(g);
        numeric::sum_by(self.states(), |u| {
            self.weights[u] * (f[u] - ef) * (g[u] - eg)
        })
    }

    pub fn variance(&self, f: &[f64]) -> f64 {
        self.covariance(f, f)
    }

    fn check_site(&self, i: usize) -> Result<(), ExactError> {
        if i >= self.sites {
            Err(ExactError::IndexOutOfRange(i))
        } else {
            Ok(())
        }
    }

    /// `E[x_i]`
    pub fn mean(&self, i: usize) -> Result<f64, ExactError> {
        self.check_site(i)?;
        Ok(numeric::sum_by(self.states(), |u| {
            self.weights[u] * self.coord(u, i)
        }))
    }

    /// `E[x_i x_j]`
    pub fn product_moment(&self, i: usize, j: usize) -> Result<f64, ExactError> {
        self.check_site(i)?;
        self.check_site(j)?;
        Ok(numeric::sum_by(self.states(), |u| {
            self.weights[u] * self.coord(u, i) * self.coord(u, j)
        }))
    }

    /// `cov(x_i, x_j)`, accumulated around the means.
    pub fn cov(&self, i: usize, j: usize) -> Result<f64, ExactError> {
        let mi = self.mean(i)?;
        let mj = self.mean(j)?;
        Ok(numeric::sum_by(self.states(), |u| {
            self.weights[u] * (self.coord(u, i) - mi) * (self.coord(u, j) - mj)
        }))
    }

    pub fn covariance_matrix(&self) -> nalgebra::DMatrix<f64> {
        let n = self.sites;
        let mut c = nalgebra::DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = self.cov(i, j).expect("indices in range");
                c[(i, j)] = v;
                c[(j, i)] = v;
            }
        }
        c
    }
}
