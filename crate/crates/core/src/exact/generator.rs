use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ExactError, GridMeasure, GridSpec};
use crate::numeric;

/// Stopping rule for the conjugate gradient solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    /// Target `‖b - Qx‖ / ‖b‖` in `L²(μ)`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            tol: 1e-10,
            max_iter: 100_000,
        }
    }
}

pub type GeneratorHandle<'a> = Generator<'a>;

pub fn build_generator(gm: &GridMeasure) -> Result<Generator<'_>, ExactError> {
    Generator::new(gm)
}

/// Reversible nearest-neighbour jump generator on the grid, stored as
/// per-state, per-axis rates.
#[derive(Debug, Clone)]
pub struct Generator<'a> {
    gm: &'a GridMeasure,
    axes: usize,
    /// rate `u → u + stride(s)` at `u·axes + s`
    up: Vec<f64>,
    /// rate `u → u - stride(s)` at `u·axes + s`
    down: Vec<f64>,
    /// `√(μ(u)μ(u + stride(s))) / h²`
    edge: Vec<f64>,
    diag: Vec<f64>,
}

impl<'a> Generator<'a> {
    pub fn new(gm: &'a GridMeasure) -> Result<Self, ExactError> {
        let axes = gm.sites();
        let n = gm.points_per_site();
        let states = gm.states();
        let inv_h2 = 1.0 / (gm.step() * gm.step());
        let e = gm.energies();
        let mut up = vec![0.0; states * axes];
        let mut down = vec![0.0; states * axes];
        let mut edge = vec![0.0; states * axes];
        up.par_chunks_mut(axes)
            .zip(down.par_chunks_mut(axes))
            .zip(edge.par_chunks_mut(axes))
            .enumerate()
            .for_each(|(u, ((up, down), edge))| {
                for s in 0..axes {
                    let st = gm.stride(s);
                    let k = gm.node_index(u, s);
                    if k + 1 < n {
                        let v = u + st;
                        up[s] = (0.5 * (e[u] - e[v])).exp() * inv_h2;
                        edge[s] = (0.5 * (gm.log_weight(u) + gm.log_weight(v))).exp() * inv_h2;
                    }
                    if k > 0 {
                        down[s] = (0.5 * (e[u] - e[u - st])).exp() * inv_h2;
                    }
                }
            });
        if up.iter().chain(&down).any(|r| !r.is_finite()) {
            return Err(ExactError::Overflow);
        }
        let diag: Vec<f64> = (0..states)
            .into_par_iter()
            .map(|u| (0..axes).map(|s| up[u * axes + s] + down[u * axes + s]).sum())
            .collect();
        Ok(Generator {
            gm,
            axes,
            up,
            down,
            edge,
            diag,
        })
    }

    pub fn measure(&self) -> &GridMeasure {
        self.gm
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// `(-L f)(u) = Σ_v q(u,v) (f(u) - f(v))`
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; f.len()];
        self.apply_into(f, &mut out);
        out
    }

    fn apply_into(&self, f: &[f64], out: &mut [f64]) {
        let axes = self.axes;
        out.par_iter_mut().enumerate().for_each(|(u, o)| {
            let mut acc = 0.0;
            for s in 0..axes {
                let st = self.gm.stride(s);
                let up = self.up[u * axes + s];
                if up != 0.0 {
                    acc += up * (f[u] - f[u + st]);
                }
                let down = self.down[u * axes + s];
                if down != 0.0 {
                    acc += down * (f[u] - f[u - st]);
                }
            }
            *o = acc;
        });
    }

    /// Edge sum of the Dirichlet form restricted to one coordinate axis.
    pub fn axis_form(&self, f: &[f64], g: &[f64], axis: usize) -> f64 {
        let st = self.gm.stride(axis);
        let axes = self.axes;
        numeric::sum_by(self.len(), |u| {
            let w = self.edge[u * axes + axis];
            if w == 0.0 {
                0.0
            } else {
                w * (f[u] - f[u + st]) * (g[u] - g[u + st])
            }
        })
    }

    /// `E(f, g) = Σ_edges w_e (f(u) - f(v)) (g(u) - g(v))`
    pub fn dirichlet(&self, f: &[f64], g: &[f64]) -> f64 {
        (0..self.axes).map(|s| self.axis_form(f, g, s)).sum()
    }

    fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        numeric::wdot(self.gm.weights(), a, b)
    }

    fn center(&self, v: &mut [f64]) {
        let m = self.gm.expect(v);
        v.par_iter_mut().for_each(|x| *x -= m);
    }

    /// Solve `-L x = b` for mean-zero `b` by Jacobi-preconditioned conjugate
    /// gradients in `L²(μ)`. Returns the mean-zero solution, the relative
    /// residual and the iteration count.
    pub fn solve(
        &self,
        b: &[f64],
        start: Option<&[f64]>,
        settings: SolverSettings,
    ) -> Result<(Vec<f64>, f64, usize), ExactError> {
        let n = self.len();
        if b.len() != n {
            return Err(ExactError::LengthMismatch {
                got: b.len(),
                expected: n,
            });
        }
        let bnorm = self.inner(b, b).sqrt();
        if bnorm == 0.0 {
            return Ok((vec![0.0; n], 0.0, 0));
        }
        let mut x = match start {
            Some(s) => {
                let mut s = s.to_vec();
                self.center(&mut s);
                s
            }
            None => vec![0.0; n],
        };
        let mut q = vec![0.0; n];
        self.apply_into(&x, &mut q);
        let mut r: Vec<f64> = b.iter().zip(&q).map(|(b, q)| b - q).collect();
        let precondition = |r: &[f64]| {
            let mut z: Vec<f64> = r
                .par_iter()
                .zip(&self.diag)
                .map(|(r, d)| if *d > 0.0 { r / d } else { *r })
                .collect();
            self.center(&mut z);
            z
        };
        let mut z = precondition(&r);
        let mut p = z.clone();
        let mut rz = self.inner(&r, &z);
        let mut res = self.inner(&r, &r).sqrt() / bnorm;
        let mut it = 0;
        while res > settings.tol {
            if it >= settings.max_iter || !res.is_finite() {
                return Err(ExactError::SolverDiverged {
                    iterations: it,
                    residual: res,
                });
            }
            self.apply_into(&p, &mut q);
            let pq = self.inner(&p, &q);
            if pq <= 0.0 {
                return Err(ExactError::SolverDiverged {
                    iterations: it,
                    residual: res,
                });
            }
            let alpha = rz / pq;
            x.par_iter_mut().zip(&p).for_each(|(x, p)| *x += alpha * p);
            r.par_iter_mut().zip(&q).for_each(|(r, q)| *r -= alpha * q);
            it += 1;
            // periodic true-residual refresh against drift
            if it % 200 == 0 {
                self.apply_into(&x, &mut q);
                r.par_iter_mut()
                    .zip(b.par_iter().zip(&q))
                    .for_each(|(r, (b, q))| *r = b - q);
            }
            res = self.inner(&r, &r).sqrt() / bnorm;
            z = precondition(&r);
            let rz_new = self.inner(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            p.par_iter_mut().zip(&z).for_each(|(p, z)| *p = z + beta * *p);
        }
        self.center(&mut x);
        self.apply_into(&x, &mut q);
        let true_res = numeric::sum_by(n, |u| {
            self.gm.weights()[u] * (b[u] - q[u]).powi(2)
        })
        .sqrt()
            / bnorm;
        Ok((x, true_res, it))
    }
}

/// Solution of `-L φ = f - E_μ f`.
#[derive(Debug, Clone)]
pub struct PoissonSolution {
    pub phi: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

pub fn solve_poisson(gen: &Generator<'_>, f: &[f64]) -> Result<PoissonSolution, ExactError> {
    solve_poisson_with(gen, f, SolverSettings::default())
}

pub fn solve_poisson_with(
    gen: &Generator<'_>,
    f: &[f64],
    settings: SolverSettings,
) -> Result<PoissonSolution, ExactError> {
    if f.len() != gen.len() {
        return Err(ExactError::LengthMismatch {
            got: f.len(),
            expected: gen.len(),
        });
    }
    let scale = gen.inner(f, f).sqrt();
    let mut b = f.to_vec();
    gen.center(&mut b);
    if gen.inner(&b, &b).sqrt() <= 1e-13 * scale {
        return Ok(PoissonSolution {
            phi: vec![0.0; f.len()],
            residual: 0.0,
            iterations: 0,
        });
    }
    let (phi, residual, iterations) = gen.solve(&b, None, settings)?;
    Ok(PoissonSolution {
        phi,
        residual,
        iterations,
    })
}

/// `(Σ_{edges along axis k} w_e (φ(u) - φ(v))²)_k`, the discrete
/// `∫ |∂_k φ|² dμ`.
pub fn directional_energies(gen: &Generator<'_>, phi: &[f64]) -> Vec<f64> {
    (0..gen.axes).map(|k| gen.axis_form(phi, phi, k)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapMethod {
    /// Inverse iteration on the grid generator.
    Eigensolve,
    /// Smallest eigenvalue of `2M`, for Gaussian models.
    Oracle,
}

#[derive(Debug, Clone)]
pub struct SpectralGapEstimate {
    pub gap: f64,
    pub method: GapMethod,
    pub grid: Option<GridSpec>,
    pub iterations: usize,
    /// Normalised mean-zero eigenfunction on the grid.
    pub eigenfunction: Option<Vec<f64>>,
}

const GAP_MAX_ITER: usize = 2000;
const GAP_TOL: f64 = 1e-8;

/// Smallest nonzero eigenvalue of `-L` by inverse iteration.
pub fn spectral_gap(gen: &Generator<'_>) -> Result<SpectralGapEstimate, ExactError> {
    let gm = gen.measure();
    let n = gen.len();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    // random start plus the linear functions, which dominate the low modes
    let mut v: Vec<f64> = (0..n)
        .map(|u| {
            let lin: f64 = (0..gm.sites()).map(|s| gm.coord(u, s)).sum();
            lin + 0.1 * rng.random_range(-1.0..1.0)
        })
        .collect();
    gen.center(&mut v);
    normalize(gen, &mut v);
    let mut lambda = gen.inner(&v, &gen.apply(&v));
    let settings = SolverSettings {
        tol: 1e-11,
        max_iter: 100_000,
    };
    let mut change = f64::INFINITY;
    for it in 1..=GAP_MAX_ITER {
        let guess: Vec<f64> = v.iter().map(|x| x / lambda).collect();
        let (mut w, _, _) = gen.solve(&v, Some(&guess), settings)?;
        normalize(gen, &mut w);
        let qw = gen.apply(&w);
        let next = gen.inner(&w, &qw);
        let resid = numeric::sum_by(n, |u| gm.weights()[u] * (qw[u] - next * w[u]).powi(2)).sqrt();
        change = (next - lambda).abs();
        lambda = next;
        v = w;
        if change <= GAP_TOL * 1e-2 * lambda || resid <= GAP_TOL.sqrt() * 1e-2 * lambda {
            return Ok(SpectralGapEstimate {
                gap: lambda,
                method: GapMethod::Eigensolve,
                grid: Some(gm.spec()),
                iterations: it,
                eigenfunction: Some(v),
            });
        }
    }
    Err(ExactError::EigensolveFailure {
        iterations: GAP_MAX_ITER,
        change,
    })
}

fn normalize(gen: &Generator<'_>, v: &mut [f64]) {
    let norm = gen.inner(v, v).sqrt();
    v.par_iter_mut().for_each(|x| *x /= norm);
}
