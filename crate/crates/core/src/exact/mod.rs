//! Brute-force oracle for small systems.
//!
//! The continuous state space `ℝ^Λ` is replaced by the tensor grid
//! `{-a, -a+h, …, a}^Λ`. The Gibbs measure becomes a probability vector on
//! grid states and the generator `L = Δ - ∇H·∇` becomes a nearest-neighbour
//! jump process with rates `exp((H(u) - H(v))/2) / h²`, which is reversible
//! with respect to the discrete measure. Its Dirichlet form is
//!
//! ```text
//! E(f, g) = Σ_{edges (u,v)} √(μ(u)μ(v)) / h² · (f(u) - f(v)) (g(u) - g(v))
//! ```
//!
//! and converges to `∫ ∇f·∇g dμ` under refinement.

mod gaussian;
mod generator;
mod grid;

pub use gaussian::{ds_influence_exact, gaussian_oracle, gaussian_oracle_for, GaussianOracle};
pub use generator::{
    build_generator, directional_energies, solve_poisson, solve_poisson_with, spectral_gap, GapMethod, Generator, GeneratorHandle, PoissonSolution,
    SpectralGapEstimate, SolverSettings,
};
pub use grid::{build_grid_measure, GridMeasure, GridSpec, DEFAULT_STATE_BUDGET};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExactError {
    #[error("grid has {states} states, exceeding the budget of {budget}")]
    BudgetExceeded { states: usize, budget: usize },
    #[error("grid needs at least 8 points per site, got {0}")]
    GridTooCoarse(usize),
    #[error("half width must be positive and finite, got {0}")]
    BadHalfWidth(f64),
    #[error("energy or normalisation overflowed floating range")]
    Overflow,
    #[error("eigensolver did not converge after {iterations} iterations (last change {change:.3e})")]
    EigensolveFailure { iterations: usize, change: f64 },
    #[error("conjugate gradient did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    SolverDiverged { iterations: usize, residual: f64 },
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("site index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("grid function has length {got}, expected {expected}")]
    LengthMismatch { got: usize, expected: usize },
}
