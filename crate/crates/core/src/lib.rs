//! Numerical laboratory for finite-volume lattice Gibbs measures with
//! algebraically decaying interactions.
//!
//! * [`model`]: Hamiltonian, interaction and boundary data with validation.
//! * [`exact`]: tensor-grid quadrature, the discrete generator, spectral gap,
//!   Poisson solves and closed-form Gaussian oracles.
//! * [`sampler`]: reproducible Metropolis / MALA chains and batch-means
//!   estimators.
//! * [`blockavg`]: block-averaging coefficients, the coarse block matrix and
//!   its inverse decay.
//! * [`bootstrap`]: Lebowitz-inequality propagation of covariance bounds.
//! * [`fit`], [`config`], [`report`], [`suite`]: experiment plumbing.

pub mod blockavg;
pub mod bootstrap;
pub mod config;
pub mod exact;
pub mod fit;
pub mod lattice;
pub mod model;
pub mod numeric;
pub mod potential;
pub mod report;
pub mod sampler;
pub mod suite;

pub use lattice::{ball, dist, Ball, Lattice, Site};
pub use model::{ferromagnetize, grad_energy, BoundarySpec, Kernel, ModelBuilder, ModelError, ModelSpec};
pub use potential::SitePotential;
