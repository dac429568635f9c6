//! Model specification: Hamiltonian, interaction, external field and
//! boundary spins, validated once at construction and immutable afterwards.
//!
//! The energy of a configuration `x` over `Λ` is
//!
//! ```text
//! H(x) = Σ_i ψ_i(x_i) + s_i x_i + Σ_{i,j∈Λ} M_ij x_i x_j + 2 Σ_{i∈Λ, j∉Λ} M_ij x_i ω_j
//! ```
//!
//! with the ordered double sum, so distinct sites couple with strength `2M_ij`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::lattice::{Lattice, LatticeError, Site};
use crate::potential::SitePotential;

/// Entries of the exterior shell below this magnitude are ignored.
pub const DEFAULT_SHELL_CUTOFF: f64 = 1e-12;
/// Default exterior shell width, in multiples of the largest lattice extent.
pub const DEFAULT_SHELL_FACTOR: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error("interaction is not diagonally dominant at site {site}: margin {margin:.6e} (largest off-diagonal partner {partner})")]
    NonDominant {
        site: Site,
        partner: Site,
        margin: f64,
    },
    #[error("interaction is not symmetric: M[{i}][{j}] = {mij} but M[{j}][{i}] = {mji}")]
    AsymmetricInteraction {
        i: Site,
        j: Site,
        mij: f64,
        mji: f64,
    },
    #[error("claimed decay |M| <= {c}(1+r)^-{exponent} violated at pair {i}, {j}: |M| = {value}")]
    DecayViolated {
        i: Site,
        j: Site,
        value: f64,
        c: f64,
        exponent: f64,
    },
    #[error("boundary is not well-tempered: interior site {site} couples to boundary site {partner} with non-finite weight")]
    IllTemperedBoundary { site: Site, partner: Site },
    #[error("site {0} is not in the lattice")]
    SiteOutOfRange(Site),
    #[error("boundary site {0} lies inside the lattice")]
    BoundaryInsideLattice(Site),
    #[error("dimension mismatch: {what} has length {got}, expected {expected}")]
    Shape {
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("non-finite interaction entry at {i}, {j}")]
    NonFinite { i: Site, j: Site },
}

/// How the interaction matrix is generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Kernel {
    /// `M_ij = ∓ amplitude·(1+|i-j|)^(-exponent)` for `i ≠ j`, negative when
    /// ferromagnetic; `M_ii = diagonal`.
    PowerLaw {
        amplitude: f64,
        exponent: f64,
        diagonal: f64,
        ferromagnetic: bool,
    },
    /// `M_ij = ∓ amplitude` for `|i-j| = 1`, zero beyond.
    NearestNeighbor {
        amplitude: f64,
        diagonal: f64,
        ferromagnetic: bool,
    },
    /// Dense matrix over `Λ` only; no exterior couplings.
    Explicit(Vec<Vec<f64>>),
}

impl Kernel {
    /// Off-diagonal entry as a function of ℓ∞ distance, for translation
    /// invariant kernels.
    pub fn off_diagonal(&self, r: u64) -> Option<f64> {
        match self {
            Kernel::PowerLaw {
                amplitude,
                exponent,
                ferromagnetic,
                ..
            } => {
                if r == 0 {
                    return Some(0.0);
                }
                let v = amplitude.abs() * (1.0 + r as f64).powf(-exponent);
                Some(if *ferromagnetic { -v } else { v })
            }
            Kernel::NearestNeighbor {
                amplitude,
                ferromagnetic,
                ..
            } => Some(if r == 1 {
                if *ferromagnetic {
                    -amplitude.abs()
                } else {
                    amplitude.abs()
                }
            } else {
                0.0
            }),
            Kernel::Explicit(_) => None,
        }
    }

    fn ferromagnetized(&self) -> Kernel {
        match self {
            Kernel::PowerLaw {
                amplitude,
                exponent,
                diagonal,
                ..
            } => Kernel::PowerLaw {
                amplitude: *amplitude,
                exponent: *exponent,
                diagonal: *diagonal,
                ferromagnetic: true,
            },
            Kernel::NearestNeighbor {
                amplitude,
                diagonal,
                ..
            } => Kernel::NearestNeighbor {
                amplitude: *amplitude,
                diagonal: *diagonal,
                ferromagnetic: true,
            },
            Kernel::Explicit(rows) => Kernel::Explicit(
                rows.iter()
                    .enumerate()
                    .map(|(i, row)| {
                        row.iter()
                            .enumerate()
                            .map(|(j, &v)| if i == j { v } else { -v.abs() })
                            .collect()
                    })
                    .collect(),
            ),
        }
    }
}

/// Claimed algebraic decay `|M_ij| <= c·(1+|i-j|)^(-exponent)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayClaim {
    pub c: f64,
    pub exponent: f64,
}

/// Exterior shell truncation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShellSpec {
    pub width: usize,
    pub cutoff: f64,
}

/// Boundary data `ω` on exterior sites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub enum BoundarySpec {
    #[default]
    Zero,
    Constant(f64),
    /// Independent uniform values in `[-max_abs, max_abs]`.
    Random { max_abs: f64, seed: u64 },
    /// Explicit exterior values; unlisted sites are zero.
    Explicit(Vec<(Site, f64)>),
}

/// Incremental construction of a [`ModelSpec`].
#[derive(Debug, Clone)]
pub struct ModelBuilder {
    lattice: Lattice,
    kernel: Kernel,
    potentials: Vec<SitePotential>,
    field: Vec<f64>,
    boundary: BoundarySpec,
    decay: Option<DecayClaim>,
    shell: Option<ShellSpec>,
}

impl ModelBuilder {
    pub fn new(lattice: Lattice, kernel: Kernel) -> Self {
        let n = lattice.len();
        ModelBuilder {
            lattice,
            kernel,
            potentials: vec![SitePotential::Gaussian; n],
            field: vec![0.0; n],
            boundary: BoundarySpec::Zero,
            decay: None,
            shell: None,
        }
    }

    pub fn potential(mut self, p: SitePotential) -> Self {
        self.potentials = vec![p; self.lattice.len()];
        self
    }

    pub fn potentials(mut self, p: Vec<SitePotential>) -> Self {
        self.potentials = p;
        self
    }

    pub fn field(mut self, s: Vec<f64>) -> Self {
        self.field = s;
        self
    }

    pub fn uniform_field(mut self, s: f64) -> Self {
        self.field = vec![s; self.lattice.len()];
        self
    }

    pub fn boundary(mut self, b: BoundarySpec) -> Self {
        self.boundary = b;
        self
    }

    pub fn decay(mut self, claim: DecayClaim) -> Self {
        self.decay = Some(claim);
        self
    }

    pub fn shell(mut self, shell: ShellSpec) -> Self {
        self.shell = Some(shell);
        self
    }

    pub fn build(self) -> Result<ModelSpec, ModelError> {
        let lattice = self.lattice;
        let n = lattice.len();
        if self.potentials.len() != n {
            return Err(ModelError::Shape {
                what: "potentials",
                got: self.potentials.len(),
                expected: n,
            });
        }
        if self.field.len() != n {
            return Err(ModelError::Shape {
                what: "field",
                got: self.field.len(),
                expected: n,
            });
        }
        let interaction = materialize(&lattice, &self.kernel)?;
        let shell = self.shell.unwrap_or(ShellSpec {
            width: DEFAULT_SHELL_FACTOR * lattice.extents().iter().copied().max().unwrap_or(1),
            cutoff: DEFAULT_SHELL_CUTOFF,
        });
        let shell_width = effective_shell_width(&self.kernel, shell);
        let decay = self.decay.or(match &self.kernel {
            Kernel::PowerLaw {
                amplitude,
                exponent,
                ..
            } => Some(DecayClaim {
                c: amplitude.abs(),
                exponent: *exponent,
            }),
            _ => None,
        });
        let boundary = expand_boundary(&lattice, shell_width, &self.boundary)?;

        let mut model = ModelSpec {
            lattice,
            kernel: self.kernel,
            interaction,
            potentials: self.potentials,
            field: self.field,
            boundary,
            boundary_field: Vec::new(),
            decay,
            shell,
            shell_width,
            delta: 0.0,
        };
        model.check_symmetric()?;
        model.delta = model.check_dominance()?;
        if let Some(claim) = model.decay {
            model.check_decay(claim)?;
        }
        model.boundary_field = model.compute_boundary_field()?;
        Ok(model)
    }
}

/// A validated, immutable model.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    lattice: Lattice,
    kernel: Kernel,
    interaction: DMatrix<f64>,
    potentials: Vec<SitePotential>,
    field: Vec<f64>,
    boundary: Vec<(Site, f64)>,
    boundary_field: Vec<f64>,
    decay: Option<DecayClaim>,
    shell: ShellSpec,
    shell_width: usize,
    delta: f64,
}

impl ModelSpec {
    /// Gaussian model (`ψ ≡ 0`) on a chain with the given dense interaction,
    /// zero field and no boundary.
    pub fn gaussian_chain(m: &DMatrix<f64>) -> Result<ModelSpec, ModelError> {
        let lattice = Lattice::new(vec![m.nrows()])?;
        ModelBuilder::new(lattice, Kernel::Explicit(rows_of(m))).build()
    }

    /// Chain with the given dense interaction and a common potential.
    pub fn chain(m: &DMatrix<f64>, potential: SitePotential) -> Result<ModelSpec, ModelError> {
        let lattice = Lattice::new(vec![m.nrows()])?;
        ModelBuilder::new(lattice, Kernel::Explicit(rows_of(m)))
            .potential(potential)
            .build()
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn len(&self) -> usize {
        self.lattice.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lattice.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.lattice.dim()
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    /// Interaction restricted to `Λ × Λ`.
    pub fn interaction(&self) -> &DMatrix<f64> {
        &self.interaction
    }

    pub fn potentials(&self) -> &[SitePotential] {
        &self.potentials
    }

    pub fn field(&self) -> &[f64] {
        &self.field
    }

    /// Stored nonzero boundary spins.
    pub fn boundary(&self) -> &[(Site, f64)] {
        &self.boundary
    }

    /// `2 Σ_{j∉Λ} M_ij ω_j` per interior site.
    pub fn boundary_field(&self) -> &[f64] {
        &self.boundary_field
    }

    /// `s_i + 2 Σ_{j∉Λ} M_ij ω_j`: the total linear term of the energy.
    pub fn effective_field(&self) -> Vec<f64> {
        self.field
            .iter()
            .zip(&self.boundary_field)
            .map(|(s, b)| s + b)
            .collect()
    }

    pub fn decay_claim(&self) -> Option<DecayClaim> {
        self.decay
    }

    pub fn shell(&self) -> ShellSpec {
        self.shell
    }

    /// Shell width actually used after applying the magnitude cutoff.
    pub fn shell_width(&self) -> usize {
        self.shell_width
    }

    /// Diagonal dominance margin `δ = min_i (M_ii - Σ_{j≠i} |M_ij|)`, where
    /// `j` runs over `Λ` and the stored exterior shell.
    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn is_gaussian(&self) -> bool {
        self.potentials.iter().all(SitePotential::is_gaussian)
    }

    pub fn is_ferromagnetic(&self) -> bool {
        let n = self.len();
        let interior = (0..n).all(|i| (0..n).all(|j| i == j || self.interaction[(i, j)] <= 0.0));
        let exterior = match &self.kernel {
            Kernel::Explicit(_) => true,
            k => (1..=self.shell_width as u64).all(|r| k.off_diagonal(r).unwrap_or(0.0) <= 0.0),
        };
        interior && exterior
    }

    /// Symmetric potentials, zero field, ferromagnetic interaction and zero
    /// boundary values.
    pub fn satisfies_lebowitz_conditions(&self) -> bool {
        self.potentials.iter().all(SitePotential::is_even)
            && self.field.iter().all(|&s| s == 0.0)
            && self.boundary.iter().all(|(_, w)| *w == 0.0)
            && self.is_ferromagnetic()
    }

    /// Coupling `M_ij` between an interior site and an arbitrary site.
    pub fn coupling_to(&self, i: usize, site: &Site) -> f64 {
        if let Some(j) = self.lattice.index_of(site) {
            return self.interaction[(i, j)];
        }
        let r = self.lattice.dist_to(i, site);
        if r as usize > self.shell_width {
            return 0.0;
        }
        self.kernel.off_diagonal(r).unwrap_or(0.0)
    }

    /// Energy `H(x)`.
    pub fn energy(&self, x: &[f64]) -> f64 {
        let n = self.len();
        let mut h = 0.0;
        for i in 0..n {
            let mut row = 0.0;
            for j in 0..n {
                row += self.interaction[(i, j)] * x[j];
            }
            h += self.potentials[i].value(x[i])
                + (self.field[i] + self.boundary_field[i]) * x[i]
                + x[i] * row;
        }
        h
    }

    /// Returns the same model with a different boundary.
    pub fn with_boundary(&self, boundary: BoundarySpec) -> Result<ModelSpec, ModelError> {
        let mut m = self.clone();
        m.boundary = expand_boundary(&m.lattice, m.shell_width, &boundary)?;
        m.boundary_field = m.compute_boundary_field()?;
        Ok(m)
    }

    /// Returns the same model with `ω_site` replaced by `value`.
    pub fn with_boundary_value(&self, site: &Site, value: f64) -> Result<ModelSpec, ModelError> {
        if self.lattice.contains(site) {
            return Err(ModelError::BoundaryInsideLattice(site.clone()));
        }
        let mut values: Vec<(Site, f64)> = self
            .boundary
            .iter()
            .filter(|(s, _)| s != site)
            .cloned()
            .collect();
        values.push((site.clone(), value));
        let mut m = self.clone();
        m.boundary = values.into_iter().filter(|(_, w)| *w != 0.0).collect();
        m.boundary.sort_by(|a, b| a.0.cmp(&b.0));
        m.boundary_field = m.compute_boundary_field()?;
        Ok(m)
    }

    /// Hex SHA-256 over every quantity that determines the measure.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for &e in self.lattice.extents() {
            h.update((e as u64).to_le_bytes());
        }
        for p in &self.potentials {
            h.update(p.tag().as_bytes());
            h.update([0u8]);
        }
        for s in &self.field {
            h.update(s.to_bits().to_le_bytes());
        }
        for v in self.interaction.iter() {
            h.update(v.to_bits().to_le_bytes());
        }
        for b in &self.boundary_field {
            h.update(b.to_bits().to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    fn check_symmetric(&self) -> Result<(), ModelError> {
        let n = self.len();
        let scale = self.interaction.amax().max(1.0);
        for i in 0..n {
            for j in 0..n {
                let v = self.interaction[(i, j)];
                if !v.is_finite() {
                    return Err(ModelError::NonFinite {
                        i: self.lattice.site(i),
                        j: self.lattice.site(j),
                    });
                }
                if j > i && (v - self.interaction[(j, i)]).abs() > 1e-12 * scale {
                    return Err(ModelError::AsymmetricInteraction {
                        i: self.lattice.site(i),
                        j: self.lattice.site(j),
                        mij: v,
                        mji: self.interaction[(j, i)],
                    });
                }
            }
        }
        Ok(())
    }

    /// Row sums of `|M_ij|` over the exterior shell, one per interior site.
    pub fn exterior_row_sums(&self) -> Vec<f64> {
        let n = self.len();
        let w = self.shell_width as u64;
        if w == 0 {
            return vec![0.0; n];
        }
        let Some(_) = self.kernel.off_diagonal(1) else {
            return vec![0.0; n];
        };
        // For translation-invariant kernels count exterior sites by distance:
        // #(shell ∩ {|j-i| = r}) from per-axis interval lengths.
        let ext = self.lattice.extents().to_vec();
        (0..n)
            .into_par_iter()
            .map(|i| {
                let c = self.lattice.coords_of(i);
                let count_in = |r: u64, lo: i64, hi: &dyn Fn(usize) -> i64| -> f64 {
                    c.iter()
                        .enumerate()
                        .map(|(a, &x)| {
                            let l = (x - r as i64).max(lo);
                            let h = (x + r as i64).min(hi(a));
                            (h - l + 1).max(0) as f64
                        })
                        .product()
                };
                let wi = w as i64;
                let hi_big = |a: usize| ext[a] as i64 - 1 + wi;
                let hi_small = |a: usize| ext[a] as i64 - 1;
                let mut sum = 0.0;
                let mut prev_big = 1.0;
                let mut prev_small = 1.0;
                let rmax = w + self.lattice.diameter();
                for r in 1..=rmax {
                    let big = count_in(r, -wi, &hi_big);
                    let small = count_in(r, 0, &hi_small);
                    let shell_at_r = (big - prev_big) - (small - prev_small);
                    prev_big = big;
                    prev_small = small;
                    if shell_at_r > 0.0 {
                        sum += shell_at_r * self.kernel.off_diagonal(r).unwrap().abs();
                    }
                }
                sum
            })
            .collect()
    }

    fn check_dominance(&self) -> Result<f64, ModelError> {
        let n = self.len();
        let ext = self.exterior_row_sums();
        let mut delta = f64::INFINITY;
        for i in 0..n {
            let mut off = ext[i];
            let mut partner = i;
            let mut worst = -1.0;
            for j in 0..n {
                if j != i {
                    let a = self.interaction[(i, j)].abs();
                    off += a;
                    if a > worst {
                        worst = a;
                        partner = j;
                    }
                }
            }
            let margin = self.interaction[(i, i)] - off;
            if margin <= 0.0 {
                return Err(ModelError::NonDominant {
                    site: self.lattice.site(i),
                    partner: self.lattice.site(partner),
                    margin,
                });
            }
            delta = delta.min(margin);
        }
        Ok(delta)
    }

    fn check_decay(&self, claim: DecayClaim) -> Result<(), ModelError> {
        let n = self.len();
        let bound = |r: u64| claim.c * (1.0 + r as f64).powf(-claim.exponent) * (1.0 + 1e-12);
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let r = self.lattice.dist_idx(i, j);
                let v = self.interaction[(i, j)].abs();
                if v > bound(r) {
                    return Err(ModelError::DecayViolated {
                        i: self.lattice.site(i),
                        j: self.lattice.site(j),
                        value: v,
                        c: claim.c,
                        exponent: claim.exponent,
                    });
                }
            }
        }
        // exterior couplings depend on distance only
        for r in 1..=self.shell_width as u64 {
            let v = self.kernel.off_diagonal(r).unwrap_or(0.0).abs();
            if v > bound(r) {
                let i = self.lattice.site(0);
                let mut j = i.coords().to_vec();
                j[0] -= r as i64;
                return Err(ModelError::DecayViolated {
                    i,
                    j: Site::new(j),
                    value: v,
                    c: claim.c,
                    exponent: claim.exponent,
                });
            }
        }
        Ok(())
    }

    fn compute_boundary_field(&self) -> Result<Vec<f64>, ModelError> {
        let n = self.len();
        let mut out = vec![0.0; n];
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (site, w) in &self.boundary {
                let term = self.coupling_to(i, site) * w;
                if !term.is_finite() {
                    return Err(ModelError::IllTemperedBoundary {
                        site: self.lattice.site(i),
                        partner: site.clone(),
                    });
                }
                acc += term;
            }
            if !acc.is_finite() {
                let partner = self
                    .boundary
                    .first()
                    .map(|b| b.0.clone())
                    .unwrap_or_else(|| self.lattice.site(i));
                return Err(ModelError::IllTemperedBoundary {
                    site: self.lattice.site(i),
                    partner,
                });
            }
            *o = 2.0 * acc;
        }
        Ok(out)
    }

    /// `max_i Σ_{j∉Λ} |M_ij||ω_j|`.
    pub fn boundary_temper(&self) -> f64 {
        (0..self.len())
            .map(|i| {
                self.boundary
                    .iter()
                    .map(|(s, w)| (self.coupling_to(i, s) * w).abs())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }
}

/// Gradient of the energy: `ψ_i'(x_i) + s_i + 2 Σ_j M_ij x_j + 2 Σ_{j∉Λ} M_ij ω_j`.
pub fn grad_energy(model: &ModelSpec, x: &[f64]) -> Vec<f64> {
    let m = model.interaction();
    let n = model.len();
    (0..n)
        .map(|i| {
            let mut row = 0.0;
            for j in 0..n {
                row += m[(i, j)] * x[j];
            }
            model.potentials[i].derivative(x[i])
                + model.field[i]
                + 2.0 * row
                + model.boundary_field[i]
        })
        .collect()
}

/// Replace every off-diagonal interaction by `-|M_ij|`, keeping the diagonal,
/// potentials, field and boundary values.
pub fn ferromagnetize(model: &ModelSpec) -> ModelSpec {
    let mut m = model.clone();
    m.kernel = model.kernel.ferromagnetized();
    let n = m.len();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                m.interaction[(i, j)] = -model.interaction[(i, j)].abs();
            }
        }
    }
    m.boundary_field = m
        .compute_boundary_field()
        .expect("ferromagnetization preserves well-temperedness");
    m
}

pub(crate) fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn materialize(lattice: &Lattice, kernel: &Kernel) -> Result<DMatrix<f64>, ModelError> {
    let n = lattice.len();
    match kernel {
        Kernel::Explicit(rows) => {
            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                return Err(ModelError::Shape {
                    what: "explicit interaction",
                    got: rows.len(),
                    expected: n,
                });
            }
            Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
        }
        Kernel::PowerLaw { diagonal, .. } | Kernel::NearestNeighbor { diagonal, .. } => {
            Ok(DMatrix::from_fn(n, n, |i, j| {
                if i == j {
                    *diagonal
                } else {
                    kernel.off_diagonal(lattice.dist_idx(i, j)).unwrap()
                }
            }))
        }
    }
}

fn effective_shell_width(kernel: &Kernel, shell: ShellSpec) -> usize {
    if kernel.off_diagonal(1).is_none() {
        return 0;
    }
    let mut w = 0;
    while w < shell.width {
        let v = kernel.off_diagonal(w as u64 + 1).unwrap().abs();
        if v <= shell.cutoff {
            // power-law and nearest-neighbour kernels are nonincreasing
            break;
        }
        w += 1;
    }
    w
}

fn expand_boundary(
    lattice: &Lattice,
    width: usize,
    spec: &BoundarySpec,
) -> Result<Vec<(Site, f64)>, ModelError> {
    let mut out: Vec<(Site, f64)> = match spec {
        BoundarySpec::Zero => Vec::new(),
        BoundarySpec::Constant(v) => lattice
            .exterior_shell(width)
            .into_iter()
            .map(|s| (s, *v))
            .collect(),
        BoundarySpec::Random { max_abs, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            lattice
                .exterior_shell(width)
                .into_iter()
                .map(|s| {
                    let u: f64 = rng.random_range(-1.0..=1.0);
                    (s, u * max_abs)
                })
                .collect()
        }
        BoundarySpec::Explicit(values) => {
            for (s, _) in values {
                if lattice.contains(s) {
                    return Err(ModelError::BoundaryInsideLattice(s.clone()));
                }
                if s.dim() != lattice.dim() {
                    return Err(LatticeError::DimensionMismatch(s.dim(), lattice.dim()).into());
                }
            }
            values.clone()
        }
    };
    out.retain(|(_, w)| *w != 0.0);
    out.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(out)
}
