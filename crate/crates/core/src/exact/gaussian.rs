use nalgebra::{DMatrix, DVector};

use super::ExactError;
use crate::lattice::Site;
use crate::model::ModelSpec;

/// Closed form for `ψ ≡ 0`: the measure is `N(-(2M)⁻¹ s, (2M)⁻¹)` and the
/// generator `Δ - ∇H·∇` has gap `λ_min(2M)`.
#[derive(Debug, Clone)]
pub struct GaussianOracle {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub gap: f64,
}

pub fn gaussian_oracle(m: &DMatrix<f64>, s: &[f64]) -> Result<GaussianOracle, ExactError> {
    let two_m = m * 2.0;
    let chol = two_m
        .clone()
        .cholesky()
        .ok_or(ExactError::NotPositiveDefinite)?;
    let covariance = chol.inverse();
    let mean = -(&covariance * DVector::from_column_slice(s));
    let gap = two_m.symmetric_eigenvalues().min();
    if gap <= 0.0 {
        return Err(ExactError::NotPositiveDefinite);
    }
    Ok(GaussianOracle {
        mean,
        covariance,
        gap,
    })
}

/// Oracle for a Gaussian model, including its boundary field.
pub fn gaussian_oracle_for(model: &ModelSpec) -> Result<GaussianOracle, ExactError> {
    gaussian_oracle(model.interaction(), &model.effective_field())
}

impl GaussianOracle {
    pub fn cov(&self, i: usize, j: usize) -> f64 {
        self.covariance[(i, j)]
    }

    /// `∫ |∂_k φ|² dμ` for `f = x_i`. The Poisson solution is linear,
    /// `φ = Σ_k c_k x_k` with `c = (2M)⁻¹ e_i`.
    pub fn directional_energies(&self, i: usize) -> Vec<f64> {
        self.covariance.row(i).iter().map(|c| c * c).collect()
    }
}

/// Exact change of `E[x_obs]` when the boundary spin at `site` moves by
/// `delta`, for a Gaussian model.
pub fn ds_influence_exact(
    model: &ModelSpec,
    obs: usize,
    site: &Site,
    delta: f64,
) -> Result<f64, ExactError> {
    let n = model.len();
    if obs >= n {
        return Err(ExactError::IndexOutOfRange(obs));
    }
    let oracle = gaussian_oracle_for(model)?;
    // d h_ext / d ω_site = 2 M_{·,site}
    let col = DVector::from_iterator(n, (0..n).map(|i| 2.0 * model.coupling_to(i, site)));
    let shift = -(&oracle.covariance * col);
    Ok(shift[obs] * delta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Lattice;
    use crate::model::{BoundarySpec, Kernel, ModelBuilder};
    use nalgebra::dmatrix;

    #[test]
    fn two_site_closed_form() {
        let o = gaussian_oracle(&dmatrix![1.0, -0.2; -0.2, 1.0], &[0.0, 0.0]).unwrap();
        assert!((o.cov(0, 1) - 0.104167).abs() < 1e-6);
        assert!((o.cov(0, 0) - 0.520833).abs() < 1e-6);
        assert!((o.gap - 1.6).abs() < 1e-12);
    }

    #[test]
    fn three_site_closed_form() {
        let o = gaussian_oracle(
            &dmatrix![1.0, -0.2, 0.0; -0.2, 1.0, -0.2; 0.0, -0.2, 1.0],
            &[0.0; 3],
        )
        .unwrap();
        assert!((o.cov(0, 0) - 0.521739).abs() < 1e-6);
        assert!((o.cov(1, 1) - 0.543478).abs() < 1e-6);
        assert!((o.cov(0, 1) - 0.108696).abs() < 1e-6);
        assert!((o.cov(0, 2) - 0.021739).abs() < 1e-6);
    }

    #[test]
    fn scaled_identity() {
        let o = gaussian_oracle(&(DMatrix::identity(3, 3) * 0.5), &[0.0; 3]).unwrap();
        assert!((o.covariance.clone() - DMatrix::identity(3, 3)).amax() < 1e-14);
        assert!((o.gap - 1.0).abs() < 1e-14);
    }

    #[test]
    fn ferromagnetic_chain_covariances_nonnegative() {
        let n = 64;
        let m = DMatrix::from_fn(n, n, |i, j| match i.abs_diff(j) {
            0 => 1.0,
            1 => -0.3,
            _ => 0.0,
        });
        let o = gaussian_oracle(&m, &vec![0.0; n]).unwrap();
        assert!(o.covariance.iter().all(|&c| c >= 0.0));
    }

    #[test]
    fn indefinite_rejected() {
        assert!(matches!(
            gaussian_oracle(&dmatrix![1.0, 2.0; 2.0, 1.0], &[0.0, 0.0]),
            Err(ExactError::NotPositiveDefinite)
        ));
    }

    #[test]
    fn ds_influence_matches_mean_difference() {
        let model = ModelBuilder::new(
            Lattice::new(vec![4]).unwrap(),
            Kernel::PowerLaw {
                amplitude: 0.1,
                exponent: 3.0,
                diagonal: 1.0,
                ferromagnetic: true,
            },
        )
        .boundary(BoundarySpec::Random {
            max_abs: 1.0,
            seed: 3,
        })
        .build()
        .unwrap();
        let site = Site::new(vec![-2]);
        let base = gaussian_oracle_for(&model).unwrap();
        let old = model.coupling_to(0, &site);
        assert!(old != 0.0);
        let current = model
            .boundary()
            .iter()
            .find(|(s, _)| *s == site)
            .map(|(_, w)| *w)
            .unwrap_or(0.0);
        let moved = model.with_boundary_value(&site, current + 0.5).unwrap();
        let after = gaussian_oracle_for(&moved).unwrap();
        let predicted = ds_influence_exact(&model, 1, &site, 0.5).unwrap();
        assert!((after.mean[1] - base.mean[1] - predicted).abs() < 1e-12);
    }
}
