//! Single-site potentials `ψ = ψ_c + ψ_b`: a convex part and a bounded
//! perturbation with `|ψ_b| + |ψ_b'| <= C`.

use std::fmt;
use std::sync::Arc;

/// User-supplied potential given by evaluator pairs for each part.
pub trait PotentialFn: Send + Sync {
    /// `(ψ_c(r), ψ_c'(r))`
    fn convex(&self, r: f64) -> (f64, f64);
    /// `(ψ_b(r), ψ_b'(r))`
    fn bounded(&self, r: f64) -> (f64, f64);
    /// Declared bound on `|ψ_b| + |ψ_b'|`.
    fn bound_constant(&self) -> f64;
    /// Whether `ψ(r) = ψ(-r)`.
    fn is_even(&self) -> bool {
        false
    }
    fn name(&self) -> String {
        "custom".into()
    }
}

#[derive(Clone)]
pub enum SitePotential {
    /// `ψ ≡ 0`; the measure is Gaussian.
    Gaussian,
    /// `ψ_c = r⁴/4`, `ψ_b ≡ 0`.
    Quartic,
    /// `ψ_c = r⁴/4`, `ψ_b = a·cos r`.
    BumpedQuartic { amplitude: f64 },
    Custom(Arc<dyn PotentialFn>),
}

impl fmt::Debug for SitePotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SitePotential::Gaussian => write!(f, "Gaussian"),
            SitePotential::Quartic => write!(f, "Quartic"),
            SitePotential::BumpedQuartic { amplitude } => {
                write!(f, "BumpedQuartic {{ amplitude: {amplitude} }}")
            }
            SitePotential::Custom(p) => write!(f, "Custom({})", p.name()),
        }
    }
}

impl SitePotential {
    pub fn convex(&self, r: f64) -> (f64, f64) {
        match self {
            SitePotential::Gaussian => (0.0, 0.0),
            SitePotential::Quartic | SitePotential::BumpedQuartic { .. } => {
                let r2 = r * r;
                (0.25 * r2 * r2, r2 * r)
            }
            SitePotential::Custom(p) => p.convex(r),
        }
    }

    pub fn bounded(&self, r: f64) -> (f64, f64) {
        match self {
            SitePotential::BumpedQuartic { amplitude } => {
                (amplitude * r.cos(), -amplitude * r.sin())
            }
            SitePotential::Custom(p) => p.bounded(r),
            _ => (0.0, 0.0),
        }
    }

    pub fn value(&self, r: f64) -> f64 {
        self.convex(r).0 + self.bounded(r).0
    }

    pub fn derivative(&self, r: f64) -> f64 {
        self.convex(r).1 + self.bounded(r).1
    }

    /// `C` with `|ψ_b| + |ψ_b'| <= C`.
    pub fn bound_constant(&self) -> f64 {
        match self {
            SitePotential::Gaussian | SitePotential::Quartic => 0.0,
            SitePotential::BumpedQuartic { amplitude } => 2.0 * amplitude.abs(),
            SitePotential::Custom(p) => p.bound_constant(),
        }
    }

    pub fn is_even(&self) -> bool {
        match self {
            SitePotential::Custom(p) => p.is_even(),
            _ => true,
        }
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self, SitePotential::Gaussian)
    }

    /// Stable textual tag used in fingerprints and reports.
    pub fn tag(&self) -> String {
        match self {
            SitePotential::Gaussian => "gaussian".into(),
            SitePotential::Quartic => "quartic".into(),
            SitePotential::BumpedQuartic { amplitude } => {
                format!("bumped_quartic:{:016x}", amplitude.to_bits())
            }
            SitePotential::Custom(p) => format!("custom:{}", p.name()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins() {
        let q = SitePotential::Quartic;
        assert_eq!(q.value(1.0), 0.25);
        assert_eq!(q.derivative(1.0), 1.0);
        assert_eq!(SitePotential::Gaussian.derivative(3.0), 0.0);

        let b = SitePotential::BumpedQuartic { amplitude: 0.3 };
        assert!(b.is_even());
        for k in 0..200 {
            let r = -10.0 + 0.1 * k as f64;
            let (v, dv) = b.bounded(r);
            assert!(v.abs() + dv.abs() <= b.bound_constant() + 1e-15);
            // derivative by central differences
            let h = 1e-5;
            let fd = (b.value(r + h) - b.value(r - h)) / (2.0 * h);
            assert!((fd - b.derivative(r)).abs() < 1e-6 * (1.0 + r.abs().powi(3)));
        }
    }
}
