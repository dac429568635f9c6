//! Lattice geometry under the ℓ∞ metric.
//!
//! A [`Lattice`] is the finite box `Λ = [0, n_1) × … × [0, n_d)` of `ℤ^d`.
//! Sites inside the box are addressed by a linear index with axis 0 varying
//! fastest; sites outside the box (the exterior shell carrying boundary
//! spins) are plain [`Site`] values.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LatticeError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("lattice must have dimension >= 1 and positive extents, got {0:?}")]
    BadExtents(Vec<usize>),
}

/// A point of `ℤ^d`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Site(Vec<i64>);

impl Site {
    pub fn new(coords: impl Into<Vec<i64>>) -> Self {
        Site(coords.into())
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Componentwise scaling, used to map block indices `k` to centers `2Rk`.
    pub fn scaled(&self, factor: i64) -> Site {
        Site(self.0.iter().map(|c| c * factor).collect())
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (a, c) in self.0.iter().enumerate() {
            if a > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl From<i64> for Site {
    fn from(x: i64) -> Self {
        Site(vec![x])
    }
}

impl<const N: usize> From<[i64; N]> for Site {
    fn from(c: [i64; N]) -> Self {
        Site(c.to_vec())
    }
}

/// ℓ∞ distance between two sites.
pub fn dist(i: &Site, j: &Site) -> Result<u64, LatticeError> {
    if i.dim() != j.dim() {
        return Err(LatticeError::DimensionMismatch(i.dim(), j.dim()));
    }
    Ok(coord_dist(i.coords(), j.coords()))
}

pub(crate) fn coord_dist(a: &[i64], b: &[i64]) -> u64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.abs_diff(*y))
        .max()
        .unwrap_or(0)
}

/// A closed ℓ∞ ball `{ i : |i - center| <= radius }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Site,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Site, radius: f64) -> Self {
        Ball { center, radius }
    }

    pub fn contains(&self, site: &Site) -> bool {
        site.dim() == self.center.dim()
            && coord_dist(site.coords(), self.center.coords()) as f64 <= self.radius
    }
}

/// Finite box `Λ ⊂ ℤ^d` with per-axis extents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lattice {
    extents: Vec<usize>,
    strides: Vec<usize>,
    coords: Vec<i64>,
}

impl Lattice {
    pub fn new(extents: impl Into<Vec<usize>>) -> Result<Self, LatticeError> {
        let extents = extents.into();
        if extents.is_empty() || extents.iter().any(|&n| n == 0) {
            return Err(LatticeError::BadExtents(extents));
        }
        let mut strides = Vec::with_capacity(extents.len());
        let mut s = 1usize;
        for &n in &extents {
            strides.push(s);
            s *= n;
        }
        let len = s;
        let d = extents.len();
        let mut coords = Vec::with_capacity(len * d);
        for idx in 0..len {
            for a in 0..d {
                coords.push(((idx / strides[a]) % extents[a]) as i64);
            }
        }
        Ok(Lattice {
            extents,
            strides,
            coords,
        })
    }

    /// A `d`-dimensional cube of side `n`.
    pub fn cube(d: usize, n: usize) -> Result<Self, LatticeError> {
        Lattice::new(vec![n; d])
    }

    pub fn dim(&self) -> usize {
        self.extents.len()
    }

    pub fn extents(&self) -> &[usize] {
        &self.extents
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn coords_of(&self, idx: usize) -> &[i64] {
        let d = self.dim();
        &self.coords[idx * d..(idx + 1) * d]
    }

    pub fn site(&self, idx: usize) -> Site {
        Site::new(self.coords_of(idx).to_vec())
    }

    pub fn sites(&self) -> impl Iterator<Item = Site> + '_ {
        (0..self.len()).map(|i| self.site(i))
    }

    pub fn contains(&self, site: &Site) -> bool {
        site.dim() == self.dim()
            && site
                .coords()
                .iter()
                .zip(&self.extents)
                .all(|(&c, &n)| c >= 0 && (c as usize) < n)
    }

    pub fn index_of(&self, site: &Site) -> Option<usize> {
        if !self.contains(site) {
            return None;
        }
        Some(
            site.coords()
                .iter()
                .zip(&self.strides)
                .map(|(&c, &s)| c as usize * s)
                .sum(),
        )
    }

    /// ℓ∞ distance between two interior sites given by index.
    pub fn dist_idx(&self, i: usize, j: usize) -> u64 {
        coord_dist(self.coords_of(i), self.coords_of(j))
    }

    /// ℓ∞ distance from an interior site to an arbitrary site.
    pub fn dist_to(&self, i: usize, site: &Site) -> u64 {
        coord_dist(self.coords_of(i), site.coords())
    }

    /// Distance from an interior site to the complement of the box.
    pub fn dist_to_boundary(&self, i: usize) -> u64 {
        self.coords_of(i)
            .iter()
            .zip(&self.extents)
            .map(|(&c, &n)| (c as u64 + 1).min(n as u64 - c as u64))
            .min()
            .unwrap_or(0)
    }

    /// Diameter of the box in the ℓ∞ metric.
    pub fn diameter(&self) -> u64 {
        self.extents.iter().map(|&n| n as u64 - 1).max().unwrap_or(0)
    }

    /// Indices of all sites of the box within ℓ∞ distance `radius` of `center`.
    /// The center itself need not lie in the box.
    pub fn ball(&self, center: &Site, radius: f64) -> Vec<usize> {
        if radius < 0.0 || center.dim() != self.dim() {
            return Vec::new();
        }
        let m = radius.floor() as i64;
        let mut lo = Vec::with_capacity(self.dim());
        let mut hi = Vec::with_capacity(self.dim());
        for (a, &c) in center.coords().iter().enumerate() {
            let l = (c - m).max(0);
            let h = (c + m).min(self.extents[a] as i64 - 1);
            if l > h {
                return Vec::new();
            }
            lo.push(l);
            hi.push(h);
        }
        let mut out = Vec::new();
        let mut cur = lo.clone();
        loop {
            out.push(
                cur.iter()
                    .zip(&self.strides)
                    .map(|(&c, &s)| c as usize * s)
                    .sum(),
            );
            let mut a = 0;
            loop {
                if a == cur.len() {
                    out.sort_unstable();
                    return out;
                }
                if cur[a] < hi[a] {
                    cur[a] += 1;
                    break;
                }
                cur[a] = lo[a];
                a += 1;
            }
        }
    }

    /// Exterior sites within ℓ∞ distance `width` of the box.
    pub fn exterior_shell(&self, width: usize) -> Vec<Site> {
        let d = self.dim();
        let w = width as i64;
        let lo: Vec<i64> = vec![-w; d];
        let hi: Vec<i64> = self.extents.iter().map(|&n| n as i64 - 1 + w).collect();
        let mut out = Vec::new();
        if width == 0 {
            return out;
        }
        let mut cur = lo.clone();
        loop {
            let s = Site::new(cur.clone());
            if !self.contains(&s) {
                out.push(s);
            }
            let mut a = 0;
            loop {
                if a == d {
                    return out;
                }
                if cur[a] < hi[a] {
                    cur[a] += 1;
                    break;
                }
                cur[a] = lo[a];
                a += 1;
            }
        }
    }
}

/// Membership of `site` in `B_R(center)` on the unclipped lattice.
pub fn ball(center: &Site, radius: f64, lattice: &Lattice) -> Vec<Site> {
    lattice
        .ball(center, radius)
        .into_iter()
        .map(|i| lattice.site(i))
        .collect()
}

/// The block index `k` with `site ∈ B_R(2Rk)` for a half-integer radius `R`.
/// Requires `2R` to be an odd integer; the balls `B_R(2Rk)` then tile `ℤ^d`.
pub fn tiling_block(site: &Site, radius: f64) -> Site {
    let side = (2.0 * radius).round() as i64;
    Site::new(
        site.coords()
            .iter()
            .map(|&c| (c as f64 / side as f64).round() as i64)
            .collect::<Vec<_>>(),
    )
}
