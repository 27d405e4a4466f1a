//! Hypercubic periodic lattices, field configurations and source fields.
//!
//! Sites are indexed row-major over coordinates `(k_0, .., k_{n-1})`, each
//! coordinate running over `0..2L+1` (the centred range `-L..=L` shifted by
//! `L`). Every site owns `n` bonds, one per positive direction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Immutable periodic hypercubic lattice with `N = (2L+1)^n` sites.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeGeometry {
    dim: usize,
    half_extent: usize,
    spacing: f64,
    sites: usize,
    forward: Vec<usize>,
    backward: Vec<usize>,
}

impl LatticeGeometry {
    pub fn new(dim: usize, half_extent: usize, spacing: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidLattice("dimension must be at least 1".into()));
        }
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::InvalidLattice(format!(
                "spacing must be positive and finite, got {spacing}"
            )));
        }
        let side = half_extent
            .checked_mul(2)
            .and_then(|s| s.checked_add(1))
            .ok_or_else(|| Error::InvalidLattice("half extent overflows".into()))?;
        let sites = u32::try_from(dim)
            .ok()
            .and_then(|d| side.checked_pow(d))
            .ok_or_else(|| {
                Error::InvalidLattice(format!("(2*{half_extent}+1)^{dim} overflows the site index"))
            })?;
        // The neighbour tables hold sites * dim entries each.
        sites
            .checked_mul(dim)
            .filter(|&len| len <= isize::MAX as usize / std::mem::size_of::<usize>())
            .ok_or_else(|| Error::InvalidLattice("neighbour table too large".into()))?;

        let mut forward = vec![0; sites * dim];
        let mut backward = vec![0; sites * dim];
        for site in 0..sites {
            for mu in 0..dim {
                // stride of coordinate mu in the row-major layout
                let stride = side.pow((dim - 1 - mu) as u32);
                let coord = (site / stride) % side;
                let base = site - coord * stride;
                forward[site * dim + mu] = base + ((coord + 1) % side) * stride;
                backward[site * dim + mu] = base + ((coord + side - 1) % side) * stride;
            }
        }
        Ok(Self {
            dim,
            half_extent,
            spacing,
            sites,
            forward,
            backward,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_extent(&self) -> usize {
        self.half_extent
    }

    /// Number of sites along one axis, `2L+1`.
    pub fn side(&self) -> usize {
        2 * self.half_extent + 1
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    /// Physical volume `N a^n`.
    pub fn volume(&self) -> f64 {
        self.sites as f64 * self.spacing.powi(self.dim as i32)
    }

    /// Neighbour of `site` one step in the positive `mu` direction.
    #[inline]
    pub fn neighbor(&self, site: usize, mu: usize) -> usize {
        self.forward[site * self.dim + mu]
    }

    /// Neighbour of `site` one step in the negative `mu` direction.
    #[inline]
    pub fn back_neighbor(&self, site: usize, mu: usize) -> usize {
        self.backward[site * self.dim + mu]
    }

    /// Coordinates of a site in `0..2L+1`.
    pub fn coords(&self, site: usize) -> Vec<usize> {
        let side = self.side();
        let mut out = vec![0; self.dim];
        let mut rest = site;
        for c in out.iter_mut().rev() {
            *c = rest % side;
            rest /= side;
        }
        out
    }

    pub fn site_index(&self, coords: &[usize]) -> usize {
        let side = self.side();
        coords.iter().fold(0, |acc, &c| acc * side + (c % side))
    }

    /// `Σ_{k,μ} (v_{k+μ} - v_k)^2` over a raw slice of site values.
    pub fn gradient_sq(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.sites);
        let mut total = 0.0;
        for (site, &v) in values.iter().enumerate() {
            let nbrs = &self.forward[site * self.dim..(site + 1) * self.dim];
            for &nb in nbrs {
                let d = values[nb] - v;
                total += d * d;
            }
        }
        total
    }

    pub(crate) fn check_len(&self, len: usize) -> Result<()> {
        if len == self.sites {
            Ok(())
        } else {
            Err(Error::SizeMismatch {
                expected: self.sites,
                actual: len,
            })
        }
    }
}

pub fn build_lattice(dim: usize, half_extent: usize, spacing: f64) -> Result<LatticeGeometry> {
    LatticeGeometry::new(dim, half_extent, spacing)
}

/// Gradient sum without the `Y a^{n-2}` prefactor.
pub fn lattice_gradient_sq(geom: &LatticeGeometry, field: &FieldConfig) -> Result<f64> {
    geom.check_len(field.len())?;
    Ok(geom.gradient_sq(field.values()))
}

fn check_finite(values: &[f64], what: &str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        None => Ok(()),
        Some(i) => Err(Error::NonFinite(format!("{what}[{i}] = {}", values[i]))),
    }
}

/// One real amplitude per lattice site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FieldConfig(Vec<f64>);

impl FieldConfig {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        check_finite(&values, "field")?;
        Ok(Self(values))
    }

    pub fn zeros(sites: usize) -> Self {
        Self(vec![0.0; sites])
    }

    pub fn constant(sites: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; sites])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for FieldConfig {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<FieldConfig> for Vec<f64> {
    fn from(f: FieldConfig) -> Self {
        f.0
    }
}

/// External source `h_k`, one value per site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SourceField(Vec<f64>);

impl SourceField {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        check_finite(&values, "source")?;
        Ok(Self(values))
    }

    pub fn zeros(sites: usize) -> Self {
        Self(vec![0.0; sites])
    }

    pub fn uniform(sites: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; sites])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&h| h == 0.0)
    }

    /// Source with every component negated.
    pub fn negated(&self) -> Self {
        Self(self.0.iter().map(|h| -h).collect())
    }
}

impl TryFrom<Vec<f64>> for SourceField {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<SourceField> for Vec<f64> {
    fn from(f: SourceField) -> Self {
        f.0
    }
}

/// A constant-time slice of the space-time lattice: `s = n - 1` spatial
/// dimensions and `N' = (2L+1)^s` sites. `s = 0` is a single site.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialSliceGeometry {
    spatial_dim: usize,
    half_extent: usize,
    spacing: f64,
    sites: usize,
}

impl SpatialSliceGeometry {
    pub fn new(spatial_dim: usize, half_extent: usize, spacing: f64) -> Result<Self> {
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::InvalidLattice(format!(
                "spacing must be positive and finite, got {spacing}"
            )));
        }
        let side = 2 * half_extent + 1;
        let sites = u32::try_from(spatial_dim)
            .ok()
            .and_then(|d| side.checked_pow(d))
            .ok_or_else(|| Error::InvalidLattice("slice site count overflows".into()))?;
        Ok(Self {
            spatial_dim,
            half_extent,
            spacing,
            sites,
        })
    }

    /// The slice of an `n`-dimensional space-time lattice.
    pub fn of_lattice(geom: &LatticeGeometry) -> Result<Self> {
        Self::new(geom.dim() - 1, geom.half_extent(), geom.spacing())
    }

    pub fn spatial_dim(&self) -> usize {
        self.spatial_dim
    }

    pub fn half_extent(&self) -> usize {
        self.half_extent
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn side(&self) -> usize {
        2 * self.half_extent + 1
    }

    pub fn coords(&self, site: usize) -> Vec<usize> {
        let side = self.side();
        let mut out = vec![0; self.spatial_dim];
        let mut rest = site;
        for c in out.iter_mut().rev() {
            *c = rest % side;
            rest /= side;
        }
        out
    }

    /// Periodic displacement `k - l`, each component reduced to `-L..=L`.
    pub fn offset(&self, k: usize, l: usize) -> Vec<i64> {
        let side = self.side() as i64;
        let half = self.half_extent as i64;
        self.coords(k)
            .into_iter()
            .zip(self.coords(l))
            .map(|(a, b)| {
                let d = (a as i64 - b as i64).rem_euclid(side);
                if d > half {
                    d - side
                } else {
                    d
                }
            })
            .collect()
    }

    /// Site index of a displacement from the origin (inverse of `offset(k, 0)`).
    pub fn offset_index(&self, offset: &[i64]) -> usize {
        let side = self.side() as i64;
        offset
            .iter()
            .fold(0usize, |acc, &d| acc * self.side() + d.rem_euclid(side) as usize)
    }
}
