//! Small-Lipschitz graph domains, oblique frames and cylindrical neighborhoods.

mod frame;
mod profile;

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use frame::{cyl_neighborhood, oblique_frame, CylNeighborhood};
pub use profile::{Profile, ProfileSpec, RotatedProfile};

use crate::{Error, Result};

/// The subgraph `{y^d < ψ(y')}` together with the constants describing it.
#[derive(Debug, Clone)]
pub struct GraphDomain {
    pub profile: Profile,
    pub dim: usize,
    /// Claimed Lipschitz constant of ψ.
    pub lip_bound: f64,
    pub base_radius: f64,
    /// Obliqueness parameter δ.
    pub delta: f64,
}

impl GraphDomain {
    pub fn new(profile: Profile, dim: usize, lip_bound: f64, base_radius: f64, delta: f64) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(Error::InvalidParameter(format!("dimension {dim} not in {{2, 3}}")));
        }
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::InvalidParameter(format!("delta = {delta} not in (0, 1]")));
        }
        if !(base_radius > 0.0) {
            return Err(Error::InvalidParameter(format!("R0 = {base_radius} must be positive")));
        }
        if !(lip_bound >= 0.0) {
            return Err(Error::InvalidParameter(format!("Lipschitz bound {lip_bound} is negative")));
        }
        Ok(Self { profile, dim, lip_bound, base_radius, delta })
    }

    #[inline]
    pub fn psi(&self, y: &[f64]) -> f64 {
        self.profile.value(y)
    }

    /// `ψ(y') - y^d`, positive inside.
    #[inline]
    pub fn height_above(&self, y: &[f64]) -> f64 {
        let d = self.dim;
        self.profile.value(&y[..d - 1]) - y[d - 1]
    }

    pub fn contains(&self, y: &[f64]) -> bool {
        self.height_above(y) > 0.0
    }

    /// Checks the claimed Lipschitz bound on the default sample grid of the base ball.
    pub fn verify_lipschitz(&self) -> Result<f64> {
        let grid = SampleGrid::default_for(self.dim, self.base_radius);
        let lip = lipschitz_constant(&self.profile, &grid)?;
        if lip > self.lip_bound * (1.0 + 1e-9) + 1e-12 {
            return Err(Error::Geometry(format!(
                "sampled Lipschitz constant {lip} exceeds the claimed bound {}",
                self.lip_bound
            )));
        }
        Ok(lip)
    }
}

/// Points of the tangential ball `B'_R` used for sampled checks.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleGrid {
    pub points: Vec<Vec<f64>>,
}

impl SampleGrid {
    /// Uniform grid with step `step` on `[a, b]` (d = 2 tangential line), endpoints included.
    pub fn line(a: f64, b: f64, step: f64) -> Self {
        let n = ((b - a) / step).round().max(1.0) as usize;
        let points = (0..=n).map(|i| vec![a + (b - a) * i as f64 / n as f64]).collect();
        Self { points }
    }

    /// Tensor grid with `n` points per axis on the closed ball `B'_radius` in `tangent_dim` dimensions.
    pub fn ball(tangent_dim: usize, radius: f64, n: usize) -> Self {
        let n = n.max(2);
        let coord = |i: usize| -radius + 2.0 * radius * i as f64 / (n - 1) as f64;
        let points = match tangent_dim {
            1 => (0..n).map(|i| vec![coord(i)]).collect(),
            2 => (0..n)
                .flat_map(|i| (0..n).map(move |j| vec![coord(i), coord(j)]))
                .filter(|p| p[0] * p[0] + p[1] * p[1] <= radius * radius * (1.0 + 1e-12))
                .collect(),
            _ => Vec::new(),
        };
        Self { points }
    }

    /// 10⁴ points for d = 2, a 100×100 tensor grid masked to the disc for d = 3.
    pub fn default_for(dim: usize, radius: f64) -> Self {
        match dim {
            2 => Self::ball(1, radius, 10_000),
            _ => Self::ball(2, radius, 100),
        }
    }
}

/// Largest sampled difference quotient of ψ over all pairs of grid points.
pub fn lipschitz_constant(profile: &Profile, grid: &SampleGrid) -> Result<f64> {
    if grid.points.len() < 2 {
        return Err(Error::InvalidInput("sample grid needs at least two points".into()));
    }
    let vals: Vec<f64> = grid.points.par_iter().map(|p| profile.value(p)).collect();
    let pts = &grid.points;
    let best = (0..pts.len())
        .into_par_iter()
        .map(|i| {
            let mut m: f64 = 0.0;
            for j in i + 1..pts.len() {
                let dist = pts[i]
                    .iter()
                    .zip(&pts[j])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                if dist > 0.0 {
                    m = m.max((vals[i] - vals[j]).abs() / dist);
                }
            }
            m
        })
        .reduce(|| 0.0, f64::max);
    Ok(best)
}

/// `(Dψ, -1) / sqrt(1 + |Dψ|²)` at a point off the kink set.
pub fn outward_normal(domain: &GraphDomain, y: &[f64]) -> Result<Vec<f64>> {
    let grad = domain
        .profile
        .gradient(y)
        .ok_or_else(|| Error::NonDifferentiable(y.to_vec()))?;
    Ok(normal_from_gradient(&grad))
}

pub(crate) fn normal_from_gradient(grad: &[f64]) -> Vec<f64> {
    let s = (1.0 + grad.iter().map(|g| g * g).sum::<f64>()).sqrt();
    let mut n: Vec<f64> = grad.iter().map(|g| g / s).collect();
    n.push(-1.0 / s);
    n
}

pub type VectorField = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
pub type ScalarField = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Boundary operator data `b0 u + b·Du`.
#[derive(Clone)]
pub struct ObliqueField {
    pub b: VectorField,
    pub b0: ScalarField,
    pub holder_exponent: f64,
}

impl std::fmt::Debug for ObliqueField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ObliqueField").field("holder_exponent", &self.holder_exponent).finish()
    }
}

impl ObliqueField {
    pub fn constant(b: Vec<f64>, b0: f64) -> Self {
        Self { b: Arc::new(move |_| b.clone()), b0: Arc::new(move |_| b0), holder_exponent: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObliquenessReport {
    pub min_ratio: f64,
    pub pass: bool,
    pub samples: usize,
    pub skipped_kinks: usize,
}

/// Minimum of `b·n / |b|` over the boundary points above the sample grid.
pub fn check_obliqueness(domain: &GraphDomain, field: &ObliqueField, grid: &SampleGrid) -> Result<ObliquenessReport> {
    let mut min_ratio = f64::INFINITY;
    let mut samples = 0;
    let mut skipped = 0;
    for p in &grid.points {
        let Some(grad) = domain.profile.gradient(p) else {
            skipped += 1;
            continue;
        };
        let n = normal_from_gradient(&grad);
        let mut x = p.clone();
        x.push(domain.psi(p));
        let b = (field.b)(&x);
        let bn = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        if bn == 0.0 {
            return Err(Error::DegenerateField(format!("b vanishes at {x:?}")));
        }
        let ratio = b.iter().zip(&n).map(|(a, c)| a * c).sum::<f64>() / bn;
        min_ratio = min_ratio.min(ratio);
        samples += 1;
    }
    if samples == 0 {
        return Err(Error::InvalidInput("no differentiable sample points".into()));
    }
    Ok(ObliquenessReport { min_ratio, pass: min_ratio >= domain.delta, samples, skipped_kinks: skipped })
}

/// JSON description of a domain: the profile family plus its constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainConfig {
    #[serde(flatten)]
    pub profile: ProfileSpec,
    pub delta: f64,
    pub eps0: f64,
    #[serde(rename = "R0")]
    pub base_radius: f64,
    #[serde(default = "two")]
    pub dim: usize,
}

fn two() -> usize {
    2
}

impl DomainConfig {
    pub fn build(&self) -> Result<GraphDomain> {
        GraphDomain::new(self.profile.build()?, self.dim, self.eps0, self.base_radius, self.delta)
    }
}

#[cfg(test)]
mod tests;
