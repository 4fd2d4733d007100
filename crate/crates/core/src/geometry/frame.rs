use std::sync::Arc;

use super::profile::{Profile, RotatedProfile};
use super::{normal_from_gradient, GraphDomain, SampleGrid};
use crate::{Error, Result};

/// Re-expresses the domain in an orthonormal frame whose last axis is `b / |b|`,
/// centred at the boundary point above `x0`.
///
/// `b` points out of the subgraph, so the frame is the identity when `b = e_d` on a flat
/// graph. The returned domain lives on `B'_{δR0}` and carries the sampled Lipschitz
/// constant of the new graph as its bound.
pub fn oblique_frame(domain: &GraphDomain, x0: &[f64], b: &[f64]) -> Result<GraphDomain> {
    let d = domain.dim;
    if x0.len() != d - 1 || b.len() != d {
        return Err(Error::InvalidInput("x0 must have d-1 and b d components".into()));
    }
    let grad = domain
        .profile
        .gradient(x0)
        .ok_or_else(|| Error::NonDifferentiable(x0.to_vec()))?;
    let n = normal_from_gradient(&grad);
    let bn = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if bn == 0.0 {
        return Err(Error::DegenerateField("b(x0) = 0".into()));
    }
    let bhat: Vec<f64> = b.iter().map(|v| v / bn).collect();
    let ratio = -bhat.iter().zip(&n).map(|(a, c)| a * c).sum::<f64>();
    if ratio < domain.delta {
        return Err(Error::Precondition(format!(
            "b(x0) is not oblique: ratio {ratio} < delta {}",
            domain.delta
        )));
    }
    let axes = rotation_axes(&bhat);
    let mut origin = x0.to_vec();
    origin.push(domain.psi(x0));
    let r0 = domain.base_radius;
    let rotated = RotatedProfile {
        inner: domain.profile.clone(),
        origin,
        axes,
        tol: 1e-12 * r0,
        bracket_limit: 4.0 * r0 / domain.delta,
    };
    let profile = Profile::Rotated(Arc::new(rotated));
    let new_radius = domain.delta * r0;
    let grid = match d {
        2 => SampleGrid::ball(1, new_radius, 401),
        _ => SampleGrid::ball(2, new_radius, 31),
    };
    let mut max_slope: f64 = 0.0;
    for p in &grid.points {
        let v = profile.value(p);
        if !v.is_finite() {
            return Err(Error::Frame(format!("no boundary crossing found above {p:?}")));
        }
        let g = profile.gradient_ae(p);
        max_slope = max_slope.max(g.iter().map(|x| x * x).sum::<f64>().sqrt());
    }
    if max_slope >= 2.0 / domain.delta {
        return Err(Error::Frame(format!(
            "rotated graph too steep: |Dψ| = {max_slope} ≥ 2/δ"
        )));
    }
    let lip = super::lipschitz_constant(&profile, &grid)?;
    GraphDomain::new(profile, d, lip.max(max_slope), new_radius, domain.delta)
}

/// Orthonormal axes `e_1, .., e_d` (old coordinates) with `e_d = bhat`.
fn rotation_axes(bhat: &[f64]) -> Vec<Vec<f64>> {
    match bhat.len() {
        2 => vec![vec![bhat[1], -bhat[0]], bhat.to_vec()],
        _ => {
            // Rodrigues rotation carrying e_3 onto bhat, applied to e_1 and e_2.
            let c = bhat[2];
            let (kx, ky) = (-bhat[1], bhat[0]);
            let s = (kx * kx + ky * ky).sqrt();
            if s < 1e-15 {
                let sign = c.signum();
                return vec![vec![1.0, 0.0, 0.0], vec![0.0, sign, 0.0], vec![0.0, 0.0, sign]];
            }
            let (ux, uy) = (kx / s, ky / s);
            let rot = |v: [f64; 3]| -> Vec<f64> {
                // k = (ux, uy, 0); v_rot = v c + (k × v) s + k (k·v)(1 - c)
                let kv = ux * v[0] + uy * v[1];
                let cross = [uy * v[2], -ux * v[2], ux * v[1] - uy * v[0]];
                vec![
                    v[0] * c + cross[0] * s + ux * kv * (1.0 - c),
                    v[1] * c + cross[1] * s + uy * kv * (1.0 - c),
                    v[2] * c + cross[2] * s,
                ]
            };
            vec![rot([1.0, 0.0, 0.0]), rot([0.0, 1.0, 0.0]), bhat.to_vec()]
        }
    }
}

/// The cylinder `Q_R` over `B'_R` after shifting so that the centre sits at height `3R/δ`.
#[derive(Debug, Clone)]
pub struct CylNeighborhood {
    /// Shifted domain with `ψ(0) = 3R/δ`.
    pub domain: GraphDomain,
    pub radius: f64,
    pub center: Vec<f64>,
    pub min_psi: f64,
    pub max_psi: f64,
}

impl CylNeighborhood {
    fn tangential_norm(y: &[f64]) -> f64 {
        y.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Height of the slab `Q_R`.
    pub fn slab_height(&self) -> f64 {
        6.0 * self.radius / self.domain.delta
    }

    /// Membership in `Ω_ρ` for a radius `ρ`, e.g. `in_omega(y, 2R)`.
    pub fn in_omega(&self, y: &[f64], radius: f64) -> bool {
        let d = self.domain.dim;
        Self::tangential_norm(&y[..d - 1]) < radius && y[d - 1] > 0.0 && self.domain.contains(y)
    }

    pub fn in_slab(&self, y: &[f64], radius: f64) -> bool {
        let d = self.domain.dim;
        Self::tangential_norm(&y[..d - 1]) < radius && y[d - 1] > 0.0 && y[d - 1] < self.slab_height()
    }

    /// The boundary point above `y'`.
    pub fn gamma_point(&self, y: &[f64]) -> Vec<f64> {
        let mut p = y.to_vec();
        p.push(self.domain.psi(y));
        p
    }
}

/// Shifts the frame so that the boundary point above `x0` becomes `(0, 3R/δ)` and checks
/// `R/δ < ψ < 5R/δ` on the closed ball `B'_R`.
pub fn cyl_neighborhood(domain: &GraphDomain, x0: &[f64], radius: f64) -> Result<CylNeighborhood> {
    let delta = domain.delta;
    if !(radius > 0.0 && radius < delta * domain.base_radius) {
        return Err(Error::Precondition(format!(
            "R = {radius} must lie in (0, δR0 = {})",
            delta * domain.base_radius
        )));
    }
    let lift = 3.0 * radius / delta - domain.psi(x0);
    let profile = domain.profile.clone().shifted(x0.to_vec(), lift);
    let shifted = GraphDomain::new(profile, domain.dim, domain.lip_bound, domain.base_radius, delta)?;
    let grid = match domain.dim {
        2 => SampleGrid::ball(1, radius, 2001),
        _ => SampleGrid::ball(2, radius, 101),
    };
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in &grid.points {
        let v = shifted.psi(p);
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let (lower, upper) = (radius / delta, 5.0 * radius / delta);
    if !(lo > lower && hi < upper) {
        return Err(Error::Geometry(format!(
            "ψ ranges over [{lo}, {hi}] on B'_R, outside ({lower}, {upper})"
        )));
    }
    Ok(CylNeighborhood { domain: shifted, radius, center: x0.to_vec(), min_psi: lo, max_psi: hi })
}
