//! Neumann-data extension: `v(y) = ∫_0^{y^d} g̃(y', t) dt` with `g̃` the regularized
//! mollification of a fiber-constant interior extension of `g`.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::geometry::{CylNeighborhood, GraphDomain, Profile, ScalarField};
use crate::mollification::MollifiedField;
use crate::norms::{gagliardo_seminorm, sobolev_norms, BoundaryTrace, GridFunction, SobolevNorms};
use crate::quadrature::cumulative_simpson;
use crate::regdist::RegDistField;
use crate::{Error, Result};

/// A boundary datum as a function of the tangential variable `y'`.
pub type BoundaryDatum = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// `6t⁵ - 15t⁴ + 10t³` clamped to `[0, 1]`.
pub fn quintic_ramp(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
}

/// Vertical cutoff in the relative height `s = y^d/ψ`: 0 below 1/6, 1 above 1/3.
pub fn vertical_cutoff(s: f64) -> f64 {
    quintic_ramp(6.0 * s - 1.0)
}

/// Tangential cutoff: 1 for `r ≤ 2R`, 0 for `r ≥ 3R`, `|η'| ≤ 15/(8R)`.
pub fn localizing_cutoff(r: f64, radius: f64) -> f64 {
    1.0 - quintic_ramp((r - 2.0 * radius) / radius)
}

/// `η g` with the tangential cutoff of radius `R`.
pub fn localize_boundary_datum(g: &BoundaryDatum, radius: f64) -> BoundaryDatum {
    let g = g.clone();
    Arc::new(move |x: &[f64]| {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let eta = localizing_cutoff(r, radius);
        if eta == 0.0 {
            0.0
        } else {
            eta * g(x)
        }
    })
}

/// Fiber-constant extension `E(g)(y', y^d) = g(y') χ(y^d/ψ(y'))`.
#[allow(non_snake_case)]
pub fn interior_extension_E(g: BoundaryDatum, domain: &GraphDomain) -> ScalarField {
    let profile = domain.profile.clone();
    Arc::new(move |y: &[f64]| {
        let d = y.len();
        let top = profile.value(&y[..d - 1]);
        let chi = vertical_cutoff(y[d - 1] / top);
        if chi == 0.0 {
            0.0
        } else {
            chi * g(&y[..d - 1])
        }
    })
}

/// Piecewise-linear datum through `(x, g)` samples, constant beyond the ends.
pub fn datum_from_samples(xs: Vec<f64>, values: Vec<f64>) -> Result<BoundaryDatum> {
    let table = Profile::table(xs.into_iter().zip(values).map(|(x, v)| [x, v]).collect())?;
    Ok(Arc::new(move |x: &[f64]| table.value(x)))
}

/// Samples a planar datum on `Γ` over `|y'| ≤ half_width`.
pub fn sample_boundary_trace(g: &BoundaryDatum, profile: &Profile, half_width: f64, n: usize) -> Result<BoundaryTrace> {
    if n < 2 {
        return Err(Error::InvalidParameter("need at least two boundary samples".into()));
    }
    let ys: Vec<f64> = (0..n).map(|i| -half_width + 2.0 * half_width * i as f64 / (n - 1) as f64).collect();
    BoundaryTrace::on_graph(profile, &ys, |x, _| g(&[x]))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExtensionSettings {
    /// Grid step; fiber steps are at most this.
    pub h: f64,
    pub kernel_nodes: usize,
    /// Largest accepted `sup |∂v/∂y^d - g|` on `Γ_R`.
    pub trace_tolerance: f64,
    pub boundary_samples: usize,
}

impl Default for ExtensionSettings {
    fn default() -> Self {
        Self { h: 0.05 / 16.0, kernel_nodes: 21, trace_tolerance: 1e-2, boundary_samples: 401 }
    }
}

/// The discrete extension before any norm is measured.
#[derive(Debug, Clone)]
pub struct ExtensionField {
    pub v: GridFunction,
    /// `y'` of each column on `Γ_R`.
    pub trace_points: Vec<f64>,
    pub trace_residual: Vec<f64>,
    pub radius: f64,
    pub h: f64,
}

impl ExtensionField {
    pub fn max_trace_residual(&self) -> f64 {
        self.trace_residual.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExtensionResult {
    pub p: f64,
    pub radius: f64,
    pub h: f64,
    #[serde(skip)]
    pub v: GridFunction,
    pub trace_points: Vec<f64>,
    pub trace_residual: Vec<f64>,
    pub max_trace_residual: f64,
    pub norms: SobolevNorms,
    /// `W¹_p` data of `E(ηg)` on `Ω_{2R}`.
    pub source_norms: SobolevNorms,
    pub g_lp: f64,
    pub g_seminorm: f64,
    /// `[g]_{1-1/p} + R^{-1+1/p} ‖g‖_p` on `Γ_{3R}`.
    pub denominator: f64,
    pub n_ext: f64,
}

fn check_frame(cyl: &CylNeighborhood) -> Result<()> {
    let domain = &cyl.domain;
    if domain.dim != 2 {
        return Err(Error::Precondition("the extension is implemented for d = 2".into()));
    }
    if !(cyl.radius < domain.delta * domain.base_radius / 8.0) {
        return Err(Error::Precondition(format!(
            "R = {} must be below δR0/8 = {}",
            cyl.radius,
            domain.delta * domain.base_radius / 8.0
        )));
    }
    Ok(())
}

/// Cubic Hermite interpolation on a uniform fiber from values and slopes.
fn hermite(t: f64, dt: f64, v: &[f64], dv: &[f64]) -> f64 {
    let n = v.len() - 1;
    let k = ((t / dt).floor() as usize).min(n - 1);
    let s = (t - k as f64 * dt) / dt;
    let (s2, s3) = (s * s, s * s * s);
    (2.0 * s3 - 3.0 * s2 + 1.0) * v[k]
        + (s3 - 2.0 * s2 + s) * dt * dv[k]
        + (-2.0 * s3 + 3.0 * s2) * v[k + 1]
        + (s3 - s2) * dt * dv[k + 1]
}

/// Builds `v` on the uniform grid over `Ω_R` and the trace residual on `Γ_R`.
pub fn build_extension(
    g: &BoundaryDatum,
    cyl: &CylNeighborhood,
    regdist: Arc<RegDistField>,
    settings: &ExtensionSettings,
) -> Result<ExtensionField> {
    check_frame(cyl)?;
    let (radius, h) = (cyl.radius, settings.h);
    if !(h > 0.0 && h < radius) {
        return Err(Error::InvalidParameter(format!("grid step {h} must lie in (0, R)")));
    }
    let localized = localize_boundary_datum(g, radius);
    let source = interior_extension_E(localized, &cyl.domain);
    let mollified = MollifiedField::new(cyl, regdist, source, None, settings.kernel_nodes)?;
    let n = (2.0 * radius / h).round() as usize;
    let h = 2.0 * radius / n as f64;
    let columns: Vec<f64> = (0..=n).map(|i| -radius + i as f64 * h).collect();
    struct Fiber {
        dt: f64,
        v: Vec<f64>,
        dv: Vec<f64>,
        residual: f64,
    }
    let fibers = columns
        .par_iter()
        .map(|&x| -> Result<Fiber> {
            let top = cyl.domain.psi(&[x]);
            let steps = 2 * ((top / (2.0 * h)).ceil() as usize).max(1);
            let dt = top / steps as f64;
            let dv = (0..=steps)
                .map(|k| {
                    let y = [x, k as f64 * dt];
                    mollified.check_containment(&y)?;
                    mollified.mollify(&y)
                })
                .collect::<Result<Vec<f64>>>()?;
            let v = cumulative_simpson(&dv, dt);
            let m = steps;
            let slope = (3.0 * v[m] - 4.0 * v[m - 1] + v[m - 2]) / (2.0 * dt);
            Ok(Fiber { dt, v, dv, residual: (slope - g(&[x])).abs() })
        })
        .collect::<Result<Vec<Fiber>>>()?;
    let max_top = columns.iter().map(|x| cyl.domain.psi(&[*x])).fold(0.0, f64::max);
    let rows = (max_top / h).ceil() as usize + 1;
    let mut values = vec![0.0; (n + 1) * rows];
    let mut mask = vec![false; (n + 1) * rows];
    for (i, fiber) in fibers.iter().enumerate() {
        let top = fiber.dt * (fiber.v.len() - 1) as f64;
        for j in 0..rows {
            let t = j as f64 * h;
            if t < top {
                values[i * rows + j] = hermite(t, fiber.dt, &fiber.v, &fiber.dv);
                mask[i * rows + j] = true;
            }
        }
    }
    let v = GridFunction::new(vec![-radius, 0.0], vec![h, h], vec![n + 1, rows], values, mask)?;
    Ok(ExtensionField {
        v,
        trace_residual: fibers.iter().map(|f| f.residual).collect(),
        trace_points: columns,
        radius,
        h,
    })
}

impl ExtensionField {
    /// Fills the norm bundles for exponent `p` and the measured constant `N_ext`.
    pub fn measure(&self, g: &BoundaryDatum, cyl: &CylNeighborhood, p: f64, boundary_samples: usize) -> Result<ExtensionResult> {
        let radius = self.radius;
        let norms = sobolev_norms(&self.v, p)?;
        let trace = sample_boundary_trace(g, &cyl.domain.profile, 3.0 * radius, boundary_samples)?;
        let g_lp = trace.lp_norm(p)?;
        let g_seminorm = gagliardo_seminorm(&trace, p)?;
        let denominator = g_seminorm + radius.powf(-1.0 + 1.0 / p) * g_lp;
        let n_ext = if denominator > 0.0 {
            norms.w2p / denominator
        } else if norms.w2p == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        let source = interior_extension_E(localize_boundary_datum(g, radius), &cyl.domain);
        let h = self.h;
        let cols = (4.0 * radius / h).round() as usize + 1;
        let max_top = (0..cols).map(|i| cyl.domain.psi(&[-2.0 * radius + i as f64 * h])).fold(0.0, f64::max);
        let rows = (max_top / h).ceil() as usize + 1;
        let domain = &cyl.domain;
        let e_grid = GridFunction::from_fn(
            vec![-2.0 * radius, 0.0],
            vec![h, h],
            vec![cols, rows],
            |y| source(y),
            |y| y[1] < domain.psi(&y[..1]),
        )?;
        let source_norms = sobolev_norms(&e_grid, p)?;
        Ok(ExtensionResult {
            p,
            radius,
            h,
            v: self.v.clone(),
            trace_points: self.trace_points.clone(),
            trace_residual: self.trace_residual.clone(),
            max_trace_residual: self.max_trace_residual(),
            norms,
            source_norms,
            g_lp,
            g_seminorm,
            denominator,
            n_ext,
        })
    }
}

/// `build_extension` followed by `measure`, failing when the trace residual exceeds the
/// tolerance.
pub fn extend_neumann(
    g: &BoundaryDatum,
    cyl: &CylNeighborhood,
    regdist: Arc<RegDistField>,
    p: f64,
    settings: &ExtensionSettings,
) -> Result<ExtensionResult> {
    let field = build_extension(g, cyl, regdist, settings)?;
    let residual = field.max_trace_residual();
    if !(residual <= settings.trace_tolerance) {
        return Err(Error::Extension(format!(
            "trace residual {residual:.3e} above tolerance {:.3e} at h = {}",
            settings.trace_tolerance, field.h
        )));
    }
    field.measure(g, cyl, p, settings.boundary_samples)
}

/// Residuals below this are treated as exact when computing convergence orders.
pub const RESIDUAL_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Serialize)]
pub struct ExtensionStudy {
    pub steps: Vec<f64>,
    pub residuals: Vec<f64>,
    /// `log2(r_k / r_{k+1})`; `None` once both residuals sit under the floor.
    pub orders: Vec<Option<f64>>,
    /// `N_ext` per level and exponent, indexed `[level][p]`.
    pub n_ext: Vec<Vec<f64>>,
    pub ps: Vec<f64>,
    /// Per exponent, `max N_ext / min N_ext` over levels.
    pub n_ext_spread: Vec<f64>,
}

impl ExtensionStudy {
    pub fn min_order(&self) -> f64 {
        self.orders.iter().map(|o| o.unwrap_or(f64::INFINITY)).fold(f64::INFINITY, f64::min)
    }

    pub fn pass(&self, min_order: f64, max_spread: f64) -> bool {
        self.min_order() >= min_order && self.n_ext_spread.iter().all(|s| *s < max_spread)
    }
}

/// Halves the grid step `levels - 1` times, building `v` once per level.
pub fn extension_refinement(
    g: &BoundaryDatum,
    cyl: &CylNeighborhood,
    regdist: Arc<RegDistField>,
    ps: &[f64],
    settings: &ExtensionSettings,
    levels: usize,
) -> Result<ExtensionStudy> {
    let mut steps = Vec::new();
    let mut residuals = Vec::new();
    let mut n_ext = Vec::new();
    for level in 0..levels {
        let s = ExtensionSettings { h: settings.h / 2f64.powi(level as i32), ..*settings };
        let field = build_extension(g, cyl, regdist.clone(), &s)?;
        steps.push(field.h);
        residuals.push(field.max_trace_residual());
        n_ext.push(
            ps.iter()
                .map(|&p| field.measure(g, cyl, p, s.boundary_samples).map(|r| r.n_ext))
                .collect::<Result<Vec<f64>>>()?,
        );
    }
    let orders = residuals
        .windows(2)
        .map(|w| {
            if w[0] < RESIDUAL_FLOOR && w[1] < RESIDUAL_FLOOR {
                None
            } else {
                Some((w[0] / w[1].max(f64::MIN_POSITIVE)).log2())
            }
        })
        .collect();
    let n_ext_spread = (0..ps.len())
        .map(|k| {
            let vals: Vec<f64> = n_ext.iter().map(|row: &Vec<f64>| row[k]).collect();
            let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
            if hi == 0.0 {
                1.0
            } else {
                hi / lo
            }
        })
        .collect();
    Ok(ExtensionStudy { steps, residuals, orders, n_ext, ps: ps.to_vec(), n_ext_spread })
}
