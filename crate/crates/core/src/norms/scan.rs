use rayon::prelude::*;
use serde::Serialize;

use crate::quadrature::{gauss_legendre, gauss_on};
use crate::{Error, Result};

/// Planar region intersected with the ball `B_R` about the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ScanRegion {
    Plane,
    /// `{-θ0 < θ < θ0}`
    Wedge { theta0: f64 },
    /// `{x > |y|^{1+eps}}`
    Cusp { eps: f64 },
}

/// Neighbourhood of the singular set removed at each truncation level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Exclusion {
    /// `r ≤ τ`
    Disk,
    /// `|y| ≤ τ`
    Strip,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanSpec {
    pub region: ScanRegion,
    pub exclusion: Exclusion,
    pub radius: f64,
    pub p: f64,
    /// Truncation radii `τ_k = 2^{-k}` for `k` in this inclusive range.
    pub levels: (u32, u32),
    /// Radii at which the integrand may lose smoothness (cutoff transitions); the
    /// quadrature splits there.
    pub radial_breaks: Vec<f64>,
    /// Number of tail levels used in the slope fit.
    pub fit_levels: usize,
}

impl ScanSpec {
    pub fn new(region: ScanRegion, exclusion: Exclusion, radius: f64, p: f64) -> Self {
        Self { region, exclusion, radius, p, levels: (1, 40), radial_breaks: vec![], fit_levels: 10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ScanVerdict {
    Convergent,
    /// Shells grow like a negative power of `τ`: fitted slope below −0.05.
    DivergentPower,
    /// Shells neither grow nor decay: slope within ±0.05.
    DivergentLog,
}

impl ScanVerdict {
    pub fn is_divergent(self) -> bool {
        !matches!(self, ScanVerdict::Convergent)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanResult {
    pub taus: Vec<f64>,
    /// `‖f‖_p^p` over the region minus the excluded set.
    pub values: Vec<f64>,
    /// Least-squares slope of `log(shell)` against `log τ` over the tail, where a shell is
    /// the increment between consecutive levels. Infinite when the tail shells vanish.
    pub fitted_slope: f64,
    pub last_increment: f64,
    pub verdict: ScanVerdict,
}

/// Shell slopes within `±SLOPE_BAND` of zero count as logarithmic divergence.
const SLOPE_BAND: f64 = 0.05;

/// Tail shells carrying at most this share of the total are rounding noise, whatever their slope.
const ROUNDOFF_SHARE: f64 = 1e-10;

/// Half-width of the angular interval of the region on the circle of radius `r`.
fn angular_half_width(region: ScanRegion, r: f64) -> f64 {
    use std::f64::consts::{FRAC_PI_2, PI};
    match region {
        ScanRegion::Plane => PI,
        ScanRegion::Wedge { theta0 } => theta0,
        ScanRegion::Cusp { eps } => {
            // r cos θ = (r |sin θ|)^{1+eps}; the left side wins at θ = 0.
            let f = |t: f64| r * t.cos() - (r * t.sin()).powf(1.0 + eps);
            if f(FRAC_PI_2) >= 0.0 {
                return FRAC_PI_2;
            }
            let (mut lo, mut hi) = (0.0, FRAC_PI_2);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if f(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        }
    }
}

/// Left end of the region's x-interval at height `y` inside `B_R`.
fn x_lower(region: ScanRegion, y: f64, radius: f64) -> f64 {
    let half = (radius * radius - y * y).max(0.0).sqrt();
    match region {
        ScanRegion::Plane => -half,
        ScanRegion::Cusp { eps } => y.abs().powf(1.0 + eps).min(half),
        ScanRegion::Wedge { theta0 } => {
            // x > |y| cot θ0 (cot θ0 < 0 for θ0 > π/2)
            (y.abs() / theta0.tan()).max(-half)
        }
    }
}

struct Integrator<'a> {
    f: &'a (dyn Fn(f64, f64) -> f64 + Sync),
    spec: &'a ScanSpec,
    rule: (Vec<f64>, Vec<f64>),
}

impl Integrator<'_> {
    fn pow(&self, v: f64) -> f64 {
        v.abs().powf(self.spec.p)
    }

    /// Splits `[a, b]` at the configured breaks.
    fn pieces(&self, a: f64, b: f64, extra: &[f64]) -> Vec<(f64, f64)> {
        let mut cuts = vec![a, b];
        cuts.extend(self.spec.radial_breaks.iter().chain(extra).filter(|c| **c > a && **c < b));
        cuts.sort_by(f64::total_cmp);
        cuts.windows(2).map(|w| (w[0], w[1])).collect()
    }

    /// Polar integral over `r ∈ [r0, r1]`, log-spaced in r.
    fn disk_shell(&self, r0: f64, r1: f64) -> f64 {
        let mut total = 0.0;
        for (a, b) in self.pieces(r0, r1, &[]) {
            for (s, ws) in gauss_on(a.ln(), b.ln(), &self.rule) {
                let r = s.exp();
                let half = angular_half_width(self.spec.region, r);
                let panels = 8;
                let mut ang = 0.0;
                for side in [-1.0, 1.0] {
                    for k in 0..panels {
                        let t0 = half * k as f64 / panels as f64;
                        let t1 = half * (k + 1) as f64 / panels as f64;
                        for (t, wt) in gauss_on(t0, t1, &self.rule) {
                            let th = side * t;
                            ang += wt * self.pow((self.f)(r * th.cos(), r * th.sin()));
                        }
                    }
                }
                total += ws * r * r * ang;
            }
        }
        total
    }

    /// Height where the region's lower x-boundary meets the circle of radius R.
    fn corner_height(&self) -> Option<f64> {
        let radius = self.spec.radius;
        match self.spec.region {
            ScanRegion::Plane => None,
            ScanRegion::Wedge { theta0 } => Some(radius * theta0.sin()),
            ScanRegion::Cusp { eps } => {
                let gap = |y: f64| (radius * radius - y * y).max(0.0).sqrt() - y.powf(1.0 + eps);
                let (mut lo, mut hi) = (0.0, radius);
                for _ in 0..100 {
                    let mid = 0.5 * (lo + hi);
                    if gap(mid) > 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                Some(0.5 * (lo + hi))
            }
        }
    }

    /// Integral over `|y| ∈ [y0, y1]` (both signs), log-spaced in `|y|`.
    fn strip_shell(&self, y0: f64, y1: f64) -> f64 {
        let radius = self.spec.radius;
        let mut total = 0.0;
        let corner: Vec<f64> = self.corner_height().into_iter().collect();
        for (a, b) in self.pieces(y0, y1, &corner) {
            for (s, ws) in gauss_on(a.ln(), b.ln(), &self.rule) {
                let ay = s.exp();
                let mut line = 0.0;
                for y in [-ay, ay] {
                    let hi = (radius * radius - y * y).max(0.0).sqrt();
                    let lo = x_lower(self.spec.region, y, radius);
                    if hi <= lo {
                        continue;
                    }
                    let circle_cuts: Vec<f64> = self
                        .spec
                        .radial_breaks
                        .iter()
                        .filter(|r| **r > ay)
                        .flat_map(|r| {
                            let c = (r * r - y * y).sqrt();
                            [-c, c]
                        })
                        .chain(std::iter::once(0.0))
                        .filter(|c| *c > lo && *c < hi)
                        .collect();
                    let mut cuts = vec![lo, hi];
                    cuts.extend(circle_cuts);
                    cuts.sort_by(f64::total_cmp);
                    for w in cuts.windows(2) {
                        let panels = 4;
                        for k in 0..panels {
                            let x0 = w[0] + (w[1] - w[0]) * k as f64 / panels as f64;
                            let x1 = w[0] + (w[1] - w[0]) * (k + 1) as f64 / panels as f64;
                            line += gauss_on(x0, x1, &self.rule).map(|(x, wx)| wx * self.pow((self.f)(x, y))).sum::<f64>();
                        }
                    }
                }
                total += ws * ay * line;
            }
        }
        total
    }

    fn shell(&self, inner: f64, outer: f64) -> f64 {
        match self.spec.exclusion {
            Exclusion::Disk => self.disk_shell(inner, outer),
            Exclusion::Strip => self.strip_shell(inner, outer),
        }
    }
}

/// `‖f‖_p^p` on the region minus the exclusion of width `τ_k = 2^{-k}`, for every level,
/// with a divergence certificate.
///
/// The outer part (`τ_{k_min} < · < R`) is integrated once; each further level adds the
/// shell between consecutive radii, so the values are nondecreasing by construction.
pub fn truncated_norm_scan(f: &(dyn Fn(f64, f64) -> f64 + Sync), spec: &ScanSpec) -> Result<ScanResult> {
    let (k0, k1) = spec.levels;
    if !(spec.p >= 1.0) || !(spec.radius > 0.0) || k1 <= k0 + 2 {
        return Err(Error::InvalidParameter("scan needs p ≥ 1, R > 0 and at least three levels".into()));
    }
    let taus: Vec<f64> = (k0..=k1).map(|k| 0.5f64.powi(k as i32)).collect();
    if taus[0] >= spec.radius {
        return Err(Error::InvalidParameter(format!("first truncation radius {} not below R", taus[0])));
    }
    let integ = Integrator { f, spec, rule: gauss_legendre(20) };
    // The outer piece in dyadic sub-shells so each stays well resolved.
    let mut outer_edges = vec![spec.radius];
    while *outer_edges.last().unwrap() * 0.5 > taus[0] {
        let next = outer_edges.last().unwrap() * 0.5;
        outer_edges.push(next);
    }
    outer_edges.push(taus[0]);
    let base: f64 = outer_edges.windows(2).map(|w| integ.shell(w[1], w[0])).sum();
    let shells: Vec<f64> = taus.par_windows(2).map(|w| integ.shell(w[1], w[0])).collect();
    let mut values = vec![base];
    for s in &shells {
        values.push(values.last().unwrap() + s);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Quadrature("non-finite integrand value".into()));
    }
    if values.windows(2).any(|w| w[1] < w[0] * (1.0 - 1e-12)) {
        return Err(Error::Quadrature("truncated norms are not monotone".into()));
    }
    let n = values.len();
    // Fit the shell contributions: a shell at τ carries ~τ^e whether or not a constant
    // bulk dominates the running total.
    let m = spec.fit_levels.min(shells.len()).max(3);
    let tail = shells.len() - m;
    let pts: Vec<(f64, f64)> = taus[tail..n - 1]
        .iter()
        .zip(&shells[tail..])
        .filter(|(_, s)| **s > 0.0)
        .map(|(t, s)| (t.ln(), s.ln()))
        .collect();
    let fitted_slope = if pts.len() < 3 {
        f64::INFINITY
    } else {
        let k = pts.len() as f64;
        let xm = pts.iter().map(|p| p.0).sum::<f64>() / k;
        let ym = pts.iter().map(|p| p.1).sum::<f64>() / k;
        let sxy: f64 = pts.iter().map(|(x, y)| (x - xm) * (y - ym)).sum();
        let sxx: f64 = pts.iter().map(|(x, _)| (x - xm) * (x - xm)).sum();
        sxy / sxx
    };
    let last_increment = (values[n - 1] - values[n - 2]) / values[n - 1].max(f64::MIN_POSITIVE);
    let tail_share = shells[tail..].iter().sum::<f64>() / values[n - 1].max(f64::MIN_POSITIVE);
    let verdict = if tail_share <= ROUNDOFF_SHARE || fitted_slope > SLOPE_BAND {
        ScanVerdict::Convergent
    } else if fitted_slope < -SLOPE_BAND {
        ScanVerdict::DivergentPower
    } else {
        ScanVerdict::DivergentLog
    };
    Ok(ScanResult { taus, values, fitted_slope, last_increment, verdict })
}
