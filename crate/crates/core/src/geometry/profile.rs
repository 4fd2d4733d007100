//! Graph functions `ψ: R^{d-1} -> R` describing the boundary piece `{y^d = ψ(y')}`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

/// Relative distance to a kink under which a point counts as sitting on it.
const KINK_TOL: f64 = 1e-12;

/// A boundary graph function together with its a.e. gradient.
#[derive(Clone)]
pub enum Profile {
    Flat { level: f64 },
    /// `level + slope · y'`
    Tilted { slope: Vec<f64>, level: f64 },
    /// `level + slope · |y'|`
    Abs { slope: f64, level: f64 },
    /// Zero-mean triangle wave in the first tangential coordinate with slopes `±slope`.
    Sawtooth { slope: f64, period: f64, phase: f64, level: f64 },
    /// `level + amplitude · Σ_i sin(frequency · y_i)`
    Sine { amplitude: f64, frequency: f64, level: f64 },
    /// `-|y'|^{1+eps}`: the set `{x > |y|^{1+eps}}` written as a subgraph with `y^d = -x`.
    Cusp { eps: f64 },
    /// `cot(π - θ0)·|y'|`: the wedge `{-θ0 < θ < θ0}` written as a subgraph with `y^d = -x`.
    Wedge { theta0: f64 },
    /// Piecewise linear interpolation of `(y', ψ)` pairs (d = 2 only), linear extrapolation.
    Table { xs: Arc<[f64]>, ys: Arc<[f64]> },
    /// `inner(y' + shift) + lift`
    Shifted { inner: Arc<Profile>, shift: Vec<f64>, lift: f64 },
    /// Graph of the same boundary seen from a rotated frame.
    Rotated(Arc<RotatedProfile>),
    /// User supplied smooth function; gradient by central differences.
    Custom(Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>),
}

impl fmt::Debug for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::Flat { level } => write!(f, "Flat({level})"),
            Profile::Tilted { slope, level } => write!(f, "Tilted({slope:?}, {level})"),
            Profile::Abs { slope, level } => write!(f, "Abs({slope}, {level})"),
            Profile::Sawtooth { slope, period, phase, level } => {
                write!(f, "Sawtooth(slope={slope}, period={period}, phase={phase}, level={level})")
            }
            Profile::Sine { amplitude, frequency, level } => {
                write!(f, "Sine({amplitude}, {frequency}, {level})")
            }
            Profile::Cusp { eps } => write!(f, "Cusp({eps})"),
            Profile::Wedge { theta0 } => write!(f, "Wedge({theta0})"),
            Profile::Table { xs, .. } => write!(f, "Table({} nodes)", xs.len()),
            Profile::Shifted { inner, shift, lift } => {
                write!(f, "Shifted({inner:?}, {shift:?}, {lift})")
            }
            Profile::Rotated(r) => write!(f, "Rotated({:?})", r.inner),
            Profile::Custom(_) => write!(f, "Custom"),
        }
    }
}

/// Serializable description of the analytic profile families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ProfileSpec {
    Flat {
        #[serde(default)]
        level: f64,
    },
    Tilted {
        slope: Vec<f64>,
        #[serde(default)]
        level: f64,
    },
    Abs {
        slope: f64,
        #[serde(default)]
        level: f64,
    },
    Sawtooth {
        slope: f64,
        #[serde(default = "default_period")]
        period: f64,
        #[serde(default)]
        phase: f64,
        #[serde(default)]
        level: f64,
    },
    Sine {
        amplitude: f64,
        #[serde(default = "one")]
        frequency: f64,
        #[serde(default)]
        level: f64,
    },
    Cusp {
        eps: f64,
    },
    Wedge {
        theta0: f64,
    },
    Table {
        #[serde(default)]
        points: Vec<[f64; 2]>,
        #[serde(default)]
        csv: Option<String>,
    },
}

fn default_period() -> f64 {
    0.5
}

fn one() -> f64 {
    1.0
}

#[inline]
fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl Profile {
    pub fn value(&self, y: &[f64]) -> f64 {
        match self {
            Profile::Flat { level } => *level,
            Profile::Tilted { slope, level } => {
                level + slope.iter().zip(y).map(|(a, b)| a * b).sum::<f64>()
            }
            Profile::Abs { slope, level } => level + slope * norm(y),
            Profile::Sawtooth { slope, period, phase, level } => {
                let t = (y[0] - phase) / period;
                let frac = t - t.floor();
                level + slope * period * ((frac - 0.5).abs() - 0.25)
            }
            Profile::Sine { amplitude, frequency, level } => {
                level + amplitude * y.iter().map(|v| (frequency * v).sin()).sum::<f64>()
            }
            Profile::Cusp { eps } => -norm(y).powf(1.0 + eps),
            Profile::Wedge { theta0 } => norm(y) / (std::f64::consts::PI - theta0).tan(),
            Profile::Table { xs, ys } => {
                let (i, t) = table_locate(xs, y[0]);
                ys[i] + t * (ys[i + 1] - ys[i])
            }
            Profile::Shifted { inner, shift, lift } => {
                let z: Vec<f64> = y.iter().zip(shift).map(|(a, b)| a + b).collect();
                inner.value(&z) + lift
            }
            Profile::Rotated(r) => r.value(y),
            Profile::Custom(f) => f(y),
        }
    }

    /// True when `y'` sits on the non-differentiability set.
    pub fn is_kink(&self, y: &[f64]) -> bool {
        match self {
            Profile::Abs { .. } | Profile::Wedge { .. } => norm(y) < KINK_TOL,
            Profile::Sawtooth { period, phase, .. } => {
                let t = (y[0] - phase) / period;
                let frac = t - t.floor();
                frac < KINK_TOL || (frac - 0.5).abs() < KINK_TOL || (1.0 - frac) < KINK_TOL
            }
            Profile::Table { xs, .. } => {
                let scale = xs.last().unwrap() - xs[0];
                xs[1..xs.len() - 1]
                    .iter()
                    .any(|x| (x - y[0]).abs() < KINK_TOL * scale.max(1.0))
            }
            Profile::Shifted { inner, shift, .. } => {
                let z: Vec<f64> = y.iter().zip(shift).map(|(a, b)| a + b).collect();
                inner.is_kink(&z)
            }
            Profile::Rotated(r) => r.is_kink(y),
            _ => false,
        }
    }

    /// Gradient where it exists; `None` on the kink set.
    pub fn gradient(&self, y: &[f64]) -> Option<Vec<f64>> {
        if self.is_kink(y) {
            return None;
        }
        let mut out = vec![0.0; y.len()];
        self.gradient_ae_into(y, &mut out);
        Some(out)
    }

    pub fn gradient_ae(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; y.len()];
        self.gradient_ae_into(y, &mut out);
        out
    }

    /// An a.e. representative of `Dψ`: the true gradient off the kink set and the
    /// average of the one-sided limits on it. Only meant for quadrature sums.
    pub fn gradient_ae_into(&self, y: &[f64], out: &mut [f64]) {
        match self {
            Profile::Flat { .. } => out.iter_mut().for_each(|o| *o = 0.0),
            Profile::Tilted { slope, .. } => out.copy_from_slice(&slope[..out.len()]),
            Profile::Abs { slope, .. } => {
                let r = norm(y);
                for (o, v) in out.iter_mut().zip(y) {
                    *o = if r < KINK_TOL { 0.0 } else { slope * v / r };
                }
            }
            Profile::Sawtooth { slope, period, phase, .. } => {
                out.iter_mut().for_each(|o| *o = 0.0);
                let t = (y[0] - phase) / period;
                let frac = t - t.floor();
                if frac < KINK_TOL || (frac - 0.5).abs() < KINK_TOL || (1.0 - frac) < KINK_TOL {
                    out[0] = 0.0;
                } else if frac < 0.5 {
                    out[0] = -slope;
                } else {
                    out[0] = *slope;
                }
            }
            Profile::Sine { amplitude, frequency, .. } => {
                for (o, v) in out.iter_mut().zip(y) {
                    *o = amplitude * frequency * (frequency * v).cos();
                }
            }
            Profile::Cusp { eps } => {
                let r = norm(y);
                for (o, v) in out.iter_mut().zip(y) {
                    *o = if r == 0.0 { 0.0 } else { -(1.0 + eps) * r.powf(eps - 1.0) * v };
                }
            }
            Profile::Wedge { theta0 } => {
                let c = 1.0 / (std::f64::consts::PI - theta0).tan();
                let r = norm(y);
                for (o, v) in out.iter_mut().zip(y) {
                    *o = if r < KINK_TOL { 0.0 } else { c * v / r };
                }
            }
            Profile::Table { xs, ys } => {
                let slope = |i: usize| (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]);
                let (i, t) = table_locate(xs, y[0]);
                let scale = (xs[i + 1] - xs[i]).max(f64::MIN_POSITIVE);
                out[0] = if t * scale < KINK_TOL * scale.max(1.0) && i > 0 {
                    0.5 * (slope(i - 1) + slope(i))
                } else if (1.0 - t) * scale < KINK_TOL * scale.max(1.0) && i + 2 < xs.len() {
                    0.5 * (slope(i) + slope(i + 1))
                } else {
                    slope(i)
                };
            }
            Profile::Shifted { inner, shift, .. } => {
                let z: Vec<f64> = y.iter().zip(shift).map(|(a, b)| a + b).collect();
                inner.gradient_ae_into(&z, out);
            }
            Profile::Rotated(r) => r.gradient_ae_into(y, out),
            Profile::Custom(f) => {
                let mut z = y.to_vec();
                for k in 0..y.len() {
                    let h = 1e-6 * (1.0 + y[k].abs());
                    z[k] = y[k] + h;
                    let fp = f(&z);
                    z[k] = y[k] - h;
                    let fm = f(&z);
                    z[k] = y[k];
                    out[k] = (fp - fm) / (2.0 * h);
                }
            }
        }
    }

    /// `inner(y' + shift) + lift`.
    pub fn shifted(self, shift: Vec<f64>, lift: f64) -> Profile {
        Profile::Shifted { inner: Arc::new(self), shift, lift }
    }

    /// Builds a table profile from `(y', ψ)` pairs, sorting by `y'`.
    pub fn table(mut points: Vec<[f64; 2]>) -> crate::Result<Profile> {
        if points.len() < 2 {
            return Err(crate::Error::InvalidInput(
                "a tabulated profile needs at least two points".into(),
            ));
        }
        if points.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(crate::Error::InvalidInput("non-finite table entry".into()));
        }
        points.sort_by(|a, b| a[0].total_cmp(&b[0]));
        if points.windows(2).any(|w| w[1][0] <= w[0][0]) {
            return Err(crate::Error::InvalidInput("duplicate abscissa in table".into()));
        }
        let xs: Vec<f64> = points.iter().map(|p| p[0]).collect();
        let ys: Vec<f64> = points.iter().map(|p| p[1]).collect();
        Ok(Profile::Table { xs: xs.into(), ys: ys.into() })
    }

    /// Reads `(y', ψ)` pairs from a headerless or headed two-column CSV.
    pub fn table_from_csv(path: &std::path::Path) -> crate::Result<Profile> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| crate::Error::Io(e.to_string()))?;
        let mut points = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| crate::Error::Io(e.to_string()))?;
            if rec.len() < 2 {
                continue;
            }
            match (rec[0].parse::<f64>(), rec[1].parse::<f64>()) {
                (Ok(a), Ok(b)) => points.push([a, b]),
                // header row
                _ if points.is_empty() => continue,
                _ => {
                    return Err(crate::Error::InvalidInput(format!(
                        "unparsable table row {:?}",
                        rec
                    )))
                }
            }
        }
        Profile::table(points)
    }
}

fn table_locate(xs: &[f64], x: f64) -> (usize, f64) {
    let n = xs.len();
    let i = match xs.partition_point(|v| *v <= x) {
        0 => 0,
        k if k >= n => n - 2,
        k => k - 1,
    };
    let t = (x - xs[i]) / (xs[i + 1] - xs[i]);
    (i, t)
}

impl ProfileSpec {
    pub fn build(&self) -> crate::Result<Profile> {
        use crate::Error;
        Ok(match self {
            ProfileSpec::Flat { level } => Profile::Flat { level: *level },
            ProfileSpec::Tilted { slope, level } => {
                Profile::Tilted { slope: slope.clone(), level: *level }
            }
            ProfileSpec::Abs { slope, level } => Profile::Abs { slope: *slope, level: *level },
            ProfileSpec::Sawtooth { slope, period, phase, level } => {
                if *period <= 0.0 {
                    return Err(Error::InvalidParameter("sawtooth period must be positive".into()));
                }
                Profile::Sawtooth { slope: *slope, period: *period, phase: *phase, level: *level }
            }
            ProfileSpec::Sine { amplitude, frequency, level } => Profile::Sine {
                amplitude: *amplitude,
                frequency: *frequency,
                level: *level,
            },
            ProfileSpec::Cusp { eps } => {
                if *eps <= 0.0 {
                    return Err(Error::InvalidParameter("cusp exponent eps must be positive".into()));
                }
                Profile::Cusp { eps: *eps }
            }
            ProfileSpec::Wedge { theta0 } => {
                let pi = std::f64::consts::PI;
                if !(*theta0 > pi / 2.0 && *theta0 < pi) {
                    return Err(Error::InvalidParameter("wedge angle must lie in (π/2, π)".into()));
                }
                Profile::Wedge { theta0: *theta0 }
            }
            ProfileSpec::Table { points, csv } => match csv {
                Some(path) => Profile::table_from_csv(std::path::Path::new(path))?,
                None => Profile::table(points.clone())?,
            },
        })
    }
}

/// The same boundary described in a rotated orthonormal frame centred at a boundary point.
///
/// New coordinates `(s, t)` relate to old ones by `x = origin + Σ s_i e_i + t e_d`, with
/// `axes[k]` the new unit axis `e_k` in old coordinates. The new graph value at `s` is the
/// root `t` of `F(t) = ψ_old(x') - x^d`, found by bracketing bisection and Newton polish.
#[derive(Debug, Clone)]
pub struct RotatedProfile {
    pub(crate) inner: Profile,
    pub(crate) origin: Vec<f64>,
    pub(crate) axes: Vec<Vec<f64>>,
    pub(crate) tol: f64,
    pub(crate) bracket_limit: f64,
}

impl RotatedProfile {
    fn point(&self, s: &[f64], t: f64) -> Vec<f64> {
        let d = self.origin.len();
        let mut x = self.origin.clone();
        for (k, sk) in s.iter().enumerate() {
            for i in 0..d {
                x[i] += sk * self.axes[k][i];
            }
        }
        for i in 0..d {
            x[i] += t * self.axes[d - 1][i];
        }
        x
    }

    fn residual(&self, s: &[f64], t: f64) -> f64 {
        let x = self.point(s, t);
        let d = x.len();
        self.inner.value(&x[..d - 1]) - x[d - 1]
    }

    fn residual_dt(&self, s: &[f64], t: f64) -> f64 {
        let x = self.point(s, t);
        let d = x.len();
        let g = self.inner.gradient_ae(&x[..d - 1]);
        let ed = &self.axes[d - 1];
        g.iter().zip(ed).map(|(a, b)| a * b).sum::<f64>() - ed[d - 1]
    }

    /// Root of the residual along the fiber over `s`, or `None` if no sign change is found
    /// within the bracket limit.
    pub fn solve(&self, s: &[f64]) -> Option<f64> {
        let f0 = self.residual(s, 0.0);
        if f0 == 0.0 {
            return Some(0.0);
        }
        // F decreases in t for a non-tangential axis; search the side where the root lies.
        let dir = if f0 > 0.0 { 1.0 } else { -1.0 };
        let (mut lo, mut hi) = (0.0, 0.0);
        let mut step = self.tol.max(1e-6);
        let mut found = false;
        while step <= self.bracket_limit {
            let t = dir * step;
            if self.residual(s, t).signum() != f0.signum() {
                lo = dir * step * 0.5;
                hi = t;
                if step == self.tol.max(1e-6) {
                    lo = 0.0;
                }
                found = true;
                break;
            }
            step *= 2.0;
        }
        if !found {
            return None;
        }
        let flo = self.residual(s, lo);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let fm = self.residual(s, mid);
            if fm == 0.0 {
                return Some(mid);
            }
            if fm.signum() == flo.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
            if (hi - lo).abs() < 1e3 * self.tol {
                break;
            }
        }
        let mut t = 0.5 * (lo + hi);
        for _ in 0..20 {
            let dt = self.residual_dt(s, t);
            if dt == 0.0 {
                break;
            }
            let next = t - self.residual(s, t) / dt;
            let bounded = next.clamp(lo.min(hi), lo.max(hi));
            let done = (bounded - t).abs() < self.tol;
            t = bounded;
            if done {
                break;
            }
        }
        Some(t)
    }

    fn value(&self, s: &[f64]) -> f64 {
        self.solve(s).unwrap_or(f64::NAN)
    }

    fn old_tangent(&self, s: &[f64]) -> Option<Vec<f64>> {
        let t = self.solve(s)?;
        let x = self.point(s, t);
        Some(x[..x.len() - 1].to_vec())
    }

    fn is_kink(&self, s: &[f64]) -> bool {
        self.old_tangent(s).map(|x| self.inner.is_kink(&x)).unwrap_or(false)
    }

    /// Implicit differentiation: `Dψ_new = -F_s / F_t`.
    fn gradient_ae_into(&self, s: &[f64], out: &mut [f64]) {
        let d = self.origin.len();
        let Some(x) = self.old_tangent(s) else {
            out.iter_mut().for_each(|o| *o = f64::NAN);
            return;
        };
        let g = self.inner.gradient_ae(&x);
        let dir_deriv = |axis: &[f64]| -> f64 {
            g.iter().zip(axis).map(|(a, b)| a * b).sum::<f64>() - axis[d - 1]
        };
        let ft = dir_deriv(&self.axes[d - 1]);
        for (k, o) in out.iter_mut().enumerate() {
            *o = -dir_deriv(&self.axes[k]) / ft;
        }
    }
}
