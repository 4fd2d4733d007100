use rayon::prelude::*;
use serde::Serialize;

use crate::geometry::Profile;
use crate::{Error, Result};

/// Samples of a boundary datum on a curve, parameterized by arclength.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTrace {
    /// Increasing arclength positions.
    pub s: Vec<f64>,
    pub values: Vec<f64>,
    /// Trapezoid weights in arclength.
    pub weights: Vec<f64>,
}

impl BoundaryTrace {
    pub fn from_arclength(s: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if s.len() != values.len() {
            return Err(Error::InvalidInput("positions and values differ in length".into()));
        }
        if s.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput("arclength positions must increase".into()));
        }
        let n = s.len();
        let weights = (0..n)
            .map(|i| {
                let left = if i > 0 { s[i] - s[i - 1] } else { 0.0 };
                let right = if i + 1 < n { s[i + 1] - s[i] } else { 0.0 };
                0.5 * (left + right)
            })
            .collect();
        Ok(Self { s, values, weights })
    }

    /// Samples `g(y', ψ(y'))` at `y'` nodes of a planar graph, with arclength from
    /// the midpoint rule on `sqrt(1 + ψ'²)`.
    pub fn on_graph(profile: &Profile, ys: &[f64], g: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let mut s = Vec::with_capacity(ys.len());
        let mut acc = 0.0;
        for (i, y) in ys.iter().enumerate() {
            if i > 0 {
                let mid = 0.5 * (ys[i - 1] + y);
                let slope = profile.gradient_ae(&[mid])[0];
                acc += (y - ys[i - 1]) * (1.0 + slope * slope).sqrt();
            }
            s.push(acc);
        }
        let values = ys.iter().map(|y| g(*y, profile.value(&[*y]))).collect();
        Self::from_arclength(s, values)
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    /// Largest gap between consecutive samples.
    pub fn max_step(&self) -> f64 {
        self.s.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        if !(p >= 1.0) {
            return Err(Error::InvalidParameter(format!("p = {p} must be ≥ 1")));
        }
        let s: f64 = self.values.iter().zip(&self.weights).map(|(v, w)| w * v.abs().powf(p)).sum();
        Ok(s.powf(1.0 / p))
    }

    pub fn map(&self, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = self.s.iter().zip(&self.values).map(|(s, v)| f(*s, *v)).collect();
        Self { s: self.s.clone(), values, weights: self.weights.clone() }
    }
}

/// `(∬_{|s-t|>h} |g(s)-g(t)|^p / |s-t|^p ds dt)^{1/p}`, the `W^{1-1/p}_p` seminorm with
/// the diagonal band of width `h` (the largest sample gap) removed.
pub fn gagliardo_seminorm(g: &BoundaryTrace, p: f64) -> Result<f64> {
    if !(p > 1.0) {
        return Err(Error::InvalidParameter(format!("p = {p} must exceed 1")));
    }
    if g.len() < 4 {
        return Err(Error::Resolution("at least 4 samples are needed".into()));
    }
    let h = g.max_step() * (1.0 + 1e-12);
    let n = g.len();
    let partial: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut acc = 0.0;
            for j in i + 1..n {
                let dist = g.s[j] - g.s[i];
                if dist > h {
                    acc += g.weights[j] * ((g.values[i] - g.values[j]).abs() / dist).powf(p);
                }
            }
            g.weights[i] * acc
        })
        .collect();
    // fixed-order reduction keeps results bitwise reproducible
    let total: f64 = partial.iter().sum();
    Ok((2.0 * total).powf(1.0 / p))
}

/// `sup |g(s)-g(t)| / |s-t|^α` over sampled pairs.
pub fn holder_seminorm(g: &BoundaryTrace, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidParameter(format!("α = {alpha} not in (0, 1]")));
    }
    if g.len() < 2 {
        return Err(Error::Resolution("at least 2 samples are needed".into()));
    }
    let n = g.len();
    Ok((0..n)
        .into_par_iter()
        .map(|i| {
            (i + 1..n)
                .map(|j| (g.values[i] - g.values[j]).abs() / (g.s[j] - g.s[i]).powf(alpha))
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max))
}

/// Values of a seminorm under repeated halving of the sample spacing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefinementStudy {
    pub samples: Vec<usize>,
    pub values: Vec<f64>,
    /// Relative change between the two finest levels.
    pub last_increment: f64,
    /// Set when the last relative increment exceeds the 1% Cauchy tolerance.
    pub divergent: bool,
}

/// Gagliardo seminorm of `g` on `[a, b]` with `n0, 2n0, …` uniform intervals.
pub fn gagliardo_refinement(g: impl Fn(f64) -> f64, a: f64, b: f64, p: f64, n0: usize, levels: usize) -> Result<RefinementStudy> {
    let mut samples = Vec::new();
    let mut values = Vec::new();
    for l in 0..levels {
        let n = n0 << l;
        let s: Vec<f64> = (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect();
        let v = s.iter().map(|x| g(*x)).collect();
        values.push(gagliardo_seminorm(&BoundaryTrace::from_arclength(s, v)?, p)?);
        samples.push(n + 1);
    }
    let k = values.len();
    let last_increment = if k >= 2 {
        (values[k - 1] - values[k - 2]).abs() / values[k - 1].abs().max(f64::MIN_POSITIVE)
    } else {
        0.0
    };
    Ok(RefinementStudy { samples, values, last_increment, divergent: last_increment > 0.01 })
}
