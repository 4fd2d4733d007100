use rayon::prelude::*;
use serde::Serialize;

use crate::{Error, Result};

/// Scalar samples on a uniform tensor grid with an inside mask.
///
/// Node `i` (multi-index) sits at `origin + i ⊙ spacing`; storage is row-major with the
/// last axis fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub origin: Vec<f64>,
    pub spacing: Vec<f64>,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
    pub mask: Vec<bool>,
}

impl GridFunction {
    pub fn new(origin: Vec<f64>, spacing: Vec<f64>, shape: Vec<usize>, values: Vec<f64>, mask: Vec<bool>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if origin.len() != shape.len() || spacing.len() != shape.len() {
            return Err(Error::InvalidInput("origin, spacing and shape must share a dimension".into()));
        }
        if spacing.iter().any(|h| !(*h > 0.0)) {
            return Err(Error::InvalidInput("grid spacing must be positive".into()));
        }
        if values.len() != n || mask.len() != n {
            return Err(Error::InvalidInput(format!("expected {n} values and mask entries")));
        }
        Ok(Self { origin, spacing, shape, values, mask })
    }

    /// Samples `f` at every node; `inside` decides the mask.
    pub fn from_fn(
        origin: Vec<f64>,
        spacing: Vec<f64>,
        shape: Vec<usize>,
        f: impl Fn(&[f64]) -> f64 + Sync,
        inside: impl Fn(&[f64]) -> bool + Sync,
    ) -> Result<Self> {
        let n: usize = shape.iter().product();
        let probe = Self { origin: origin.clone(), spacing: spacing.clone(), shape: shape.clone(), values: vec![], mask: vec![] };
        let (values, mask): (Vec<f64>, Vec<bool>) = (0..n)
            .into_par_iter()
            .map(|k| {
                let x = probe.coords(k);
                let m = inside(&x);
                (if m { f(&x) } else { 0.0 }, m)
            })
            .unzip();
        Self::new(origin, spacing, shape, values, mask)
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    pub fn multi_index(&self, mut k: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for a in (0..self.dim()).rev() {
            idx[a] = k % self.shape[a];
            k /= self.shape[a];
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.shape).fold(0, |acc, (i, n)| acc * n + i)
    }

    pub fn coords(&self, k: usize) -> Vec<f64> {
        self.multi_index(k)
            .iter()
            .enumerate()
            .map(|(a, i)| self.origin[a] + *i as f64 * self.spacing[a])
            .collect()
    }

    fn stride(&self, axis: usize) -> usize {
        self.shape[axis + 1..].iter().product()
    }

    /// Neighbour along `axis` at offset `off`, if it exists and is inside.
    fn neighbour(&self, k: usize, idx: &[usize], axis: usize, off: isize) -> Option<usize> {
        let i = idx[axis] as isize + off;
        if i < 0 || i >= self.shape[axis] as isize {
            return None;
        }
        let j = (k as isize + off * self.stride(axis) as isize) as usize;
        self.mask[j].then_some(j)
    }

    /// First difference along `axis`: central when possible, one-sided at mask edges.
    fn first_diff(&self, vals: &[f64], k: usize, idx: &[usize], axis: usize) -> Option<f64> {
        let h = self.spacing[axis];
        match (self.neighbour(k, idx, axis, -1), self.neighbour(k, idx, axis, 1)) {
            (Some(m), Some(p)) => Some((vals[p] - vals[m]) / (2.0 * h)),
            (None, Some(p)) => Some((vals[p] - vals[k]) / h),
            (Some(m), None) => Some((vals[k] - vals[m]) / h),
            (None, None) => None,
        }
    }

    fn second_diff(&self, k: usize, idx: &[usize], axis: usize) -> Option<f64> {
        let h2 = self.spacing[axis] * self.spacing[axis];
        let v = &self.values;
        match (self.neighbour(k, idx, axis, -1), self.neighbour(k, idx, axis, 1)) {
            (Some(m), Some(p)) => Some((v[p] - 2.0 * v[k] + v[m]) / h2),
            (None, Some(p)) => self.neighbour(k, idx, axis, 2).map(|pp| (v[pp] - 2.0 * v[p] + v[k]) / h2),
            (Some(m), None) => self.neighbour(k, idx, axis, -2).map(|mm| (v[k] - 2.0 * v[m] + v[mm]) / h2),
            (None, None) => None,
        }
    }

    /// Partial derivative field along `axis` (NaN where no stencil fits).
    pub fn derivative(&self, axis: usize) -> Vec<f64> {
        (0..self.len())
            .into_par_iter()
            .map(|k| {
                if !self.mask[k] {
                    return f64::NAN;
                }
                let idx = self.multi_index(k);
                self.first_diff(&self.values, k, &idx, axis).unwrap_or(f64::NAN)
            })
            .collect()
    }

    /// Gradient and Hessian at node `k` by the stencils above.
    fn jet(&self, k: usize, grads: &[Vec<f64>]) -> Option<(Vec<f64>, Vec<f64>)> {
        let d = self.dim();
        let idx = self.multi_index(k);
        let mut g = vec![0.0; d];
        let mut hess = vec![0.0; d * d];
        for a in 0..d {
            g[a] = grads[a][k];
            if !g[a].is_finite() {
                return None;
            }
            hess[a * d + a] = self.second_diff(k, &idx, a)?;
            for b in a + 1..d {
                let m = self.first_diff(&grads[a], k, &idx, b)?;
                if !m.is_finite() {
                    return None;
                }
                hess[a * d + b] = m;
                hess[b * d + a] = m;
            }
        }
        Some((g, hess))
    }
}

fn check_p(p: f64) -> Result<()> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::InvalidParameter(format!("p = {p} must lie in [1, ∞)")));
    }
    Ok(())
}

/// `(Σ_inside |f|^p h^d)^{1/p}`
pub fn lp_norm(f: &GridFunction, p: f64) -> Result<f64> {
    check_p(p)?;
    let s: f64 = f
        .values
        .iter()
        .zip(&f.mask)
        .filter(|(_, m)| **m)
        .map(|(v, _)| v.abs().powf(p))
        .sum();
    Ok((s * f.cell_volume()).powf(1.0 / p))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SobolevNorms {
    pub lp: f64,
    pub grad_lp: f64,
    pub hess_lp: f64,
    pub w1p: f64,
    pub w2p: f64,
    /// Inside nodes whose derivative stencils did not fit.
    pub dropped: usize,
}

/// `W¹_p` and `W²_p` norms with finite-difference derivatives.
///
/// Nodes where a stencil leaves the mask are dropped from the derivative sums; more than
/// 10% dropped nodes is a resolution error.
pub fn sobolev_norms(u: &GridFunction, p: f64) -> Result<SobolevNorms> {
    check_p(p)?;
    let d = u.dim();
    let grads: Vec<Vec<f64>> = (0..d).map(|a| u.derivative(a)).collect();
    let vol = u.cell_volume();
    let inside: Vec<usize> = (0..u.len()).filter(|k| u.mask[*k]).collect();
    if inside.is_empty() {
        return Err(Error::Resolution("no inside nodes".into()));
    }
    let (g_sum, h_sum, dropped) = inside
        .iter()
        .map(|&k| match u.jet(k, &grads) {
            Some((g, h)) => {
                let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                let hn = h.iter().map(|v| v * v).sum::<f64>().sqrt();
                (gn.powf(p), hn.powf(p), 0usize)
            }
            None => (0.0, 0.0, 1usize),
        })
        .fold((0.0, 0.0, 0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
    if dropped * 10 > inside.len() {
        return Err(Error::Resolution(format!(
            "{dropped} of {} inside nodes lack derivative stencils",
            inside.len()
        )));
    }
    let lp_p = lp_norm(u, p)?.powf(p);
    let (g_p, h_p) = (g_sum * vol, h_sum * vol);
    Ok(SobolevNorms {
        lp: lp_p.powf(1.0 / p),
        grad_lp: g_p.powf(1.0 / p),
        hess_lp: h_p.powf(1.0 / p),
        w1p: (lp_p + g_p).powf(1.0 / p),
        w2p: (lp_p + g_p + h_p).powf(1.0 / p),
        dropped,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BmoReport {
    pub value: f64,
    pub center: Vec<f64>,
    pub radius: f64,
    pub radii: Vec<f64>,
}

impl BmoReport {
    /// Whether the mean oscillation stays below `threshold` at scales up to `r0`.
    pub fn is_small(&self, threshold: f64) -> bool {
        self.value < threshold
    }
}

/// Largest mean oscillation over balls centred at inside nodes with radii
/// `r0, r0/2, …` down to `2h`.
pub fn bmo_seminorm(a: &GridFunction, r0: f64) -> Result<BmoReport> {
    let hmax = a.spacing.iter().cloned().fold(0.0, f64::max);
    if r0 < 2.0 * hmax {
        return Err(Error::Resolution(format!("r0 = {r0} below twice the grid step {hmax}")));
    }
    let mut radii = Vec::new();
    let mut r = r0;
    while r >= 2.0 * hmax * (1.0 - 1e-12) {
        radii.push(r);
        r *= 0.5;
    }
    let inside: Vec<usize> = (0..a.len()).filter(|k| a.mask[*k]).collect();
    let coords: Vec<Vec<f64>> = inside.iter().map(|k| a.coords(*k)).collect();
    let best = inside
        .par_iter()
        .enumerate()
        .map(|(ci, _)| {
            let c = &coords[ci];
            let mut local = (0.0f64, 0.0f64);
            for &r in &radii {
                let members: Vec<f64> = coords
                    .iter()
                    .zip(&inside)
                    .filter(|(x, _)| x.iter().zip(c).map(|(p, q)| (p - q) * (p - q)).sum::<f64>() < r * r)
                    .map(|(_, k)| a.values[*k])
                    .collect();
                let mean = members.iter().sum::<f64>() / members.len() as f64;
                let osc = members.iter().map(|v| (v - mean).abs()).sum::<f64>() / members.len() as f64;
                if osc > local.0 {
                    local = (osc, r);
                }
            }
            (local.0, local.1, ci)
        })
        .reduce(|| (0.0, 0.0, usize::MAX), |x, y| if y.0 > x.0 || (y.0 == x.0 && y.2 < x.2) { y } else { x });
    let center = if best.2 == usize::MAX { vec![] } else { coords[best.2].clone() };
    Ok(BmoReport { value: best.0, center, radius: best.1, radii })
}
