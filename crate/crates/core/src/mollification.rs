//! Regularized mollification `g̃(y) = ∫ g(y - ρ0(y) w / M1) φ(w) dw` on a cylinder.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::geometry::{CylNeighborhood, ScalarField, VectorField};
use crate::quadrature::{gauss_legendre, gauss_on, MollifierKernel};
use crate::regdist::RegDistField;
use crate::{Error, Result};

/// Region the mollifier may sample from: `|y'| < radius`, `bottom < y^d < ψ(y')`.
///
/// The bottom sits below the cylinder floor because points near `y^d = 0` are shifted
/// downwards by up to `ρ0/M1 < R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SourceRegion {
    pub radius: f64,
    pub bottom: f64,
}

/// `g̃` together with the fields it is built from.
#[derive(Clone)]
pub struct MollifiedField {
    pub source: ScalarField,
    pub source_grad: Option<VectorField>,
    pub regdist: Arc<RegDistField>,
    pub kernel: MollifierKernel,
    /// `max(3M/δ, 2·1.05·sup|Dρ0|)`
    pub m1: f64,
    /// Measured `sup |Dρ0|` over the evaluation region.
    pub grad_sup: f64,
    pub radius: f64,
    pub region: SourceRegion,
}

impl std::fmt::Debug for MollifiedField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MollifiedField").field("m1", &self.m1).field("radius", &self.radius).finish()
    }
}

/// Sample points of `Ω_R ∪ Γ_R` on a tensor grid of `n` columns and `n` heights per column.
fn sample_cylinder(cyl: &CylNeighborhood, radius: f64, n: usize) -> Vec<Vec<f64>> {
    let d = cyl.domain.dim;
    let cols: Vec<Vec<f64>> = match d {
        2 => (0..n).map(|i| vec![-radius + 2.0 * radius * (i as f64 + 0.5) / n as f64]).collect(),
        _ => (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| {
                vec![
                    -radius + 2.0 * radius * (i as f64 + 0.5) / n as f64,
                    -radius + 2.0 * radius * (j as f64 + 0.5) / n as f64,
                ]
            })
            .filter(|c| c.iter().map(|v| v * v).sum::<f64>() < radius * radius)
            .collect(),
    };
    let mut pts = Vec::new();
    for c in cols {
        let top = cyl.domain.psi(&c);
        for k in 0..=n {
            let mut y = c.clone();
            y.push(top * k as f64 / n as f64);
            pts.push(y);
        }
    }
    pts
}

impl MollifiedField {
    /// Builds `g̃` on `Ω_R` of the cylinder; `regdist` must be built on `cyl.domain`.
    pub fn new(
        cyl: &CylNeighborhood,
        regdist: Arc<RegDistField>,
        source: ScalarField,
        source_grad: Option<VectorField>,
        kernel_nodes: usize,
    ) -> Result<Self> {
        let radius = cyl.radius;
        let samples = sample_cylinder(cyl, radius, 16);
        let grad_sup = samples
            .par_iter()
            .map(|y| regdist.value_and_grad(y).map(|(_, g)| g.iter().map(|v| v * v).sum::<f64>().sqrt()))
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        let m = regdist.m;
        let delta = regdist.domain.delta;
        let m1 = (3.0 * m / delta).max(2.0 * 1.05 * grad_sup);
        let kernel = MollifierKernel::new(cyl.domain.dim, kernel_nodes)?;
        let region = SourceRegion { radius: 2.0 * radius, bottom: -radius };
        Ok(Self { source, source_grad, regdist, kernel, m1, grad_sup, radius, region })
    }

    /// Same construction with a different source function.
    pub fn with_source(&self, source: ScalarField, source_grad: Option<VectorField>) -> Self {
        Self { source, source_grad, ..self.clone() }
    }

    fn in_region(&self, x: &[f64]) -> bool {
        let d = x.len();
        let r2: f64 = x[..d - 1].iter().map(|v| v * v).sum();
        r2 < self.region.radius * self.region.radius
            && x[d - 1] > self.region.bottom
            && x[d - 1] <= self.regdist.domain.psi(&x[..d - 1]) * (1.0 + 1e-12) + 1e-12
    }

    fn shifted(&self, y: &[f64], rho: f64, k: usize, out: &mut [f64]) {
        let w = self.kernel.node(k);
        for i in 0..y.len() {
            out[i] = y[i] - rho / self.m1 * w[i];
        }
    }

    /// Checks every shifted node for `y` against the source region.
    pub fn check_containment(&self, y: &[f64]) -> Result<()> {
        let rho = self.regdist.regularized_distance(y)?;
        let mut x = vec![0.0; y.len()];
        for k in 0..self.kernel.len() {
            self.shifted(y, rho, k, &mut x);
            if !self.in_region(&x) {
                return Err(Error::Containment(format!("shifted point {x:?} from {y:?} leaves the source region")));
            }
        }
        Ok(())
    }

    pub fn mollify(&self, y: &[f64]) -> Result<f64> {
        let rho = self.regdist.regularized_distance(y)?;
        Ok(self.mollify_with_rho(y, rho))
    }

    /// Quadrature value given a precomputed `ρ0(y)`; no containment check.
    pub fn mollify_with_rho(&self, y: &[f64], rho: f64) -> f64 {
        if rho == 0.0 {
            return (self.source)(y);
        }
        let mut x = vec![0.0; y.len()];
        let mut acc = 0.0;
        for k in 0..self.kernel.len() {
            self.shifted(y, rho, k, &mut x);
            acc += self.kernel.phi[k] * (self.source)(&x);
        }
        acc
    }

    fn source_gradient(&self, x: &[f64]) -> Vec<f64> {
        match &self.source_grad {
            Some(g) => g(x),
            None => {
                let mut z = x.to_vec();
                (0..x.len())
                    .map(|i| {
                        let h = 1e-6 * (1.0 + x[i].abs());
                        z[i] = x[i] + h;
                        let fp = (self.source)(&z);
                        z[i] = x[i] - h;
                        let fm = (self.source)(&z);
                        z[i] = x[i];
                        (fp - fm) / (2.0 * h)
                    })
                    .collect()
            }
        }
    }

    /// `Dg̃ = ∫ (I - Dρ0 ⊗ w / M1) Dg(shift) φ`.
    pub fn mollify_gradient(&self, y: &[f64]) -> Result<Vec<f64>> {
        let (rho, grad_rho) = self.regdist.value_and_grad(y)?;
        Ok(self.gradient_with_jet(y, rho, &grad_rho))
    }

    pub fn gradient_with_jet(&self, y: &[f64], rho: f64, grad_rho: &[f64]) -> Vec<f64> {
        let d = y.len();
        let mut out = vec![0.0; d];
        let mut x = vec![0.0; d];
        for k in 0..self.kernel.len() {
            self.shifted(y, rho, k, &mut x);
            let dg = self.source_gradient(&x);
            let w = self.kernel.node(k);
            let w_dg: f64 = w.iter().zip(&dg).map(|(a, b)| a * b).sum();
            let phi = self.kernel.phi[k];
            for i in 0..d {
                out[i] += phi * (dg[i] - grad_rho[i] * w_dg / self.m1);
            }
        }
        out
    }

    /// Smallest `det(I - w ⊗ Dρ0 / M1) = 1 - w·Dρ0/M1` over kernel nodes at `y`.
    pub fn min_jacobian(&self, y: &[f64]) -> Result<f64> {
        let (_, g) = self.regdist.value_and_grad(y)?;
        Ok((0..self.kernel.len())
            .map(|k| 1.0 - self.kernel.node(k).iter().zip(&g).map(|(a, b)| a * b).sum::<f64>() / self.m1)
            .fold(f64::INFINITY, f64::min))
    }
}

/// Quadrature nodes and weights on a cylinder-like region
/// `{|y'| < radius, bottom < y^d < ψ(y')}` (d = 2): Gauss panels in `y'` and Gauss on each fiber.
pub fn fiber_quadrature(regdist: &RegDistField, radius: f64, bottom: f64, columns: usize, per_fiber: usize) -> Vec<(Vec<f64>, f64)> {
    let col_rule = gauss_legendre(4);
    let fib_rule = gauss_legendre(per_fiber);
    let mut out = Vec::new();
    let panels = columns.div_ceil(4);
    for p in 0..panels {
        let a = -radius + 2.0 * radius * p as f64 / panels as f64;
        let b = a + 2.0 * radius / panels as f64;
        for (x, wx) in gauss_on(a, b, &col_rule) {
            let top = regdist.domain.psi(&[x]);
            for (t, wt) in gauss_on(bottom, top, &fib_rule) {
                out.push((vec![x, t], wx * wt));
            }
        }
    }
    out
}

/// Random trigonometric polynomial `Σ a_k cos(m_k·y + φ_k)` and its gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigPolynomial {
    pub amplitudes: Vec<f64>,
    pub frequencies: Vec<Vec<f64>>,
    pub phases: Vec<f64>,
}

impl TrigPolynomial {
    /// `terms` terms with integer frequencies in `[-max_freq, max_freq]` and amplitudes in `[-1, 1]`.
    pub fn random(rng: &mut impl Rng, dim: usize, terms: usize, max_freq: i32) -> Self {
        let amplitudes = (0..terms).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let frequencies = (0..terms)
            .map(|_| (0..dim).map(|_| rng.gen_range(-max_freq..=max_freq) as f64).collect())
            .collect();
        let phases = (0..terms).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();
        Self { amplitudes, frequencies, phases }
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        (0..self.amplitudes.len())
            .map(|k| {
                let arg: f64 = self.frequencies[k].iter().zip(y).map(|(m, v)| m * v).sum::<f64>() + self.phases[k];
                self.amplitudes[k] * arg.cos()
            })
            .sum()
    }

    pub fn grad(&self, y: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; y.len()];
        for k in 0..self.amplitudes.len() {
            let arg: f64 = self.frequencies[k].iter().zip(y).map(|(m, v)| m * v).sum::<f64>() + self.phases[k];
            let s = -self.amplitudes[k] * arg.sin();
            for (gi, m) in g.iter_mut().zip(&self.frequencies[k]) {
                *gi += s * m;
            }
        }
        g
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct YoungReport {
    pub p: f64,
    pub trials: usize,
    pub lp_ratio_max: f64,
    pub w1p_ratio_max: f64,
    /// `2^{1/p}`
    pub bound: f64,
    pub containment_failures: usize,
    pub min_jacobian: f64,
    pub m1: f64,
}

impl YoungReport {
    /// Both ratios within `bound · (1 + slack)` and no containment failures.
    pub fn pass(&self, slack: f64) -> bool {
        self.containment_failures == 0
            && self.lp_ratio_max <= self.bound * (1.0 + slack)
            && self.w1p_ratio_max <= self.bound * (1.0 + slack)
            && self.min_jacobian >= 0.5
    }
}

/// Max over random trigonometric `g` of `‖g̃‖_{p,Ω_R}/‖g‖_{p,source}` and the gradient analogue
/// (d = 2), with the Jacobian and containment checked at every quadrature node.
pub fn verify_young_bounds(field: &MollifiedField, p: f64, trials: usize, seed: u64) -> Result<YoungReport> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be ≥ 1".into()));
    }
    if field.regdist.domain.dim != 2 {
        return Err(Error::InvalidParameter("Young-bound sweep is implemented for d = 2".into()));
    }
    let rd = &field.regdist;
    let inner = fiber_quadrature(rd, field.radius, 0.0, 48, 24);
    let outer = fiber_quadrature(rd, field.region.radius, field.region.bottom, 96, 32);
    // Shared per-node data: ρ0, Dρ0 and the shifted points.
    struct Node {
        weight: f64,
        shifted: Vec<[f64; 2]>,
        correction: Vec<[f64; 2]>,
    }
    let nk = field.kernel.len();
    let nodes: Vec<(Node, usize, f64)> = inner
        .par_iter()
        .map(|(y, w)| -> Result<(Node, usize, f64)> {
            let (rho, g) = rd.value_and_grad(y)?;
            let mut shifted = Vec::with_capacity(nk);
            let mut correction = Vec::with_capacity(nk);
            let mut fails = 0;
            let mut min_jac = f64::INFINITY;
            let mut x = vec![0.0; 2];
            for k in 0..nk {
                field.shifted(y, rho, k, &mut x);
                if !field.in_region(&x) {
                    fails += 1;
                }
                let wk = field.kernel.node(k);
                min_jac = min_jac.min(1.0 - (wk[0] * g[0] + wk[1] * g[1]) / field.m1);
                shifted.push([x[0], x[1]]);
                correction.push([g[0] / field.m1, g[1] / field.m1]);
            }
            Ok((Node { weight: *w, shifted, correction }, fails, min_jac))
        })
        .collect::<Result<Vec<_>>>()?;
    let containment_failures = nodes.iter().map(|n| n.1).sum();
    let min_jacobian = nodes.iter().map(|n| n.2).fold(f64::INFINITY, f64::min);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let polys: Vec<TrigPolynomial> = (0..trials).map(|_| TrigPolynomial::random(&mut rng, 2, 8, 8)).collect();
    let ratios: Vec<(f64, f64)> = polys
        .par_iter()
        .map(|g| {
            let (mut num0, mut num1) = (0.0, 0.0);
            for (node, _, _) in &nodes {
                let mut val = 0.0;
                let mut grad = [0.0; 2];
                for k in 0..nk {
                    let x = node.shifted[k];
                    let phi = field.kernel.phi[k];
                    val += phi * g.eval(&x);
                    let dg = g.grad(&x);
                    let wk = field.kernel.node(k);
                    let w_dg = wk[0] * dg[0] + wk[1] * dg[1];
                    grad[0] += phi * (dg[0] - node.correction[k][0] * w_dg);
                    grad[1] += phi * (dg[1] - node.correction[k][1] * w_dg);
                }
                num0 += node.weight * val.abs().powf(p);
                num1 += node.weight * (grad[0] * grad[0] + grad[1] * grad[1]).sqrt().powf(p);
            }
            let (mut den0, mut den1) = (0.0, 0.0);
            for (x, w) in &outer {
                den0 += w * g.eval(x).abs().powf(p);
                let dg = g.grad(x);
                den1 += w * (dg[0] * dg[0] + dg[1] * dg[1]).sqrt().powf(p);
            }
            ((num0 / den0).powf(1.0 / p), (num1 / den1).powf(1.0 / p))
        })
        .collect();
    let lp_ratio_max = ratios.iter().map(|r| r.0).fold(0.0, f64::max);
    let w1p_ratio_max = ratios.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok(YoungReport {
        p,
        trials,
        lp_ratio_max,
        w1p_ratio_max,
        bound: 2f64.powf(1.0 / p),
        containment_failures,
        min_jacobian,
        m1: field.m1,
    })
}

#[cfg(test)]
mod tests;
