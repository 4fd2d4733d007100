//! Regularized distance: the fixed point `ρ = G(y, ρ)` of the self-mollified graph.

use serde::Serialize;

use crate::geometry::GraphDomain;
use crate::quadrature::{MarginalKernel, MollifierKernel};
use crate::{Error, Result};

/// Iteration settings for the fixed point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegDistSettings {
    pub kernel_nodes: usize,
    /// Relative stopping tolerance, scaled by `max(1, |g(y)|)`.
    pub rel_tol: f64,
    pub max_iters: usize,
}

impl Default for RegDistSettings {
    fn default() -> Self {
        Self { kernel_nodes: 33, rel_tol: 1e-12, max_iters: 80 }
    }
}

/// Evaluator for ρ0, Dρ0 and D²ρ0 of a graph domain.
#[derive(Debug, Clone)]
pub struct RegDistField {
    pub domain: GraphDomain,
    pub kernel: MarginalKernel,
    /// Scale `M = 2 sqrt(4/δ² + 1)`.
    pub m: f64,
    pub settings: RegDistSettings,
}

/// Converged value together with iteration diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FixedPoint {
    pub rho: f64,
    /// `g(y) = ψ(y') - y^d`
    pub g: f64,
    pub iterations: usize,
    /// Largest observed ratio of successive steps (0 when fewer than two resolvable steps).
    pub max_contraction: f64,
    /// `|ρ - G(y, ρ)|`
    pub residual: f64,
    pub tolerance: f64,
}

/// Value, gradient and Hessian at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct RegDistJet {
    pub rho: f64,
    pub grad: Vec<f64>,
    pub hess: Vec<Vec<f64>>,
}

/// `2 sqrt(4/δ² + 1)`
pub fn scale_m(delta: f64) -> f64 {
    2.0 * (4.0 / (delta * delta) + 1.0).sqrt()
}

impl RegDistField {
    pub fn new(domain: GraphDomain) -> Result<Self> {
        Self::with_settings(domain, RegDistSettings::default())
    }

    pub fn with_settings(domain: GraphDomain, settings: RegDistSettings) -> Result<Self> {
        let kernel = MollifierKernel::new(domain.dim, settings.kernel_nodes)?.marginal();
        let m = scale_m(domain.delta);
        Ok(Self { domain, kernel, m, settings })
    }

    fn check_point(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.domain.dim || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("point {y:?} is not a finite {}-vector", self.domain.dim)));
        }
        Ok(())
    }

    /// `∫ g(y - τw/M) φ(w) dw` with `g(y) = ψ(y') - y^d`.
    pub fn mollified_graph(&self, y: &[f64], tau: f64) -> Result<f64> {
        self.check_point(y)?;
        let d = self.domain.dim;
        let t = d - 1;
        let scale = tau / self.m;
        let mut shifted = vec![0.0; t];
        let mut acc = 0.0;
        for k in 0..self.kernel.len() {
            let w = self.kernel.node(k);
            for i in 0..t {
                shifted[i] = y[i] - scale * w[i];
            }
            let v = self.domain.profile.value(&shifted);
            if !v.is_finite() {
                return Err(Error::OutOfChart(shifted));
            }
            acc += self.kernel.phi[k] * v;
        }
        Ok(acc - y[d - 1])
    }

    /// Runs the fixed-point iteration from `τ0 = g(y)`.
    pub fn fixed_point(&self, y: &[f64]) -> Result<FixedPoint> {
        let g = self.mollified_graph(y, 0.0)?;
        let tol = self.settings.rel_tol * g.abs().max(1.0);
        let resolvable = 1e-9 * g.abs().max(1.0);
        let mut tau = g;
        let mut prev_step: Option<f64> = None;
        let mut max_contraction: f64 = 0.0;
        for it in 1..=self.settings.max_iters {
            let next = self.mollified_graph(y, tau)?;
            let step = (next - tau).abs();
            if let Some(p) = prev_step {
                if p > resolvable {
                    max_contraction = max_contraction.max(step / p);
                }
            }
            tau = next;
            if step < tol {
                let residual = (tau - self.mollified_graph(y, tau)?).abs();
                return Ok(FixedPoint { rho: tau, g, iterations: it, max_contraction, residual, tolerance: tol });
            }
            prev_step = Some(step);
        }
        Err(Error::Convergence { iters: self.settings.max_iters, last_step: prev_step.unwrap_or(f64::NAN) })
    }

    pub fn regularized_distance(&self, y: &[f64]) -> Result<f64> {
        Ok(self.fixed_point(y)?.rho)
    }

    /// First-order pieces at `(y, ρ)`: `(G_i for i < d, G_τ)`.
    fn first_order(&self, y: &[f64], rho: f64) -> (Vec<f64>, f64) {
        let t = self.domain.dim - 1;
        let scale = rho / self.m;
        let mut shifted = vec![0.0; t];
        let mut dpsi = vec![0.0; t];
        let mut gi = vec![0.0; t];
        let mut gtau = 0.0;
        for k in 0..self.kernel.len() {
            let w = self.kernel.node(k);
            for i in 0..t {
                shifted[i] = y[i] - scale * w[i];
            }
            self.domain.profile.gradient_ae_into(&shifted, &mut dpsi);
            let phi = self.kernel.phi[k];
            for i in 0..t {
                gi[i] += phi * dpsi[i];
                gtau -= phi * dpsi[i] * w[i] / self.m;
            }
        }
        (gi, gtau)
    }

    fn gradient_from(&self, gi: &[f64], gtau: f64) -> Result<Vec<f64>> {
        let denom = 1.0 - gtau;
        if denom.abs() < 0.5 - 1e-9 {
            return Err(Error::ContractionViolation(denom.abs()));
        }
        let mut grad: Vec<f64> = gi.iter().map(|v| v / denom).collect();
        grad.push(-1.0 / denom);
        Ok(grad)
    }

    /// `Dρ0 = (G_1, .., G_{d-1}, -1) / (1 - G_τ)` at the converged fixed point.
    pub fn grad_regdist(&self, y: &[f64]) -> Result<Vec<f64>> {
        let rho = self.regularized_distance(y)?;
        let (gi, gtau) = self.first_order(y, rho);
        self.gradient_from(&gi, gtau)
    }

    /// `D²ρ0` from differentiating the fixed-point identity twice.
    pub fn hess_regdist(&self, y: &[f64]) -> Result<Vec<Vec<f64>>> {
        Ok(self.jet(y)?.hess)
    }

    /// ρ0 with its gradient and Hessian, sharing the fixed-point solve.
    pub fn jet(&self, y: &[f64]) -> Result<RegDistJet> {
        let rho = self.regularized_distance(y)?;
        let d = self.domain.dim;
        if rho.abs() <= 1e-14 * (1.0 + y[d - 1].abs()) {
            return Err(Error::BoundarySingularity(rho));
        }
        let t = d - 1;
        let scale = rho / self.m;
        let mut shifted = vec![0.0; t];
        let mut dpsi = vec![0.0; t];
        let mut base = vec![0.0; t];
        self.domain.profile.gradient_ae_into(&y[..t], &mut base);
        let mut gi = vec![0.0; t];
        let mut gtau = 0.0;
        let mut gij = vec![vec![0.0; t]; t];
        let mut gitau = vec![0.0; t];
        let mut gtautau = 0.0;
        for k in 0..self.kernel.len() {
            let w = self.kernel.node(k);
            for i in 0..t {
                shifted[i] = y[i] - scale * w[i];
            }
            self.domain.profile.gradient_ae_into(&shifted, &mut dpsi);
            let phi = self.kernel.phi[k];
            let chi = self.kernel.chi[k];
            for i in 0..t {
                gi[i] += phi * dpsi[i];
                gtau -= phi * dpsi[i] * w[i] / self.m;
                gitau[i] += (dpsi[i] - base[i]) * chi;
                gtautau += (dpsi[i] - base[i]) * self.kernel.chi_k[k * t + i];
                for j in 0..t {
                    gij[i][j] += dpsi[i] * self.kernel.grad_phi[k * t + j];
                }
            }
        }
        let inv_tau = 1.0 / rho;
        for row in gij.iter_mut() {
            for v in row.iter_mut() {
                *v *= self.m * inv_tau;
            }
        }
        gitau.iter_mut().for_each(|v| *v *= inv_tau);
        gtautau *= -inv_tau / self.m;

        let grad = self.gradient_from(&gi, gtau)?;
        let denom = 1.0 - gtau;
        let mut hess = vec![vec![0.0; d]; d];
        for i in 0..d {
            for j in 0..d {
                let g_ij = if i < t && j < t { gij[i][j] } else { 0.0 };
                let g_it = if i < t { gitau[i] } else { 0.0 };
                let g_jt = if j < t { gitau[j] } else { 0.0 };
                hess[i][j] = (g_ij + g_it * grad[j] + g_jt * grad[i] + gtautau * grad[i] * grad[j]) / denom;
            }
        }
        for i in 0..d {
            for j in i + 1..d {
                let s = 0.5 * (hess[i][j] + hess[j][i]);
                hess[i][j] = s;
                hess[j][i] = s;
            }
        }
        Ok(RegDistJet { rho, grad, hess })
    }

    /// ρ0 and Dρ0 without the Hessian (valid on the boundary as well).
    pub fn value_and_grad(&self, y: &[f64]) -> Result<(f64, Vec<f64>)> {
        let rho = self.regularized_distance(y)?;
        let (gi, gtau) = self.first_order(y, rho);
        Ok((rho, self.gradient_from(&gi, gtau)?))
    }
}

/// Frobenius norm of a square matrix.
pub fn frobenius(m: &[Vec<f64>]) -> f64 {
    m.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
}
