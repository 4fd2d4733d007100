//! Mollifier kernel on the unit ball and one-dimensional quadrature helpers.

use crate::{Error, Result};

/// Unnormalized bump `exp(-1/(1-|w|²))` and the factor `-2/(1-|w|²)²` with `Dφ = φ · factor · w`.
#[inline]
fn bump(r2: f64) -> (f64, f64) {
    if r2 >= 1.0 {
        return (0.0, 0.0);
    }
    let s = 1.0 - r2;
    ((-1.0 / s).exp(), -2.0 / (s * s))
}

/// Smooth radial kernel sampled on a tensor midpoint grid masked to `B_1`, with the
/// derived weight families the regularized-distance derivatives need.
///
/// All weights already include the cell volume and the normalization making `Σ φ = 1`.
#[derive(Debug, Clone)]
pub struct MollifierKernel {
    pub dim: usize,
    pub nodes_per_axis: usize,
    /// Node coordinates, `dim` entries per node.
    pub nodes: Vec<f64>,
    pub phi: Vec<f64>,
    /// `Dφ`, `dim` entries per node.
    pub grad_phi: Vec<f64>,
}

impl MollifierKernel {
    pub fn new(dim: usize, nodes_per_axis: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidParameter(format!("kernel dimension {dim} unsupported")));
        }
        if nodes_per_axis < 3 {
            return Err(Error::InvalidParameter("kernel needs at least 3 nodes per axis".into()));
        }
        let n = nodes_per_axis;
        let h = 2.0 / n as f64;
        let coord = |i: usize| -1.0 + (i as f64 + 0.5) * h;
        let total = n.pow(dim as u32);
        let mut nodes = Vec::new();
        let mut phi = Vec::new();
        let mut grad_phi = Vec::new();
        let mut w = vec![0.0; dim];
        for flat in 0..total {
            let mut rem = flat;
            for c in w.iter_mut() {
                *c = coord(rem % n);
                rem /= n;
            }
            let r2: f64 = w.iter().map(|v| v * v).sum();
            let (val, factor) = bump(r2);
            if val == 0.0 {
                continue;
            }
            nodes.extend_from_slice(&w);
            phi.push(val);
            grad_phi.extend(w.iter().map(|v| val * factor * v));
        }
        let mass: f64 = phi.iter().sum();
        phi.iter_mut().for_each(|v| *v /= mass);
        grad_phi.iter_mut().for_each(|v| *v /= mass);
        Ok(Self { dim, nodes_per_axis, nodes, phi, grad_phi })
    }

    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    #[inline]
    pub fn node(&self, k: usize) -> &[f64] {
        &self.nodes[k * self.dim..(k + 1) * self.dim]
    }

    /// Collapses the last coordinate: weights over `w'` for integrands independent of `w^d`.
    pub fn marginal(&self) -> MarginalKernel {
        let d = self.dim;
        let t = d - 1;
        let mut keys: Vec<Vec<f64>> = Vec::new();
        let mut out = MarginalKernel { tangent_dim: t, ..Default::default() };
        let mut index = std::collections::HashMap::<Vec<u64>, usize>::new();
        for k in 0..self.len() {
            let w = self.node(k);
            let key: Vec<u64> = w[..t].iter().map(|v| v.to_bits()).collect();
            let slot = *index.entry(key).or_insert_with(|| {
                keys.push(w[..t].to_vec());
                out.phi.push(0.0);
                out.grad_phi.extend(std::iter::repeat(0.0).take(t));
                out.chi.push(0.0);
                out.chi_k.extend(std::iter::repeat(0.0).take(t));
                keys.len() - 1
            });
            let phi = self.phi[k];
            let g = &self.grad_phi[k * d..(k + 1) * d];
            let w_dot_g: f64 = w.iter().zip(g).map(|(a, b)| a * b).sum();
            out.phi[slot] += phi;
            for j in 0..t {
                out.grad_phi[slot * t + j] += g[j];
                out.chi_k[slot * t + j] += w[j] * (-(d as f64 + 1.0) * phi - w_dot_g);
            }
            out.chi[slot] += -(d as f64) * phi - w_dot_g;
        }
        out.nodes = keys.into_iter().flatten().collect();
        out
    }
}

/// Kernel weights integrated over the last coordinate.
///
/// `chi` is the marginal of `-dφ - w·Dφ` and `chi_k` of `w_k(-(d+1)φ - w·Dφ)`; both
/// integrate to zero and appear in the second derivatives of the self-mollified graph.
#[derive(Debug, Clone, Default)]
pub struct MarginalKernel {
    pub tangent_dim: usize,
    pub nodes: Vec<f64>,
    pub phi: Vec<f64>,
    pub grad_phi: Vec<f64>,
    pub chi: Vec<f64>,
    pub chi_k: Vec<f64>,
}

impl MarginalKernel {
    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    #[inline]
    pub fn node(&self, k: usize) -> &[f64] {
        &self.nodes[k * self.tangent_dim..(k + 1) * self.tangent_dim]
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Gauss-Legendre rule mapped to `[a, b]`.
pub fn gauss_on(a: f64, b: f64, rule: &(Vec<f64>, Vec<f64>)) -> impl Iterator<Item = (f64, f64)> + '_ {
    let (c, r) = (0.5 * (a + b), 0.5 * (b - a));
    rule.0.iter().zip(&rule.1).map(move |(x, w)| (c + r * x, r * w))
}

/// Composite Simpson weights for `n` (even) equal intervals of width `h`.
pub fn simpson_weights(n: usize, h: f64) -> Vec<f64> {
    assert!(n % 2 == 0 && n > 0, "Simpson needs an even number of intervals");
    (0..=n)
        .map(|i| {
            let c = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            c * h / 3.0
        })
        .collect()
}

/// Running integral `∫_{x_0}^{x_i} f` at every node of a uniform grid.
///
/// Even nodes use composite Simpson; odd nodes add the quadratic-interpolant integral
/// over the last interval, so the whole profile is third-order accurate.
pub fn cumulative_simpson(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    let mut out = vec![0.0; n];
    if n < 2 {
        return out;
    }
    if n == 2 {
        out[1] = 0.5 * h * (values[0] + values[1]);
        return out;
    }
    for i in 1..n {
        if i % 2 == 0 {
            out[i] = out[i - 2] + h / 3.0 * (values[i - 2] + 4.0 * values[i - 1] + values[i]);
        } else if i + 1 < n {
            // first interval of the pair [i-1, i+1]
            out[i] = out[i - 1] + h / 12.0 * (5.0 * values[i - 1] + 8.0 * values[i] - values[i + 1]);
        } else {
            // trailing interval, integrate the parabola through the last three nodes
            out[i] = out[i - 1] + h / 12.0 * (-values[i - 2] + 8.0 * values[i - 1] + 5.0 * values[i]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn kernel_is_normalized_and_symmetric() {
        for d in 1..=3 {
            let k = MollifierKernel::new(d, 17).unwrap();
            assert_abs_diff_eq!(k.phi.iter().sum::<f64>(), 1.0, epsilon = 1e-14);
            for c in 0..d {
                let first: f64 = (0..k.len()).map(|i| k.node(i)[c] * k.phi[i]).sum();
                assert_abs_diff_eq!(first, 0.0, epsilon = 1e-15);
            }
            assert!(k.phi.iter().all(|v| *v >= 0.0));
        }
    }

    #[test]
    fn marginal_moments_vanish() {
        let k = MollifierKernel::new(2, 33).unwrap().marginal();
        assert_abs_diff_eq!(k.phi.iter().sum::<f64>(), 1.0, epsilon = 1e-14);
        // χ is a divergence; its midpoint sum only vanishes up to quadrature error.
        let coarse = k.chi.iter().sum::<f64>().abs();
        let fine = MollifierKernel::new(2, 65).unwrap().marginal().chi.iter().sum::<f64>().abs();
        assert!(coarse < 1e-3 && fine < 0.1 * coarse, "{coarse} {fine}");
        assert_abs_diff_eq!(k.grad_phi.iter().sum::<f64>(), 0.0, epsilon = 1e-12);
        // ∫ w_1 ∂_1 φ = -∫ φ = -1
        let m: f64 = (0..k.len()).map(|i| k.node(i)[0] * k.grad_phi[i]).sum();
        assert_abs_diff_eq!(m, -1.0, epsilon = 1e-3);
    }

    #[test]
    fn gauss_integrates_polynomials() {
        let rule = gauss_legendre(20);
        let s: f64 = gauss_on(0.0, 2.0, &rule).map(|(x, w)| w * x.powi(39)).sum();
        assert_abs_diff_eq!(s / 2f64.powi(40) * 40.0, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn cumulative_simpson_on_cubic() {
        let n = 11;
        let h = 0.1;
        let vals: Vec<f64> = (0..n).map(|i| (i as f64 * h).powi(2)).collect();
        let cum = cumulative_simpson(&vals, h);
        for (i, c) in cum.iter().enumerate() {
            assert_abs_diff_eq!(*c, (i as f64 * h).powi(3) / 3.0, epsilon = 1e-14);
        }
    }
}
