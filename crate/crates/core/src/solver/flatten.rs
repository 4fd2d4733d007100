//! The change of variables `z' = y'`, `z^d = ρ0(y)` onto a rectangle below `Γ`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::operator::{ellipticity_of_matrices, EllipticOperator, EllipticityReport};
use crate::regdist::RegDistField;
use crate::{Error, Result};

/// Rectangle `[-half_width, half_width] × [0, height]` in `z` with `n1 × n2` nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZGrid {
    pub n1: usize,
    pub n2: usize,
    pub half_width: f64,
    pub height: f64,
}

impl ZGrid {
    pub fn square(n: usize, half_width: f64, height: f64) -> Self {
        Self { n1: n, n2: n, half_width, height }
    }

    pub fn h1(&self) -> f64 {
        2.0 * self.half_width / (self.n1 - 1) as f64
    }

    pub fn h2(&self) -> f64 {
        self.height / (self.n2 - 1) as f64
    }

    pub fn len(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n2 + j
    }

    pub fn z(&self, i: usize, j: usize) -> [f64; 2] {
        [-self.half_width + i as f64 * self.h1(), j as f64 * self.h2()]
    }

    fn validate(&self) -> Result<()> {
        if self.n1 < 5 || self.n2 < 5 {
            return Err(Error::InvalidParameter("grids need at least 5 nodes per axis".into()));
        }
        if !(self.half_width > 0.0 && self.height > 0.0) {
            return Err(Error::InvalidParameter("grid extents must be positive".into()));
        }
        Ok(())
    }
}

/// Coefficients of the equation in `z`, with the singular coupling kept apart.
#[derive(Debug, Clone)]
pub struct FlattenedProblem {
    pub grid: ZGrid,
    /// Physical point of every node.
    pub y: Vec<[f64; 2]>,
    /// `Dρ0`.
    pub jac: Vec<[f64; 2]>,
    /// `(D_11 ρ0, D_12 ρ0, D_22 ρ0)`; the boundary row copies the first interior row.
    pub hess: Vec<[f64; 3]>,
    /// `J a Jᵀ` with `J = ∂z/∂y`.
    pub a_tilde: Vec<[[f64; 2]; 2]>,
    /// `J a_i`.
    pub drift_tilde: Vec<[f64; 2]>,
    pub a0: Vec<f64>,
    /// `a_ij D_ij ρ0`, multiplying `∂ũ/∂z^d`.
    pub singular: Vec<f64>,
    pub ellipticity: EllipticityReport,
    /// `λ_max / λ_min` of `ã` over the grid.
    pub conditioning: f64,
}

/// Solves `ρ0(x, y) = target` for `y` below `start`, with `ρ0` decreasing in `y`.
fn invert_fiber(rd: &RegDistField, x: f64, target: f64, start: f64, step: f64) -> Result<f64> {
    let tol = 1e-13 * (1.0 + target.abs());
    let f = |y: f64| rd.regularized_distance(&[x, y]).map(|r| r - target);
    // bracket: hi has ρ0 < target, lo has ρ0 > target
    let mut hi = start;
    let mut lo = start - step;
    let mut flo = f(lo)?;
    let mut grow = step;
    let mut tries = 0;
    while flo <= 0.0 {
        hi = lo;
        grow *= 2.0;
        lo -= grow;
        flo = f(lo)?;
        tries += 1;
        if tries > 60 {
            return Err(Error::Flattening(format!("no bracket for ρ0 = {target} on the fiber x = {x}")));
        }
    }
    let mut y = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (r, g) = rd.value_and_grad(&[x, y])?;
        let val = r - target;
        if val.abs() <= tol {
            return Ok(y);
        }
        if val > 0.0 {
            lo = y;
        } else {
            hi = y;
        }
        let newton = y - val / g[1];
        y = if g[1] < 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo < 1e-15 * (1.0 + y.abs()) {
            return Ok(y);
        }
    }
    Ok(y)
}

pub fn flatten(op: &EllipticOperator, regdist: &RegDistField, grid: ZGrid) -> Result<FlattenedProblem> {
    grid.validate()?;
    if regdist.domain.dim != 2 {
        return Err(Error::Precondition("the solver is two-dimensional".into()));
    }
    let (n1, n2, h2) = (grid.n1, grid.n2, grid.h2());
    let columns = (0..n1)
        .into_par_iter()
        .map(|i| -> Result<Vec<([f64; 2], [f64; 2], [f64; 3])>> {
            let x = grid.z(i, 0)[0];
            let top = regdist.domain.psi(&[x]);
            let mut out = Vec::with_capacity(n2);
            let (_, g0) = regdist.value_and_grad(&[x, top])?;
            out.push(([x, top], [g0[0], g0[1]], [0.0; 3]));
            let mut prev = top;
            let mut slope = g0[1];
            for j in 1..n2 {
                let target = j as f64 * h2;
                let step = (h2 / slope.abs().max(1e-3)).max(1e-12);
                let y = invert_fiber(regdist, x, target, prev, step)?;
                let jet = regdist.jet(&[x, y])?;
                if !(y < prev) || !(jet.grad[1] < 0.0) {
                    return Err(Error::Flattening(format!(
                        "ρ0 is not monotone along the fiber x = {x} near y = {y}"
                    )));
                }
                out.push(([x, y], [jet.grad[0], jet.grad[1]], [jet.hess[0][0], jet.hess[0][1], jet.hess[1][1]]));
                prev = y;
                slope = jet.grad[1];
            }
            out[0].2 = out[1].2;
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    let n = grid.len();
    let mut y = Vec::with_capacity(n);
    let mut jac = Vec::with_capacity(n);
    let mut hess = Vec::with_capacity(n);
    for col in columns {
        for (p, g, h) in col {
            y.push(p);
            jac.push(g);
            hess.push(h);
        }
    }
    let mut a_tilde = Vec::with_capacity(n);
    let mut drift_tilde = Vec::with_capacity(n);
    let mut a0 = Vec::with_capacity(n);
    let mut singular = Vec::with_capacity(n);
    for k in 0..n {
        let a = (op.a)(&y[k]);
        let b = (op.drift)(&y[k]);
        let [r1, r2] = jac[k];
        let jm = [[1.0, 0.0], [r1, r2]];
        let mut at = [[0.0; 2]; 2];
        for p in 0..2 {
            for q in 0..2 {
                at[p][q] = (0..2).map(|i| (0..2).map(|j| jm[p][i] * a[i][j] * jm[q][j]).sum::<f64>()).sum();
            }
        }
        at[1][0] = at[0][1];
        a_tilde.push(at);
        drift_tilde.push([b[0], r1 * b[0] + r2 * b[1]]);
        a0.push((op.a0)(&y[k]));
        let [h11, h12, h22] = hess[k];
        singular.push(a[0][0] * h11 + (a[0][1] + a[1][0]) * h12 + a[1][1] * h22);
    }
    let ellipticity = ellipticity_of_matrices(&a_tilde, op.nu * op.nu)?;
    let conditioning = ellipticity.max_eigenvalue / ellipticity.min_eigenvalue;
    Ok(FlattenedProblem { grid, y, jac, hess, a_tilde, drift_tilde, a0, singular, ellipticity, conditioning })
}
