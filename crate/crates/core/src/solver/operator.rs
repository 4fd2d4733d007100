use std::sync::Arc;

use serde::Serialize;

use crate::geometry::{ScalarField, VectorField};
use crate::{Error, Result};

pub type MatrixField = Arc<dyn Fn(&[f64]) -> [[f64; 2]; 2] + Send + Sync>;

/// `Lu = a_ij D_ij u + a_i D_i u + a0 u` in two dimensions.
#[derive(Clone)]
pub struct EllipticOperator {
    pub a: MatrixField,
    pub drift: VectorField,
    pub a0: ScalarField,
    pub nu: f64,
}

impl std::fmt::Debug for EllipticOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EllipticOperator").field("nu", &self.nu).finish()
    }
}

impl EllipticOperator {
    pub fn laplacian() -> Self {
        Self::constant([[1.0, 0.0], [0.0, 1.0]], [0.0, 0.0], 0.0, 1.0)
    }

    pub fn constant(a: [[f64; 2]; 2], drift: [f64; 2], a0: f64, nu: f64) -> Self {
        Self {
            a: Arc::new(move |_| a),
            drift: Arc::new(move |_| drift.to_vec()),
            a0: Arc::new(move |_| a0),
            nu,
        }
    }
}

/// Eigenvalues of a symmetric 2×2 matrix, ascending.
pub fn symmetric_eigenvalues(m: [[f64; 2]; 2]) -> (f64, f64) {
    let mean = 0.5 * (m[0][0] + m[1][1]);
    let diff = 0.5 * (m[0][0] - m[1][1]);
    let rad = (diff * diff + m[0][1] * m[0][1]).sqrt();
    (mean - rad, mean + rad)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EllipticityReport {
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    /// `min(λ_min, 1/λ_max)`
    pub measured_nu: f64,
    pub pass: bool,
}

/// Eigenvalue bounds of symmetric matrices against `ν`.
pub fn ellipticity_of_matrices(mats: &[[[f64; 2]; 2]], nu: f64) -> Result<EllipticityReport> {
    if !(nu > 0.0 && nu <= 1.0) {
        return Err(Error::InvalidParameter(format!("ν = {nu} must lie in (0, 1]")));
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for m in mats {
        if (m[0][1] - m[1][0]).abs() > 1e-12 * (1.0 + m[0][1].abs()) {
            return Err(Error::InvalidInput(format!("matrix {m:?} is not symmetric")));
        }
        let (l, h) = symmetric_eigenvalues(*m);
        lo = lo.min(l);
        hi = hi.max(h);
    }
    Ok(EllipticityReport {
        min_eigenvalue: lo,
        max_eigenvalue: hi,
        measured_nu: lo.min(1.0 / hi),
        pass: lo >= nu * (1.0 - 1e-12) && hi <= (1.0 + 1e-12) / nu,
    })
}

pub fn check_ellipticity(op: &EllipticOperator, points: &[[f64; 2]]) -> Result<EllipticityReport> {
    let mats: Vec<_> = points.iter().map(|y| (op.a)(y)).collect();
    ellipticity_of_matrices(&mats, op.nu)
}
