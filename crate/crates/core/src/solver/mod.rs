//! Finite-difference solver for `Lu = f`, `b·Du + b0 u = g` on planar graph domains,
//! working in the flattened coordinates `z = (y', ρ0(y))`.

mod flatten;
mod operator;
mod probe;
mod sparse;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{GraphDomain, ObliqueField, ScalarField};
use crate::norms::{sobolev_norms, GridFunction};
use crate::{Error, Result};

pub use flatten::{flatten, FlattenedProblem, ZGrid};
pub use operator::{check_ellipticity, ellipticity_of_matrices, symmetric_eigenvalues, EllipticOperator, EllipticityReport, MatrixField};
pub use probe::{
    mms_study, physical_jets, probe_main_estimate, probe_model_problem, weighted_lp, MainEstimateSettings, MmsStudy, PhysicalJet,
};
pub use sparse::{bicgstab, BandedLu, CsrMatrix, SolveMethod, SolveStats, SolverSettings, SparseSystem};

/// Data of the boundary value problem. `dirichlet` closes the artificial sides and bottom.
#[derive(Clone)]
pub struct ObliqueProblem {
    pub operator: EllipticOperator,
    pub f: ScalarField,
    pub bc: ObliqueField,
    pub g: ScalarField,
    pub dirichlet: ScalarField,
}

impl std::fmt::Debug for ObliqueProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ObliqueProblem").field("operator", &self.operator).field("bc", &self.bc).finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub solver: SolverSettings,
    /// Relative `W²_2` change that ends the Picard loop on the singular term.
    pub picard_tol: f64,
    pub max_picard: usize,
    /// Turn precondition failures into warnings instead of errors.
    pub lenient: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { solver: SolverSettings::default(), picard_tol: 1e-8, max_picard: 60, lenient: false }
    }
}

#[derive(Debug, Clone)]
pub struct ObliqueSolution {
    /// `ũ` on the z-grid.
    pub u: GridFunction,
    pub picard_changes: Vec<f64>,
    pub stats: Vec<SolveStats>,
    pub warnings: Vec<String>,
    /// `min b·ν/|b|` with `ν = (-Dψ, 1)/√(1+|Dψ|²)` over the boundary columns.
    pub obliqueness: f64,
}

/// Physical outward normal of `{y^d < ψ}` at `(x, ψ(x))`, or `None` at a kink.
fn physical_normal(domain: &GraphDomain, x: f64) -> Option<[f64; 2]> {
    let g = domain.profile.gradient(&[x])?[0];
    let s = (1.0 + g * g).sqrt();
    Some([-g / s, 1.0 / s])
}

fn precondition(msg: String, lenient: bool, warnings: &mut Vec<String>) -> Result<()> {
    if lenient {
        warnings.push(msg);
        Ok(())
    } else {
        Err(Error::Precondition(msg))
    }
}

fn check_problem(problem: &ObliqueProblem, flat: &FlattenedProblem, domain: &GraphDomain, lenient: bool) -> Result<(f64, Vec<String>)> {
    let grid = flat.grid;
    let mut warnings = Vec::new();
    let mut ratio = f64::INFINITY;
    for i in 0..grid.n1 {
        let y = flat.y[grid.index(i, 0)];
        let b = (problem.bc.b)(&y);
        let bn = (b[0] * b[0] + b[1] * b[1]).sqrt();
        if bn == 0.0 {
            return Err(Error::DegenerateField(format!("b vanishes at {y:?}")));
        }
        if let Some(nu) = physical_normal(domain, y[0]) {
            ratio = ratio.min((b[0] * nu[0] + b[1] * nu[1]) / bn);
        }
    }
    if !(ratio >= domain.delta) {
        precondition(format!("obliqueness b·ν ≥ δ|b| fails: min ratio {ratio:.4} < δ = {}", domain.delta), lenient, &mut warnings)?;
    }
    let ell = check_ellipticity(&problem.operator, &flat.y)?;
    if !ell.pass {
        precondition(
            format!("ellipticity fails: eigenvalues in [{:.4}, {:.4}] for ν = {}", ell.min_eigenvalue, ell.max_eigenvalue, problem.operator.nu),
            lenient,
            &mut warnings,
        )?;
    }
    let a0_max = flat.a0.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let b0: Vec<f64> = (0..grid.n1).map(|i| (problem.bc.b0)(&flat.y[grid.index(i, 0)])).collect();
    let b0_min = b0.iter().copied().fold(f64::INFINITY, f64::min);
    if a0_max > 0.0 || b0_min < 0.0 {
        precondition(format!("sign conditions fail: max a0 = {a0_max}, min b0 = {b0_min}"), lenient, &mut warnings)?;
    }
    if a0_max == 0.0 && flat.a0.iter().all(|v| *v == 0.0) && b0.iter().all(|v| *v == 0.0) {
        warnings.push("a0 ≡ 0 and b0 ≡ 0; uniqueness relies on the Dirichlet closure".into());
    }
    Ok((ratio, warnings))
}

/// Rows of the discrete system and the part of the right-hand side that does not change
/// during the Picard loop.
fn assemble(problem: &ObliqueProblem, flat: &FlattenedProblem) -> Result<(CsrMatrix, Vec<f64>)> {
    let grid = flat.grid;
    let (n1, n2) = (grid.n1, grid.n2);
    let (h1, h2) = (grid.h1(), grid.h2());
    let rows: Vec<(Vec<(usize, f64)>, f64)> = (0..grid.len())
        .into_par_iter()
        .map(|k| -> Result<(Vec<(usize, f64)>, f64)> {
            let (i, j) = (k / n2, k % n2);
            let y = flat.y[k];
            if i == 0 || i == n1 - 1 || j == n2 - 1 {
                return Ok((vec![(k, 1.0)], (problem.dirichlet)(&y)));
            }
            if j == 0 {
                let b = (problem.bc.b)(&y);
                let [r1, r2] = flat.jac[k];
                let bt = [b[0], r1 * b[0] + r2 * b[1]];
                if !(bt[1] < 0.0) {
                    return Err(Error::Precondition(format!("b does not point out of the domain at {y:?}")));
                }
                // ũ(P) - ũ(P - s b̃) with the foot on the first interior row
                let s = h2 / (-bt[1]);
                let foot = (grid.z(i, 0)[0] - s * bt[0] + grid.half_width) / h1;
                let il = (foot.floor().max(0.0) as usize).min(n1 - 2);
                let theta = (foot - il as f64).clamp(0.0, 1.0);
                let b0 = (problem.bc.b0)(&y);
                let row = vec![
                    (k, 1.0 / s + b0),
                    (grid.index(il, 1), -(1.0 - theta) / s),
                    (grid.index(il + 1, 1), -theta / s),
                ];
                return Ok((row, (problem.g)(&y)));
            }
            let at = flat.a_tilde[k];
            let dt = flat.drift_tilde[k];
            let c11 = at[0][0] / (h1 * h1);
            let c22 = at[1][1] / (h2 * h2);
            let c12 = 2.0 * at[0][1] / (4.0 * h1 * h2);
            let d1 = dt[0] / (2.0 * h1);
            let d2 = dt[1] / (2.0 * h2);
            let idx = |di: isize, dj: isize| grid.index((i as isize + di) as usize, (j as isize + dj) as usize);
            let row = vec![
                (k, -2.0 * c11 - 2.0 * c22 + flat.a0[k]),
                (idx(1, 0), c11 + d1),
                (idx(-1, 0), c11 - d1),
                (idx(0, 1), c22 + d2),
                (idx(0, -1), c22 - d2),
                (idx(1, 1), c12),
                (idx(-1, -1), c12),
                (idx(1, -1), -c12),
                (idx(-1, 1), -c12),
            ];
            Ok((row, (problem.f)(&y)))
        })
        .collect::<Result<Vec<_>>>()?;
    let (rows, rhs): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    Ok((CsrMatrix::from_rows(rows)?, rhs))
}

/// `∂ũ/∂z^d` by central differences on interior rows.
fn vertical_derivative(u: &[f64], grid: ZGrid, i: usize, j: usize) -> f64 {
    (u[grid.index(i, j + 1)] - u[grid.index(i, j - 1)]) / (2.0 * grid.h2())
}

fn z_grid_function(grid: ZGrid, values: Vec<f64>) -> Result<GridFunction> {
    GridFunction::new(
        vec![-grid.half_width, 0.0],
        vec![grid.h1(), grid.h2()],
        vec![grid.n1, grid.n2],
        values,
        vec![true; grid.len()],
    )
}

/// Solves the flattened problem, iterating on `f̃ = f - a_ij D_ij ρ0 ∂ũ/∂z^d`.
pub fn solve_oblique(problem: &ObliqueProblem, flat: &FlattenedProblem, domain: &GraphDomain, options: &SolveOptions) -> Result<ObliqueSolution> {
    let (obliqueness, mut warnings) = check_problem(problem, flat, domain, options.lenient)?;
    let grid = flat.grid;
    let (matrix, base_rhs) = assemble(problem, flat)?;
    let mut system = SparseSystem::new(matrix, options.solver);
    let mut u = vec![0.0; grid.len()];
    let mut stats = vec![system.solve(&base_rhs, &mut u)?];
    let mut changes = Vec::new();
    let interior: Vec<usize> = (0..grid.len())
        .filter(|&k| {
            let (i, j) = (k / grid.n2, k % grid.n2);
            i > 0 && i < grid.n1 - 1 && j > 0 && j < grid.n2 - 1 && flat.singular[k] != 0.0
        })
        .collect();
    if !interior.is_empty() {
        let mut growth = 0;
        loop {
            let mut rhs = base_rhs.clone();
            for &k in &interior {
                rhs[k] -= flat.singular[k] * vertical_derivative(&u, grid, k / grid.n2, k % grid.n2);
            }
            let mut next = u.clone();
            stats.push(system.solve(&rhs, &mut next)?);
            let diff: Vec<f64> = next.iter().zip(&u).map(|(a, b)| a - b).collect();
            let dn = sobolev_norms(&z_grid_function(grid, diff)?, 2.0)?.w2p;
            let un = sobolev_norms(&z_grid_function(grid, next.clone())?, 2.0)?.w2p;
            let change = dn / un.max(f64::MIN_POSITIVE);
            u = next;
            if let Some(&last) = changes.last() {
                growth = if change > last { growth + 1 } else { 0 };
            }
            changes.push(change);
            if change <= options.picard_tol {
                break;
            }
            if !change.is_finite() || growth >= 3 || changes.len() >= options.max_picard {
                let message = format!("Picard iteration on the singular term diverges: smallness violated (last change {change:.3e})");
                if options.lenient && change.is_finite() {
                    warnings.push(message);
                    break;
                }
                return Err(Error::Solver { message, residuals: changes });
            }
        }
    }
    Ok(ObliqueSolution { u: z_grid_function(grid, u)?, picard_changes: changes, stats, warnings, obliqueness })
}

#[cfg(test)]
mod tests;
