//! Empirical probes of the local and global `W²_p` estimates.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{flatten, solve_oblique, FlattenedProblem, ObliqueProblem, ObliqueSolution, SolveOptions, ZGrid};
use crate::geometry::{ObliqueField, ScalarField};
use crate::norms::{bmo_seminorm, gagliardo_seminorm, BoundaryTrace, GridFunction, NormReport};
use crate::regdist::RegDistField;
use crate::{Error, Result};

/// Value and derivatives of `u` at a node, both in `z` and in `y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhysicalJet {
    pub u: f64,
    pub du: [f64; 2],
    /// `(D_11, D_12, D_22)` in `y`.
    pub d2u: [f64; 3],
    pub dz: [f64; 2],
    pub d2z: [f64; 3],
    /// Trapezoid weight in `z`.
    pub z_weight: f64,
    /// Trapezoid weight in `y`, i.e. divided by `|∂z^d/∂y^d|`.
    pub y_weight: f64,
}

fn first_diff(v: &[f64], h: f64, i: usize) -> f64 {
    let n = v.len();
    if i == 0 {
        (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h)
    } else if i == n - 1 {
        (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * h)
    } else {
        (v[i + 1] - v[i - 1]) / (2.0 * h)
    }
}

fn second_diff(v: &[f64], h: f64, i: usize) -> f64 {
    let n = v.len();
    let h2 = h * h;
    if i == 0 {
        (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) / h2
    } else if i == n - 1 {
        (2.0 * v[n - 1] - 5.0 * v[n - 2] + 4.0 * v[n - 3] - v[n - 4]) / h2
    } else {
        (v[i + 1] - 2.0 * v[i] + v[i - 1]) / h2
    }
}

/// Finite-difference jets of `ũ`, mapped back to `y` with `D²u = Jᵀ D²ũ J + D²ρ0 ∂ũ/∂z^d`.
pub fn physical_jets(flat: &FlattenedProblem, u: &GridFunction) -> Vec<PhysicalJet> {
    let grid = flat.grid;
    let (n1, n2, h1, h2) = (grid.n1, grid.n2, grid.h1(), grid.h2());
    let v = &u.values;
    let row = |j: usize| -> Vec<f64> { (0..n1).map(|i| v[grid.index(i, j)]).collect() };
    let col = |i: usize| -> &[f64] { &v[i * n2..(i + 1) * n2] };
    let mut u1 = vec![0.0; grid.len()];
    let mut u11 = vec![0.0; grid.len()];
    let mut u2 = vec![0.0; grid.len()];
    let mut u22 = vec![0.0; grid.len()];
    for j in 0..n2 {
        let r = row(j);
        for i in 0..n1 {
            u1[grid.index(i, j)] = first_diff(&r, h1, i);
            u11[grid.index(i, j)] = second_diff(&r, h1, i);
        }
    }
    for i in 0..n1 {
        let c = col(i);
        for j in 0..n2 {
            u2[grid.index(i, j)] = first_diff(c, h2, j);
            u22[grid.index(i, j)] = second_diff(c, h2, j);
        }
    }
    let mut u12 = vec![0.0; grid.len()];
    for j in 0..n2 {
        let r: Vec<f64> = (0..n1).map(|i| u2[grid.index(i, j)]).collect();
        for i in 0..n1 {
            u12[grid.index(i, j)] = first_diff(&r, h1, i);
        }
    }
    (0..grid.len())
        .map(|k| {
            let (i, j) = (k / n2, k % n2);
            let [r1, r2] = flat.jac[k];
            let [q11, q12, q22] = flat.hess[k];
            let (a, b, c, d) = (u11[k], u12[k], u22[k], u2[k]);
            let d11 = a + 2.0 * r1 * b + r1 * r1 * c + q11 * d;
            let d12 = r2 * b + r1 * r2 * c + q12 * d;
            let d22 = r2 * r2 * c + q22 * d;
            let wi = if i == 0 || i == n1 - 1 { 0.5 } else { 1.0 };
            let wj = if j == 0 || j == n2 - 1 { 0.5 } else { 1.0 };
            let zw = wi * wj * h1 * h2;
            PhysicalJet {
                u: v[k],
                du: [u1[k] + r1 * d, r2 * d],
                d2u: [d11, d12, d22],
                dz: [u1[k], d],
                d2z: [a, b, c],
                z_weight: zw,
                y_weight: zw / r2.abs(),
            }
        })
        .collect()
}

/// `(Σ w |v|^p)^{1/p}` over `(value, weight)` pairs.
pub fn weighted_lp(items: impl Iterator<Item = (f64, f64)>, p: f64) -> f64 {
    items.map(|(v, w)| w * v.abs().powf(p)).sum::<f64>().powf(1.0 / p)
}

fn frob3(m: [f64; 3]) -> f64 {
    (m[0] * m[0] + 2.0 * m[1] * m[1] + m[2] * m[2]).sqrt()
}

fn norm2(v: [f64; 2]) -> f64 {
    (v[0] * v[0] + v[1] * v[1]).sqrt()
}

/// Lemma-type local probe: solves `Lu = f` with `∂u/∂y^d = 0` on `Γ` and zero Dirichlet data
/// on the rest of the z-rectangle `[-r, r] × [0, r]`.
///
/// Entries: `local_ratio = ‖D²u‖_{p,Ω_{r/2}} / (r^{-2}‖u‖_{p,Ω_r} + ‖f‖_{p,Ω_r})`,
/// `hardy_term_ratio = ‖a_ij D_ij ρ0 ∂ũ/∂z^d‖_p / ‖D²_z ũ‖_p` and
/// `hardy_quotient = ‖(1/z^d) ∂ũ/∂z^d‖_p / ‖D²_z ũ‖_p`.
pub fn probe_model_problem(
    regdist: &RegDistField,
    operator: &super::EllipticOperator,
    f: ScalarField,
    r: f64,
    n: usize,
    p: f64,
    options: &SolveOptions,
) -> Result<NormReport> {
    if !(p >= 1.0) {
        return Err(Error::InvalidParameter(format!("p = {p} must be ≥ 1")));
    }
    let grid = ZGrid::square(n, r, r);
    let flat = flatten(operator, regdist, grid)?;
    let zero: ScalarField = Arc::new(|_| 0.0);
    let problem = ObliqueProblem {
        operator: operator.clone(),
        f: f.clone(),
        bc: ObliqueField::constant(vec![0.0, 1.0], 0.0),
        g: zero.clone(),
        dirichlet: zero,
    };
    let sol = solve_oblique(&problem, &flat, &regdist.domain, options)?;
    let jets = physical_jets(&flat, &sol.u);
    let half = |k: usize| {
        let z = grid.z(k / grid.n2, k % grid.n2);
        z[0].abs() <= 0.5 * r + 1e-12 && z[1] <= 0.5 * r + 1e-12
    };
    let d2_half = weighted_lp(jets.iter().enumerate().filter(|(k, _)| half(*k)).map(|(_, j)| (frob3(j.d2u), j.y_weight)), p);
    let u_lp = weighted_lp(jets.iter().map(|j| (j.u, j.y_weight)), p);
    let f_lp = weighted_lp(flat.y.iter().zip(&jets).map(|(y, j)| (f(y), j.y_weight)), p);
    let denom = u_lp / (r * r) + f_lp;
    let ratio = if denom > 0.0 { d2_half / denom } else { 0.0 };
    let d2z = weighted_lp(jets.iter().map(|j| (frob3(j.d2z), j.z_weight)), p);
    let singular = weighted_lp(jets.iter().zip(&flat.singular).map(|(j, c)| (c * j.dz[1], j.z_weight)), p);
    let quotient = weighted_lp(
        jets.iter()
            .enumerate()
            .filter(|(k, _)| k % grid.n2 > 0)
            .map(|(k, j)| (j.dz[1] / grid.z(k / grid.n2, k % grid.n2)[1], j.z_weight)),
        p,
    );
    let safe = |a: f64| if d2z > 0.0 { a / d2z } else { 0.0 };
    let res = format!("{n}x{n}, h = {:.3e}", grid.h1());
    let mut report = NormReport::new("model-problem probe");
    report.push("local_ratio", ratio, res.clone());
    report.push("d2u_half_lp", d2_half, res.clone());
    report.push("u_lp", u_lp, res.clone());
    report.push("f_lp", f_lp, res.clone());
    report.push("hardy_term_ratio", safe(singular), res.clone());
    report.push("hardy_quotient", safe(quotient), res.clone());
    report.push("picard_iterations", sol.picard_changes.len() as f64, res.clone());
    report.push("frame_conditioning", flat.conditioning, res);
    report.verdict("local_ratio_finite", ratio.is_finite(), format!("{ratio:.6e}"));
    report.meta("r", r);
    report.meta("p", p);
    report.meta("grid", n);
    report.meta("eps0", regdist.domain.lip_bound);
    report.meta("delta", regdist.domain.delta);
    for w in sol.warnings {
        report.warn(w);
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MainEstimateSettings {
    pub p: f64,
    /// BMO smallness threshold; the check compares against `δθ`.
    pub theta: f64,
    pub options: SolveOptions,
}

impl Default for MainEstimateSettings {
    fn default() -> Self {
        Self { p: 2.0, theta: 0.1, options: SolveOptions { lenient: true, ..Default::default() } }
    }
}

fn boundary_trace(flat: &FlattenedProblem, values: &[f64]) -> Result<BoundaryTrace> {
    let grid = flat.grid;
    let mut s = Vec::with_capacity(grid.n1);
    let mut acc = 0.0;
    for i in 0..grid.n1 {
        let y = flat.y[grid.index(i, 0)];
        if i > 0 {
            let q = flat.y[grid.index(i - 1, 0)];
            acc += ((y[0] - q[0]).powi(2) + (y[1] - q[1]).powi(2)).sqrt();
        }
        s.push(acc);
    }
    BoundaryTrace::from_arclength(s, values.to_vec())
}

/// Global probe: solves the full oblique problem and measures
/// `N_emp = ‖u‖_{W²_p} / (‖u‖_p + ‖f‖_p + ‖g‖_{W^{1-1/p}_p(Γ)})`.
///
/// Hypothesis failures become warnings. The report also carries the boundary norms of the
/// frozen-coefficient remainder `h = g - (b - b(x0))·Du - b0 u`, with `x0` above the origin.
pub fn probe_main_estimate(
    problem: &ObliqueProblem,
    regdist: &RegDistField,
    grid: ZGrid,
    settings: &MainEstimateSettings,
) -> Result<(NormReport, ObliqueSolution, FlattenedProblem)> {
    let p = settings.p;
    if !(p > 1.0) {
        return Err(Error::InvalidParameter(format!("p = {p} must exceed 1")));
    }
    let domain = &regdist.domain;
    let mut report = NormReport::new("main-estimate probe");
    let mut hypotheses = Vec::new();
    if let Err(e) = domain.verify_lipschitz() {
        hypotheses.push(format!("small-Lipschitz hypothesis: {e}"));
    }
    if problem.bc.holder_exponent <= 1.0 - 1.0 / p {
        hypotheses.push(format!("b is C^{} but the estimate needs α > 1 - 1/p = {}", problem.bc.holder_exponent, 1.0 - 1.0 / p));
    }
    let flat = flatten(&problem.operator, regdist, grid)?;
    // BMO of a_ij on a coarse grid over the physical region
    let ys = &flat.y;
    let (x0, x1) = (-grid.half_width, grid.half_width);
    let ylo = ys.iter().map(|y| y[1]).fold(f64::INFINITY, f64::min);
    let yhi = ys.iter().map(|y| y[1]).fold(f64::NEG_INFINITY, f64::max);
    let nb = 25;
    let spacing = vec![(x1 - x0) / (nb - 1) as f64, (yhi - ylo) / (nb - 1) as f64];
    let mut bmo = 0.0f64;
    for (a, b) in [(0, 0), (0, 1), (1, 1)] {
        let op = problem.operator.clone();
        let gf = GridFunction::from_fn(vec![x0, ylo], spacing.clone(), vec![nb, nb], move |y| (op.a)(y)[a][b], |y| domain.contains(y))?;
        bmo = bmo.max(bmo_seminorm(&gf, 0.5 * (x1 - x0))?.value);
    }
    if bmo > domain.delta * settings.theta {
        hypotheses.push(format!("BMO seminorm {bmo:.3e} of a_ij exceeds δθ = {:.3e}", domain.delta * settings.theta));
    }
    let sol = solve_oblique(problem, &flat, domain, &SolveOptions { lenient: true, ..settings.options })?;
    hypotheses.extend(sol.warnings.iter().cloned());
    let jets = physical_jets(&flat, &sol.u);
    let u_lp = weighted_lp(jets.iter().map(|j| (j.u, j.y_weight)), p);
    let du_lp = weighted_lp(jets.iter().map(|j| (norm2(j.du), j.y_weight)), p);
    let d2u_lp = weighted_lp(jets.iter().map(|j| (frob3(j.d2u), j.y_weight)), p);
    let w2p = (u_lp.powf(p) + du_lp.powf(p) + d2u_lp.powf(p)).powf(1.0 / p);
    let f_lp = weighted_lp(flat.y.iter().zip(&jets).map(|(y, j)| ((problem.f)(y), j.y_weight)), p);
    let boundary: Vec<usize> = (0..grid.n1).map(|i| grid.index(i, 0)).collect();
    let g_vals: Vec<f64> = boundary.iter().map(|&k| (problem.g)(&flat.y[k])).collect();
    let g_trace = boundary_trace(&flat, &g_vals)?;
    let g_lp = g_trace.lp_norm(p)?;
    let g_semi = gagliardo_seminorm(&g_trace, p)?;
    let denom = u_lp + f_lp + g_lp + g_semi;
    let n_emp = w2p / denom.max(f64::MIN_POSITIVE);
    // frozen-coefficient remainder
    let x0_pt = [0.0, domain.psi(&[0.0])];
    let b_ref = (problem.bc.b)(&x0_pt);
    let h_vals: Vec<f64> = boundary
        .iter()
        .map(|&k| {
            let y = flat.y[k];
            let b = (problem.bc.b)(&y);
            let j = jets[k];
            (problem.g)(&y) - (b[0] - b_ref[0]) * j.du[0] - (b[1] - b_ref[1]) * j.du[1] - (problem.bc.b0)(&y) * j.u
        })
        .collect();
    let h_trace = boundary_trace(&flat, &h_vals)?;
    let res = format!("{}x{}, h = {:.3e}", grid.n1, grid.n2, grid.h1());
    report.push("n_emp", n_emp, res.clone());
    report.push("u_w2p", w2p, res.clone());
    report.push("u_lp", u_lp, res.clone());
    report.push("du_lp", du_lp, res.clone());
    report.push("d2u_lp", d2u_lp, res.clone());
    report.push("f_lp", f_lp, res.clone());
    report.push("g_lp", g_lp, res.clone());
    report.push("g_seminorm", g_semi, res.clone());
    report.push("h_lp", h_trace.lp_norm(p)?, res.clone());
    report.push("h_seminorm", gagliardo_seminorm(&h_trace, p)?, res.clone());
    report.push("bmo_a", bmo, res.clone());
    report.push("obliqueness", sol.obliqueness, res.clone());
    report.push("picard_iterations", sol.picard_changes.len() as f64, res);
    report.verdict("hypotheses", hypotheses.is_empty(), hypotheses.join("; "));
    report.meta("p", p);
    report.meta("grid", [grid.n1, grid.n2]);
    for h in hypotheses {
        report.warn(h);
    }
    Ok((report, sol, flat))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MmsStudy {
    pub sizes: Vec<usize>,
    pub max_errors: Vec<f64>,
    /// `log2(e_k / e_{k+1})`
    pub orders: Vec<f64>,
    pub n_emp: Vec<f64>,
}

impl MmsStudy {
    pub fn min_order(&self) -> f64 {
        self.orders.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `max N_emp / min N_emp`.
    pub fn n_emp_spread(&self) -> f64 {
        let hi = self.n_emp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = self.n_emp.iter().copied().fold(f64::INFINITY, f64::min);
        hi / lo
    }
}

/// Manufactured-solution study over square grids of the given sizes, each doubling the last.
pub fn mms_study(
    problem: &ObliqueProblem,
    exact: &(dyn Fn(&[f64]) -> f64 + Sync),
    regdist: &RegDistField,
    sizes: &[usize],
    half_width: f64,
    height: f64,
    settings: &MainEstimateSettings,
) -> Result<MmsStudy> {
    let mut max_errors = Vec::new();
    let mut n_emp = Vec::new();
    for &n in sizes {
        let grid = ZGrid::square(n, half_width, height);
        let (report, sol, flat) = probe_main_estimate(problem, regdist, grid, settings)?;
        let err = flat.y.iter().zip(&sol.u.values).map(|(y, u)| (u - exact(y)).abs()).fold(0.0, f64::max);
        max_errors.push(err);
        n_emp.push(report.get("n_emp").unwrap_or(f64::NAN));
    }
    let orders = max_errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    Ok(MmsStudy { sizes: sizes.to_vec(), max_errors, orders, n_emp })
}
