use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use super::config::{DatumSpec, ExampleKind, ExperimentConfig, ExperimentKind, Manufactured, ResolvedTolerances};
use crate::counterexamples::{certify_cusp, certify_wedge, cusp_window, CuspExample, WedgeExample};
use crate::extension::{datum_from_samples, extend_neumann, BoundaryDatum, ExtensionSettings};
use crate::geometry::{cyl_neighborhood, DomainConfig, GraphDomain, ObliqueField, ScalarField};
use crate::mollification::{verify_young_bounds, MollifiedField};
use crate::norms::{GridFunction, NormReport};
use crate::regdist::{frobenius, RegDistField};
use crate::solver::{probe_main_estimate, probe_model_problem, EllipticOperator, MainEstimateSettings, ObliqueProblem, SolveOptions, ZGrid};
use crate::{Error, Result};

/// Verdicts that record probed hypothesis violations; they never fail a run.
pub const SOFT_VERDICTS: &[&str] = &["hypotheses"];

/// One point of the sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub id: usize,
    pub p: f64,
    pub n: Option<usize>,
    pub params: BTreeMap<String, f64>,
}

impl Cell {
    /// All parameters as one ordered map, `p` and `n` included.
    pub fn labels(&self) -> BTreeMap<String, f64> {
        let mut all = self.params.clone();
        all.insert("p".into(), self.p);
        if let Some(n) = self.n {
            all.insert("n".into(), n as f64);
        }
        all
    }
}

/// Report plus named CSV artifacts of a finished cell.
#[derive(Debug, Clone)]
pub struct CellOutput {
    pub report: NormReport,
    pub artifacts: Vec<(String, String)>,
}

/// Cartesian product of `p`, `n` and the sweep axes; empty when any axis is empty.
pub fn expand_cells(config: &ExperimentConfig) -> Vec<Cell> {
    let ns: Vec<Option<usize>> = if config.n.is_empty() { vec![None] } else { config.n.iter().map(|&n| Some(n)).collect() };
    let mut cells = Vec::new();
    let mut combos: Vec<BTreeMap<String, f64>> = vec![BTreeMap::new()];
    for (axis, values) in &config.sweep {
        combos = combos
            .into_iter()
            .flat_map(|c| {
                values.iter().map(move |&v| {
                    let mut c = c.clone();
                    c.insert(axis.clone(), v);
                    c
                })
            })
            .collect();
    }
    for &p in &config.p {
        for &n in &ns {
            for params in &combos {
                cells.push(Cell { id: cells.len(), p, n, params: params.clone() });
            }
        }
    }
    cells
}

/// The config with the cell's sweep values written into their fields.
fn specialize(config: &ExperimentConfig, cell: &Cell) -> ExperimentConfig {
    let mut c = config.clone();
    for (axis, &v) in &cell.params {
        match axis.as_str() {
            "eps0" => c.domain.iter_mut().for_each(|d| d.eps0 = v),
            "delta" => c.domain.iter_mut().for_each(|d| d.delta = v),
            "theta0" => c.theta0 = Some(v),
            "eps" => c.eps = Some(v),
            "beta" => c.beta = Some(v),
            "radius" => c.radius = Some(v),
            "angle" => c.bc.angle = Some(v),
            "b0" => c.bc.b0 = v,
            _ => {}
        }
    }
    c
}

fn theta(cell: &Cell) -> f64 {
    cell.params.get("theta").copied().unwrap_or(0.1)
}

fn build_domain(config: &ExperimentConfig) -> Result<GraphDomain> {
    let spec = config.domain.clone().unwrap_or_else(|| {
        serde_json::from_str::<DomainConfig>(r#"{"type":"flat","delta":0.5,"eps0":0.1,"R0":1.0}"#).expect("static config")
    });
    spec.build()
}

pub fn run_cell(config: &ExperimentConfig, cell: &Cell, tol: &ResolvedTolerances) -> Result<CellOutput> {
    let c = specialize(config, cell);
    match c.kind {
        ExperimentKind::Regdist => regdist_cell(&c, cell, tol),
        ExperimentKind::Mollify => mollify_cell(&c, cell, tol),
        ExperimentKind::Extend => extend_cell(&c, cell, tol),
        ExperimentKind::Solve => solve_cell(&c, cell, tol),
        ExperimentKind::Probe => probe_cell(&c, cell, tol),
        ExperimentKind::Counterexample => counterexample_cell(&c, cell),
    }
}

fn regdist_cell(c: &ExperimentConfig, cell: &Cell, tol: &ResolvedTolerances) -> Result<CellOutput> {
    let domain = build_domain(c)?;
    let n = cell.n.unwrap_or(21);
    let half = 0.5 * domain.base_radius;
    let depth = c.radius.unwrap_or(half);
    let eps0 = domain.lip_bound;
    let dim = domain.dim;
    let rd = RegDistField::new(domain)?;
    let step = depth / n as f64;
    let mut csv = String::from("y1,yd,rho0,grad_norm,sandwich_ratio,contraction,hessian_product\n");
    let mut report = NormReport::new(format!("regularized distance on {n}x{n} grid"));
    let (mut lo, mut hi, mut worst_contraction, mut hess_max) = (f64::INFINITY, 0.0f64, 0.0f64, 0.0f64);
    let mut censored = 0usize;
    for i in 0..n {
        let x = -half + 2.0 * half * i as f64 / (n - 1) as f64;
        let mut tangent = vec![0.0; dim - 1];
        tangent[0] = x;
        let top = rd.domain.psi(&tangent);
        for j in 1..=n {
            let mut y = tangent.clone();
            y.push(top - step * j as f64);
            let fp = rd.fixed_point(&y)?;
            let (rho, grad) = rd.value_and_grad(&y)?;
            let ratio = rho / fp.g;
            lo = lo.min(ratio);
            hi = hi.max(ratio);
            worst_contraction = worst_contraction.max(fp.max_contraction);
            let hess = if rho < 10.0 * step {
                censored += 1;
                f64::NAN
            } else {
                let product = frobenius(&rd.hess_regdist(&y)?) * rho / eps0;
                hess_max = hess_max.max(product);
                product
            };
            let gnorm = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
            let _ = writeln!(csv, "{x:.12e},{:.12e},{rho:.12e},{gnorm:.12e},{ratio:.12e},{:.6e},{hess:.6e}", y[dim - 1], fp.max_contraction);
        }
    }
    report.push("sandwich_min", lo, format!("{n}x{n}"));
    report.push("sandwich_max", hi, format!("{n}x{n}"));
    report.push("max_contraction", worst_contraction, format!("{n}x{n}"));
    report.push("hessian_constant_N", hess_max, format!("{n}x{n}, {censored} censored"));
    report.verdict("sandwich", lo >= 2.0 / 3.0 && hi <= 2.0, format!("[{lo:.6}, {hi:.6}] ⊂ [2/3, 2]"));
    report.verdict("contraction", worst_contraction <= 0.5 + tol.contraction_slack, format!("{worst_contraction:.6}"));
    Ok(CellOutput { report, artifacts: vec![("grid".into(), csv)] })
}

fn mollify_cell(c: &ExperimentConfig, cell: &Cell, tol: &ResolvedTolerances) -> Result<CellOutput> {
    let domain = build_domain(c)?;
    let radius = c.radius.unwrap_or(0.05);
    let cyl = cyl_neighborhood(&domain, &vec![0.0; domain.dim - 1], radius)?;
    let rd = Arc::new(RegDistField::new(cyl.domain.clone())?);
    let field = MollifiedField::new(&cyl, rd, Arc::new(|_: &[f64]| 0.0), None, 21)?;
    let young = verify_young_bounds(&field, cell.p, c.trials, c.seed)?;
    let mut report = NormReport::new(format!("Young bounds, p = {}", cell.p));
    let res = format!("{} trials", young.trials);
    report.push("lp_ratio_max", young.lp_ratio_max, res.clone());
    report.push("w1p_ratio_max", young.w1p_ratio_max, res.clone());
    report.push("bound", young.bound, res.clone());
    report.push("min_jacobian", young.min_jacobian, res.clone());
    report.push("M1", young.m1, res.clone());
    report.push("containment_failures", young.containment_failures as f64, res);
    report.verdict(
        "young_bounds",
        young.pass(tol.young_slack),
        format!("max({:.6}, {:.6}) ≤ {:.6}", young.lp_ratio_max, young.w1p_ratio_max, young.bound),
    );
    Ok(CellOutput { report, artifacts: Vec::new() })
}

fn datum(spec: &DatumSpec) -> Result<BoundaryDatum> {
    Ok(match *spec {
        DatumSpec::Constant { value } => Arc::new(move |_: &[f64]| value),
        DatumSpec::Linear { slope } => Arc::new(move |y: &[f64]| slope * y[0]),
        DatumSpec::Sine { frequency } => Arc::new(move |y: &[f64]| (frequency * y[0]).sin()),
        DatumSpec::Samples { ref x, ref values } => datum_from_samples(x.clone(), values.clone())?,
    })
}

fn grid_csv(v: &GridFunction, header: &str) -> String {
    let mut csv = format!("{header}\n");
    for k in 0..v.len() {
        if v.mask[k] {
            let y = v.coords(k);
            let _ = writeln!(csv, "{:.12e},{:.12e},{:.12e}", y[0], y[1], v.values[k]);
        }
    }
    csv
}

fn extend_cell(c: &ExperimentConfig, cell: &Cell, tol: &ResolvedTolerances) -> Result<CellOutput> {
    let domain = build_domain(c)?;
    let radius = c.radius.unwrap_or(0.05);
    let cyl = cyl_neighborhood(&domain, &[0.0], radius)?;
    let rd = Arc::new(RegDistField::new(cyl.domain.clone())?);
    let g = datum(&c.datum)?;
    let mut settings = ExtensionSettings { trace_tolerance: tol.trace_tolerance, ..Default::default() };
    if let Some(n) = cell.n {
        settings.h = radius / n as f64;
    }
    let ext = extend_neumann(&g, &cyl, rd, cell.p, &settings)?;
    let mut report = NormReport::new(format!("Neumann extension, p = {}, R = {radius}", cell.p));
    let res = format!("h = {:.4e}", ext.h);
    report.push("n_ext", ext.n_ext, res.clone());
    report.push("v_w2p", ext.norms.w2p, res.clone());
    report.push("denominator", ext.denominator, res.clone());
    report.push("g_lp", ext.g_lp, res.clone());
    report.push("g_seminorm", ext.g_seminorm, res.clone());
    report.push("max_trace_residual", ext.max_trace_residual, res);
    report.meta("extension", &ext);
    report.verdict("trace", ext.max_trace_residual <= settings.trace_tolerance, format!("{:.3e}", ext.max_trace_residual));
    let csv = grid_csv(&ext.v, "y1,yd,v");
    Ok(CellOutput { report, artifacts: vec![("v".into(), csv)] })
}

type Jet = (f64, [f64; 2], [[f64; 2]; 2]);

fn manufactured_jet(kind: Manufactured, y: &[f64]) -> Jet {
    let (x, t) = (y[0], y[1]);
    match kind {
        Manufactured::Harmonic => {
            let (s, co, ch, sh) = (x.sin(), x.cos(), t.cosh(), t.sinh());
            (s * ch, [co * ch, s * sh], [[-s * ch, co * sh], [co * sh, s * ch]])
        }
        Manufactured::Quadratic => (x * x + t * t, [2.0 * x, 2.0 * t], [[2.0, 0.0], [0.0, 2.0]]),
    }
}

fn manufactured_problem(c: &ExperimentConfig) -> ObliqueProblem {
    let op = c.operator;
    let b = c.bc.vector();
    let b0 = c.bc.b0;
    let kind = c.data;
    let exact: ScalarField = Arc::new(move |y: &[f64]| manufactured_jet(kind, y).0);
    ObliqueProblem {
        operator: EllipticOperator::constant(op.a, op.drift, op.a0, op.nu),
        f: Arc::new(move |y: &[f64]| {
            let (u, du, d2) = manufactured_jet(kind, y);
            let mut lu = op.a0 * u;
            for i in 0..2 {
                lu += op.drift[i] * du[i];
                for j in 0..2 {
                    lu += op.a[i][j] * d2[i][j];
                }
            }
            lu
        }),
        bc: ObliqueField::constant(b.to_vec(), b0),
        g: Arc::new(move |y: &[f64]| {
            let (u, du, _) = manufactured_jet(kind, y);
            b[0] * du[0] + b[1] * du[1] + b0 * u
        }),
        dirichlet: exact,
    }
}

fn solve_cell(c: &ExperimentConfig, cell: &Cell, tol: &ResolvedTolerances) -> Result<CellOutput> {
    let rd = RegDistField::new(build_domain(c)?)?;
    let n = cell.n.unwrap_or(33);
    let r = c.radius.unwrap_or(1.0);
    let problem = manufactured_problem(c);
    let settings = MainEstimateSettings {
        p: cell.p,
        theta: theta(cell),
        options: SolveOptions { picard_tol: tol.picard_tol, lenient: true, ..Default::default() },
    };
    let (mut report, sol, flat) = probe_main_estimate(&problem, &rd, ZGrid::square(n, r, r), &settings)?;
    let mut csv = String::from("y1,yd,u,exact\n");
    let mut err = 0.0f64;
    for (y, u) in flat.y.iter().zip(&sol.u.values) {
        let e = manufactured_jet(c.data, y).0;
        err = err.max((u - e).abs());
        let _ = writeln!(csv, "{:.12e},{:.12e},{u:.12e},{e:.12e}", y[0], y[1]);
    }
    report.push("max_error", err, format!("{n}x{n}"));
    report.push("picard_iterations", sol.picard_changes.len() as f64, format!("{n}x{n}"));
    Ok(CellOutput { report, artifacts: vec![("solution".into(), csv)] })
}

fn probe_cell(c: &ExperimentConfig, cell: &Cell, tol: &ResolvedTolerances) -> Result<CellOutput> {
    let rd = RegDistField::new(build_domain(c)?)?;
    let op = c.operator;
    let options = SolveOptions { picard_tol: tol.picard_tol, lenient: true, ..Default::default() };
    let report = probe_model_problem(
        &rd,
        &EllipticOperator::constant(op.a, op.drift, op.a0, op.nu),
        Arc::new(|_: &[f64]| 1.0),
        c.radius.unwrap_or(0.25),
        cell.n.unwrap_or(33),
        cell.p,
        &options,
    )?;
    Ok(CellOutput { report, artifacts: Vec::new() })
}

fn counterexample_cell(c: &ExperimentConfig, cell: &Cell) -> Result<CellOutput> {
    let radius = c.radius.unwrap_or(1.0);
    let levels = (1, 40);
    let report = match c.example {
        Some(ExampleKind::Cusp) => {
            let eps = c.eps.unwrap_or(1.0);
            let beta = match c.beta {
                Some(b) => b,
                None => {
                    let w = cusp_window(cell.p, eps)?
                        .ok_or_else(|| Error::Precondition(format!("empty β window at p = {}, ε = {eps}", cell.p)))?;
                    0.5 * (w.lower + w.upper)
                }
            };
            certify_cusp(&CuspExample::new(cell.p, eps, beta, radius)?, levels)?
        }
        Some(ExampleKind::Wedge) => {
            let theta0 = c.theta0.ok_or_else(|| Error::Config { path: "theta0".into(), message: "missing".into() })?;
            certify_wedge(&WedgeExample::new(theta0, radius)?, &[cell.p], 1000, levels)?
        }
        None => return Err(Error::Config { path: "example".into(), message: "missing".into() }),
    };
    Ok(CellOutput { report, artifacts: Vec::new() })
}
