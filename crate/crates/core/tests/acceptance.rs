//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits nonzero when a
//! criterion fails for a reason other than a documented, measured obstruction.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use oblique_core::counterexamples::{certify_cusp, certify_wedge, CuspExample, WedgeExample};
use oblique_core::extension::{extension_refinement, BoundaryDatum, ExtensionSettings};
use oblique_core::geometry::{cyl_neighborhood, GraphDomain, ObliqueField, Profile};
use oblique_core::mollification::{verify_young_bounds, MollifiedField};
use oblique_core::norms::{dual_hardy_check, hardy_check, NormReport, PiecewiseLinear};
use oblique_core::regdist::{scale_m, RegDistField};
use oblique_core::solver::{mms_study, probe_model_problem, EllipticOperator, MainEstimateSettings, ObliqueProblem, SolveOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::gamma;

/// Outcome of one criterion.
struct Outcome {
    pass: bool,
    detail: String,
    /// Set when a failure is the documented obstruction and every other check held.
    known_obstruction: Option<&'static str>,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Self {
        Self { pass, detail, known_obstruction: None }
    }
}

fn verdict(report: &NormReport, name: &str) -> bool {
    report.verdicts.iter().find(|v| v.name == name).map(|v| v.pass).unwrap_or(false)
}

fn verdict_detail(report: &NormReport, name: &str) -> String {
    report.verdicts.iter().find(|v| v.name == name).map(|v| v.detail.clone()).unwrap_or_default()
}

/// Nearest boundary point by dense sampling of the graph over `[y1 - t, y1 + t]`.
fn brute_force_distance(domain: &GraphDomain, y: [f64; 2], reach: f64) -> f64 {
    const SAMPLES: usize = 100_000;
    let mut best = f64::INFINITY;
    for k in 0..=SAMPLES {
        let s = y[0] - reach + 2.0 * reach * k as f64 / SAMPLES as f64;
        let d = (s - y[0]).hypot(domain.psi(&[s]) - y[1]);
        best = best.min(d);
    }
    best
}

fn criterion_regdist() -> Outcome {
    let eps0 = 0.05;
    let profiles = [
        ("flat", Profile::Flat { level: 0.0 }),
        ("tilted", Profile::Tilted { slope: vec![eps0], level: 0.0 }),
        ("sawtooth", Profile::Sawtooth { slope: eps0, period: 0.5, phase: 0.0, level: 0.0 }),
        ("sine", Profile::Sine { amplitude: eps0 / 2.0, frequency: 2.0, level: 0.0 }),
    ];
    let quadrature_tol = 1e-3;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut failures = Vec::new();
    let (mut worst_contraction, mut sandwich, mut dist, mut osc) = (0.0f64, (f64::INFINITY, 0.0f64), (f64::INFINITY, 0.0f64), 0.0f64);
    let mut points = 0;
    for (name, profile) in profiles {
        for delta in [0.5, 1.0] {
            let domain = GraphDomain::new(profile.clone(), 2, eps0, 1.0, delta).unwrap();
            let m = scale_m(delta);
            let rd = RegDistField::new(domain.clone()).unwrap();
            let mut grads = Vec::new();
            for _ in 0..200 {
                let x = rng.gen_range(-0.5..0.5);
                let t = rng.gen_range(0.005..0.5);
                let y = [x, domain.psi(&[x]) - t];
                let fp = rd.fixed_point(&y).unwrap();
                let (_, grad) = rd.value_and_grad(&y).unwrap();
                let dy = brute_force_distance(&domain, y, t);
                worst_contraction = worst_contraction.max(fp.max_contraction);
                let r = fp.rho / fp.g;
                sandwich = (sandwich.0.min(r), sandwich.1.max(r));
                let q = fp.rho / dy;
                dist = (dist.0.min(q * m), dist.1.max(q / m));
                if !(fp.max_contraction <= 0.5 + 1e-6 && (2.0 / 3.0..=2.0).contains(&r) && q >= 1.0 / m && q <= m) {
                    failures.push(format!("{name} δ={delta} at {y:?}"));
                }
                grads.push(grad);
                points += 1;
            }
            for a in &grads {
                for b in &grads {
                    osc = osc.max((a[0] - b[0]).hypot(a[1] - b[1]));
                }
            }
            if osc > 12.0 * eps0 + quadrature_tol {
                failures.push(format!("{name} δ={delta}: oscillation {osc:.4}"));
            }
        }
    }
    Outcome::new(
        failures.is_empty(),
        format!(
            "{points} points; contraction ≤ {worst_contraction:.4}; ρ0/g ∈ [{:.4}, {:.4}]; (ρ0/d_y)·M ≥ {:.3}, (ρ0/d_y)/M ≤ {:.3}; oscillation {osc:.4} ≤ {:.4}{}",
            sandwich.0,
            sandwich.1,
            dist.0,
            dist.1,
            12.0 * eps0 + quadrature_tol,
            if failures.is_empty() { String::new() } else { format!("; failures: {}", failures.join(", ")) }
        ),
    )
}

fn criterion_hardy() -> Outcome {
    let mut worst_dual = 0.0f64;
    for p in [1.0, 1.5, 2.0, 3.0, 4.0] {
        let r = dual_hardy_check(&PiecewiseLinear::constant(1.0), p).unwrap();
        worst_dual = worst_dual.max((r - gamma(p + 1.0).powf(1.0 / p)).abs());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_excess = f64::NEG_INFINITY;
    for k in 0..1000 {
        let p = [1.5, 2.0, 3.0, 4.0][k % 4];
        let cells = rng.gen_range(1..=24);
        let breaks: Vec<f64> = (0..=cells).map(|i| i as f64 / cells as f64).collect();
        let c0: Vec<f64> = (0..cells).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let c1: Vec<f64> = (0..cells).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let h = PiecewiseLinear::new(breaks, c0, c1).unwrap();
        if let Ok(r) = hardy_check(&h, p) {
            worst_excess = worst_excess.max(r - p / (p - 1.0));
        }
    }
    Outcome::new(
        worst_dual <= 1e-5 && worst_excess <= 1e-9,
        format!("dual-Hardy max |ratio - Γ(p+1)^(1/p)| = {worst_dual:.2e}; Hardy max excess over p/(p-1) = {worst_excess:.3e}"),
    )
}

fn criterion_young() -> Outcome {
    let domain = GraphDomain::new(Profile::Sawtooth { slope: 0.05, period: 0.04, phase: 0.0, level: 0.0 }, 2, 0.05, 1.0, 0.5).unwrap();
    let cyl = cyl_neighborhood(&domain, &[0.0], 0.05).unwrap();
    let rd = Arc::new(RegDistField::new(cyl.domain.clone()).unwrap());
    let field = MollifiedField::new(&cyl, rd, Arc::new(|_: &[f64]| 0.0), None, 21).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for p in [2.0, 4.0] {
        let rep = verify_young_bounds(&field, p, 100, 42).unwrap();
        pass &= rep.pass(0.02);
        parts.push(format!(
            "p={p}: L_p {:.4}, W¹_p {:.4} vs 2^(1/p)·1.02 = {:.4}, min Jacobian {:.4}, containment failures {}",
            rep.lp_ratio_max,
            rep.w1p_ratio_max,
            rep.bound * 1.02,
            rep.min_jacobian,
            rep.containment_failures
        ));
    }
    Outcome::new(pass, parts.join("; "))
}

fn criterion_extension() -> Outcome {
    let data: [(&str, BoundaryDatum); 3] = [
        ("1", Arc::new(|_: &[f64]| 1.0)),
        ("y1", Arc::new(|y: &[f64]| y[0])),
        ("sin3y1", Arc::new(|y: &[f64]| (3.0 * y[0]).sin())),
    ];
    let profiles = [
        ("flat", Profile::Flat { level: 0.0 }),
        ("sawtooth", Profile::Sawtooth { slope: 0.05, period: 0.04, phase: 0.0, level: 0.0 }),
    ];
    let settings = ExtensionSettings::default();
    let mut pass = true;
    let (mut min_order, mut max_spread) = (f64::INFINITY, 0.0f64);
    let mut failures = Vec::new();
    for (pname, profile) in &profiles {
        let domain = GraphDomain::new(profile.clone(), 2, 0.05, 1.0, 0.5).unwrap();
        let cyl = cyl_neighborhood(&domain, &[0.0], 0.05).unwrap();
        let rd = Arc::new(RegDistField::new(cyl.domain.clone()).unwrap());
        for (gname, g) in &data {
            let study = extension_refinement(g, &cyl, rd.clone(), &[2.0, 4.0], &settings, 4).unwrap();
            min_order = min_order.min(study.min_order());
            max_spread = study.n_ext_spread.iter().copied().fold(max_spread, f64::max);
            if !study.pass(1.0, 1.5) {
                pass = false;
                failures.push(format!("{pname}/{gname}: orders {:?}, spread {:?}", study.orders, study.n_ext_spread));
            }
        }
    }
    let order = if min_order.is_infinite() { "residual at floor".to_string() } else { format!("{min_order:.3}") };
    Outcome::new(
        pass,
        format!("min trace-residual order {order} (≥ 1), max N_ext spread {max_spread:.3} (< 1.5){}", if failures.is_empty() { String::new() } else { format!("; {}", failures.join("; ")) }),
    )
}

fn criterion_cusp() -> Outcome {
    let ex = CuspExample::new(8.0, 1.0, 0.5, 1.0).unwrap();
    let report = certify_cusp(&ex, (1, 40)).unwrap();
    let names = ["u_in_Lp", "laplacian_in_Lp", "Bu_in_W1p", "d12_not_in_Lp", "b_witness_q8_divergent", "b_witness_q3_convergent"];
    let pass = names.iter().all(|n| verdict(&report, n));
    let d12 = report.get("d12.slope").unwrap_or(f64::NAN);
    let detail = names.iter().map(|n| format!("{n}: {} ({})", verdict(&report, n), verdict_detail(&report, n))).collect::<Vec<_>>().join("; ");
    let mut out = Outcome::new(pass, format!("{detail}; D12 slope {d12:.4} vs -3 ± 0.15"));
    // Δu and D(Bu) are measured with the analytic exponents of the terms that diverge.
    let lap_ok = (report.get("laplacian.slope").unwrap_or(f64::NAN) - ex.laplacian_exponent()).abs() < 0.2;
    let bu_ok = (report.get("Bu_w1p.slope").unwrap_or(f64::NAN) - (8.0 * (ex.beta - 1.0) + 1.0)).abs() < 0.2;
    let rest_ok = ["u_in_Lp", "d12_not_in_Lp", "b_witness_q8_divergent", "b_witness_q3_convergent", "fd_crosscheck"]
        .iter()
        .all(|n| verdict(&report, n))
        && (d12 + 3.0).abs() <= 0.15;
    if !pass && lap_ok && bu_ok && rest_ok {
        out.known_obstruction = Some("Δu ~ x|y|^(β-2) and η_x D_2 u ~ |y|^(β-1) are not 8-integrable across the axis y = 0 inside the domain");
    }
    out
}

fn criterion_wedge() -> Outcome {
    let ex = WedgeExample::new(0.75 * PI, 1.0).unwrap();
    let ps = [4.0, 5.0, 5.5, 6.5, 8.0];
    let report = certify_wedge(&ex, &ps, 1000, (1, 40)).unwrap();
    let mut pass = verdict(&report, "harmonic") && verdict(&report, "faces_Bu_zero");
    let mut parts = vec![
        format!("harmonic {}", verdict_detail(&report, "harmonic")),
        format!("faces {}", verdict_detail(&report, "faces_Bu_zero")),
    ];
    for p in ps {
        let name = format!("d2u_p{p}");
        pass &= verdict(&report, &name);
        parts.push(format!("p={p}: {}", verdict_detail(&report, &name)));
    }
    let slope8 = report.get("d2u_p8.slope").unwrap_or(f64::NAN);
    pass &= (slope8 + 2.0 / 3.0).abs() <= 0.1;
    parts.push(format!("slope at p=8 {slope8:.4} vs -2/3 ± 0.1"));
    Outcome::new(pass, parts.join("; "))
}

fn criterion_mms() -> Outcome {
    let phi: f64 = 0.3;
    let b = [phi.sin(), phi.cos()];
    let problem = ObliqueProblem {
        operator: EllipticOperator::laplacian(),
        f: Arc::new(|_| 0.0),
        bc: ObliqueField::constant(b.to_vec(), 0.0),
        g: Arc::new(move |y: &[f64]| b[0] * y[0].cos() * y[1].cosh() + b[1] * y[0].sin() * y[1].sinh()),
        dirichlet: Arc::new(|y: &[f64]| y[0].sin() * y[1].cosh()),
    };
    let exact = |y: &[f64]| y[0].sin() * y[1].cosh();
    let rd = RegDistField::new(GraphDomain::new(Profile::Flat { level: 0.0 }, 2, 0.1, 1.0, 0.5).unwrap()).unwrap();
    let study = mms_study(&problem, &exact, &rd, &[33, 65, 129], 1.0, 1.0, &MainEstimateSettings::default()).unwrap();
    let order = study.min_order();
    let spread = study.n_emp_spread();
    Outcome::new(
        order >= 1.0 && spread <= 1.3,
        format!(
            "max errors {:?}, orders {:?} (min {order:.4} ≥ 1), N_emp {:?} (spread {spread:.4} ≤ 1.3)",
            study.max_errors.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>(),
            study.orders.iter().map(|o| format!("{o:.3}")).collect::<Vec<_>>(),
            study.n_emp.iter().map(|n| format!("{n:.4}")).collect::<Vec<_>>()
        ),
    )
}

fn criterion_model_probe() -> Outcome {
    let op = EllipticOperator::laplacian();
    let options = SolveOptions::default();
    let mut scaled = Vec::new();
    let mut parts = Vec::new();
    let mut stable = true;
    for eps0 in [0.01, 0.05, 0.1] {
        let profile = Profile::Sawtooth { slope: eps0, period: 0.25, phase: 0.0, level: 0.0 };
        let rd = RegDistField::new(GraphDomain::new(profile, 2, eps0, 1.0, 0.5).unwrap()).unwrap();
        let coarse = probe_model_problem(&rd, &op, Arc::new(|_| 1.0), 0.5, 33, 2.0, &options).unwrap();
        let fine = probe_model_problem(&rd, &op, Arc::new(|_| 1.0), 0.5, 65, 2.0, &options).unwrap();
        let hardy = fine.get("hardy_term_ratio").unwrap();
        let (rc, rf) = (coarse.get("local_ratio").unwrap(), fine.get("local_ratio").unwrap());
        stable &= rf <= 1.25 * rc;
        scaled.push(hardy / eps0);
        parts.push(format!(
            "ε0={eps0}: Hardy term {hardy:.4e} (÷ε0 = {:.4}), quotient {:.4}, local ratio {rc:.4} → {rf:.4}",
            hardy / eps0,
            fine.get("hardy_quotient").unwrap_or(f64::NAN)
        ));
    }
    let hi = scaled.iter().copied().fold(0.0, f64::max);
    let lo = scaled.iter().copied().fold(f64::INFINITY, f64::min);
    let spread = hi / lo;
    Outcome::new(
        spread <= 2.0 && stable,
        format!("{}; Hardy term / ε0 spread {spread:.3} (≤ 2); local ratio stable under halving: {stable}", parts.join("; ")),
    )
}

fn main() -> ExitCode {
    // Allow `cargo test -- <filter>` style invocations to skip the suite.
    let args: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if !args.is_empty() && !args.iter().any(|a| "acceptance".contains(a.as_str())) {
        return ExitCode::SUCCESS;
    }
    let criteria: [(&str, Duration, fn() -> Outcome); 8] = [
        ("regularized distance", Duration::from_secs(120), criterion_regdist),
        ("Hardy and dual Hardy", Duration::from_secs(30), criterion_hardy),
        ("mollification Young bounds", Duration::from_secs(120), criterion_young),
        ("Neumann extension", Duration::from_secs(300), criterion_extension),
        ("cusp certificate", Duration::from_secs(120), criterion_cusp),
        ("wedge certificate", Duration::from_secs(120), criterion_wedge),
        ("solver MMS", Duration::from_secs(600), criterion_mms),
        ("model-problem probe", Duration::from_secs(600), criterion_model_probe),
    ];
    let mut unexpected = 0;
    for (k, (name, budget, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let mut outcome = run();
        let elapsed = start.elapsed();
        if elapsed > *budget {
            outcome.pass = false;
            outcome.known_obstruction = None;
            outcome.detail.push_str(&format!("; runtime {:.1}s over budget {}s", elapsed.as_secs_f64(), budget.as_secs()));
        }
        let status = if outcome.pass { "PASS" } else { "FAIL" };
        println!("criterion {}: {status} [{name}] ({:.1}s) {}", k + 1, elapsed.as_secs_f64(), outcome.detail);
        match (outcome.pass, outcome.known_obstruction) {
            (true, _) => {}
            (false, Some(why)) => println!("    known obstruction: {why}"),
            (false, None) => unexpected += 1,
        }
    }
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{unexpected} criteria failed unexpectedly");
        ExitCode::FAILURE
    }
}
