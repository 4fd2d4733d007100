use std::sync::Arc;

use super::*;
use crate::geometry::Profile;
use crate::regdist::RegDistField;
use approx::assert_abs_diff_eq;

fn regdist(profile: Profile, eps0: f64, delta: f64) -> RegDistField {
    RegDistField::new(GraphDomain::new(profile, 2, eps0, 1.0, delta).unwrap()).unwrap()
}

fn harmonic_problem(phi: f64, b0: f64) -> (ObliqueProblem, impl Fn(&[f64]) -> f64 + Sync) {
    let b = [phi.sin(), phi.cos()];
    let exact = |y: &[f64]| y[0].sin() * y[1].cosh();
    let problem = ObliqueProblem {
        operator: EllipticOperator::laplacian(),
        f: Arc::new(|_| 0.0),
        bc: ObliqueField::constant(b.to_vec(), b0),
        g: Arc::new(move |y: &[f64]| {
            b[0] * y[0].cos() * y[1].cosh() + b[1] * y[0].sin() * y[1].sinh() + b0 * y[0].sin() * y[1].cosh()
        }),
        dirichlet: Arc::new(move |y: &[f64]| y[0].sin() * y[1].cosh()),
    };
    (problem, exact)
}

#[test]
fn flat_flattening_is_a_reflection() {
    let rd = regdist(Profile::Flat { level: 0.0 }, 0.1, 0.5);
    let flat = flatten(&EllipticOperator::laplacian(), &rd, ZGrid::square(9, 1.0, 1.0)).unwrap();
    for (k, y) in flat.y.iter().enumerate() {
        let z = flat.grid.z(k / 9, k % 9);
        assert_abs_diff_eq!(y[0], z[0], epsilon = 1e-15);
        assert_abs_diff_eq!(y[1], -z[1], epsilon = 1e-12);
        assert_abs_diff_eq!(flat.a_tilde[k][0][0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(flat.a_tilde[k][0][1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(flat.a_tilde[k][1][1], 1.0, epsilon = 1e-12);
        assert!(flat.singular[k].abs() < 1e-12);
    }
}

#[test]
fn tilted_flattening_is_a_constant_congruence() {
    let eps = 0.1;
    let rd = regdist(Profile::Tilted { slope: vec![eps], level: 0.0 }, eps, 0.5);
    let flat = flatten(&EllipticOperator::laplacian(), &rd, ZGrid::square(9, 0.5, 0.5)).unwrap();
    for k in 0..flat.grid.len() {
        let at = flat.a_tilde[k];
        assert_abs_diff_eq!(at[0][0], 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(at[0][1], eps, epsilon = 1e-10);
        assert_abs_diff_eq!(at[1][1], 1.0 + eps * eps, epsilon = 1e-10);
    }
    let (lo, hi) = symmetric_eigenvalues([[1.0, eps], [eps, 1.0 + eps * eps]]);
    assert_abs_diff_eq!(flat.ellipticity.min_eigenvalue, lo, epsilon = 1e-9);
    assert_abs_diff_eq!(flat.conditioning, hi / lo, epsilon = 1e-8);
}

#[test]
fn sine_flattening_stays_elliptic() {
    let rd = regdist(Profile::Sine { amplitude: 0.02, frequency: 3.0, level: 0.0 }, 0.06, 0.5);
    let flat = flatten(&EllipticOperator::laplacian(), &rd, ZGrid::square(17, 0.5, 0.5)).unwrap();
    assert!(flat.ellipticity.min_eigenvalue > 0.5, "{:?}", flat.ellipticity);
    assert!(flat.conditioning < 2.0);
}

#[test]
fn manufactured_harmonic_solution_converges() {
    let rd = regdist(Profile::Flat { level: 0.0 }, 0.1, 0.5);
    let (problem, exact) = harmonic_problem(0.3, 0.0);
    let study = mms_study(&problem, &exact, &rd, &[17, 33, 65], 1.0, 1.0, &MainEstimateSettings::default()).unwrap();
    assert!(study.min_order() >= 0.9, "{study:?}");
    assert!(study.max_errors[2] < 5e-3, "{study:?}");
    assert!(study.n_emp_spread() < 1.3, "{study:?}");
}

#[test]
fn manufactured_quadratic_solution_converges() {
    let rd = regdist(Profile::Flat { level: 0.0 }, 0.1, 0.5);
    let b = [0.2f64.sin(), 0.2f64.cos()];
    let problem = ObliqueProblem {
        operator: EllipticOperator::laplacian(),
        f: Arc::new(|_| 4.0),
        bc: ObliqueField::constant(b.to_vec(), 1.0),
        g: Arc::new(move |y: &[f64]| 2.0 * b[0] * y[0] + 2.0 * b[1] * y[1] + y[0] * y[0] + y[1] * y[1]),
        dirichlet: Arc::new(|y: &[f64]| y[0] * y[0] + y[1] * y[1]),
    };
    let exact = |y: &[f64]| y[0] * y[0] + y[1] * y[1];
    let study = mms_study(&problem, &exact, &rd, &[17, 33], 1.0, 1.0, &MainEstimateSettings::default()).unwrap();
    assert!(study.max_errors[1] < study.max_errors[0], "{study:?}");
}

#[test]
fn smooth_curved_domain_matches_exact_solution() {
    let rd = regdist(Profile::Sine { amplitude: 0.02, frequency: 3.0, level: 0.0 }, 0.06, 0.5);
    let (problem, exact) = harmonic_problem(0.3, 0.5);
    let study = mms_study(&problem, &exact, &rd, &[17, 33], 0.6, 0.6, &MainEstimateSettings::default()).unwrap();
    assert!(study.max_errors[1] < 0.7 * study.max_errors[0], "{study:?}");
    assert!(study.max_errors[1] < 1e-2, "{study:?}");
}

#[test]
fn zero_data_gives_zero_solution() {
    let rd = regdist(Profile::Sine { amplitude: 0.02, frequency: 3.0, level: 0.0 }, 0.06, 0.5);
    let domain = rd.domain.clone();
    let minus_n: geometry_field::Field = Arc::new(move |y: &[f64]| {
        let g = domain.profile.gradient_ae(&y[..1])[0];
        let s = (1.0 + g * g).sqrt();
        vec![-g / s, 1.0 / s]
    });
    let zero: crate::geometry::ScalarField = Arc::new(|_| 0.0);
    let problem = ObliqueProblem {
        operator: EllipticOperator::laplacian(),
        f: zero.clone(),
        bc: ObliqueField { b: minus_n, b0: Arc::new(|_| 1.0), holder_exponent: 1.0 },
        g: zero.clone(),
        dirichlet: zero,
    };
    let flat = flatten(&problem.operator, &rd, ZGrid::square(17, 0.5, 0.5)).unwrap();
    let sol = solve_oblique(&problem, &flat, &rd.domain, &SolveOptions::default()).unwrap();
    assert!(sol.u.values.iter().all(|v| v.abs() < 1e-12));
    assert!(sol.warnings.is_empty());
}

mod geometry_field {
    pub type Field = crate::geometry::VectorField;
}

#[test]
fn discrete_maximum_principle() {
    // Δu = f ≥ 0 with b0 > 0, g ≤ 0 and non-positive side data forces u ≤ 0.
    let rd = regdist(Profile::Sawtooth { slope: 0.05, period: 0.25, phase: 0.0, level: 0.0 }, 0.05, 0.5);
    let problem = ObliqueProblem {
        operator: EllipticOperator::constant([[1.0, 0.0], [0.0, 1.0]], [0.3, -0.2], -0.5, 1.0),
        f: Arc::new(|y: &[f64]| 1.0 + y[0] * y[0]),
        bc: ObliqueField::constant(vec![0.2, 1.0], 1.0),
        g: Arc::new(|y: &[f64]| -(3.0 * y[0]).cos().abs()),
        dirichlet: Arc::new(|y: &[f64]| -0.1 * (1.0 + y[0])),
    };
    let flat = flatten(&problem.operator, &rd, ZGrid::square(33, 0.5, 0.5)).unwrap();
    let sol = solve_oblique(&problem, &flat, &rd.domain, &SolveOptions::default()).unwrap();
    let max = sol.u.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    assert!(max <= 1e-8, "max = {max}");
}

#[test]
fn tangential_field_fails_obliqueness() {
    let rd = regdist(Profile::Flat { level: 0.0 }, 0.1, 0.5);
    let (mut problem, _) = harmonic_problem(0.3, 0.0);
    problem.bc = ObliqueField::constant(vec![1.0, 0.1], 0.0);
    let flat = flatten(&problem.operator, &rd, ZGrid::square(9, 1.0, 1.0)).unwrap();
    let err = solve_oblique(&problem, &flat, &rd.domain, &SolveOptions::default()).unwrap_err();
    assert!(matches!(err, Error::Precondition(_)));
    let lenient = SolveOptions { lenient: true, ..Default::default() };
    let sol = solve_oblique(&problem, &flat, &rd.domain, &lenient).unwrap();
    assert!(!sol.warnings.is_empty());
}

#[test]
fn sign_conditions_are_checked() {
    let rd = regdist(Profile::Flat { level: 0.0 }, 0.1, 0.5);
    let (mut problem, _) = harmonic_problem(0.3, 0.0);
    problem.operator = EllipticOperator::constant([[1.0, 0.0], [0.0, 1.0]], [0.0, 0.0], 1.0, 1.0);
    let flat = flatten(&problem.operator, &rd, ZGrid::square(9, 1.0, 1.0)).unwrap();
    assert!(matches!(solve_oblique(&problem, &flat, &rd.domain, &SolveOptions::default()), Err(Error::Precondition(_))));
}

#[test]
fn picard_loop_absorbs_the_singular_term() {
    let rd = regdist(Profile::Sawtooth { slope: 0.05, period: 0.25, phase: 0.0, level: 0.0 }, 0.05, 0.5);
    let report = probe_model_problem(&rd, &EllipticOperator::laplacian(), Arc::new(|_| 1.0), 0.5, 33, 2.0, &SolveOptions::default()).unwrap();
    let iters = report.get("picard_iterations").unwrap();
    assert!(iters >= 1.0 && iters < 30.0, "{iters}");
    assert!(report.get("hardy_term_ratio").unwrap() > 0.0);
    assert!(report.get("local_ratio").unwrap().is_finite());
}

#[test]
fn model_problem_with_zero_source_vanishes() {
    let rd = regdist(Profile::Flat { level: 0.0 }, 0.1, 0.5);
    let report = probe_model_problem(&rd, &EllipticOperator::laplacian(), Arc::new(|_| 0.0), 0.5, 17, 2.0, &SolveOptions::default()).unwrap();
    assert_eq!(report.get("local_ratio").unwrap(), 0.0);
}

#[test]
fn flat_model_problem_ratio_is_stable() {
    let rd = regdist(Profile::Flat { level: 0.0 }, 0.1, 0.5);
    let op = EllipticOperator::laplacian();
    let coarse = probe_model_problem(&rd, &op, Arc::new(|_| 1.0), 0.5, 33, 2.0, &SolveOptions::default()).unwrap();
    let fine = probe_model_problem(&rd, &op, Arc::new(|_| 1.0), 0.5, 65, 2.0, &SolveOptions::default()).unwrap();
    let (a, b) = (coarse.get("local_ratio").unwrap(), fine.get("local_ratio").unwrap());
    assert!((a / b - 1.0).abs() < 0.2, "{a} vs {b}");
    assert!(fine.get("hardy_term_ratio").unwrap() < 1e-10);
}

#[test]
fn main_estimate_flags_violations() {
    let rd = RegDistField::new(GraphDomain::new(Profile::Abs { slope: 0.5, level: 0.0 }, 2, 0.1, 1.0, 0.5).unwrap()).unwrap();
    let (problem, _) = harmonic_problem(0.3, 0.0);
    let settings = MainEstimateSettings { p: 2.0, ..Default::default() };
    let (report, _, _) = probe_main_estimate(&problem, &rd, ZGrid::square(17, 0.4, 0.4), &settings).unwrap();
    assert!(!report.all_pass());
    assert!(report.warnings.iter().any(|w| w.contains("Lipschitz")));
    assert!(report.get("n_emp").unwrap().is_finite());
}
