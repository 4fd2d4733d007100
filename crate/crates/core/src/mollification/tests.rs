use super::*;
use crate::geometry::{cyl_neighborhood, GraphDomain, Profile};
use approx::assert_abs_diff_eq;

fn setup(source: ScalarField, grad: Option<VectorField>) -> (CylNeighborhood, MollifiedField) {
    let profile = Profile::Sawtooth { slope: 0.1, period: 0.5, phase: 0.0, level: 0.0 };
    let domain = GraphDomain::new(profile, 2, 0.1, 1.0, 0.5).unwrap();
    let cyl = cyl_neighborhood(&domain, &[0.0], 0.2).unwrap();
    let rd = Arc::new(RegDistField::new(cyl.domain.clone()).unwrap());
    let field = MollifiedField::new(&cyl, rd, source, grad, 21).unwrap();
    (cyl, field)
}

#[test]
fn constants_and_affine_functions_are_reproduced() {
    let (_, f) = setup(Arc::new(|_: &[f64]| 2.5), None);
    assert_abs_diff_eq!(f.mollify(&[0.05, 0.6]).unwrap(), 2.5, epsilon = 1e-12);
    let f = f.with_source(Arc::new(|y: &[f64]| 1.0 + 2.0 * y[0] - 0.5 * y[1]), None);
    for y in [[0.05, 0.6], [-0.15, 0.1], [0.1, 1.1]] {
        assert_abs_diff_eq!(f.mollify(&y).unwrap(), 1.0 + 2.0 * y[0] - 0.5 * y[1], epsilon = 1e-12);
    }
}

#[test]
fn boundary_trace_is_preserved() {
    let (cyl, f) = setup(Arc::new(|y: &[f64]| (3.0 * y[0]).sin() + y[1] * y[1]), None);
    for x in [-0.1, 0.0, 0.13] {
        let y = cyl.gamma_point(&[x]);
        let g = (3.0 * y[0]).sin() + y[1] * y[1];
        assert_abs_diff_eq!(f.mollify(&y).unwrap(), g, epsilon = 1e-12);
    }
}

#[test]
fn scale_satisfies_jacobian_bound() {
    let (_, f) = setup(Arc::new(|_: &[f64]| 0.0), None);
    let m = f.regdist.m;
    assert!(f.m1 >= 3.0 * m / 0.5 - 1e-12);
    assert!(f.m1 >= 2.0 * f.grad_sup);
    for y in [[0.0, 0.3], [0.19, 1.0], [-0.19, 0.01]] {
        assert!(f.min_jacobian(&y).unwrap() >= 0.5);
        f.check_containment(&y).unwrap();
    }
}

#[test]
fn gradient_matches_finite_differences() {
    let g = TrigPolynomial {
        amplitudes: vec![0.7, -0.3],
        frequencies: vec![vec![2.0, 1.0], vec![-1.0, 3.0]],
        phases: vec![0.1, 1.3],
    };
    let (gv, gg) = (g.clone(), g.clone());
    let (_, f) = setup(Arc::new(move |y: &[f64]| gv.eval(y)), Some(Arc::new(move |y: &[f64]| gg.grad(y))));
    let y = [0.07, 0.8];
    let grad = f.mollify_gradient(&y).unwrap();
    let h = 1e-5;
    for i in 0..2 {
        let (mut p, mut m) = (y, y);
        p[i] += h;
        m[i] -= h;
        let fd = (f.mollify(&p).unwrap() - f.mollify(&m).unwrap()) / (2.0 * h);
        assert!((grad[i] - fd).abs() < 1e-6, "axis {i}: {} vs {fd}", grad[i]);
    }
    // The finite-difference source gradient gives the same answer.
    let no_grad = f.with_source(f.source.clone(), None);
    let g2 = no_grad.mollify_gradient(&y).unwrap();
    assert_abs_diff_eq!(g2[0], grad[0], epsilon = 1e-7);
    assert_abs_diff_eq!(g2[1], grad[1], epsilon = 1e-7);
}

#[test]
fn trig_gradient_is_consistent() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let g = TrigPolynomial::random(&mut rng, 2, 8, 8);
    let y = [0.3, -0.2];
    let grad = g.grad(&y);
    let h = 1e-6;
    let fd = (g.eval(&[y[0] + h, y[1]]) - g.eval(&[y[0] - h, y[1]])) / (2.0 * h);
    assert_abs_diff_eq!(grad[0], fd, epsilon = 1e-6);
}

#[test]
fn young_bounds_hold_on_a_small_sweep() {
    let (_, f) = setup(Arc::new(|_: &[f64]| 0.0), None);
    let report = verify_young_bounds(&f, 2.0, 6, 11).unwrap();
    assert_eq!(report.containment_failures, 0);
    assert!(report.min_jacobian >= 0.5);
    assert!(report.pass(0.02), "{report:?}");
    let again = verify_young_bounds(&f, 2.0, 6, 11).unwrap();
    assert_eq!(report, again);
}
