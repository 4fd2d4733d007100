use super::*;
use approx::assert_abs_diff_eq;
use proptest::prelude::*;

fn domain(profile: Profile, delta: f64) -> GraphDomain {
    GraphDomain::new(profile, 2, 1.0, 1.0, delta).unwrap()
}

#[test]
fn lipschitz_of_constant_and_abs() {
    let grid = SampleGrid::line(-1.0, 1.0, 0.01);
    assert_eq!(lipschitz_constant(&Profile::Flat { level: 0.3 }, &grid).unwrap(), 0.0);
    let abs = Profile::Abs { slope: 0.05, level: 0.0 };
    assert_abs_diff_eq!(lipschitz_constant(&abs, &grid).unwrap(), 0.05, epsilon = 1e-12);
}

#[test]
fn lipschitz_of_sine_approaches_sup_of_derivative() {
    let grid = SampleGrid::line(-1.0, 1.0, 1e-3);
    let sine = Profile::Sine { amplitude: 0.1, frequency: 4.0, level: 0.0 };
    let lip = lipschitz_constant(&sine, &grid).unwrap();
    let dense_sup = (0..=200_000)
        .map(|i| -1.0 + 2.0 * i as f64 / 200_000.0)
        .map(|s: f64| (0.4 * (4.0 * s).cos()).abs())
        .fold(0.0, f64::max);
    assert!(lip <= dense_sup + 1e-12);
    assert!((0.399..=0.4).contains(&lip), "{lip}");
}

#[test]
fn lipschitz_rejects_tiny_grid() {
    let grid = SampleGrid { points: vec![vec![0.0]] };
    assert!(matches!(
        lipschitz_constant(&Profile::Flat { level: 0.0 }, &grid),
        Err(Error::InvalidInput(_))
    ));
}

#[test]
fn normals() {
    let flat = domain(Profile::Flat { level: 0.0 }, 1.0);
    assert_eq!(outward_normal(&flat, &[0.7]).unwrap(), vec![0.0, -1.0]);

    let tilted = domain(Profile::Tilted { slope: vec![0.5], level: 0.0 }, 1.0);
    let n = outward_normal(&tilted, &[0.3]).unwrap();
    let len = (0.25f64 + 1.0).sqrt();
    assert_abs_diff_eq!(n[0], 0.5 / len, epsilon = 1e-14);
    assert_abs_diff_eq!(n[1], -1.0 / len, epsilon = 1e-14);
    assert_abs_diff_eq!(n[0], 0.4472135954999579, epsilon = 1e-12);

    let sine = domain(Profile::Sine { amplitude: 0.1, frequency: 1.0, level: 0.0 }, 1.0);
    let n = outward_normal(&sine, &[0.0]).unwrap();
    let h: f64 = 1e-6;
    let fd = (0.1 * h.sin() - 0.1 * (-h).sin()) / (2.0 * h);
    let len = (1.0 + fd * fd).sqrt();
    assert_abs_diff_eq!(n[0], fd / len, epsilon = 1e-9);
    assert_abs_diff_eq!(n[1], -1.0 / 1.01f64.sqrt(), epsilon = 1e-9);
}

#[test]
fn normal_at_kink_is_an_error() {
    let abs = domain(Profile::Abs { slope: 0.1, level: 0.0 }, 1.0);
    assert!(matches!(outward_normal(&abs, &[0.0]), Err(Error::NonDifferentiable(_))));
    let saw = domain(Profile::Sawtooth { slope: 0.1, period: 0.5, phase: 0.0, level: 0.0 }, 1.0);
    assert!(outward_normal(&saw, &[0.25]).is_err());
    assert!(outward_normal(&saw, &[0.1]).is_ok());
}

#[test]
fn obliqueness_examples() {
    let grid = SampleGrid::line(-1.0, 1.0, 0.1);
    let flat = domain(Profile::Flat { level: 0.0 }, 0.5);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let rep = check_obliqueness(&flat, &ObliqueField::constant(vec![s, -s], 0.0), &grid).unwrap();
    assert_abs_diff_eq!(rep.min_ratio, s, epsilon = 1e-14);
    assert!(rep.pass);

    let aligned = check_obliqueness(&flat, &ObliqueField::constant(vec![0.0, -2.0], 0.0), &grid).unwrap();
    assert_abs_diff_eq!(aligned.min_ratio, 1.0, epsilon = 1e-15);

    let flat_small = domain(Profile::Flat { level: 0.0 }, 0.1);
    let rep = check_obliqueness(&flat_small, &ObliqueField::constant(vec![1.0, 0.0], 0.0), &grid).unwrap();
    assert_eq!(rep.min_ratio, 0.0);
    assert!(!rep.pass);

    assert!(matches!(
        check_obliqueness(&flat, &ObliqueField::constant(vec![0.0, 0.0], 0.0), &grid),
        Err(Error::DegenerateField(_))
    ));
}

#[test]
fn identity_frame_for_vertical_field() {
    let flat = domain(Profile::Flat { level: 0.0 }, 0.5);
    let framed = oblique_frame(&flat, &[0.0], &[0.0, 1.0]).unwrap();
    for s in [-0.4, 0.0, 0.3] {
        assert_abs_diff_eq!(framed.psi(&[s]), 0.0, epsilon = 1e-11);
    }
}

#[test]
fn rotated_line_has_slope_tan_phi() {
    let phi: f64 = 0.2;
    let level = 0.3;
    let flat = domain(Profile::Flat { level }, 0.5);
    let framed = oblique_frame(&flat, &[0.0], &[phi.sin(), phi.cos()]).unwrap();
    for s in [-0.3, -0.1, 0.05, 0.2] {
        assert_abs_diff_eq!(framed.psi(&[s]), s * phi.tan(), epsilon = 1e-10);
        assert_abs_diff_eq!(framed.profile.gradient(&[s]).unwrap()[0], phi.tan(), epsilon = 1e-10);
    }
}

#[test]
fn frame_rejects_tangential_field() {
    let flat = domain(Profile::Flat { level: 0.0 }, 0.5);
    assert!(matches!(oblique_frame(&flat, &[0.0], &[1.0, 0.1]), Err(Error::Precondition(_))));
}

#[test]
fn frame_is_idempotent() {
    let sine = domain(Profile::Sine { amplitude: 0.02, frequency: 2.0, level: 0.0 }, 0.8);
    let b = [0.3, 1.0];
    let once = oblique_frame(&sine, &[0.1], &b).unwrap();
    // In the new frame the same field is the last axis.
    let twice = oblique_frame(&once, &[0.0], &[0.0, 1.0]).unwrap();
    for s in [-0.3, 0.0, 0.25] {
        assert_abs_diff_eq!(once.psi(&[s]), twice.psi(&[s]), epsilon = 1e-10);
    }
}

#[test]
fn rotated_sawtooth_gradient_oscillation() {
    let delta: f64 = 0.8;
    let eps0 = 0.05;
    let saw = Profile::Sawtooth { slope: delta * delta * eps0, period: 0.25, phase: 0.0, level: 0.0 };
    let dom = GraphDomain::new(saw, 2, delta * delta * eps0, 1.0, delta).unwrap();
    let b = [0.3, 1.0];
    let framed = oblique_frame(&dom, &[0.1], &b).unwrap();
    let grid = SampleGrid::line(-0.7, 0.7, 1e-3);
    let slopes: Vec<f64> = grid
        .points
        .windows(2)
        .map(|w| (framed.psi(&w[1]) - framed.psi(&w[0])) / (w[1][0] - w[0][0]))
        .collect();
    let osc = slopes.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - slopes.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(osc < 3.0 * eps0, "osc = {osc}");
}

#[test]
fn three_dimensional_frame_tilts_plane() {
    let flat = GraphDomain::new(Profile::Flat { level: 0.0 }, 3, 0.0, 1.0, 0.5).unwrap();
    let b = [0.2, -0.1, 1.0];
    let framed = oblique_frame(&flat, &[0.0, 0.0], &b).unwrap();
    // The plane x^3 = 0 stays a plane through the origin; check linearity.
    let a = framed.psi(&[0.2, 0.0]);
    let c = framed.psi(&[0.0, 0.2]);
    assert_abs_diff_eq!(framed.psi(&[0.2, 0.2]), a + c, epsilon = 1e-10);
    assert_abs_diff_eq!(framed.psi(&[0.0, 0.0]), 0.0, epsilon = 1e-11);
}

#[test]
fn cylinder_bounds() {
    let r = 1.0;
    let delta = 0.5;
    let flat = GraphDomain::new(Profile::Flat { level: 0.0 }, 2, 0.0, 10.0, delta).unwrap();
    let cyl = cyl_neighborhood(&flat, &[0.0], r).unwrap();
    assert_abs_diff_eq!(cyl.min_psi, 3.0 * r / delta, epsilon = 1e-12);
    assert_abs_diff_eq!(cyl.max_psi, 3.0 * r / delta, epsilon = 1e-12);

    let mild = GraphDomain::new(Profile::Abs { slope: 0.05, level: 6.0 }, 2, 0.05, 10.0, delta).unwrap();
    let cyl = cyl_neighborhood(&mild, &[0.0], r).unwrap();
    assert_abs_diff_eq!(cyl.max_psi, 6.05, epsilon = 1e-12);
    assert_abs_diff_eq!(cyl.min_psi, 6.0, epsilon = 1e-12);
    assert!(cyl.in_omega(&[0.2, 3.0], r));
    assert!(!cyl.in_omega(&[0.2, 7.0], r));
    assert!(cyl.in_slab(&[0.2, 7.0], r));

    let steep = GraphDomain::new(Profile::Abs { slope: 2.0 / delta, level: 6.0 }, 2, 4.0, 10.0, delta).unwrap();
    assert!(matches!(cyl_neighborhood(&steep, &[0.0], r), Err(Error::Geometry(_))));
}

#[test]
fn cylinder_requires_small_radius() {
    let flat = GraphDomain::new(Profile::Flat { level: 0.0 }, 2, 0.0, 1.0, 0.5).unwrap();
    assert!(matches!(cyl_neighborhood(&flat, &[0.0], 0.6), Err(Error::Precondition(_))));
}

#[test]
fn config_round_trip_and_unknown_type() {
    let json = r#"{"type": "sawtooth", "slope": 0.05, "delta": 0.5, "eps0": 0.05, "R0": 1.0}"#;
    let cfg: DomainConfig = serde_json::from_str(json).unwrap();
    let dom = cfg.build().unwrap();
    assert_eq!(dom.dim, 2);
    assert!(dom.verify_lipschitz().unwrap() <= 0.05 + 1e-12);
    let bad = r#"{"type": "spiral", "delta": 0.5, "eps0": 0.05, "R0": 1.0}"#;
    assert!(serde_json::from_str::<DomainConfig>(bad).is_err());
}

#[test]
fn table_profile_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("psi.csv");
    std::fs::write(&path, "y,psi\n-1,0.05\n0,0\n1,0.05\n").unwrap();
    let p = Profile::table_from_csv(&path).unwrap();
    assert_abs_diff_eq!(p.value(&[0.5]), 0.025, epsilon = 1e-15);
    assert!(p.is_kink(&[0.0]));
    assert_eq!(p.gradient(&[-0.5]).unwrap(), vec![-0.05]);
}

proptest! {
    #[test]
    fn normal_is_unit_with_negative_last(slope in -5.0f64..5.0, s in -1.0f64..1.0) {
        let d = domain(Profile::Tilted { slope: vec![slope], level: 0.0 }, 1.0);
        let n = outward_normal(&d, &[s]).unwrap();
        let len = (n[0] * n[0] + n[1] * n[1]).sqrt();
        prop_assert!((len - 1.0).abs() < 1e-12);
        prop_assert!(n[1] < 0.0);
    }

    #[test]
    fn lipschitz_monotone_under_refinement(amp in 0.01f64..0.2, freq in 0.5f64..6.0, n in 10usize..60) {
        let p = Profile::Sine { amplitude: amp, frequency: freq, level: 0.0 };
        let coarse = SampleGrid::line(-1.0, 1.0, 2.0 / n as f64);
        let fine = SampleGrid::line(-1.0, 1.0, 1.0 / n as f64);
        let a = lipschitz_constant(&p, &coarse).unwrap();
        let b = lipschitz_constant(&p, &fine).unwrap();
        prop_assert!(b >= a - 1e-15);
        prop_assert!(b <= amp * freq + 1e-12);
    }

    #[test]
    fn cylinder_bounds_for_affine(slope in -1.9f64..1.9, r in 0.1f64..0.4) {
        let delta = 1.0;
        let d = GraphDomain::new(Profile::Tilted { slope: vec![slope], level: 0.0 }, 2, 2.0, 1.0, delta).unwrap();
        let cyl = cyl_neighborhood(&d, &[0.0], r).unwrap();
        // Affine graph: ψ ranges over 3R/δ ± |slope| R, inside (R/δ, 5R/δ) iff |slope| < 2/δ.
        prop_assert!((cyl.max_psi - (3.0 * r + slope.abs() * r)).abs() < 1e-9);
        prop_assert!((cyl.min_psi - (3.0 * r - slope.abs() * r)).abs() < 1e-9);
    }
}
