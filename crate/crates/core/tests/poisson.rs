use atiyah::bundle::{BundleSpec, Connection};
use atiyah::liealg;
use atiyah::poisson::*;
use nalgebra::{DMatrix, DVector};

fn show(r: &atiyah::report::SuiteReport) {
    for c in &r.checks {
        eprintln!("{} {}: {:.3e} <= {:.1e} {}", r.suite, c.name, c.max_residual, c.tolerance, c.pass);
    }
}

#[test]
fn lie_poisson_so3_brackets_follow_structure_constants() {
    let g = liealg::so3();
    let s = PoissonSpace::lie_poisson(g.clone());
    let mu = DVector::from_vec(vec![0.2, -0.4, 0.9]);
    for i in 0..3 {
        for j in 0..3 {
            let expected: f64 = (0..3).map(|k| g.c(k, i, j) * mu[k]).sum();
            let got = s.bracket(&ScalarField::coordinate(i), &ScalarField::coordinate(j), &mu).unwrap();
            assert!((got - expected).abs() < 1e-15);
        }
    }
    let f = ScalarField::coordinate(1);
    assert_eq!(s.bracket(&f, &f, &mu).unwrap(), 0.0);
}

#[test]
fn abelian_lie_poisson_is_zero() {
    let s = PoissonSpace::lie_poisson(liealg::abelian(3));
    let mut rng = atiyah::rng::stream(2, "t");
    let f = ScalarField::random_quadratic(3, &mut rng);
    let g = ScalarField::random_quadratic(3, &mut rng);
    assert_eq!(s.bracket(&f, &g, &DVector::from_vec(vec![1.0, 2.0, 3.0])).unwrap(), 0.0);
}

#[test]
fn space_suites_pass() {
    let b = BundleSpec::so3_over_square();
    let spaces = vec![
        PoissonSpace::canonical(2),
        PoissonSpace::lie_poisson(liealg::so3()),
        PoissonSpace::lie_poisson(liealg::heisenberg3()),
        PoissonSpace::quotient(b.clone()).unwrap(),
        PoissonSpace::cotangent_group(liealg::so3()),
        PoissonSpace::product(vec![PoissonSpace::canonical(1), PoissonSpace::lie_poisson(liealg::so3())]),
    ];
    for s in &spaces {
        let r = space_suite(s, 200, 10, 11);
        show(&r);
        assert!(r.pass);
    }
}

#[test]
fn jacobi_tolerances_by_kind() {
    assert!(jacobi_check(&PoissonSpace::canonical(2), None, 10, 1) <= 1e-8);
    let so3 = PoissonSpace::lie_poisson(liealg::so3());
    assert!(jacobi_check(&so3, None, 10, 1) <= 1e-8);
    let q = PoissonSpace::quotient(BundleSpec::so3_over_square()).unwrap();
    assert!(jacobi_check(&q, None, 5, 1) <= 1e-6);
}

#[test]
fn quotient_tensor_matches_lifted_bracket() {
    let b = BundleSpec::so3_over_square();
    let s = PoissonSpace::quotient(b.clone()).unwrap();
    let mut rng = atiyah::rng::stream(5, "t");
    for _ in 0..10 {
        let z = s.sample_point(&mut rng);
        let f = ScalarField::random_quadratic(s.dim(), &mut rng);
        let g = ScalarField::random_quadratic(s.dim(), &mut rng);
        let u = b.sample_group(&mut rng);
        let lifted = quotient_bracket_lifted(&b, &f, &g, &z, &u);
        let direct = s.bracket(&f, &g, &z).unwrap();
        assert!((lifted - direct).abs() < 1e-7, "{lifted} {direct}");
    }
}

#[test]
fn quotient_tensor_is_canonical_plus_lie_poisson_for_trivial_bundle() {
    // Closed-form oracle: in gauge-fixed coordinates T*P/G = T*M x g*.
    let b = BundleSpec::so3_over_square();
    let s = PoissonSpace::quotient(b.clone()).unwrap();
    let z = DVector::from_vec(vec![0.1, -0.3, 0.5, 0.2, -0.4, 0.8, 0.3]);
    let pi = s.tensor(&z).unwrap();
    let mut expected = DMatrix::zeros(7, 7);
    expected.view_mut((0, 0), (4, 4)).copy_from(&atiyah::linalg::canonical_tensor(2));
    expected.view_mut((4, 4), (3, 3)).copy_from(&lie_poisson_tensor(&b.group, &z.rows(4, 3).into_owned()));
    assert!((pi - expected).amax() < 1e-9);
}

#[test]
fn dual_pair_polarity() {
    for b in [BundleSpec::so3_over_square(), BundleSpec::u1_magnetic()] {
        let r = dual_pair_check(&b, 50, 3);
        show(&r);
        assert!(r.pass);
    }
}

#[test]
fn coadjoint_orbit_dimensions() {
    let g = liealg::so3();
    assert_eq!(coadjoint_orbit(&g, &DVector::zeros(3), 5, 1).dim, 0);
    let o = coadjoint_orbit(&g, &DVector::from_vec(vec![0.0, 0.0, 1.0]), 20, 1);
    assert_eq!(o.dim, 2);
    assert!(o.casimir_residual < 1e-10);
    assert_eq!(coadjoint_orbit(&liealg::abelian(2), &DVector::from_vec(vec![1.0, 2.0]), 5, 1).dim, 0);
}

#[test]
fn leaf_structure_so3() {
    let b = BundleSpec::so3_over_square();
    let o = coadjoint_orbit(&b.group, &DVector::from_vec(vec![0.3, -0.5, 0.8]), 10, 1);
    let (r, s) = leaf_structure(&b, &o, 20, 4).unwrap();
    show(&r);
    assert!(r.pass);
    assert_eq!(s.leaf_dim, 6);
    let zero = coadjoint_orbit(&b.group, &DVector::zeros(3), 1, 1);
    let (r, s) = leaf_structure(&b, &zero, 20, 4).unwrap();
    show(&r);
    assert!(r.pass);
    assert_eq!(s.leaf_dim, 4);
}

#[test]
fn magnetic_u1() {
    let b = BundleSpec::u1_magnetic();
    let o = coadjoint_orbit(&b.group, &DVector::from_vec(vec![1.0]), 1, 1);
    let (mt, r) = magnetic_term(&b, &o, 10, 2).unwrap();
    show(&r);
    assert!(r.pass);
    let bm = mt.evaluate(&DVector::from_vec(vec![0.2, 0.1, 0.5, -0.3]));
    assert!((bm[(0, 1)] - 1.0).abs() < 1e-7 && (bm[(1, 0)] + 1.0).abs() < 1e-7);
    let flat = b.with_connection(Connection::Flat);
    let (_, r) = magnetic_term(&flat, &o, 10, 2).unwrap();
    show(&r);
    assert!(r.pass);
}

#[test]
fn magnetic_rejects_sphere_orbit() {
    let b = BundleSpec::so3_over_square();
    let o = coadjoint_orbit(&b.group, &DVector::from_vec(vec![0.0, 0.0, 1.0]), 1, 1);
    assert!(matches!(magnetic_term(&b, &o, 1, 1), Err(PoissonError::NotSingleton)));
}

#[test]
fn groupoid_action() {
    let b = BundleSpec::so3_over_square();
    let o = coadjoint_orbit(&b.group, &DVector::from_vec(vec![0.3, -0.5, 0.8]), 1, 1);
    let r = groupoid_action_symplectic(&b, &o, 5, 4).unwrap();
    show(&r);
    assert!(r.pass);
}

proptest::proptest! {
    #![proptest_config(proptest::prelude::ProptestConfig::with_cases(32))]

    #[test]
    fn lie_poisson_antisymmetric_with_central_casimirs(seed in 0u64..100_000) {
        let mut rng = atiyah::rng::stream(seed, "p");
        for g in [liealg::so3(), liealg::builtin("se3").unwrap()] {
            let s = PoissonSpace::lie_poisson(g.clone());
            let x = s.sample_point(&mut rng);
            let f = ScalarField::random_quadratic(g.dim, &mut rng);
            let h = ScalarField::random_quadratic(g.dim, &mut rng);
            let fh = s.bracket(&f, &h, &x).unwrap();
            let hf = s.bracket(&h, &f, &x).unwrap();
            proptest::prop_assert!((fh + hf).abs() <= 1e-12);
            for (_, c) in casimirs(&g) {
                proptest::prop_assert!(s.bracket(&c, &f, &x).unwrap().abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn dual_pair_polarity_random_seeds(seed in 0u64..100_000) {
        let r = dual_pair_check(&BundleSpec::u1_magnetic(), 3, seed);
        proptest::prop_assert!(r.pass);
    }
}
