use atiyah::bundle::*;
use atiyah::liealg;
use nalgebra::DVector;
use proptest::prelude::*;
use std::f64::consts::PI;

#[test]
fn suites_pass_on_builtins() {
    for b in [BundleSpec::so3_over_square(), BundleSpec::u1_magnetic()] {
        for r in [action_suite(&b, 100, 1), atiyah_exactness(&b, 100, 1), connection_suite(&b, 100, 1), verify_anchor_pullback(&b, 50, 1)] {
            assert!(r.pass, "{}: {:?}", r.suite, r.failing());
        }
    }
}

#[test]
fn right_action_composes() {
    // kappa_{gh} = kappa_h o kappa_g, so T kappa_{gh} = T kappa_h T kappa_g.
    let b = BundleSpec::so3_over_square();
    let mut rng = atiyah::rng::stream(3, "t");
    for _ in 0..20 {
        let (g, h) = (b.sample_group(&mut rng), b.sample_group(&mut rng));
        let lhs = b.t_kappa_g(&(&g * &h));
        assert!((lhs - b.t_kappa_g(&h) * b.t_kappa_g(&g)).amax() < 1e-12);
        let p = b.sample_point(&mut rng);
        let q = b.act(&b.act(&p, &g), &h);
        assert!((q.fiber - b.act(&p, &(&g * &h)).fiber).amax() < 1e-14);
    }
}

#[test]
fn abelian_momentum_is_invariant() {
    let b = BundleSpec::u1_magnetic();
    let mut rng = atiyah::rng::stream(4, "t");
    for _ in 0..20 {
        let phi = b.sample_covector(&mut rng);
        let g = b.sample_group(&mut rng);
        let moved = b.cot_act(&phi, &g);
        assert!((b.momentum_j(&moved).unwrap() - b.momentum_j(&phi).unwrap()).amax() < 1e-12);
    }
}

#[test]
fn quotient_rep_is_idempotent_and_gauge_fixed() {
    let b = BundleSpec::so3_over_square();
    let mut rng = atiyah::rng::stream(5, "t");
    let phi = b.sample_covector(&mut rng);
    let x = b.quotient_rep(&phi);
    let lifted = b.lift_class(&x, &b.group.identity());
    assert_eq!(lifted.point.fiber, b.group.identity());
    let again = b.quotient_rep(&lifted);
    assert_eq!(again.base, x.base);
    assert!((again.covector - x.covector).amax() < 1e-15);
}

#[test]
fn torus_angle_wrap_gives_same_class() {
    let b = BundleSpec::u1_magnetic();
    let mut rng = atiyah::rng::stream(6, "t");
    let mut phi = b.sample_covector(&mut rng);
    let theta = 0.7;
    phi.point.fiber = b.group.exp(&DVector::from_vec(vec![theta])).unwrap();
    let mut wrapped = phi.clone();
    wrapped.point.fiber = b.group.exp(&DVector::from_vec(vec![theta + 2.0 * PI])).unwrap();
    let (x, y) = (b.quotient_rep(&phi), b.quotient_rep(&wrapped));
    assert!((x.covector - y.covector).amax() < 1e-12);
}

#[test]
fn zero_section_and_flat_sigma() {
    let b = BundleSpec::so3_over_square();
    let flat = b.with_connection(Connection::Flat);
    let m = BasePoint::Chart(DVector::from_vec(vec![0.2, -0.6]));
    let chi = DVector::from_vec(vec![0.5, -1.0, 2.0]);
    let s = flat.sigma(&m, &chi);
    assert_eq!(s.covector.rows(0, 2).amax(), 0.0);
    assert_eq!(s.covector.rows(2, 3), chi.rows(0, 3));
    let zero = b.sigma(&m, &DVector::zeros(3));
    let rep = b.lift_class(&zero, &b.group.identity());
    assert!(b.momentum_j(&rep).unwrap().amax() < 1e-15);
}

#[test]
fn a_star_lands_in_zero_momentum() {
    let b = BundleSpec::so3_over_square();
    let m = BasePoint::Chart(DVector::from_vec(vec![-0.1, 0.4]));
    let x = b.a_star(&m, &DVector::from_vec(vec![1.5, -0.25]));
    let rep = b.lift_class(&x, &b.group.identity());
    assert!(b.momentum_j(&rep).unwrap().amax() < 1e-14);
}

#[test]
fn bundle_doc_round_trip() {
    let json = r#"{"kind": "TrivialProduct", "base_box": [[-1, 1], [-1, 1]], "group": "u1",
                   "connection": {"A": [[[[-0.5, [0, 1]]]], [[[0.5, [1, 0]]]]]}}"#;
    let doc: BundleDoc = serde_json::from_str(json).unwrap();
    let b = BundleSpec::from_doc(&doc).unwrap();
    assert_eq!(b.connection, BundleSpec::u1_magnetic().connection);
    let bad = r#"{"kind": "TrivialProduct", "base_box": [[1, -1]], "group": "so3"}"#;
    assert!(BundleSpec::from_doc(&serde_json::from_str(bad).unwrap()).is_err());
    let unknown = r#"{"kind": "TrivialProduct", "base_box": [[-1, 1]], "group": "nope"}"#;
    assert!(BundleSpec::from_doc(&serde_json::from_str(unknown).unwrap()).is_err());
}

#[test]
fn semidirect_total_bundle_dimensions() {
    let sd = atiyah::semidirect::SemidirectSpec::se3();
    let b = BundleSpec::semidirect_total(&sd);
    assert_eq!(b.base_dim(), 3);
    assert_eq!(b.group.name, liealg::abelian(3).name);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn j_equivariant_and_quotient_invariant(seed in 0u64..100_000) {
        let b = BundleSpec::so3_over_square();
        let mut rng = atiyah::rng::stream(seed, "p");
        let phi = b.sample_covector(&mut rng);
        let g = b.sample_group(&mut rng);
        prop_assert!(b.check_equivariance_j(&phi, &g) <= 1e-10);
        prop_assert_eq!(b.check_equivariance_j(&phi, &b.group.identity()), 0.0);
        let (x, y) = (b.quotient_rep(&phi), b.quotient_rep(&b.cot_act(&phi, &g)));
        prop_assert!((x.covector - y.covector).amax() <= 1e-11);
    }

    #[test]
    fn alpha_reproduces_generators(seed in 0u64..100_000) {
        let b = BundleSpec::so3_over_square();
        let mut rng = atiyah::rng::stream(seed, "p");
        let p = b.sample_point(&mut rng);
        let xi = atiyah::rng::uniform_vec(&mut rng, 3, 1.0);
        let v = b.t_kappa_p() * &xi;
        prop_assert!((b.alpha(&p, &v) - xi).amax() <= 1e-10);
    }
}
