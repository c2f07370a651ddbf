use atiyah::report::SuiteReport;
use atiyah::semidirect::*;
use nalgebra::{DMatrix, DVector};

fn show(r: &SuiteReport) {
    for c in &r.checks {
        eprintln!("{} {}: {:.3e} <= {:.1e} {}", r.suite, c.name, c.max_residual, c.tolerance, c.pass);
    }
}

#[test]
fn se3_suite() {
    let s = SemidirectSpec::se3();
    let r = semidirect_suite(&s, 50, 1).unwrap();
    show(&r);
    assert!(r.pass);
}

#[test]
fn se3_pullback() {
    let s = SemidirectSpec::se3();
    let r = pullback_form_check(&s, 10, 2).unwrap();
    show(&r);
    assert!(r.pass);
}

#[test]
fn se3_reduced_sequence() {
    let s = SemidirectSpec::se3();
    let a = DVector::from_vec(vec![0.0, 0.0, 1.0]);
    let r = reduced_sequence(&s, Some(&a), 5, 3).unwrap();
    show(&r);
    assert!(r.pass);
}

fn r_on_heisenberg() -> SemidirectSpec {
    let r = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0, -1.0]));
    SemidirectSpec::new(atiyah::liealg::abelian(1), atiyah::liealg::heisenberg3(), vec![r]).unwrap()
}

#[test]
fn scaling_action_on_heisenberg() {
    let s = r_on_heisenberg();
    let r = semidirect_suite(&s, 50, 4).unwrap();
    show(&r);
    assert!(r.pass);
    let r = pullback_form_check(&s, 5, 4).unwrap();
    show(&r);
    assert!(r.pass);
    assert!(atiyah::liealg::validate_spec(&s.group()).pass);
    let a = DVector::from_vec(vec![1.0, 0.0, 0.0]);
    assert_eq!(reduced_sequence(&s, Some(&a), 1, 1), Err(SemidirectError::NonAbelian));
    assert!(reduced_sequence(&s, None, 5, 1).unwrap().pass);
}

#[test]
fn se3_product_is_rotation_then_translation() {
    // (k, u)(l, w) = (kl, rho(l)(u) w) with rho(l)(v) = l^-1 v on translations.
    let s = SemidirectSpec::se3();
    let mut rng = atiyah::rng::stream(2, "t");
    let a = s.sample_pair(&mut rng);
    let b = s.sample_pair(&mut rng);
    let (kl, uw) = s.product(&a, &b).unwrap();
    assert!((kl - &a.0 * &b.0).amax() < 1e-14);
    let trans = |u: &DMatrix<f64>| DVector::from_iterator(3, (0..3).map(|i| u[(i, 3)]));
    let expected = b.0.transpose() * trans(&a.1) + trans(&b.1);
    assert!((trans(&uw) - expected).amax() < 1e-14);
}

proptest::proptest! {
    #![proptest_config(proptest::prelude::ProptestConfig::with_cases(32))]

    #[test]
    fn rho_is_anti_homomorphism_and_product_associative(seed in 0u64..100_000) {
        let s = SemidirectSpec::se3();
        let mut rng = atiyah::rng::stream(seed, "p");
        let (a, b, c) = (s.sample_pair(&mut rng), s.sample_pair(&mut rng), s.sample_pair(&mut rng));
        let u = &c.1;
        let lhs = s.rho_act(&(&a.0 * &b.0), u).unwrap();
        let rhs = s.rho_act(&b.0, &s.rho_act(&a.0, u).unwrap()).unwrap();
        proptest::prop_assert!((lhs - rhs).amax() <= 1e-12);
        let l = s.product(&s.product(&a, &b).unwrap(), &c).unwrap();
        let r = s.product(&a, &s.product(&b, &c).unwrap()).unwrap();
        proptest::prop_assert!((l.0 - r.0).amax() <= 1e-12 && (l.1 - r.1).amax() <= 1e-12);
        let e = s.product(&a, &s.inverse_pair(&a).unwrap()).unwrap();
        proptest::prop_assert!((e.0 - s.k.identity()).amax() <= 1e-12 && (e.1 - s.n.identity()).amax() <= 1e-12);
    }

    #[test]
    fn full_momentum_is_equivariant(seed in 0u64..100_000) {
        let s = SemidirectSpec::se3();
        let r = semidirect_suite(&s, 2, seed).unwrap();
        proptest::prop_assert!(r.check("full_momentum_equivariance").unwrap().max_residual <= 1e-9);
        proptest::prop_assert!(r.check("j_sigma_equivariance").unwrap().max_residual <= 1e-9);
    }
}
