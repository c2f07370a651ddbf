use atiyah::bundle::{BundleSpec, Connection};
use atiyah::groupoid::*;
use atiyah::report::SuiteReport;
use nalgebra::DVector;
use proptest::prelude::*;

fn show(r: &SuiteReport) {
    for c in &r.checks {
        eprintln!("{} {}: {:.3e} <= {:.1e} {}", r.suite, c.name, c.max_residual, c.tolerance, c.pass);
    }
}

fn bundles() -> Vec<BundleSpec> {
    vec![BundleSpec::so3_over_square(), BundleSpec::u1_magnetic()]
}

#[test]
fn vb_axioms_hold_for_all_spaces() {
    for b in bundles() {
        for space in VbSpace::all() {
            let r = vb_axiom_suite(&VbGroupoid::new(space, &b), 100, 3);
            show(&r);
            assert!(r.pass, "{:?}", space);
        }
    }
}

#[test]
fn core_dimensions_so3_bundle() {
    // P = [-1,1]^2 x SO(3): dim P = 5, g = so(3), base dim 2.
    let b = BundleSpec::so3_over_square();
    let mut rng = atiyah::rng::stream(4, "t");
    let p = b.sample_point(&mut rng);
    let dims: Vec<usize> = VbSpace::all().iter().map(|s| VbGroupoid::new(*s, &b).core_compute(&p).dim).collect();
    assert_eq!(dims, vec![5, 0, 5, 5, 2, 3]);
    let r = core_suite(&b, 10, 1);
    show(&r);
    assert!(r.pass);
}

#[test]
fn fiber_dimensions_add_up() {
    // 3 + 7 = 10 for the tangent sequence; 7 + 3 = 10 for the dual one.
    let b = BundleSpec::so3_over_square();
    let dims: Vec<usize> = VbSpace::all().iter().map(|s| VbGroupoid::new(*s, &b).fiber_dim()).collect();
    assert_eq!(dims, vec![10, 3, 7, 10, 7, 3]);
}

#[test]
fn flat_quotient_class_drops_fiber_difference() {
    // With A = 0 and u_q = e the class of (v, w) is (v - (0, w_f), w_base).
    let b = BundleSpec::so3_over_square().with_connection(Connection::Flat);
    let g = VbGroupoid::new(VbSpace::TangentQuotient, &b);
    let mut rng = atiyah::rng::stream(9, "t");
    let p = b.sample_point(&mut rng);
    let q = atiyah::bundle::BundlePoint {
        base: b.sample_point(&mut rng).base,
        fiber: b.group.identity(),
    };
    let v = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0, 5.0]);
    let w = DVector::from_vec(vec![-1.0, 0.5, 0.25, -2.0, 7.0]);
    let c = g.quotient_class(&p, &q, &v, &w);
    let expected = DVector::from_vec(vec![1.0, 2.0, 2.75, 6.0, -2.0, -1.0, 0.5]);
    assert!((c.coords - expected).amax() < 1e-15);
}

#[test]
fn cotangent_pair_structure() {
    for b in bundles() {
        let r = cotangent_pair_suite(&b, 100, 2);
        show(&r);
        assert!(r.pass);
    }
}

#[test]
fn cotangent_pair_hand_product() {
    let b = BundleSpec::u1_magnetic();
    let g = VbGroupoid::new(VbSpace::CotangentPair, &b);
    let mut rng = atiyah::rng::stream(1, "t");
    let (p, q) = g.sample_arrow(&mut rng);
    let r = b.sample_point(&mut rng);
    let a = VbElement {
        space: VbSpace::CotangentPair,
        target: p.clone(),
        source: q.clone(),
        coords: DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]),
    };
    let c = VbElement {
        space: VbSpace::CotangentPair,
        target: q.clone(),
        source: r.clone(),
        coords: DVector::from_vec(vec![-4.0, -5.0, -6.0, 7.0, 8.0, 9.0]),
    };
    let prod = g.product(&a, &c).unwrap();
    assert_eq!(prod.coords.as_slice(), &[1.0, 2.0, 3.0, 7.0, 8.0, 9.0]);
    let inv = g.inverse(&a).unwrap();
    assert_eq!(inv.coords.as_slice(), &[-4.0, -5.0, -6.0, -1.0, -2.0, -3.0]);
    assert!(matches!(g.product(&a, &a), Err(GroupoidError::NotComposable(_))));
}

#[test]
fn dual_structure_matches_cotangent_groupoid() {
    for b in bundles() {
        let r = dual_structure_suite(&b, 10, 100, 5);
        show(&r);
        assert!(r.pass);
    }
}

#[test]
fn gauge_dual() {
    for b in bundles() {
        let r = gauge_dual_suite(&b, 50, 6);
        show(&r);
        assert!(r.pass);
    }
}

#[test]
fn short_exact_sequences() {
    for b in bundles() {
        for id in SEQUENCES {
            let r = ses_fiber_check(id, &b, 20, 7).unwrap();
            show(&r);
            assert!(r.pass, "{id}");
        }
    }
    assert!(matches!(
        ses_fiber_check("nope", &BundleSpec::u1_magnetic(), 1, 1),
        Err(GroupoidError::UnknownSequence(_))
    ));
}

#[test]
fn wrong_space_rejected() {
    let b = BundleSpec::u1_magnetic();
    let t = VbGroupoid::new(VbSpace::TangentPair, &b);
    let c = VbGroupoid::new(VbSpace::CotangentPair, &b);
    let mut rng = atiyah::rng::stream(1, "t");
    let (p, q) = t.sample_arrow(&mut rng);
    let x = t.sample_over(&mut rng, &p, &q);
    assert!(matches!(c.source(&x), Err(GroupoidError::WrongSpace { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn tangent_quotient_product_is_associative(seed in 0u64..10_000) {
        let b = BundleSpec::so3_over_square();
        let r = vb_axiom_suite(&VbGroupoid::new(VbSpace::TangentQuotient, &b), 2, seed);
        prop_assert!(r.check("associativity").unwrap().max_residual <= 1e-11);
        prop_assert!(r.check("interchange_law").unwrap().max_residual <= 1e-11);
    }

    #[test]
    fn i2_star_vanishes_on_annihilator(seed in 0u64..10_000) {
        let b = BundleSpec::so3_over_square();
        let a = VbGroupoid::new(VbSpace::VerticalAnnihilator, &b);
        let mut rng = atiyah::rng::stream(seed, "p");
        let (p, q) = a.sample_arrow(&mut rng);
        let z = a.sample_over(&mut rng, &p, &q);
        prop_assert!(i2_star(&b, &z).coords.amax() <= 1e-12);
    }
}
