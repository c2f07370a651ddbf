use atiyah::liealg::*;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use std::f64::consts::PI;

fn vec3() -> impl Strategy<Value = DVector<f64>> {
    prop::array::uniform3(-1.0f64..1.0).prop_map(|a| DVector::from_row_slice(&a))
}

fn groups() -> Vec<LieGroupSpec> {
    vec![so3(), heisenberg3(), abelian(3), torus(2), builtin("se3").unwrap()]
}

#[test]
fn builtins_validate() {
    for g in groups() {
        let r = validate_spec(&g);
        assert!(r.pass, "{}: {:?}", g.name, r.failing());
    }
}

#[test]
fn rodrigues_quarter_turn() {
    let g = so3();
    let r = g.exp(&(g.unit(2) * (PI / 2.0))).unwrap();
    let expected = DMatrix::from_row_slice(3, 3, &[0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
    assert!((r - expected).amax() < 1e-15);
}

#[test]
fn rodrigues_general_axis() {
    // R = I + sin t K + (1 - cos t) K^2 for the unit axis n, K = hat(n).
    let g = so3();
    let n = DVector::from_vec(vec![1.0, -2.0, 2.0]) / 3.0;
    let t: f64 = 1.3;
    let k = g.hat(&n);
    let oracle = DMatrix::identity(3, 3) + &k * t.sin() + &k * &k * (1.0 - t.cos());
    assert!((g.exp(&(&n * t)).unwrap() - oracle).amax() < 1e-14);
}

#[test]
fn log_inverts_exp() {
    let g = so3();
    let x = g.unit(0) * 0.1;
    assert!((g.log(&g.exp(&x).unwrap()).unwrap() - x).amax() < 1e-15);
}

#[test]
fn bracket_examples() {
    let g = so3();
    let x = DVector::from_vec(vec![0.3, -0.7, 0.2]);
    assert_eq!(g.bracket(&x, &x).unwrap(), g.zero());
    let r = abelian(4);
    assert_eq!(r.bracket(&r.unit(0), &r.unit(3)).unwrap(), r.zero());
    // so(3) bracket is the cross product.
    let y = DVector::from_vec(vec![-0.5, 0.1, 0.9]);
    let cross = DVector::from_vec(vec![x[1] * y[2] - x[2] * y[1], x[2] * y[0] - x[0] * y[2], x[0] * y[1] - x[1] * y[0]]);
    assert!((g.bracket(&x, &y).unwrap() - cross).amax() < 1e-15);
}

#[test]
fn identity_acts_trivially() {
    for g in groups() {
        let e = g.identity();
        let x = DVector::from_fn(g.dim, |i, _| 0.1 * (i as f64 + 1.0));
        assert!((g.adjoint(&e, &x).unwrap() - &x).amax() < 1e-15);
        assert!((g.coadjoint(&e, &x).unwrap() - &x).amax() < 1e-15);
    }
}

#[test]
fn abelian_coadjoint_is_trivial() {
    for g in [abelian(2), torus(3)] {
        let h = g.exp(&DVector::from_fn(g.dim, |i, _| 0.4 - i as f64)).unwrap();
        let mu = DVector::from_fn(g.dim, |i, _| 1.0 + i as f64);
        assert!((g.coadjoint(&h, &mu).unwrap() - mu).amax() < 1e-14);
    }
}

#[test]
fn tangent_group_closed_forms() {
    let g = so3();
    let a = g.exp(&DVector::from_vec(vec![0.2, 0.1, -0.4])).unwrap();
    let b = g.exp(&DVector::from_vec(vec![-0.6, 0.3, 0.5])).unwrap();
    let zero = |m: &DMatrix<f64>| TangentGroupPoint { base: m.clone(), left: g.zero() };
    let p = tangent_group_product(&g, &zero(&a), &zero(&b)).unwrap();
    assert_eq!(p.left, g.zero());
    assert!((p.base - &a * &b).amax() < 1e-15);
    let x = DVector::from_vec(vec![1.0, 2.0, 3.0]);
    let y = DVector::from_vec(vec![-1.0, 0.5, 0.0]);
    let e = g.identity();
    let q = tangent_group_product(
        &g,
        &TangentGroupPoint { base: e.clone(), left: x.clone() },
        &TangentGroupPoint { base: e, left: y.clone() },
    )
    .unwrap();
    assert!((q.left - (x + y)).amax() < 1e-15);
}

#[test]
fn tangent_group_matches_product_curve() {
    // d/dt (g exp(t xi))(h exp(t eta)) at 0 = gh hat(left).
    let g = so3();
    let gm = g.exp(&DVector::from_vec(vec![0.7, -0.2, 0.4])).unwrap();
    let hm = g.exp(&DVector::from_vec(vec![-0.3, 0.9, 0.1])).unwrap();
    let xi = DVector::from_vec(vec![0.5, 0.25, -1.0]);
    let eta = DVector::from_vec(vec![-0.4, 0.6, 0.3]);
    let curve = |t: f64| &gm * g.exp(&(&xi * t)).unwrap() * &hm * g.exp(&(&eta * t)).unwrap();
    let h = 1e-5;
    let fd = (curve(h) - curve(-h)) / (2.0 * h);
    let p = tangent_group_product(
        &g,
        &TangentGroupPoint { base: gm.clone(), left: xi.clone() },
        &TangentGroupPoint { base: hm.clone(), left: eta.clone() },
    )
    .unwrap();
    assert!((fd - &p.base * g.hat(&p.left)).amax() < 1e-9);
}

#[test]
fn group_mismatch_rejected() {
    let g = so3();
    let a = TangentGroupPoint { base: DMatrix::identity(4, 4), left: g.zero() };
    let b = TangentGroupPoint { base: g.identity(), left: g.zero() };
    assert!(matches!(tangent_group_product(&g, &a, &b), Err(LieError::GroupMismatch(..))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bracket_equals_commutator(x in vec3(), y in vec3()) {
        for g in [so3(), heisenberg3()] {
            let (hx, hy) = (g.hat(&x), g.hat(&y));
            let oracle = g.vee(&(&hx * &hy - &hy * &hx));
            prop_assert!((g.bracket(&x, &y).unwrap() - oracle).amax() <= 1e-12);
        }
    }

    #[test]
    fn jacobi_on_random_vectors(x in vec3(), y in vec3(), z in vec3()) {
        let g = heisenberg3();
        let b = |a: &DVector<f64>, c: &DVector<f64>| g.bracket(a, c).unwrap();
        let s = b(&b(&x, &y), &z) + b(&b(&y, &z), &x) + b(&b(&z, &x), &y);
        prop_assert!(s.amax() <= 1e-12);
    }

    #[test]
    fn exp_log_round_trip(x in vec3()) {
        for g in [so3(), heisenberg3(), abelian(3)] {
            let back = g.log(&g.exp(&x).unwrap()).unwrap();
            prop_assert!((back - &x).amax() <= 1e-10);
        }
    }

    #[test]
    fn adjoint_is_conjugation_and_homomorphism(a in vec3(), b in vec3(), x in vec3()) {
        let g = so3();
        let (ga, gb) = (g.exp(&a).unwrap(), g.exp(&b).unwrap());
        let conj = g.vee(&(&ga * g.hat(&x) * g.inverse(&ga)));
        prop_assert!((g.adjoint(&ga, &x).unwrap() - conj).amax() <= 1e-12);
        let lhs = g.adjoint_matrix(&(&ga * &gb));
        prop_assert!((lhs - g.adjoint_matrix(&ga) * g.adjoint_matrix(&gb)).amax() <= 1e-12);
    }

    #[test]
    fn coadjoint_pairing(a in vec3(), mu in vec3(), x in vec3()) {
        // Ad*_g mu = mu o Ad_{g^-1}, a left action.
        let g = heisenberg3();
        let ga = g.exp(&a).unwrap();
        let lhs = g.coadjoint(&ga, &mu).unwrap().dot(&x);
        let rhs = mu.dot(&g.adjoint(&g.inverse(&ga), &x).unwrap());
        prop_assert!((lhs - rhs).abs() <= 1e-13);
    }

    #[test]
    fn tangent_group_associative_with_inverse(a in vec3(), b in vec3(), c in vec3(), xi in vec3(), eta in vec3(), zeta in vec3()) {
        let g = so3();
        let pt = |m: &DVector<f64>, l: &DVector<f64>| TangentGroupPoint { base: g.exp(m).unwrap(), left: l.clone() };
        let (p, q, r) = (pt(&a, &xi), pt(&b, &eta), pt(&c, &zeta));
        let m = |u: &TangentGroupPoint, v: &TangentGroupPoint| tangent_group_product(&g, u, v).unwrap();
        let l = m(&m(&p, &q), &r);
        let rr = m(&p, &m(&q, &r));
        prop_assert!((l.base - rr.base).amax() <= 1e-10 && (l.left - rr.left).amax() <= 1e-10);
        let id = m(&p, &tangent_group_inverse(&g, &p).unwrap());
        prop_assert!((id.base - g.identity()).amax() <= 1e-12 && id.left.amax() <= 1e-12);
    }
}
