use atiyah::dynamics::*;
use atiyah::liealg;
use atiyah::poisson::{PoissonSpace, ScalarField};
use atiyah::semidirect::*;
use nalgebra::DVector;

#[test]
fn free_particle_closed_form() {
    // H = p^2/2 on T*R: q' = p, p' = 0.
    let s = PoissonSpace::canonical(1);
    let h = ScalarField::with_gradient(|x| 0.5 * x[1] * x[1], |x| DVector::from_vec(vec![0.0, x[1]]));
    let v = ham_vector_field(&s, &h, &DVector::from_vec(vec![0.4, -1.5])).unwrap();
    assert_eq!(v.as_slice(), &[-1.5, 0.0]);
}

#[test]
fn vector_field_is_bracket_with_coordinates() {
    let s = PoissonSpace::lie_poisson(liealg::so3());
    let h = ScalarField::with_gradient(
        |x| 0.5 * (x[0] * x[0] + x[1] * x[1] / 2.0 + x[2] * x[2] / 3.0),
        |x| DVector::from_vec(vec![x[0], x[1] / 2.0, x[2] / 3.0]),
    );
    let x = DVector::from_vec(vec![0.3, -0.8, 0.5]);
    let v = ham_vector_field(&s, &h, &x).unwrap();
    for i in 0..3 {
        assert!((v[i] - s.bracket(&ScalarField::coordinate(i), &h, &x).unwrap()).abs() < 1e-15);
    }
    // Euler oracle in this sign convention: Pi' = Omega x Pi.
    let om = DVector::from_vec(vec![x[0], x[1] / 2.0, x[2] / 3.0]);
    assert!((v - om.cross(&x)).amax() < 1e-15);
}

#[test]
fn free_rigid_body_casimir() {
    let s = PoissonSpace::lie_poisson(liealg::so3());
    let h = ScalarField::with_gradient(
        |x| 0.5 * (x[0] * x[0] + x[1] * x[1] / 2.0 + x[2] * x[2] / 3.0),
        |x| DVector::from_vec(vec![x[0], x[1] / 2.0, x[2] / 3.0]),
    );
    let mon = vec![("norm_sq".to_string(), ScalarField::new(|x| x.norm_squared()))];
    let t = integrate(&s, &h, &DVector::from_vec(vec![0.3, -0.8, 0.5]), 1e-3, 10_000, &mon).unwrap();
    let d = monitor(&t);
    assert!(d[0].max_drift <= 1e-8, "{}", d[0].max_drift);
}

#[test]
fn heavy_top_invariants_and_order() {
    let top = heavy_top_model(&HeavyTopParams::lagrange()).unwrap();
    let x0 = DVector::from_vec(vec![0.2, 0.5, 1.1, 0.3, -0.4, 0.85]);
    let mut mon = top.monitors();
    mon.push(("pi_3".into(), ScalarField::coordinate(2)));
    let t = integrate(&top.space, &top.hamiltonian, &x0, 1e-3, 10_000, &mon).unwrap();
    for d in monitor(&t) {
        eprintln!("{}: {:.3e}", d.name, d.max_drift);
        assert!(d.max_drift <= 1e-6, "{}", d.name);
    }
    let c = convergence_ratio(&top.space, &top.hamiltonian, &x0, 0.04, 50).unwrap();
    eprintln!("{c:?}");
    assert!((12.0..=20.0).contains(&c.ratio));
}

#[test]
fn heavy_top_upstairs_reduces_to_se3_flow() {
    let top = heavy_top_model(&HeavyTopParams { inertia: [1.0, 2.0, 3.0], mgl: 0.7, axis: [0.1, 0.2, 1.0] }).unwrap();
    let mu0 = DVector::from_vec(vec![0.2, 0.5, 1.1, 0.3, -0.4, 0.85]);
    let mut rng = atiyah::rng::stream(3, "t");
    let u0 = atiyah::bundle::sample_element(&top.group, &mut rng, 0.5);
    let (space, h) = top.upstairs();
    let x0 = upstairs_lift(&top.group, &u0, &mu0);
    assert!((upstairs_reduce(&top.group, &x0) - &mu0).amax() < 1e-13);
    let n = 1000;
    let up = integrate(&space, &h, &x0, 1e-3, n, &[]).unwrap();
    let down = integrate(&top.space, &top.hamiltonian, &mu0, 1e-3, n, &[]).unwrap();
    let reduced = upstairs_reduce(&top.group, up.states.last().unwrap());
    let dist = (reduced - down.states.last().unwrap()).amax();
    eprintln!("upstairs distance {dist:.3e}");
    assert!(dist <= 1e-6);
}
