//! End-to-end acceptance criteria. Each criterion prints one line, pass or fail,
//! straight to stdout so the lines appear without `--nocapture`.

use atiyah::bundle::{BundleSpec, Connection};
use atiyah::dynamics;
use atiyah::groupoid::{self, VbGroupoid, VbSpace};
use atiyah::poisson::{self, coadjoint_orbit};
use atiyah::report::{Check, MaxResidual, SuiteReport};
use atiyah::rng;
use atiyah::runner::{self, Overrides};
use atiyah::semidirect::{self, HeavyTopParams, SemidirectSpec};
use nalgebra::DVector;
use std::io::Write;
use std::time::Instant;

const SEED: u64 = 20240917;

struct Outcome {
    pass: bool,
    detail: String,
}

/// Pass iff the named check exists, passes its own tolerance, has enough
/// trials and stays below `tol`.
fn require(r: &SuiteReport, name: &str, tol: f64, min_trials: usize, notes: &mut Vec<String>) -> bool {
    match r.check(name) {
        Some(c) => {
            notes.push(format!("{name}={:.1e}", c.max_residual));
            c.pass && c.max_residual <= tol && c.trials >= min_trials
        }
        None => {
            notes.push(format!("{name}=missing"));
            false
        }
    }
}

fn all_pass(r: &SuiteReport, notes: &mut Vec<String>) -> bool {
    for c in r.failing() {
        notes.push(format!("{}/{} failed ({:.1e} > {:.1e})", r.suite, c.name, c.max_residual, c.tolerance));
    }
    r.pass
}

fn c1_vb_axioms() -> Outcome {
    let b = BundleSpec::so3_over_square();
    let mut ok = true;
    let mut notes = vec![];
    let t = Instant::now();
    for space in VbSpace::all() {
        let r = groupoid::vb_axiom_suite(&VbGroupoid::new(space, &b), 500, SEED);
        ok &= all_pass(&r, &mut notes);
        for c in &r.checks {
            ok &= c.max_residual <= 1e-11 && c.trials >= 500;
        }
        let worst = r.checks.iter().map(|c| c.max_residual).fold(0.0, f64::max);
        notes.push(format!("{space:?} {worst:.1e}"));
    }
    let secs = t.elapsed().as_secs_f64();
    notes.push(format!("500 samples each, {secs:.2}s"));
    Outcome {
        pass: ok && secs < 10.0,
        detail: notes.join(", "),
    }
}

fn c2_duality() -> Outcome {
    let mut ok = true;
    let mut notes = vec![];
    for b in [BundleSpec::so3_over_square(), BundleSpec::u1_magnetic()] {
        notes.push(format!("[{}]", b.name));
        let r = groupoid::dual_structure_suite(&b, 10, 100, SEED);
        ok &= all_pass(&r, &mut notes);
        ok &= require(&r, "factorization_independence", 1e-11, 1000, &mut notes);
        for name in [
            "dual_source_matches_cotangent",
            "dual_target_matches_cotangent",
            "dual_product_matches_cotangent",
            "dual_identity_matches_cotangent",
        ] {
            ok &= require(&r, name, 1e-10, 1, &mut notes);
        }
    }
    Outcome {
        pass: ok,
        detail: notes.join(", "),
    }
}

fn c3_cores() -> Outcome {
    let b = BundleSpec::so3_over_square();
    let r = groupoid::core_suite(&b, 50, SEED);
    let mut notes = vec![];
    let mut ok = all_pass(&r, &mut notes);
    let p = b.sample_point(&mut rng::stream(SEED, "acceptance.cores"));
    let dims: Vec<usize> = [VbSpace::TangentPair, VbSpace::TrivialVertical, VbSpace::TangentQuotient]
        .iter()
        .map(|s| VbGroupoid::new(*s, &b).core_compute(&p).dim)
        .collect();
    ok &= dims == vec![b.dim(), 0, b.dim()];
    ok &= r.check("core_dims_match").is_some_and(|c| c.trials >= 50);
    notes.push(format!("dims {dims:?} with dim P = {}, 50 fibers", b.dim()));
    Outcome {
        pass: ok,
        detail: notes.join(", "),
    }
}

fn c4_equivariance() -> Outcome {
    let b = BundleSpec::so3_over_square();
    let mut r = rng::stream(SEED, "acceptance.equivariance");
    let mut j = MaxResidual::new();
    for _ in 0..200 {
        let phi = b.sample_covector(&mut r);
        let g = b.sample_group(&mut r);
        j.push(b.check_equivariance_j(&phi, &g));
    }
    let s = semidirect::semidirect_suite(&SemidirectSpec::se3(), 200, SEED).expect("se3 suite runs");
    let mut notes = vec![format!("J on SO(3) bundle {:.1e} over {}", j.value(), j.count())];
    let mut ok = j.value() <= 1e-9 && j.count() >= 200;
    ok &= require(&s, "j_sigma_equivariance", 1e-9, 200, &mut notes);
    ok &= require(&s, "full_momentum_equivariance", 1e-9, 200, &mut notes);
    Outcome {
        pass: ok,
        detail: notes.join(", "),
    }
}

fn c5_dual_pair() -> Outcome {
    let mut ok = true;
    let mut notes = vec![];
    for b in [BundleSpec::so3_over_square(), BundleSpec::u1_magnetic()] {
        let r = poisson::dual_pair_check(&b, 100, SEED);
        ok &= all_pass(&r, &mut notes);
        for c in &r.checks {
            ok &= c.max_residual <= 1e-7 && c.trials >= 100;
        }
        let worst = r.checks.iter().map(|c| c.max_residual).fold(0.0, f64::max);
        notes.push(format!("{} worst {worst:.1e}", b.name));
    }
    Outcome {
        pass: ok,
        detail: notes.join(", "),
    }
}

fn c6_exactness() -> Outcome {
    let mut ok = true;
    let mut notes = vec![];
    for b in [BundleSpec::so3_over_square(), BundleSpec::u1_magnetic()] {
        notes.push(format!("[{}]", b.name));
        let a = atiyah::bundle::atiyah_exactness(&b, 50, SEED);
        ok &= all_pass(&a, &mut notes);
        ok &= require(&a, "iota_star_after_a_star_zero", 1e-10, 50, &mut notes);
        ok &= require(&a, "ranks_all_fibers", 0.0, 50, &mut notes);
        for id in ["tangent", "cotangent"] {
            let r = groupoid::ses_fiber_check(id, &b, 50, SEED).expect("known sequence");
            ok &= all_pass(&r, &mut notes);
            ok &= require(&r, "composite_zero", 1e-10, 50, &mut notes);
            ok &= require(&r, "ranks_exact", 0.0, 50, &mut notes);
        }
        let q = groupoid::ses_fiber_check("quotient", &b, 50, SEED).expect("known sequence");
        ok &= all_pass(&q, &mut notes);
        ok &= require(&q, "contragredient_pairing", 1e-12, 50, &mut notes);
        ok &= require(&q, "quotient_pairing_well_defined", 1e-12, 50, &mut notes);
    }
    Outcome {
        pass: ok,
        detail: notes.join(", "),
    }
}

fn c7_leaves() -> Outcome {
    let b = BundleSpec::so3_over_square();
    let g = &b.group;
    let mut r = rng::stream(SEED, "acceptance.leaves");
    let mut ok = true;
    let mut notes = vec![];
    let mut generic_dims = vec![];
    for _ in 0..20 {
        let mu = rng::uniform_vec(&mut r, 3, 1.0);
        generic_dims.push(coadjoint_orbit(g, &mu, 1, SEED).dim);
    }
    ok &= generic_dims.iter().all(|d| *d == 2);
    notes.push(format!("generic orbit dims all 2: {}", generic_dims.iter().all(|d| *d == 2)));
    let o = coadjoint_orbit(g, &DVector::from_vec(vec![0.3, -0.5, 0.8]), 20, SEED);
    let (rep, summary) = poisson::leaf_structure(&b, &o, 50, SEED).expect("leaf structure");
    ok &= all_pass(&rep, &mut notes);
    ok &= summary.leaf_dim == 2 * b.base_dim() + 2;
    ok &= require(&rep, "leaf_dim_identity", 0.0, 50, &mut notes);
    ok &= require(&rep, "affine_free_transitive", 1e-10, 50, &mut notes);
    let zero = coadjoint_orbit(g, &DVector::zeros(3), 1, SEED);
    let (zrep, zsum) = poisson::leaf_structure(&b, &zero, 50, SEED).expect("zero leaf");
    ok &= all_pass(&zrep, &mut notes);
    ok &= zsum.orbit_dim == 0 && zsum.leaf_dim == 2 * b.base_dim();
    ok &= require(&zrep, "zero_leaf_pullback_identity", 1e-9, 1, &mut notes);
    notes.push(format!("leaf dims {} and {}", summary.leaf_dim, zsum.leaf_dim));
    Outcome {
        pass: ok,
        detail: notes.join(", "),
    }
}

fn c8_magnetic() -> Outcome {
    let mut ok = true;
    let mut notes = vec![];
    let u1 = BundleSpec::u1_magnetic();
    for mu in [1.0, -2.5] {
        let o = coadjoint_orbit(&u1.group, &DVector::from_vec(vec![mu]), 1, SEED);
        let (_, flat) = poisson::magnetic_term(&u1.with_connection(Connection::Flat), &o, 50, SEED).expect("singleton orbit");
        ok &= all_pass(&flat, &mut notes);
        ok &= require(&flat, "flat_connection_vanishes", 1e-9, 50, &mut notes);
    }
    let o = coadjoint_orbit(&u1.group, &DVector::from_vec(vec![1.0]), 1, SEED);
    let (mt, rep) = poisson::magnetic_term(&u1, &o, 50, SEED).expect("singleton orbit");
    ok &= all_pass(&rep, &mut notes);
    ok &= require(&rep, "equals_d_of_chi_dot_a", 1e-7, 50, &mut notes);
    ok &= require(&rep, "closed", 1e-6, 50, &mut notes);
    // A = (-y dx + x dy)/2 has dA = dx ^ dy.
    let mut r = rng::stream(SEED, "acceptance.magnetic");
    let mut dxdy = MaxResidual::new();
    for _ in 0..50 {
        let y = atiyah::linalg::concat(&[&rng::box_point(&mut r, &[-1.0, -1.0], &[1.0, 1.0], 0.05), &rng::uniform_vec(&mut r, 2, 1.0)]);
        let bm = mt.evaluate(&y);
        dxdy.push((bm[(0, 1)] - 1.0).abs().max((bm[(1, 0)] + 1.0).abs()).max(bm[(0, 0)].abs()).max(bm[(1, 1)].abs()));
    }
    ok &= dxdy.value() <= 1e-7;
    notes.push(format!("dx^dy oracle {:.1e}", dxdy.value()));
    Outcome {
        pass: ok,
        detail: notes.join(", "),
    }
}

fn c9_heavy_top() -> Outcome {
    let t = Instant::now();
    let top = semidirect::heavy_top_model(&HeavyTopParams::lagrange()).expect("valid parameters");
    let x0 = DVector::from_vec(vec![0.3, -0.2, 1.5, 0.1, 0.2, 0.97]);
    let monitors = top.monitors();
    let traj = dynamics::integrate(&top.space, &top.hamiltonian, &x0, 1e-3, 10_000, &monitors).expect("no divergence");
    let drifts = dynamics::monitor(&traj);
    let mut ok = true;
    let mut notes = vec![];
    for d in &drifts {
        let c = Check::new(d.name.clone(), 10_000, d.max_drift, 1e-6);
        ok &= c.pass;
        notes.push(format!("{}={:.1e}", d.name, d.max_drift));
    }
    ok &= drifts.iter().any(|d| d.name == "gamma_sq") && drifts.iter().any(|d| d.name == "pi_dot_gamma");
    let conv = dynamics::convergence_ratio(&top.space, &top.hamiltonian, &x0, 0.04, 50).expect("no divergence");
    ok &= (12.0..=20.0).contains(&conv.ratio);
    let up = runner::upstairs_distance(&top, &x0, 1e-3, 1.0, SEED).expect("no divergence");
    ok &= up <= 1e-6;
    let secs = t.elapsed().as_secs_f64();
    ok &= secs < 30.0;
    notes.push(format!("ratio {:.2}, upstairs {up:.1e}, {secs:.1}s", conv.ratio));
    Outcome {
        pass: ok,
        detail: notes.join(", "),
    }
}

fn c10_determinism() -> Outcome {
    let mut ok = true;
    let mut notes = vec![];
    let dir = tempfile::tempdir().expect("temp dir");
    for s in runner::builtins() {
        let loaded = runner::load(&s.name).expect("built-in");
        let mut outputs = vec![];
        for rep in 0..2 {
            let ov = Overrides {
                out: Some(dir.path().join(format!("{}-{rep}", s.name))),
                ..Default::default()
            };
            let o = runner::run(&loaded, s.kind, &ov).expect("built-in runs");
            let bytes: Vec<Vec<u8>> = o.files.iter().map(|f| std::fs::read(f).expect("output exists")).collect();
            outputs.push((o.exit_code, bytes));
        }
        let same = outputs[0] == outputs[1];
        ok &= same && outputs[0].0 == 0;
        if !same {
            notes.push(format!("{} differs", s.name));
        }
    }
    notes.push(format!("{} built-ins, report and CSV bytes compared", runner::builtins().len()));
    Outcome {
        pass: ok,
        detail: notes.join(", "),
    }
}

#[test]
fn acceptance_criteria() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("VB-groupoid axioms", c1_vb_axioms),
        ("dual structure well defined", c2_duality),
        ("core dimensions", c3_cores),
        ("momentum equivariance", c4_equivariance),
        ("dual pair polarity", c5_dual_pair),
        ("fiberwise exactness", c6_exactness),
        ("leaf structure", c7_leaves),
        ("magnetic term", c8_magnetic),
        ("heavy top", c9_heavy_top),
        ("determinism", c10_determinism),
    ];
    let mut failed = vec![];
    let mut out = std::io::stdout();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let o = f();
        let line = format!("criterion {:>2} {:<28} {}  {}\n", i + 1, name, if o.pass { "PASS" } else { "FAIL" }, o.detail);
        out.write_all(line.as_bytes()).expect("stdout");
        if !o.pass {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
