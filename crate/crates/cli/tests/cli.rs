use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn atiyah(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_atiyah")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn lists_builtins() {
    let o = atiyah(&["--list-builtins"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    for name in ["so3-trivial-bundle\tverify", "heavy-top-lagrange\tsimulate", "u1-magnetic\tleaves"] {
        assert!(text.lines().any(|l| l == name), "{text}");
    }
}

#[test]
fn builtin_verify_passes_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = atiyah(&["verify", "u1-magnetic-bundle", "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(fs::read(a.join("report.json")).unwrap(), fs::read(b.join("report.json")).unwrap());
}

#[test]
fn scenario_file_with_relative_bundle_reference() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "flat.json",
        r#"{"name": "flat-so3", "kind": "TrivialProduct", "base_box": [[-1, 1], [-1, 1]], "group": "so3"}"#,
    );
    let scenario = write(
        dir.path(),
        "scenario.json",
        r#"{"name": "flat", "kind": "verify", "seed": 3, "samples": 20, "bundle": "flat.json",
            "suites": ["liealg.validate", "groupoid.cores", "poisson.dual_pair"], "out": "result"}"#,
    );
    let o = atiyah(&["verify", &scenario]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report: String = fs::read_to_string(dir.path().join("result/report.json")).unwrap();
    assert!(report.contains("\"suite\": \"groupoid.cores:flat-so3\""));
}

#[test]
fn corrupted_constants_exit_one_with_check_name() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write(
        dir.path(),
        "bad.json",
        r#"{"name": "bad", "kind": "verify", "seed": 1,
            "group": {"name": "bad-so3", "dim": 3, "embed": 3, "family": "so3",
              "basis": [[0,0,0, 0,0,-1, 0,1,0], [0,0,1, 0,0,0, -1,0,0], [0,-1,0, 1,0,0, 0,0,0]],
              "structure": [[0,1,2,2.0],[1,0,2,-2.0],[1,2,0,1.0],[2,1,0,-1.0],[2,0,1,1.0],[0,2,1,-1.0]]}}"#,
    );
    let out = dir.path().join("out");
    let o = atiyah(&["verify", &scenario, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("FAILED liealg.validate:bad-so3/commutator_matches_constants"), "{err}");
}

#[test]
fn missing_files_and_bad_config_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&atiyah(&["verify", "/no/such/scenario.json"])), 2);
    let scenario = write(
        dir.path(),
        "s.json",
        r#"{"name": "m", "kind": "verify", "seed": 1, "bundle": "missing-bundle.json"}"#,
    );
    assert_eq!(code(&atiyah(&["verify", &scenario])), 2);
    let no_seed = write(dir.path(), "n.json", r#"{"name": "m", "kind": "verify", "group": "so3"}"#);
    assert_eq!(code(&atiyah(&["verify", &no_seed])), 2);
    assert_eq!(code(&atiyah(&["verify", "heavy-top-lagrange"])), 2);
    assert_eq!(code(&atiyah(&["verify", "u1-magnetic-bundle", "--tol-scale", "-1"])), 2);
}

#[test]
fn tol_scale_can_force_failure() {
    let dir = tempfile::tempdir().unwrap();
    let o = atiyah(&["verify", "u1-magnetic-bundle", "--tol-scale", "1e-30", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 1);
}

#[test]
fn leaves_writes_points() {
    let dir = tempfile::tempdir().unwrap();
    let o = atiyah(&["leaves", "so3-leaves", "--seed", "9", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = fs::read_to_string(dir.path().join("report.json")).unwrap();
    assert!(report.contains("\"seed\": 9"));
    assert!(report.contains("\"leaf_dim\": 6"));
    assert!(dir.path().join("leaf_points.csv").is_file());
}

#[test]
fn simulate_short_run_and_divergence() {
    let dir = tempfile::tempdir().unwrap();
    let short = write(
        dir.path(),
        "short.json",
        r#"{"name": "short", "kind": "simulate", "seed": 5,
            "simulate": {"heavy_top": {"inertia": [1, 1, 2], "mgl": 1, "axis": [0, 0, 1]}, "dt": 0.001, "n_steps": 200}}"#,
    );
    let out = dir.path().join("short-out");
    let o = atiyah(&["simulate", &short, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "time,x1,x2,x3,x4,x5,x6,gamma_sq,pi_dot_gamma,energy,pi_3");
    assert_eq!(csv.lines().count(), 202);

    let blowup = write(
        dir.path(),
        "blowup.json",
        r#"{"name": "blowup", "kind": "simulate", "seed": 5,
            "simulate": {"heavy_top": {"inertia": [1, 2, 3], "mgl": 1, "axis": [0, 0, 1]},
                         "initial": [1e150, 1e150, 1e150, 0, 0, 1], "dt": 1.0, "n_steps": 10}}"#,
    );
    let o = atiyah(&["simulate", &blowup, "--out", dir.path().join("b").to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8(o.stderr).unwrap().contains("last valid step"));
}
