//! Scenario documents and the three runs behind the command line: `verify`,
//! `leaves` and `simulate`. Every run writes `report.json` into its output
//! directory; reports are deterministic for a fixed seed.

use crate::bundle::{self, BundleDoc, BundleKind, BundleSpec, Connection, QuotientClass};
use crate::dynamics::{self, DynamicsError};
use crate::groupoid::{self, VbGroupoid, VbSpace};
use crate::liealg::{self, LieGroupDoc, LieGroupSpec};
use crate::poisson::{self, PoissonSpace, ScalarField};
use crate::report::{to_json, Check, SuiteReport};
use crate::rng;
use crate::semidirect::{self, HeavyTopParams, SemidirectDoc, SemidirectSpec};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        EXIT_CONFIG
    }
}

fn config(msg: impl Into<String>) -> RunError {
    RunError::Config(msg.into())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Verify,
    Leaves,
    Simulate,
}

impl std::fmt::Display for Kind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Kind::Verify => "verify",
            Kind::Leaves => "leaves",
            Kind::Simulate => "simulate",
        })
    }
}

/// A built-in name, a path to a JSON file (relative to the scenario file), or an
/// inline document.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpecRef<T> {
    Name(String),
    Inline(T),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeavesParams {
    /// Seed point of the coadjoint orbit.
    pub mu0: Vec<f64>,
    /// Rows of `leaf_points.csv`.
    #[serde(default = "default_leaf_points")]
    pub points: usize,
}

fn default_leaf_points() -> usize {
    100
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceParams {
    pub dt: f64,
    pub n_steps: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateParams {
    pub heavy_top: HeavyTopParams,
    /// `(Pi, Gamma)`; sampled from the seed when absent.
    #[serde(default)]
    pub initial: Option<Vec<f64>>,
    pub dt: f64,
    pub n_steps: usize,
    #[serde(default)]
    pub convergence: Option<ConvergenceParams>,
    /// Horizon of the upstairs-versus-reduced comparison; skipped when absent.
    #[serde(default)]
    pub upstairs_t_end: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub kind: Kind,
    pub seed: u64,
    #[serde(default = "default_tol_scale")]
    pub tol_scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<SpecRef<LieGroupDoc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bundle: Option<SpecRef<BundleDoc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semidirect: Option<SpecRef<SemidirectDoc>>,
    /// Suite names for `verify`; every applicable suite when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suites: Option<Vec<String>>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leaves: Option<LeavesParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateParams>,
}

fn default_tol_scale() -> f64 {
    1.0
}

fn default_samples() -> usize {
    100
}

pub const SUITES: [&str; 18] = [
    "liealg.validate",
    "bundle.action",
    "bundle.connection",
    "bundle.atiyah_exactness",
    "bundle.anchor_pullback",
    "groupoid.vb_axioms",
    "groupoid.cotangent_pair",
    "groupoid.dual_structure",
    "groupoid.cores",
    "groupoid.gauge_dual",
    "groupoid.ses",
    "poisson.jacobi",
    "poisson.dual_pair",
    "poisson.orbits",
    "semidirect.suite",
    "semidirect.pullback_form",
    "semidirect.reduced_sequence",
    "semidirect.heavy_top_model",
];

fn base_scenario(name: &str, kind: Kind) -> Scenario {
    Scenario {
        name: name.into(),
        kind,
        seed: 20240917,
        tol_scale: 1.0,
        out: None,
        group: None,
        bundle: None,
        semidirect: None,
        suites: None,
        samples: default_samples(),
        leaves: None,
        simulate: None,
    }
}

fn heavy_top_run(params: HeavyTopParams) -> SimulateParams {
    SimulateParams {
        heavy_top: params,
        initial: Some(vec![0.3, -0.2, 1.5, 0.1, 0.2, 0.97]),
        dt: 1e-3,
        n_steps: 10_000,
        convergence: Some(ConvergenceParams { dt: 0.04, n_steps: 50 }),
        upstairs_t_end: Some(1.0),
    }
}

/// Scenarios compiled into the binary.
pub fn builtins() -> Vec<Scenario> {
    let mut out = Vec::new();

    let mut s = base_scenario("so3-trivial-bundle", Kind::Verify);
    s.bundle = Some(SpecRef::Name("so3-over-square".into()));
    s.samples = 500;
    out.push(s);

    let mut s = base_scenario("u1-magnetic-bundle", Kind::Verify);
    s.bundle = Some(SpecRef::Name("u1-magnetic".into()));
    out.push(s);

    let mut s = base_scenario("se3-semidirect", Kind::Verify);
    s.semidirect = Some(SpecRef::Name("se3".into()));
    s.samples = 200;
    out.push(s);

    let mut s = base_scenario("so3-leaves", Kind::Leaves);
    s.bundle = Some(SpecRef::Name("so3-over-square".into()));
    s.leaves = Some(LeavesParams {
        mu0: vec![0.0, 0.0, 1.0],
        points: default_leaf_points(),
    });
    out.push(s);

    let mut s = base_scenario("so3-zero-orbit", Kind::Leaves);
    s.bundle = Some(SpecRef::Name("so3-over-square".into()));
    s.leaves = Some(LeavesParams {
        mu0: vec![0.0; 3],
        points: default_leaf_points(),
    });
    out.push(s);

    let mut s = base_scenario("u1-magnetic", Kind::Leaves);
    s.bundle = Some(SpecRef::Name("u1-magnetic".into()));
    s.leaves = Some(LeavesParams {
        mu0: vec![1.0],
        points: default_leaf_points(),
    });
    out.push(s);

    let mut s = base_scenario("heavy-top-lagrange", Kind::Simulate);
    s.simulate = Some(heavy_top_run(HeavyTopParams::lagrange()));
    out.push(s);

    let mut s = base_scenario("heavy-top-free", Kind::Simulate);
    s.simulate = Some(heavy_top_run(HeavyTopParams {
        inertia: [1.0, 2.0, 3.0],
        mgl: 0.0,
        axis: [0.0, 0.0, 1.0],
    }));
    out.push(s);

    out
}

pub fn builtin(name: &str) -> Option<Scenario> {
    builtins().into_iter().find(|s| s.name == name)
}

/// A scenario together with the directory its relative references resolve against.
#[derive(Clone, Debug)]
pub struct Loaded {
    pub scenario: Scenario,
    pub base_dir: PathBuf,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, RunError> {
    let text = fs::read_to_string(path).map_err(|e| RunError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    serde_json::from_str(&text).map_err(|e| config(format!("{}: {e}", path.display())))
}

/// Load a scenario from a file path, falling back to a built-in of that name.
pub fn load(arg: &str) -> Result<Loaded, RunError> {
    let path = Path::new(arg);
    if path.is_file() {
        let scenario: Scenario = read_json(path)?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        return Ok(Loaded { scenario, base_dir });
    }
    if let Some(scenario) = builtin(arg) {
        return Ok(Loaded {
            scenario,
            base_dir: PathBuf::from("."),
        });
    }
    Err(config(format!("'{arg}' is neither a readable scenario file nor a built-in scenario")))
}

fn resolve_group(r: &SpecRef<LieGroupDoc>, dir: &Path) -> Result<LieGroupSpec, RunError> {
    let doc = match r {
        SpecRef::Name(n) => match liealg::builtin(n) {
            Some(g) => return Ok(g),
            None => read_json::<LieGroupDoc>(&dir.join(n))?,
        },
        SpecRef::Inline(d) => d.clone(),
    };
    LieGroupSpec::from_doc(&doc).map_err(|e| config(e.to_string()))
}

fn builtin_bundle(name: &str) -> Option<BundleSpec> {
    match name {
        "so3-over-square" => Some(BundleSpec::so3_over_square()),
        "so3-over-square-flat" => Some(BundleSpec::so3_over_square().with_connection(Connection::Flat)),
        "u1-magnetic" => Some(BundleSpec::u1_magnetic()),
        "u1-flat" => Some(BundleSpec::u1_magnetic().with_connection(Connection::Flat)),
        _ => None,
    }
}

fn resolve_bundle(r: &SpecRef<BundleDoc>, dir: &Path) -> Result<BundleSpec, RunError> {
    let doc = match r {
        SpecRef::Name(n) => match builtin_bundle(n) {
            Some(b) => return Ok(b),
            None => read_json::<BundleDoc>(&dir.join(n))?,
        },
        SpecRef::Inline(d) => d.clone(),
    };
    if doc.kind != BundleKind::TrivialProduct {
        return Err(config("bundle suites need a trivial product bundle; use 'semidirect' for semidirect products"));
    }
    BundleSpec::from_doc(&doc).map_err(|e| config(e.to_string()))
}

fn resolve_semidirect(r: &SpecRef<SemidirectDoc>, dir: &Path) -> Result<SemidirectSpec, RunError> {
    let doc = match r {
        SpecRef::Name(n) if n == "se3" => return Ok(SemidirectSpec::se3()),
        SpecRef::Name(n) => read_json::<SemidirectDoc>(&dir.join(n))?,
        SpecRef::Inline(d) => d.clone(),
    };
    SemidirectSpec::from_doc(&doc).map_err(|e| config(e.to_string()))
}

/// Result of a run: the exit code, the JSON report and the files written.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub exit_code: i32,
    pub report: String,
    pub failing: Vec<String>,
    pub files: Vec<PathBuf>,
    pub message: Option<String>,
}

/// Command-line overrides applied on top of the scenario document.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub tol_scale: Option<f64>,
    pub out: Option<PathBuf>,
}

pub fn run(loaded: &Loaded, expected: Kind, ov: &Overrides) -> Result<Outcome, RunError> {
    let mut s = loaded.scenario.clone();
    if s.kind != expected {
        return Err(config(format!("scenario '{}' is a {} scenario, not {}", s.name, s.kind, expected)));
    }
    if let Some(seed) = ov.seed {
        s.seed = seed;
    }
    if let Some(t) = ov.tol_scale {
        s.tol_scale = t;
    }
    if !(s.tol_scale > 0.0 && s.tol_scale.is_finite()) {
        return Err(config("tol_scale must be positive"));
    }
    if s.samples == 0 {
        return Err(config("samples must be positive"));
    }
    let out_dir = ov
        .out
        .clone()
        .or_else(|| s.out.as_ref().map(|o| loaded.base_dir.join(o)))
        .unwrap_or_else(|| PathBuf::from("out").join(&s.name));
    let dir = &loaded.base_dir;
    match s.kind {
        Kind::Verify => run_verify(&s, dir, &out_dir),
        Kind::Leaves => run_leaves(&s, dir, &out_dir),
        Kind::Simulate => run_simulate(&s, &out_dir),
    }
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), RunError> {
    let io = |e| RunError::Io {
        path: path.to_path_buf(),
        source: e,
    };
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io)?;
    }
    fs::write(path, contents).map_err(io)
}

fn failing_names(suites: &[SuiteReport]) -> Vec<String> {
    suites
        .iter()
        .flat_map(|r| r.failing().into_iter().map(move |c| format!("{}/{}", r.suite, c.name)))
        .collect()
}

#[derive(Serialize)]
struct VerifyReport<'a> {
    scenario: &'a str,
    kind: Kind,
    seed: u64,
    tol_scale: f64,
    pass: bool,
    failing: &'a [String],
    suites: &'a [SuiteReport],
}

struct Subjects {
    groups: Vec<LieGroupSpec>,
    bundle: Option<BundleSpec>,
    semidirect: Option<SemidirectSpec>,
}

fn subjects(s: &Scenario, dir: &Path) -> Result<Subjects, RunError> {
    let mut groups = Vec::new();
    if let Some(g) = &s.group {
        groups.push(resolve_group(g, dir)?);
    }
    let bundle = s.bundle.as_ref().map(|b| resolve_bundle(b, dir)).transpose()?;
    if let Some(b) = &bundle {
        groups.push(b.group.clone());
    }
    let semidirect = s.semidirect.as_ref().map(|r| resolve_semidirect(r, dir)).transpose()?;
    if let Some(sd) = &semidirect {
        groups.extend([sd.k.clone(), sd.n.clone(), sd.group()]);
    }
    let mut seen = std::collections::BTreeSet::new();
    groups.retain(|g| seen.insert(g.name.clone()));
    Ok(Subjects {
        groups,
        bundle,
        semidirect,
    })
}

fn applicable(name: &str, sub: &Subjects) -> bool {
    match name.split('.').next() {
        Some("liealg") => !sub.groups.is_empty(),
        Some("bundle") | Some("groupoid") => sub.bundle.is_some(),
        Some("poisson") => sub.bundle.is_some() || name == "poisson.orbits" && !sub.groups.is_empty(),
        Some("semidirect") => sub.semidirect.is_some(),
        _ => false,
    }
}

fn run_suite(name: &str, sub: &Subjects, n: usize, seed: u64) -> Result<Vec<SuiteReport>, RunError> {
    let few = (n / 10).max(1);
    let b = || sub.bundle.as_ref().expect("checked by applicable");
    let sd = || sub.semidirect.as_ref().expect("checked by applicable");
    let sd_err = |e: semidirect::SemidirectError| config(e.to_string());
    Ok(match name {
        "liealg.validate" => sub.groups.iter().map(liealg::validate_spec).collect(),
        "bundle.action" => vec![bundle::action_suite(b(), n, seed)],
        "bundle.connection" => vec![bundle::connection_suite(b(), n, seed)],
        "bundle.atiyah_exactness" => vec![bundle::atiyah_exactness(b(), n, seed)],
        "bundle.anchor_pullback" => vec![bundle::verify_anchor_pullback(b(), few, seed)],
        "groupoid.vb_axioms" => VbSpace::all()
            .into_iter()
            .map(|sp| groupoid::vb_axiom_suite(&VbGroupoid::new(sp, b()), n, seed))
            .collect(),
        "groupoid.cotangent_pair" => vec![groupoid::cotangent_pair_suite(b(), n, seed)],
        "groupoid.dual_structure" => vec![groupoid::dual_structure_suite(b(), few, 100, seed)],
        "groupoid.cores" => vec![groupoid::core_suite(b(), n.min(50).max(few), seed)],
        "groupoid.gauge_dual" => vec![groupoid::gauge_dual_suite(b(), n, seed)],
        "groupoid.ses" => groupoid::SEQUENCES
            .iter()
            .map(|id| groupoid::ses_fiber_check(id, b(), n, seed).expect("known sequence id"))
            .collect(),
        "poisson.jacobi" => {
            let space = PoissonSpace::quotient(b().clone()).map_err(|e| config(e.to_string()))?;
            vec![poisson::space_suite(&space, n, few, seed)]
        }
        "poisson.dual_pair" => vec![poisson::dual_pair_check(b(), n, seed)],
        "poisson.orbits" => sub.groups.iter().map(|g| orbit_suite(g, few, seed)).collect(),
        "semidirect.suite" => vec![semidirect::semidirect_suite(sd(), n, seed).map_err(sd_err)?],
        "semidirect.pullback_form" => vec![semidirect::pullback_form_check(sd(), few, seed).map_err(sd_err)?],
        "semidirect.reduced_sequence" => match semidirect::reduced_sequence(sd(), None, few, seed) {
            Ok(r) => vec![r],
            Err(semidirect::SemidirectError::NonAbelian) => vec![],
            Err(e) => return Err(sd_err(e)),
        },
        "semidirect.heavy_top_model" => vec![heavy_top_model_suite()],
        other => return Err(config(format!("unknown suite '{other}'; known suites: {}", SUITES.join(", ")))),
    })
}

/// Orbit through a generic point: Casimirs constant, dimension even.
fn orbit_suite(g: &LieGroupSpec, samples: usize, seed: u64) -> SuiteReport {
    let mut r = rng::stream(seed, "runner.orbit");
    let mu0 = rng::uniform_vec(&mut r, g.dim, 1.0);
    let o = poisson::coadjoint_orbit(g, &mu0, samples, seed);
    SuiteReport::new(
        format!("poisson.orbits:{}", g.name),
        samples,
        vec![
            Check::new("casimir_constant_on_orbit", samples, o.casimir_residual, 1e-10),
            Check::exact("orbit_dim_even", 1, o.dim.is_multiple_of(2)),
        ],
        vec![],
    )
}

/// The heavy top Hamiltonian Poisson-commutes with both Casimirs.
fn heavy_top_model_suite() -> SuiteReport {
    let top = semidirect::heavy_top_model(&HeavyTopParams::lagrange()).expect("built-in parameters");
    let mut r = rng::stream(0, "runner.heavy_top");
    let mut res = crate::report::MaxResidual::new();
    for _ in 0..20 {
        let x = rng::uniform_vec(&mut r, 6, 1.0);
        for (_, c) in poisson::casimirs(&top.group) {
            res.push(top.space.bracket(&c, &top.hamiltonian, &x).expect("linear space").abs());
        }
    }
    SuiteReport::new("semidirect.heavy_top_model:se3", 20, vec![res.check("casimirs_commute_with_hamiltonian", 1e-12)], vec![])
}

pub fn run_verify(s: &Scenario, dir: &Path, out_dir: &Path) -> Result<Outcome, RunError> {
    let sub = subjects(s, dir)?;
    if sub.groups.is_empty() {
        return Err(config("verify needs at least one of 'group', 'bundle' or 'semidirect'"));
    }
    let selected: Vec<String> = match &s.suites {
        Some(list) => {
            for name in list {
                if !SUITES.contains(&name.as_str()) {
                    return Err(config(format!("unknown suite '{name}'; known suites: {}", SUITES.join(", "))));
                }
                if !applicable(name, &sub) {
                    return Err(config(format!("suite '{name}' does not apply to this scenario")));
                }
            }
            list.clone()
        }
        None => SUITES.iter().filter(|n| applicable(n, &sub)).map(|n| n.to_string()).collect(),
    };

    let mut suites = Vec::new();
    // Structure constants come first: everything downstream assumes a valid group.
    let validation: Vec<SuiteReport> = sub.groups.iter().map(liealg::validate_spec).collect();
    let groups_valid = validation.iter().all(|r| r.pass);
    for name in &selected {
        if name == "liealg.validate" {
            suites.extend(validation.iter().cloned());
        } else if groups_valid {
            suites.extend(run_suite(name, &sub, s.samples, s.seed)?);
        }
    }
    if !groups_valid && !selected.iter().any(|n| n == "liealg.validate") {
        suites.extend(validation.iter().cloned());
    }
    let mut suites: Vec<SuiteReport> = suites.into_iter().map(|r| r.scaled(s.tol_scale)).collect();
    suites.sort_by(|a, b| a.suite.cmp(&b.suite));
    let failing = failing_names(&suites);
    let pass = failing.is_empty();
    let report = to_json(&VerifyReport {
        scenario: &s.name,
        kind: s.kind,
        seed: s.seed,
        tol_scale: s.tol_scale,
        pass,
        failing: &failing,
        suites: &suites,
    });
    let path = out_dir.join("report.json");
    write_file(&path, report.as_bytes())?;
    Ok(Outcome {
        exit_code: if pass { EXIT_PASS } else { EXIT_CHECK_FAILED },
        report,
        message: (!groups_valid).then(|| "group validation failed; remaining suites skipped".into()),
        failing,
        files: vec![path],
    })
}

#[derive(Serialize)]
struct OrbitInfo {
    seed: Vec<f64>,
    dim: usize,
    casimir_residual: f64,
}

#[derive(Serialize)]
struct LeavesReport<'a> {
    scenario: &'a str,
    kind: Kind,
    seed: u64,
    tol_scale: f64,
    pass: bool,
    bundle: &'a str,
    orbit: OrbitInfo,
    leaf: poisson::LeafSummary,
    failing: &'a [String],
    suites: &'a [SuiteReport],
}

pub fn run_leaves(s: &Scenario, dir: &Path, out_dir: &Path) -> Result<Outcome, RunError> {
    let params = s.leaves.as_ref().ok_or_else(|| config("leaves scenario needs a 'leaves' section"))?;
    let b = s
        .bundle
        .as_ref()
        .ok_or_else(|| config("leaves scenario needs a 'bundle'"))
        .and_then(|r| resolve_bundle(r, dir))?;
    let validation = liealg::validate_spec(&b.group);
    if !validation.pass {
        return Err(config(format!("group '{}' fails validation", b.group.name)));
    }
    if params.mu0.len() != b.group.dim || params.mu0.iter().any(|x| !x.is_finite()) {
        return Err(config(format!("mu0 needs {} finite components", b.group.dim)));
    }
    let g = &b.group;
    let mu0 = DVector::from_column_slice(&params.mu0);
    let orbit = poisson::coadjoint_orbit(g, &mu0, s.samples, s.seed);
    let pe = |e: poisson::PoissonError| config(e.to_string());
    let (leaf_report, mut leaf) = poisson::leaf_structure(&b, &orbit, s.samples, s.seed).map_err(pe)?;
    let mut suites = vec![leaf_report];
    if orbit.is_singleton() {
        let (_, mag) = poisson::magnetic_term(&b, &orbit, s.samples, s.seed).map_err(pe)?;
        leaf.magnetic_closedness_residual = mag.check("closed").map(|c| c.max_residual);
        suites.push(mag);
    }
    suites.push(poisson::groupoid_action_symplectic(&b, &orbit, (s.samples / 10).max(1), s.seed).map_err(pe)?);
    let mut suites: Vec<SuiteReport> = suites.into_iter().map(|r| r.scaled(s.tol_scale)).collect();
    suites.sort_by(|a, b| a.suite.cmp(&b.suite));
    let failing = failing_names(&suites);
    let pass = failing.is_empty();
    let report = to_json(&LeavesReport {
        scenario: &s.name,
        kind: s.kind,
        seed: s.seed,
        tol_scale: s.tol_scale,
        pass,
        bundle: &b.name,
        orbit: OrbitInfo {
            seed: params.mu0.clone(),
            dim: orbit.dim,
            casimir_residual: orbit.casimir_residual,
        },
        leaf,
        failing: &failing,
        suites: &suites,
    });
    let report_path = out_dir.join("report.json");
    write_file(&report_path, report.as_bytes())?;
    let csv_path = out_dir.join("leaf_points.csv");
    write_file(&csv_path, &leaf_points_csv(&b, &mu0, params.points, s.seed)?)?;
    Ok(Outcome {
        exit_code: if pass { EXIT_PASS } else { EXIT_CHECK_FAILED },
        report,
        failing,
        files: vec![report_path, csv_path],
        message: None,
    })
}

/// Points `sigma(m, chi) + a*(m, rho)` of the leaf through `mu0`, in quotient
/// coordinates `(m, covector)`.
fn leaf_points_csv(b: &BundleSpec, mu0: &DVector<f64>, n: usize, seed: u64) -> Result<Vec<u8>, RunError> {
    let mut r = rng::stream(seed, "runner.leaf_points");
    let d = b.base_dim();
    let dim = d + b.dim();
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| config(e.to_string());
    let mut header: Vec<String> = (1..=d).map(|i| format!("m{i}")).collect();
    header.extend((1..=dim - d).map(|i| format!("p{i}")));
    w.write_record(&header).map_err(csv_err)?;
    for _ in 0..n {
        let h = bundle::sample_element(&b.group, &mut r, 1.0);
        let chi = poisson::orbit_point(&b.group, &h, mu0);
        let m = b.base.sample(&mut r);
        let rho = rng::uniform_vec(&mut r, d, 1.0);
        let x = QuotientClass {
            covector: b.sigma(&m, &chi).covector + b.a_star(&m, &rho).covector,
            base: m,
        };
        let z = poisson::quotient_coords(&x);
        w.write_record(z.iter().map(|v| crate::report::fmt_f64(*v))).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| config(e.to_string()))
}

#[derive(Serialize)]
struct Upstairs {
    t_end: f64,
    distance: f64,
}

#[derive(Serialize)]
struct Divergence {
    step: usize,
    time: f64,
    last_valid_step: usize,
    reason: String,
}

#[derive(Serialize)]
struct SimulateReport<'a> {
    scenario: &'a str,
    kind: Kind,
    seed: u64,
    tol_scale: f64,
    pass: bool,
    model: &'a HeavyTopParams,
    initial: &'a [f64],
    dt: f64,
    n_steps: usize,
    t_end: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    diverged: Option<Divergence>,
    drifts: Vec<dynamics::Drift>,
    #[serde(skip_serializing_if = "Option::is_none")]
    convergence: Option<dynamics::Convergence>,
    #[serde(skip_serializing_if = "Option::is_none")]
    upstairs: Option<Upstairs>,
    failing: &'a [String],
    checks: Vec<Check>,
}

/// Conserved quantities that depend on the parameters: `Pi_3` for a symmetric
/// top spinning about its symmetry axis, `|Pi|^2` without gravity.
fn extra_monitors(p: &HeavyTopParams) -> Vec<(String, ScalarField)> {
    let mut m = Vec::new();
    let on_axis = p.axis[0] == 0.0 && p.axis[1] == 0.0;
    if p.inertia[0] == p.inertia[1] && (on_axis || p.mgl == 0.0) {
        m.push(("pi_3".to_string(), ScalarField::coordinate(2)));
    }
    if p.mgl == 0.0 {
        m.push((
            "pi_sq".to_string(),
            ScalarField::with_gradient(
                |x| x.rows(0, 3).norm_squared(),
                |x| {
                    let mut v = DVector::zeros(6);
                    v.rows_mut(0, 3).copy_from(&(x.rows(0, 3) * 2.0));
                    v
                },
            ),
        ));
    }
    m
}

pub fn run_simulate(s: &Scenario, out_dir: &Path) -> Result<Outcome, RunError> {
    let p = s.simulate.as_ref().ok_or_else(|| config("simulate scenario needs a 'simulate' section"))?;
    if !(p.dt > 0.0 && p.dt.is_finite()) || p.n_steps == 0 {
        return Err(config("dt must be positive and n_steps at least 1"));
    }
    let top = semidirect::heavy_top_model(&p.heavy_top).map_err(|e| config(e.to_string()))?;
    let x0 = match &p.initial {
        Some(v) if v.len() == 6 && v.iter().all(|x| x.is_finite()) => DVector::from_column_slice(v),
        Some(_) => return Err(config("initial state needs 6 finite components (Pi, Gamma)")),
        None => rng::uniform_vec(&mut rng::stream(s.seed, "runner.initial"), 6, 1.0),
    };
    let mut monitors = top.monitors();
    monitors.extend(extra_monitors(&p.heavy_top));
    let tol = 1e-6 * s.tol_scale;
    let t_end = p.dt * p.n_steps as f64;

    let traj = match dynamics::integrate(&top.space, &top.hamiltonian, &x0, p.dt, p.n_steps, &monitors) {
        Ok(t) => Ok(t),
        Err(e @ DynamicsError::Diverged { .. }) => Err(e),
        Err(e) => return Err(config(e.to_string())),
    };
    let mut checks = Vec::new();
    let mut drifts = Vec::new();
    let mut diverged = None;
    let mut files = Vec::new();
    match &traj {
        Ok(t) => {
            drifts = dynamics::monitor(t);
            for d in &drifts {
                checks.push(Check::new(format!("drift_{}", d.name), p.n_steps, d.max_drift, tol));
            }
            let mut buf = Vec::new();
            dynamics::write_csv(t, &mut buf).map_err(|e| config(e.to_string()))?;
            let path = out_dir.join("trajectory.csv");
            write_file(&path, &buf)?;
            files.push(path);
        }
        Err(DynamicsError::Diverged { step, time, reason }) => {
            diverged = Some(Divergence {
                step: *step,
                time: *time,
                last_valid_step: step.saturating_sub(1),
                reason: reason.clone(),
            });
        }
        Err(_) => unreachable!("other errors returned above"),
    }

    let mut convergence = None;
    let mut upstairs = None;
    if diverged.is_none() {
        if let Some(c) = &p.convergence {
            let conv = dynamics::convergence_ratio(&top.space, &top.hamiltonian, &x0, c.dt, c.n_steps).map_err(|e| config(e.to_string()))?;
            checks.push(Check::exact("convergence_ratio_in_12_20", 3, (12.0..=20.0).contains(&conv.ratio)));
            convergence = Some(conv);
        }
        if let Some(t1) = p.upstairs_t_end {
            let dist = upstairs_distance(&top, &x0, p.dt, t1, s.seed).map_err(|e| config(e.to_string()))?;
            checks.push(Check::new("upstairs_matches_reduced", 1, dist, tol));
            upstairs = Some(Upstairs { t_end: t1, distance: dist });
        }
    }
    checks.sort_by(|a, b| a.name.cmp(&b.name));
    let failing: Vec<String> = checks.iter().filter(|c| !c.pass).map(|c| c.name.clone()).collect();
    let pass = failing.is_empty() && diverged.is_none();
    let exit_code = if diverged.is_some() {
        EXIT_DIVERGED
    } else if pass {
        EXIT_PASS
    } else {
        EXIT_CHECK_FAILED
    };
    let message = diverged
        .as_ref()
        .map(|d| format!("diverged at step {} (t = {}); last valid step {}: {}", d.step, d.time, d.last_valid_step, d.reason));
    let report = to_json(&SimulateReport {
        scenario: &s.name,
        kind: s.kind,
        seed: s.seed,
        tol_scale: s.tol_scale,
        pass,
        model: &p.heavy_top,
        initial: x0.as_slice(),
        dt: p.dt,
        n_steps: p.n_steps,
        t_end,
        diverged,
        drifts,
        convergence,
        upstairs,
        failing: &failing,
        checks,
    });
    let path = out_dir.join("report.json");
    write_file(&path, report.as_bytes())?;
    files.insert(0, path);
    Ok(Outcome {
        exit_code,
        report,
        failing,
        files,
        message,
    })
}

/// Integrate the collective Hamiltonian on `T*H` from a seeded lift of `x0`, reduce,
/// and compare with the reduced flow at `t_end`.
pub fn upstairs_distance(top: &semidirect::HeavyTop, x0: &DVector<f64>, dt: f64, t_end: f64, seed: u64) -> Result<f64, DynamicsError> {
    let n = (t_end / dt).round().max(1.0) as usize;
    let u = bundle::sample_element(&top.group, &mut rng::stream(seed, "runner.upstairs"), 1.0);
    let (up_space, up_h) = top.upstairs();
    let lifted = semidirect::upstairs_lift(&top.group, &u, x0);
    let up = dynamics::integrate(&up_space, &up_h, &lifted, dt, n, &[])?;
    let down = dynamics::integrate(&top.space, &top.hamiltonian, x0, dt, n, &[])?;
    let reduced = semidirect::upstairs_reduce(&top.group, up.states.last().expect("non-empty"));
    Ok((reduced - down.states.last().expect("non-empty")).amax())
}
