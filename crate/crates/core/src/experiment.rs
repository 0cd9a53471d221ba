//! Runs a resolved [`ConfigDocument`] and writes its reports.
//!
//! Every run writes `<experiment>.json` (version, resolved config, result)
//! and `<experiment>.config.json` (the resolved config alone, ready to
//! re-run). Tabular results also go to `<experiment>.csv`, grids to
//! `<experiment>.sgrd`. Output bytes depend only on the config.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ConfigDocument, ExperimentKind};
use crate::czd::{cz_decompose, verify_cz};
use crate::error::{invalid, Error, Result};
use crate::grid::{lebesgue_norm, load_sgrd, save_sgrd, GridFunction, GridSpec};
use crate::kernel_zoo::{
    check_regularity, check_size, kernel_from_key, AnalyticProfile, KernelSpec, LipschitzField, PairSampler,
    SampleRegion, TripleSampler,
};
use crate::microlocal::{admissible_parameters, direction_net, search_admissible, AdmissibilityParams};
use crate::operator::{apply_truncated, OperatorConfig};
use crate::probe::{probe_function, spike_family, LambdaGrid, ProbeResult};
use crate::sphere_fn::{build_quadrature, compute_norms, SphereFunction};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug)]
pub struct ExperimentOutcome {
    pub kind: ExperimentKind,
    /// False when a verification inside the experiment failed.
    pub passed: bool,
    pub result: Value,
    pub files: Vec<PathBuf>,
}

/// Resolves `doc`, runs it and writes the reports into `out_dir`.
pub fn run_experiment(doc: &ConfigDocument, out_dir: &Path) -> Result<ExperimentOutcome> {
    let cfg = doc.resolve().map_err(|e| Error::Config(e.to_string()))?;
    let kind = cfg.experiment.expect("resolved");
    fs::create_dir_all(out_dir)?;
    let name = kind.name();
    let mut files = Vec::new();
    let (passed, result) = match kind {
        ExperimentKind::Norms => run_norms(&cfg)?,
        ExperimentKind::KernelCheck => run_kernel_check(&cfg, out_dir, &mut files)?,
        ExperimentKind::Cz => run_cz(&cfg)?,
        ExperimentKind::Net => run_net(&cfg)?,
        ExperimentKind::Apply => run_apply(&cfg, out_dir, &mut files)?,
        ExperimentKind::Probe => run_probe(&cfg, out_dir, &mut files)?,
        ExperimentKind::Params => run_params(&cfg)?,
    };
    let report = json!({
        "version": VERSION,
        "experiment": name,
        "passed": passed,
        "config": &cfg,
        "result": &result,
    });
    files.push(write_json(out_dir, &format!("{name}.json"), &report)?);
    files.push(write_json(out_dir, &format!("{name}.config.json"), &cfg)?);
    Ok(ExperimentOutcome { kind, passed, result, files })
}

fn write_json(dir: &Path, file: &str, value: &impl Serialize) -> Result<PathBuf> {
    let path = dir.join(file);
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(&path, text)?;
    Ok(path)
}

fn grid_spec(cfg: &ConfigDocument) -> Result<GridSpec> {
    let g = cfg.grid.expect("resolved grid");
    GridSpec::new(g.d, g.n, g.l)
}

fn kernel(cfg: &ConfigDocument, dim: usize) -> Result<KernelSpec> {
    let params = cfg.kernel.clone().unwrap_or_default();
    let field = params.field.as_deref().map(|k| LipschitzField::from_key(k, dim)).transpose()?;
    let profile = params.profile.as_deref().map(AnalyticProfile::from_key).transpose()?;
    kernel_from_key(cfg.kernel_key.as_deref().expect("resolved kernel"), dim, field.as_ref(), profile.as_ref())
}

fn operator(cfg: &ConfigDocument, spec: &GridSpec) -> Result<OperatorConfig> {
    let d = spec.dim();
    let omega = SphereFunction::from_key(cfg.omega_key.as_deref().expect("resolved omega"), d)?;
    let op = cfg.operator.expect("resolved operator");
    let eps_cells = op.epsilon_cells.expect("resolved");
    if !(eps_cells > 0.0 && eps_cells.is_finite()) {
        return Err(invalid("epsilon_cells", format!("{eps_cells} must be positive")));
    }
    let mut oc = OperatorConfig::new(omega, kernel(cfg, d)?)
        .with_epsilon(eps_cells * spec.spacing())
        .with_rule(op.rule.expect("resolved"));
    match (op.j_min, op.j_max) {
        (Some(lo), Some(hi)) if lo <= hi => oc.j_range = Some((lo, hi)),
        (None, None) => {}
        _ => return Err(invalid("j_min", "give both j_min and j_max with j_min ≤ j_max")),
    }
    Ok(oc)
}

fn input_or(cfg: &ConfigDocument, spec: GridSpec, fixture: impl FnOnce(GridSpec) -> Result<GridFunction>) -> Result<GridFunction> {
    match &cfg.input {
        Some(path) => {
            let f = load_sgrd(path)?;
            if *f.spec() != spec {
                return Err(Error::GridMismatch(format!("{path} holds a different grid than `grid`")));
            }
            Ok(f)
        }
        None => fixture(spec),
    }
}

/// Seeded heavy-tailed random field: `u·2^{4v}` with `u ∈ [-1,1)`, `v ∈ [0,1)`.
pub fn random_fixture(spec: GridSpec, seed: u64) -> Result<GridFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    GridFunction::from_real_fn(spec, |_| {
        let u: f64 = rng.gen_range(-1.0..1.0);
        let v: f64 = rng.gen_range(0.0..1.0);
        u * (4.0 * v).exp2()
    })
}

/// Centred Gaussian of width `L/8`.
pub fn gaussian_fixture(spec: GridSpec) -> Result<GridFunction> {
    let s2 = (spec.half_width() / 8.0).powi(2);
    GridFunction::from_real_fn(spec, |x| (-x.iter().map(|c| c * c).sum::<f64>() / (2.0 * s2)).exp())
}

fn run_norms(cfg: &ConfigDocument) -> Result<(bool, Value)> {
    let d = cfg.dim();
    let omega = SphereFunction::from_key(cfg.omega_key.as_deref().expect("resolved"), d)?;
    let nodes = cfg.quadrature_nodes.expect("resolved");
    let norms = compute_norms(&omega, &build_quadrature(d, nodes)?, &[2.0])?;
    Ok((true, json!({ "omega": omega.label(), "d": d, "quadrature_nodes": nodes, "norms": norms })))
}

#[derive(Serialize)]
struct KernelCheckRow<'a> {
    kernel: &'a str,
    d: usize,
    samples: usize,
    seed: u64,
    c_size: f64,
    c_reg_first: f64,
    c_reg_second: f64,
    c_reg: f64,
}

fn run_kernel_check(cfg: &ConfigDocument, dir: &Path, files: &mut Vec<PathBuf>) -> Result<(bool, Value)> {
    let d = cfg.dim();
    let k = kernel(cfg, d)?;
    let samples = cfg.samples.expect("resolved");
    let seed = cfg.seed.expect("resolved");
    let region = SampleRegion::default();
    let c_size = check_size(&k, &mut PairSampler::new(d, region, seed)?, samples)?;
    let reg = check_regularity(&k, &mut TripleSampler::new(d, region, seed)?, samples)?;
    let row = KernelCheckRow {
        kernel: k.label(),
        d,
        samples,
        seed,
        c_size,
        c_reg_first: reg.first_slot,
        c_reg_second: reg.second_slot,
        c_reg: reg.combined(),
    };
    let path = dir.join("kernel-check.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.serialize(&row)?;
    w.flush()?;
    files.push(path);
    let passed = c_size.is_finite() && reg.combined().is_finite();
    Ok((passed, serde_json::to_value(&row)?))
}

fn run_cz(cfg: &ConfigDocument) -> Result<(bool, Value)> {
    let spec = grid_spec(cfg)?;
    let f = input_or(cfg, spec, |s| random_fixture(s, cfg.seed.expect("resolved")))?;
    let cz = cfg.cz.expect("resolved");
    let t = cz.t.expect("resolved");
    let dec = cz_decompose(&f, t, cz.rho.expect("resolved"))?;
    let report = verify_cz(&dec, &f, t);
    Ok((report.all_pass, serde_json::to_value(&report)?))
}

fn run_net(cfg: &ConfigDocument) -> Result<(bool, Value)> {
    let d = cfg.dim();
    let net_cfg = cfg.net.expect("resolved");
    let quad = build_quadrature(d, net_cfg.quadrature_nodes.expect("resolved"))?;
    let net = direction_net(net_cfg.n.expect("resolved"), net_cfg.gamma.expect("resolved"), &quad)?;
    let min_dist = net.min_pairwise_distance();
    let covering = net.covering_radius(&quad);
    let passed = min_dist >= net.separation() && covering <= net.separation();
    Ok((
        passed,
        json!({
            "min_pairwise_distance": min_dist,
            "covering_radius": covering,
            "net": net.to_record(),
        }),
    ))
}

fn run_apply(cfg: &ConfigDocument, dir: &Path, files: &mut Vec<PathBuf>) -> Result<(bool, Value)> {
    let spec = grid_spec(cfg)?;
    let op = operator(cfg, &spec)?;
    let f = input_or(cfg, spec, gaussian_fixture)?;
    let u = apply_truncated(&op, &f)?;
    let path = dir.join("apply.sgrd");
    save_sgrd(&u, &path)?;
    files.push(path);
    let imag = u.values().iter().map(|v| v.im.abs()).fold(0.0, f64::max);
    Ok((
        true,
        json!({
            "f_l1": lebesgue_norm(&f, 1.0),
            "f_l2": lebesgue_norm(&f, 2.0),
            "u_l1": lebesgue_norm(&u, 1.0),
            "u_l2": lebesgue_norm(&u, 2.0),
            "u_sup": lebesgue_norm(&u, f64::INFINITY),
            "max_imag": imag,
        }),
    ))
}

#[derive(Serialize)]
struct ProbeRow {
    experiment: &'static str,
    epsilon: Option<f64>,
    lambda: f64,
    measure: f64,
    weak_term: f64,
    weak_ratio: f64,
    l1_ratio: f64,
    #[serde(rename = "grid_N")]
    grid_n: usize,
    seed: u64,
}

fn run_probe(cfg: &ConfigDocument, dir: &Path, files: &mut Vec<PathBuf>) -> Result<(bool, Value)> {
    let spec = grid_spec(cfg)?;
    let op = operator(cfg, &spec)?;
    let p = cfg.probe.clone().expect("resolved");
    let lambdas = LambdaGrid::Auto { points: p.lambda_points.expect("resolved") };
    let results: Vec<ProbeResult> = match &cfg.input {
        Some(_) => vec![probe_function(&op, &input_or(cfg, spec, gaussian_fixture)?, &lambdas, None)?],
        None => spike_family(&op, p.epsilons.as_deref().expect("resolved"), spec, &lambdas, None)?,
    };
    let seed = cfg.seed.expect("resolved");
    let path = dir.join("probe.csv");
    let mut w = csv::Writer::from_path(&path)?;
    for r in &results {
        for i in 0..r.lambdas.len() {
            w.serialize(ProbeRow {
                experiment: "probe",
                epsilon: r.epsilon,
                lambda: r.lambdas[i],
                measure: r.measures[i],
                weak_term: r.weak_terms[i],
                weak_ratio: r.weak_ratio,
                l1_ratio: r.l1_ratio,
                grid_n: spec.n(),
                seed,
            })?;
        }
    }
    w.flush()?;
    files.push(path);
    let passed = results.iter().all(|r| r.is_monotone() && r.is_chebyshev_consistent());
    let summary: Vec<Value> = results
        .iter()
        .map(|r| json!({ "epsilon": r.epsilon, "weak_ratio": r.weak_ratio, "l1_ratio": r.l1_ratio, "f_l1": r.f_l1 }))
        .collect();
    Ok((passed, json!({ "runs": summary })))
}

fn run_params(cfg: &ConfigDocument) -> Result<(bool, Value)> {
    let p = cfg.params.expect("resolved");
    let (d, delta) = (p.d.expect("resolved"), p.delta.expect("resolved"));
    let given = [p.gamma, p.iota, p.eps0, p.mu];
    if given.iter().all(Option::is_none) && p.n1.is_none() {
        return match search_admissible(d, delta) {
            Some(v) => Ok((true, json!({ "search": true, "verdict": v }))),
            None => Ok((false, json!({ "search": true, "verdict": null }))),
        };
    }
    let missing = |name: &'static str| invalid(name, "give all of gamma, iota, eps0, mu, N1, or none to search");
    let params = AdmissibilityParams {
        d,
        delta,
        gamma: p.gamma.ok_or_else(|| missing("gamma"))?,
        iota: p.iota.ok_or_else(|| missing("iota"))?,
        eps0: p.eps0.ok_or_else(|| missing("eps0"))?,
        mu: p.mu.ok_or_else(|| missing("mu"))?,
        n1: p.n1.ok_or_else(|| missing("N1"))?,
    };
    params.validate()?;
    Ok((true, json!({ "search": false, "verdict": admissible_parameters(&params) })))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(text: &str) -> (ExperimentOutcome, tempfile::TempDir) {
        let dir = tempfile::tempdir().unwrap();
        let doc = ConfigDocument::parse(text).unwrap();
        (run_experiment(&doc, dir.path()).unwrap(), dir)
    }

    #[test]
    fn params_trivial_tuple() {
        let (out, _d) = run(r#"{"experiment":"params","params":{"d":2,"delta":1,"gamma":0,"iota":0,"mu":0,"eps0":0.5,"N1":1}}"#);
        let v = &out.result["verdict"];
        assert_eq!(v["admissible"], true);
        assert_eq!(v["s1"], -0.5);
        assert_eq!(v["s2"], -1.0);
        assert_eq!(v["s3"], -1.0);
        assert_eq!(v["s4"], -0.5);
    }

    #[test]
    fn params_search_and_partial_tuple() {
        let (out, _d) = run(r#"{"experiment":"params","params":{"d":3}}"#);
        assert!(out.passed);
        assert_eq!(out.result["verdict"]["admissible"], true);
        let dir = tempfile::tempdir().unwrap();
        let doc = ConfigDocument::parse(r#"{"experiment":"params","params":{"gamma":0.1}}"#).unwrap();
        assert!(matches!(run_experiment(&doc, dir.path()), Err(Error::InvalidParameter { .. })));
    }

    #[test]
    fn cz_on_random_fixture_passes() {
        let (out, _d) = run(r#"{"experiment":"cz","grid":{"d":2,"N":64,"L":1.0},"seed":5}"#);
        assert!(out.passed);
        assert_eq!(out.result["all_pass"], true);
    }

    #[test]
    fn norms_const1() {
        let (out, _d) = run(r#"{"experiment":"norms","omega_key":"const1"}"#);
        let l1 = out.result["norms"]["l1"].as_f64().unwrap();
        assert!((l1 - 2.0 * std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn probe_csv_rows_and_determinism() {
        let text = r#"{"experiment":"probe","grid":{"d":2,"N":64,"L":1.0},"probe":{"epsilons":[0.25,0.125],"lambda_points":8}}"#;
        let (out, dir) = run(text);
        assert!(out.passed);
        let csv_a = fs::read(dir.path().join("probe.csv")).unwrap();
        let text_a = String::from_utf8(csv_a.clone()).unwrap();
        assert!(text_a.starts_with("experiment,epsilon,lambda,measure,weak_term,weak_ratio,l1_ratio,grid_N,seed\n"));
        assert_eq!(text_a.lines().count(), 1 + 2 * 8);
        let (_, dir_b) = run(text);
        assert_eq!(csv_a, fs::read(dir_b.path().join("probe.csv")).unwrap());
        // the echoed config re-runs to identical bytes
        let echoed = fs::read_to_string(dir.path().join("probe.config.json")).unwrap();
        let (_, dir_c) = run(&echoed);
        assert_eq!(csv_a, fs::read(dir_c.path().join("probe.csv")).unwrap());
        assert_eq!(
            fs::read(dir.path().join("probe.json")).unwrap(),
            fs::read(dir_c.path().join("probe.json")).unwrap()
        );
    }

    #[test]
    fn apply_writes_grid() {
        let (out, dir) = run(r#"{"experiment":"apply","grid":{"d":2,"N":32,"L":2.0}}"#);
        let u = load_sgrd(dir.path().join("apply.sgrd")).unwrap();
        assert_eq!(u.spec().n(), 32);
        assert_eq!(out.result["max_imag"], 0.0);
    }

    #[test]
    fn kernel_check_power_is_exact() {
        let (out, _d) = run(r#"{"experiment":"kernel-check","kernel_key":"power","samples":2000,"seed":7}"#);
        assert_eq!(out.result["c_size"], 1.0);
    }

    #[test]
    fn net_is_separated() {
        let (out, _d) = run(r#"{"experiment":"net","net":{"n":4,"gamma":0.5}}"#);
        assert!(out.passed);
        assert!(out.result["net"]["cardinality"].as_u64().unwrap() > 0);
    }

    #[test]
    fn bad_values_are_config_errors() {
        let dir = tempfile::tempdir().unwrap();
        for text in [
            r#"{"experiment":"norms","omega_key":"nope"}"#,
            r#"{"experiment":"apply","grid":{"d":4,"N":8,"L":1.0}}"#,
            r#"{"experiment":"apply","operator":{"epsilon_cells":0.25}}"#,
            r#"{"experiment":"probe","grid":{"d":2,"N":32,"L":1.0},"probe":{"epsilons":[0.01]}}"#,
        ] {
            let err = run_experiment(&ConfigDocument::parse(text).unwrap(), dir.path()).unwrap_err();
            assert!(crate::config::is_config_error(&err), "{text}: {err}");
        }
    }
}
