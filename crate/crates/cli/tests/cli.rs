use std::path::Path;
use std::process::Command;

use serde_json::Value;
use specrisk::marginals::DiscreteMarginal;
use specrisk::mmot::{solve_mmot_lp, LpOptions};
use specrisk::payout::Payout;
use specrisk::spectral::spectral_risk;
use specrisk_cli::commands::{cmd_check, cmd_multirisk, cmd_oracle, cmd_river, cmd_solve, cmd_stability, Overrides};
use specrisk_cli::config::{MarginalSpec, RunConfig};
use specrisk_cli::river;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_specrisk"))
}

fn write_config(dir: &Path, name: &str, json: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, json).unwrap();
    p
}

fn strip_timing(v: &mut Value) {
    match v {
        Value::Object(m) => {
            m.remove("timing_ms");
            m.values_mut().for_each(strip_timing);
        }
        Value::Array(a) => a.iter_mut().for_each(strip_timing),
        _ => {}
    }
}

const SUM3: &str = r#"{
    "payout": { "expr": "x1 + x2 + x3" },
    "marginals": [
        { "kind": "discrete", "atoms": [[0, 0.2], [1, 0.5], [4, 0.3]] },
        { "kind": "uniform", "a": -1, "b": 2 },
        { "kind": "triangular", "a": 0, "mode": 1, "b": 3 }
    ],
    "spectral": { "kind": "es", "m0": 0.25 }
}"#;

const ODD: &str = r#"{
    "payout": { "expr": "x1*x2 + x1*x3 - x2*x3" },
    "marginals": [
        { "kind": "uniform", "a": 0, "b": 1 },
        { "kind": "uniform", "a": 0, "b": 1 },
        { "kind": "uniform", "a": 0, "b": 1 }
    ],
    "discretization": 16
}"#;

#[test]
fn sum_payout_adds_expected_shortfalls() {
    let cfg = RunConfig::from_json(SUM3).unwrap();
    let out = cmd_solve(&cfg).unwrap();
    assert_eq!(out.report["method"], "comonotone");
    assert_eq!(out.report["verdict"]["label"], "WeaklyCompatible");
    assert_eq!(out.report["partition"]["minus"].as_array().unwrap().len(), 0);
    let alpha = cfg.build_alpha().unwrap();
    let expected: f64 = cfg
        .build_marginals()
        .unwrap()
        .iter()
        .map(|m| spectral_risk(&alpha, m).unwrap())
        .sum();
    assert!((out.report["value"].as_f64().unwrap() - expected).abs() < 1e-9);
}

#[test]
fn constant_spectrum_supermodular_is_classical_transport() {
    let json = r#"{
        "payout": { "expr": "x1*x2" },
        "marginals": [
            { "kind": "discrete", "atoms": [[1, 0.3], [2, 0.3], [3, 0.4]] },
            { "kind": "discrete", "atoms": [[0.5, 0.5], [4, 0.25], [5, 0.25]] }
        ]
    }"#;
    let cfg = RunConfig::from_json(json).unwrap();
    let out = cmd_solve(&cfg).unwrap();
    let m: Vec<DiscreteMarginal<f64>> = cfg
        .build_marginals()
        .unwrap()
        .into_iter()
        .map(|m| m.as_discrete().unwrap().clone())
        .collect();
    let lp = solve_mmot_lp(&m, |x: &[f64]| Ok(x[0] * x[1]), &LpOptions::default()).unwrap();
    assert!((out.report["value"].as_f64().unwrap() - lp.value).abs() < 1e-10);
}

#[test]
fn oracle_reports_gaps() {
    let json = r#"{
        "payout": { "expr": "x1*x2 + x1" },
        "marginals": [
            { "kind": "discrete", "atoms": [[1, 0.3], [2, 0.3], [3, 0.4]] },
            { "kind": "discrete", "atoms": [[0.5, 0.5], [4, 0.25], [5, 0.25]] }
        ],
        "spectral": { "kind": "es", "m0": 0.3 }
    }"#;
    let cfg = RunConfig::from_json(json).unwrap();
    let out = cmd_oracle(&cfg).unwrap();
    let r = &out.report;
    assert!(r["oracle_gap"].as_f64().unwrap() <= 1e-8);
    assert!(r["three_way_gap"].as_f64().unwrap() <= 1e-9);
    assert_eq!(r["diagnostics"]["monotone_support"], true);

    let mut flat = cfg.clone();
    flat.spectral = specrisk_cli::config::SpectralSpec::Constant { value: 1.0 };
    let r = cmd_oracle(&flat).unwrap().report;
    assert!((r["plain_mmot_value"].as_f64().unwrap() - r["lp_value"].as_f64().unwrap()).abs() < 1e-10);
}

#[test]
fn incompatible_payouts() {
    let cfg = RunConfig::from_json(ODD).unwrap();
    let out = cmd_check(&cfg).unwrap();
    assert_eq!(out.exit_code, 2);
    assert_eq!(out.report["verdict"]["label"], "Incompatible");
    assert_eq!(out.report["verdict"]["witness"], serde_json::json!(["x1", "x2", "x3"]));

    let mut forced = cfg.clone();
    Overrides {
        solver: Some("comonotone".into()),
        ..Default::default()
    }
    .apply(&mut forced)
    .unwrap();
    let err = cmd_solve(&forced).unwrap_err();
    assert_eq!(err.exit_code(), 2);

    // auto falls back to the LP
    let out = cmd_solve(&cfg).unwrap();
    assert_eq!(out.report["method"], "lp");
}

#[test]
fn river_defaults_are_placeholders_and_dirac_inputs_are_exact() {
    let out = cmd_river(None).unwrap();
    assert_eq!(out.report["provenance"], "placeholder");

    let point = [1200.0, 30.0, 50.0, 55.0, 8.0, 55.5, 5000.0, 300.0];
    let mut cfg = river::default_config();
    cfg.marginals = point.iter().map(|&x| MarginalSpec::Dirac { x }).collect();
    cfg.provenance = None;
    let out = cmd_river(Some(&cfg)).unwrap();
    assert_eq!(out.report["provenance"], "user");
    let names: Vec<String> = river::RIVER_NAMES.iter().map(|s| s.to_string()).collect();
    let domain = point.iter().map(|&x| (x, x)).collect();
    let s = Payout::parse_named(river::RIVER_EXPR, names, domain).unwrap().eval(&point).unwrap();
    // ∫α = 1 for expected shortfall
    assert!((out.report["value"].as_f64().unwrap() - s).abs() < 1e-9 * s.abs().max(1.0));

    let mut bad = river::default_config();
    bad.marginals[3] = MarginalSpec::Uniform { a: 50.0, b: 56.0 };
    assert_eq!(cmd_river(Some(&bad)).unwrap_err().exit_code(), 1);
}

#[test]
fn stability_examples() {
    let base = r#"{
        "payout": { "expr": "x1 + x2 + x3" },
        "marginals": [
            { "kind": "uniform", "a": 0, "b": 1 },
            { "kind": "uniform", "a": 1, "b": 3 },
            { "kind": "uniform", "a": -1, "b": 0 }
        ],
        "stability": { "perturbation": { "kind": "shift", "delta": DELTA }, "trials": 2, "k_override": 1.0 }
    }"#;
    let zero = RunConfig::from_json(&base.replace("DELTA", "0.0")).unwrap();
    let r = cmd_stability(&zero).unwrap().report;
    assert_eq!(r["bound"], 0.0);
    assert_eq!(r["observed"], 0.0);
    let shift = RunConfig::from_json(&base.replace("DELTA", "0.2")).unwrap();
    let r = cmd_stability(&shift).unwrap().report;
    assert!((r["worst_ratio"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert_eq!(r["satisfied"], true);
}

#[test]
fn multirisk_curve_and_cloud() {
    let json = r#"{
        "payout": { "exprs": ["x1*x2", "x1 + x2"] },
        "marginals": [
            { "kind": "discrete", "atoms": [[1, 0.5], [2, 0.5]] },
            { "kind": "discrete", "atoms": [[0.5, 0.25], [1, 0.75]] }
        ],
        "multirisk": {
            "baseline": { "kind": "curve", "components": [
                { "kind": "es", "m0": 0.5 },
                { "kind": "piecewise_constant", "steps": [[0, 0.5], [0.4, 1.5]] }
            ] },
            "invertibility": true
        }
    }"#;
    let cfg = RunConfig::from_json(json).unwrap();
    let r = cmd_multirisk(&cfg).unwrap().report;
    assert!(r["oracle_gap"].as_f64().unwrap() < 1e-8);
    assert!(r["invertibility"]["points"].as_u64().unwrap() > 0);

    let cloud = json.replace(
        r#"{ "kind": "curve", "components": [
                { "kind": "es", "m0": 0.5 },
                { "kind": "piecewise_constant", "steps": [[0, 0.5], [0.4, 1.5]] }
            ] }"#,
        r#"{ "kind": "point_cloud", "points": [[1, 0]], "weights": [1] }"#,
    );
    let cfg = RunConfig::from_json(&cloud).unwrap();
    let r = cmd_multirisk(&cfg).unwrap().report;
    // a Dirac baseline at (1, 0) picks out E[x1·x2] = 1.5 · 0.875 under independence
    assert!((r["value"].as_f64().unwrap() - 1.3125).abs() < 1e-12);
}

#[test]
fn reports_are_deterministic_and_echo_the_config() {
    let dir = TempDir::new().unwrap();
    let cfg_path = write_config(
        dir.path(),
        "stab.json",
        r#"{
            "payout": { "expr": "x1 + x2" },
            "marginals": [
                { "kind": "uniform", "a": 0, "b": 1 },
                { "kind": "uniform", "a": 0, "b": 2 }
            ],
            "spectral": { "kind": "es", "m0": 0.2 },
            "stability": { "perturbation": { "kind": "jitter", "sigma": 0.1, "atoms": 16 }, "trials": 8 }
        }"#,
    );
    let run = |sub: &str, out: &Path| {
        let o = bin()
            .args([sub, "--config"])
            .arg(&cfg_path)
            .args(["--seed", "11", "--out"])
            .arg(out)
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let mut v: Value = serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
        strip_timing(&mut v);
        v
    };
    for sub in ["stability", "solve"] {
        let (a, b) = (dir.path().join(format!("{sub}-a")), dir.path().join(format!("{sub}-b")));
        let (ra, rb) = (run(sub, &a), run(sub, &b));
        assert_eq!(serde_json::to_string(&ra).unwrap(), serde_json::to_string(&rb).unwrap());
        for entry in std::fs::read_dir(&a).unwrap() {
            let name = entry.unwrap().file_name();
            if name != "report.json" {
                assert_eq!(std::fs::read(a.join(&name)).unwrap(), std::fs::read(b.join(&name)).unwrap());
            }
        }
        let echoed = RunConfig::from_json(&ra["config"].to_string()).unwrap();
        assert_eq!(echoed.seed, 11);
        let again = RunConfig::from_json(&echoed.to_json()).unwrap();
        assert_eq!(again, echoed);
    }
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let odd = write_config(dir.path(), "odd.json", ODD);
    let o = bin().args(["check", "--config"]).arg(&odd).output().unwrap();
    assert_eq!(o.status.code(), Some(2));

    let bad = write_config(dir.path(), "bad.json", r#"{ "payout": { "expr": "x1 +" }, "marginals": [{ "kind": "dirac", "x": 1 }] }"#);
    let o = bin().args(["solve", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));

    let o = bin().args(["solve"]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    let o = bin().args(["bogus"]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));

    let sum = write_config(dir.path(), "sum.json", SUM3);
    let o = bin().args(["check", "--config"]).arg(&sum).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let o = bin().args(["river"]).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn flag_overrides() {
    let mut cfg = RunConfig::from_json(SUM3).unwrap();
    let o = Overrides {
        solver: Some("partial".into()),
        discretize: Some(8),
        seed: Some(5),
        ..Default::default()
    };
    o.apply(&mut cfg).unwrap();
    assert_eq!(cfg.solver, specrisk_cli::config::SolverSpec::Partial { m0: 0.25 });
    assert_eq!((cfg.discretization, cfg.seed), (8, 5));
    let r = cmd_solve(&cfg).unwrap().report;
    assert_eq!(r["method"], "partial");
    assert!(!r["warnings"].as_array().unwrap().is_empty());

    let mut e = RunConfig::from_json(SUM3).unwrap();
    let err = Overrides {
        solver: Some("entropic".into()),
        ..Default::default()
    }
    .apply(&mut e)
    .unwrap_err();
    assert_eq!(err.exit_code(), 1);
}
