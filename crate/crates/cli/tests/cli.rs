use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use nspike_cli::{run, Invocation};
use serde_json::Value;
use sha2::{Digest, Sha256};

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

fn invoke(config: &Path, out: &Path) -> (i32, Value, String) {
    let outcome = run(&Invocation {
        config: config.to_path_buf(),
        out: Some(out.to_path_buf()),
        ..Invocation::default()
    });
    let message = outcome.error.as_ref().map(|e| e.to_string()).unwrap_or_default();
    let summary = fs::read_to_string(out.join("summary.json"))
        .ok()
        .map(|t| serde_json::from_str(&t).unwrap())
        .unwrap_or(Value::Null);
    (outcome.exit_code, summary, message)
}

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nspike"))
}

#[test]
fn hypotheses_only_on_exponential_preset() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"preset": "scalar_exponential", "mode": "hypotheses-only"}"#);
    let (code, summary, _) = invoke(&cfg, &dir.path().join("out"));
    assert_eq!(code, 0);
    assert_eq!(summary["hypotheses_passed"], true);
    let bif = &summary["results"]["bifurcation"];
    assert!((bif["alpha"].as_f64().unwrap() - 1.0).abs() < 1e-8);
    assert!((bif["beta"].as_f64().unwrap() + 1.0).abs() < 1e-8);
    let report: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("out/hypotheses.json")).unwrap()).unwrap();
    assert!(report["clauses"].as_array().unwrap().iter().all(|c| c["passed"] == true));
}

#[test]
fn solve_emits_profile_with_expected_peak() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"preset": "scalar_exponential", "mode": "solve", "mu": 0.01}"#);
    let out = dir.path().join("out");
    let (code, summary, _) = invoke(&cfg, &out);
    assert_eq!(code, 0);
    let csv = fs::read_to_string(out.join("profile_mu_0.01.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "y0,x0,u0");
    let peak = lines
        .map(|l| l.split(',').nth(2).unwrap().parse::<f64>().unwrap())
        .fold(f64::NEG_INFINITY, f64::max);
    assert!((peak - 0.015).abs() < 0.0015, "{peak}");
    assert!(summary["results"]["solution"]["residual_original"].as_f64().unwrap() < 1e-8);
    for f in ["hypotheses.json", "diagnostics.csv", "plots.gp", "summary.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn manifest_checksums_match_and_reruns_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"preset": "scalar_exponential", "mode": "sweep", "mu_list": [0.02, 0.01], "grid": {"half_width": 30, "points": 512}}"#,
    );
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let (ca, sa, _) = invoke(&cfg, &a);
    let (cb, sb, _) = invoke(&cfg, &b);
    assert_eq!((ca, cb), (0, 0));
    assert_eq!(sa["files"], sb["files"]);
    let files = sa["files"].as_array().unwrap();
    assert!(files.len() >= 6);
    for f in files {
        let data = fs::read(a.join(f["name"].as_str().unwrap())).unwrap();
        assert_eq!(hex::encode(Sha256::digest(&data)), f["sha256"].as_str().unwrap());
        assert_eq!(data.len() as u64, f["bytes"].as_u64().unwrap());
    }
}

#[test]
fn component_mismatch_names_both_fields() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{
            "kernel": [[{"family": "exponential", "amplitude": -1}, {"family": "zero"}],
                       [{"family": "zero"}, {"family": "exponential", "amplitude": -0.5}]],
            "nonlinearity": {"components": 1, "terms": [{"row": 0, "coeff": 1, "mu_power": 1, "powers": [1]}]}
        }"#,
    );
    let (code, _, msg) = invoke(&cfg, &dir.path().join("out"));
    assert_eq!(code, 1);
    assert!(msg.contains("kernel") && msg.contains("nonlinearity"), "{msg}");
}

#[test]
fn unknown_preset_lists_available() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"preset": "unknown"}"#);
    let (code, _, msg) = invoke(&cfg, &dir.path().join("out"));
    assert_eq!(code, 1);
    for name in nspike_cli::presets::PRESETS {
        assert!(msg.contains(name), "{msg}");
    }
}

#[test]
fn unknown_keys_and_bad_values_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "a.json", "{\n  \"preset\": \"scalar_exponential\",\n  \"colour\": 3\n}");
    let (code, _, msg) = invoke(&cfg, &dir.path().join("out"));
    assert_eq!(code, 1);
    assert!(msg.contains("colour") && msg.contains("line 3"), "{msg}");
    let cfg = write_config(dir.path(), "b.json", r#"{"preset": "scalar_exponential", "mu": -0.1}"#);
    let (code, _, msg) = invoke(&cfg, &dir.path().join("out"));
    assert_eq!(code, 1);
    assert!(msg.contains("'mu'"), "{msg}");
    let cfg = write_config(dir.path(), "c.json", r#"{"preset": "neural_field", "parameters": {"gain": 2}}"#);
    let (code, _, msg) = invoke(&cfg, &dir.path().join("out"));
    assert_eq!(code, 1);
    assert!(msg.contains("parameters.gain"), "{msg}");
}

#[test]
fn exit_codes_and_output_override() {
    let dir = tempfile::tempdir().unwrap();
    let degenerate = write_config(
        dir.path(),
        "d.json",
        r#"{
            "kernel": [[{"family": "exponential", "amplitude": -1}]],
            "nonlinearity": {"components": 1, "terms": [
                {"row": 0, "coeff": 1, "mu_power": 1, "powers": [1]},
                {"row": 0, "coeff": -1, "powers": [3]}]},
            "mu": 0.01
        }"#,
    );
    let env_out = dir.path().join("from_env");
    let status = binary().arg(&degenerate).env("NSPIKE_OUT", &env_out).output().unwrap();
    assert_eq!(status.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&status.stderr).contains("DegenerateQuadratic"));
    let summary: Value = serde_json::from_str(&fs::read_to_string(env_out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["status"], "hypothesis_failure");

    let capped = write_config(
        dir.path(),
        "s.json",
        r#"{"preset": "scalar_exponential", "mu": 0.01, "tolerances": {"max_outer": 1}}"#,
    );
    let out = dir.path().join("capped");
    let status = binary().arg(&capped).arg("--out").arg(&out).env("NSPIKE_OUT", &env_out).output().unwrap();
    assert_eq!(status.status.code(), Some(3));
    assert!(out.join("hypotheses.json").exists() && out.join("summary.json").exists());

    let status = binary().arg(dir.path().join("missing.json")).output().unwrap();
    assert_eq!(status.status.code(), Some(1));
    let status = binary().arg(&capped).args(["--mode", "warp"]).output().unwrap();
    assert_eq!(status.status.code(), Some(2), "clap usage errors exit 2");
}

#[test]
fn neural_field_fold_matches_closed_form() {
    // S(u) = 1/(1 + e^{-θ(u - h - μ)}); the fold of S(u) = u with S' = 1 has
    // S(1 - S) = 1/θ, lower root S = (1 - √(1 - 4/θ))/2.
    let (theta, h) = (10.0_f64, 0.35);
    let s = (1.0 - (1.0 - 4.0 / theta).sqrt()) / 2.0;
    let mu_f = s - h - (s / (1.0 - s)).ln() / theta;
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"preset": "neural_field", "parameters": {"theta": 10, "h": 0.35}, "mode": "hypotheses-only"}"#,
    );
    let (code, summary, msg) = invoke(&cfg, &dir.path().join("out"));
    assert_eq!(code, 0, "{msg}");
    let fold = &summary["preset"]["fold"];
    assert!((fold["state"].as_f64().unwrap() - s).abs() < 1e-9);
    assert!((fold["mu"].as_f64().unwrap() - mu_f).abs() < 1e-9);
    assert_eq!(summary["hypotheses_passed"], true);
    assert!(summary["results"]["bifurcation"]["alpha"].as_f64().unwrap() > 0.0);
}

#[test]
fn cubic_preset_has_square_root_amplitude() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"preset": "nls_cubic", "mode": "sweep", "mu_list": [0.04, 0.02, 0.01, 0.005], "grid": {"half_width": 30, "points": 1024}}"#,
    );
    let (code, summary, msg) = invoke(&cfg, &dir.path().join("out"));
    assert_eq!(code, 0, "{msg}");
    let slope = summary["results"]["continuation"]["fitted_slopes"]["amplitude_vs_mu"].as_f64().unwrap();
    assert!((slope - 0.5).abs() < 0.05, "{slope}");
}

#[test]
fn cahn_morral_preset_solves() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"preset": "cahn_morral_like", "mu": 0.01, "grid": {"half_width": 30, "points": 1024}}"#,
    );
    let (code, summary, msg) = invoke(&cfg, &dir.path().join("out"));
    assert_eq!(code, 0, "{msg}");
    let fold = &summary["preset"]["fold"];
    assert!((fold["state"].as_f64().unwrap().abs() - 3f64.sqrt().recip()).abs() < 1e-9);
    assert!(summary["results"]["solution"]["residual_original"].as_f64().unwrap() < 1e-8);
}
