//! End-to-end tests of the `vadelta` binary: every subcommand spawned as
//! a child process against a miniature configuration.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use vadelta::mc::read_results_csv;
use vadelta::portfolio::read_portfolio_csv;

fn vadelta_cmd(dir: &Path) -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_vadelta"));
    // Keep the ambient environment from steering output locations.
    cmd.env_remove("VADELTA_OUT_DIR").current_dir(dir);
    cmd
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().unwrap();
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// Miniature experiment: 200 contracts, 12 representatives, 60 scenarios.
fn tiny_config(dir: &Path) -> PathBuf {
    let path = dir.join("config.json");
    let json = serde_json::json!({
        "sizes": { "input": 200, "representatives": 12, "training": 24, "validation": 20 },
        "mc": { "scenario_count": 60 },
        "train": { "max_iterations": 300 },
        "methods": [ { "method": "nn" }, { "method": "idw", "power": 1.0 } ],
        "replications": 1,
        "output_dir": dir.join("out"),
        "master_seed": 11
    });
    fs::write(&path, serde_json::to_vec_pretty(&json).unwrap()).unwrap();
    path
}

#[test]
fn generate_mc_value_train_estimate_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cfg = tiny_config(dir);

    let portfolio = dir.join("p.csv");
    run_ok(vadelta_cmd(dir).args([
        "--config", cfg.to_str().unwrap(),
        "generate", "--kind", "input", "--count", "40",
        "--output", portfolio.to_str().unwrap(),
    ]));
    let contracts = read_portfolio_csv(&portfolio).unwrap();
    assert_eq!(contracts.len(), 40);

    // Same config, same seed: the draw is reproducible.
    let portfolio2 = dir.join("p2.csv");
    run_ok(vadelta_cmd(dir).args([
        "--config", cfg.to_str().unwrap(),
        "generate", "--kind", "input", "--count", "40",
        "--output", portfolio2.to_str().unwrap(),
    ]));
    assert_eq!(fs::read(&portfolio).unwrap(), fs::read(&portfolio2).unwrap());

    let results = dir.join("r.csv");
    let out = run_ok(vadelta_cmd(dir).args([
        "--config", cfg.to_str().unwrap(),
        "mc-value",
        "--portfolio", portfolio.to_str().unwrap(),
        "--output", results.to_str().unwrap(),
    ]));
    assert!(String::from_utf8_lossy(&out.stdout).contains("portfolio delta"));
    let rows = read_results_csv(&results).unwrap();
    assert_eq!(rows.len(), 40);
    assert!(rows.iter().all(|r| r.liability.is_some() && r.std_err.is_some()));

    let model = dir.join("m.json");
    let history = dir.join("h.csv");
    run_ok(vadelta_cmd(dir).args([
        "--config", cfg.to_str().unwrap(),
        "train",
        "--model", model.to_str().unwrap(),
        "--history", history.to_str().unwrap(),
    ]));
    assert!(model.exists());
    let h = fs::read_to_string(&history).unwrap();
    assert!(h.starts_with("iteration,train_mse,val_mse,mu\n"));
    assert!(h.lines().count() > 1, "history must record at least one entry");

    // Training twice from the same config reproduces the model exactly.
    let model2 = dir.join("m2.json");
    run_ok(vadelta_cmd(dir).args([
        "--config", cfg.to_str().unwrap(),
        "train",
        "--model", model2.to_str().unwrap(),
    ]));
    assert_eq!(fs::read(&model).unwrap(), fs::read(&model2).unwrap());

    let estimates = dir.join("e.csv");
    let out = run_ok(vadelta_cmd(dir).args([
        "--config", cfg.to_str().unwrap(),
        "estimate",
        "--model", model.to_str().unwrap(),
        "--portfolio", portfolio.to_str().unwrap(),
        "--output", estimates.to_str().unwrap(),
    ]));
    assert!(String::from_utf8_lossy(&out.stdout).contains("estimated portfolio delta"));
    let rows = read_results_csv(&estimates).unwrap();
    assert_eq!(rows.len(), 40);
    assert!(
        rows.iter().all(|r| r.liability.is_none() && r.std_err.is_none()),
        "estimator output leaves liability and standard error empty"
    );
    assert_eq!(
        rows.iter().map(|r| r.id).collect::<Vec<_>>(),
        contracts.iter().map(|c| c.id).collect::<Vec<_>>()
    );
}

#[test]
fn compare_is_deterministic_and_honors_output_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cfg = tiny_config(dir);

    // First run: VADELTA_OUT_DIR redirects away from the config's dir.
    let env_out = dir.join("env_out");
    run_ok(
        vadelta_cmd(dir)
            .env("VADELTA_OUT_DIR", &env_out)
            .args(["--config", cfg.to_str().unwrap(), "compare"]),
    );
    assert!(env_out.join("comparison.csv").exists(), "env var must override the output dir");
    assert!(!dir.join("out").join("comparison.csv").exists());

    // Second run: the --out flag beats the env var.
    let flag_out = dir.join("flag_out");
    run_ok(
        vadelta_cmd(dir)
            .env("VADELTA_OUT_DIR", dir.join("ignored"))
            .args([
                "--config", cfg.to_str().unwrap(),
                "--out", flag_out.to_str().unwrap(),
                "compare",
            ]),
    );
    assert!(flag_out.join("comparison.csv").exists());
    assert!(!dir.join("ignored").exists(), "--out must beat VADELTA_OUT_DIR");

    // Same master seed, fresh directories: deterministic files agree byte
    // for byte; only the timing files and manifest may differ.
    for name in ["comparison.csv", "summary.csv", "scatter.csv", "history_rep0.csv"] {
        let a = fs::read(env_out.join(name)).unwrap();
        let b = fs::read(flag_out.join(name)).unwrap();
        assert_eq!(a, b, "{name} must be identical across reruns");
    }

    let scatter = fs::read_to_string(env_out.join("scatter.csv")).unwrap();
    assert_eq!(scatter.lines().count(), 21, "scatter rows = validation portfolio size");
    let comparison = fs::read_to_string(env_out.join("comparison.csv")).unwrap();
    assert_eq!(comparison.lines().count(), 3, "two methods x one replication plus header");
}

#[test]
fn invalid_config_exits_nonzero_with_stage_tag() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let path = dir.join("bad.json");
    fs::write(&path, r#"{ "replications": 0 }"#).unwrap();
    let out = vadelta_cmd(dir)
        .args(["--config", path.to_str().unwrap(), "compare"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("error:"), "stderr: {stderr}");
    assert!(stderr.contains("stage `config`"), "stderr: {stderr}");
}

#[test]
fn sensitivity_then_report_reemits_byte_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cfg = tiny_config(dir);
    let out_dir = dir.join("out");

    run_ok(vadelta_cmd(dir).args([
        "--config", cfg.to_str().unwrap(),
        "sensitivity", "--vary", "validation", "--realizations", "1",
    ]));
    let sensitivity = fs::read_to_string(out_dir.join("sensitivity.csv")).unwrap();
    assert_eq!(sensitivity.lines().count(), 2, "one realization plus header");
    assert!(out_dir.join("raw_results.json").exists());

    // Re-emit elsewhere from the stored raw results: no recomputation,
    // identical deterministic files.
    let copy = dir.join("copy");
    run_ok(vadelta_cmd(dir).args([
        "--config", cfg.to_str().unwrap(),
        "--out", copy.to_str().unwrap(),
        "report",
        "--from", out_dir.to_str().unwrap(),
    ]));
    assert_eq!(
        fs::read(out_dir.join("sensitivity.csv")).unwrap(),
        fs::read(copy.join("sensitivity.csv")).unwrap()
    );
    assert_eq!(
        fs::read(out_dir.join("sensitivity_timings.csv")).unwrap(),
        fs::read(copy.join("sensitivity_timings.csv")).unwrap(),
        "re-emission echoes stored timings rather than measuring new ones"
    );
    let comparison = fs::read_to_string(copy.join("comparison.csv")).unwrap();
    assert_eq!(comparison, "method,replication,estimate,relative_error\n");

    // Report with nothing stored still writes the full file set.
    let empty_out = dir.join("empty_out");
    run_ok(vadelta_cmd(dir).args([
        "--config", cfg.to_str().unwrap(),
        "--out", empty_out.to_str().unwrap(),
        "report",
        "--from", dir.join("nowhere").to_str().unwrap(),
    ]));
    assert!(empty_out.join("manifest.json").exists());
    let comparison = fs::read_to_string(empty_out.join("comparison.csv")).unwrap();
    assert_eq!(comparison, "method,replication,estimate,relative_error\n");
}
