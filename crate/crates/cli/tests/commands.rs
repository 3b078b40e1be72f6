use std::fs;
use std::path::Path;
use std::process::Command;

use triage_cli::commands::{cmd_explore, cmd_run, cmd_synth, cmd_train, Layout, Manifest};
use triage_cli::{CliError, RunConfig};
use triage_core::TriageError;

fn small(out: &Path) -> RunConfig {
    let text = format!(
        r#"
seed = 11
out_dir = "{}"

[data.synthetic]
preset = "demo"
n_patients = 400

[screening]
folds = 3

[tuning]
budget = 4
n_init = 2
folds = 3

[report]
timings = false
"#,
        out.display()
    );
    RunConfig::from_toml(&text).unwrap()
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_triage"))
}

#[test]
fn full_chain_writes_every_declared_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    cmd_run(&cfg).unwrap();
    let layout = Layout::new(dir.path());
    let declared = layout.declared(&cfg);
    assert_eq!(declared.len(), 18);
    for (path, _) in &declared {
        assert!(path.exists(), "{}", path.display());
    }
    let manifest: Manifest =
        serde_json::from_str(&fs::read_to_string(layout.manifest()).unwrap()).unwrap();
    assert_eq!(manifest.files.len(), declared.len());
    assert_eq!(manifest.config_hash, cfg.hash());
    let metrics: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(layout.metrics(triage_cli::Target::SpecialCare)).unwrap(),
    )
    .unwrap();
    for key in ["roc_auc", "pr_auc", "brier", "best_threshold"] {
        assert!(metrics[key].is_number(), "{key}");
    }
    let days: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(layout.metrics(triage_cli::Target::Days)).unwrap(),
    )
    .unwrap();
    for key in ["rmse", "mae", "r2", "baseline_rmse", "rmse_improvement_pct"] {
        assert!(days[key].is_number(), "{key}");
    }
}

#[test]
fn training_twice_gives_identical_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    cmd_run(&cfg).unwrap();
    let layout = Layout::new(dir.path());
    let first: Vec<Vec<u8>> = cfg
        .task
        .targets()
        .iter()
        .map(|&t| fs::read(layout.model(t)).unwrap())
        .collect();
    cmd_train(&cfg).unwrap();
    let second: Vec<Vec<u8>> = cfg
        .task
        .targets()
        .iter()
        .map(|&t| fs::read(layout.model(t)).unwrap())
        .collect();
    assert_eq!(first, second);
}

#[test]
fn no_signal_cohort_has_small_ks_everywhere() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::from_toml(&format!(
        "seed = 3\nout_dir = \"{}\"\n[data.synthetic]\npreset = \"no_signal\"\nn_patients = 5000\nprevalence = 0.5\ncoverage = 1.0\n",
        dir.path().display()
    ))
    .unwrap();
    cmd_synth(&cfg).unwrap();
    cmd_explore(&cfg).unwrap();
    let mut rdr = csv::Reader::from_path(Layout::new(dir.path()).summary_csv()).unwrap();
    let mut n = 0;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let ks: f64 = rec[8].parse().unwrap();
        assert!(ks < 0.1, "{}: {ks}", &rec[0]);
        n += 1;
    }
    assert_eq!(n, 30);
}

#[test]
fn missing_upstream_file_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(dir.path());
    match cmd_explore(&cfg) {
        Err(CliError::Core(TriageError::MissingInput { path, hint })) => {
            assert!(path.ends_with("data.csv"));
            assert!(hint.contains("triage synth"));
        }
        other => panic!("{other:?}"),
    }
    cmd_synth(&cfg).unwrap();
    let err = cmd_train(&cfg).unwrap_err();
    assert!(err.to_string().contains("best_params.json"), "{err}");
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn csv_source_runs_the_same_chain() {
    let dir = tempfile::tempdir().unwrap();
    let synth_cfg = small(&dir.path().join("gen"));
    cmd_synth(&synth_cfg).unwrap();
    let data = Layout::new(dir.path().join("gen")).data_csv();
    let text = format!(
        "seed = 11\nout_dir = \"{}\"\ntask = \"special_care\"\n[data.csv]\npath = \"{}\"\n[tuning]\nbudget = 3\nn_init = 2\nfolds = 3\n[screening]\nfolds = 3\n",
        dir.path().join("run").display(),
        data.display()
    );
    let cfg = RunConfig::from_toml(&text).unwrap();
    cmd_run(&cfg).unwrap();
    let layout = Layout::new(dir.path().join("run"));
    assert!(!layout.data_csv().exists());
    assert!(layout.model(triage_cli::Target::SpecialCare).exists());
    assert!(!layout.model(triage_cli::Target::Days).exists());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let status = |args: &[&str]| bin().args(args).output().unwrap().status.code().unwrap();
    assert_eq!(status(&["--help"]), 0);
    assert_eq!(status(&["frobnicate"]), 1);
    assert_eq!(status(&["screen", "--seed", "x"]), 1);

    let out = dir.path().join("o");
    let out = out.to_str().unwrap();
    let missing = bin()
        .args(["evaluate", "--quiet", "--out", out])
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("data.csv"));

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "seed = 1\n").unwrap();
    assert_eq!(
        status(&["explore", "--quiet", "--config", bad.to_str().unwrap()]),
        2
    );
    assert_eq!(
        status(&[
            "explore",
            "--quiet",
            "--config",
            dir.path().join("none.toml").to_str().unwrap()
        ]),
        2
    );

    assert_eq!(
        status(&["synth", "--quiet", "--out", out, "--seed", "5"]),
        0
    );
    assert!(Path::new(out).join("data.csv").exists());
    assert_eq!(
        status(&["explore", "--quiet", "--out", out, "--seed", "5"]),
        0
    );
    assert_eq!(
        status(&["serve", "--quiet", "--out", out, "--addr", "127.0.0.1:0"]),
        2
    );

    let demo = bin().arg("demo-config").output().unwrap();
    assert_eq!(
        String::from_utf8(demo.stdout).unwrap(),
        triage_cli::config::DEMO_CONFIG
    );
}
