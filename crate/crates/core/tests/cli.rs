use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_stvae"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn simulate_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
    for out in [&a, &b] {
        ok(&["simulate", "--kind", "pw", "--n", "10", "--t", "3", "--seed", "7", "--out", p(out)]);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("a.jsonl.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "simulate");
    assert_eq!(manifest["seeds"]["master"], 7);
    let d = stvae::data::load_dataset(&a).unwrap();
    assert_eq!(d.len(), 10);
    assert!(d.series.iter().all(|s| s.len() == 3));
}

#[test]
fn missing_flag_fails_without_partial_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.jsonl");
    let r = run(&["simulate", "--kind", "pw", "--n", "10", "--seed", "7", "--out", p(&out)]);
    assert!(!r.status.success());
    assert!(String::from_utf8_lossy(&r.stderr).contains("--t"));
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
    let r = run(&["simulate", "--bogus"]);
    assert!(!r.status.success());
    assert!(String::from_utf8_lossy(&r.stderr).to_lowercase().contains("usage"));
}

#[test]
fn runtime_errors_are_one_json_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.jsonl");
    // the vae kind without a model
    let r = run(&["simulate", "--kind", "vae", "--n", "2", "--t", "3", "--seed", "1", "--out", p(&out)]);
    assert!(!r.status.success());
    let err = String::from_utf8(r.stderr).unwrap();
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    let v: serde_json::Value = serde_json::from_str(err.trim()).unwrap();
    assert_eq!(v["error"], "invalid_argument");
    assert!(v["message"].as_str().unwrap().contains("model"));
    assert!(!out.exists());
    let r = run(&["fit-pw", "--data", p(&dir.path().join("missing.jsonl")), "--out", p(&out)]);
    let v: serde_json::Value = serde_json::from_slice(&r.stderr).unwrap();
    assert_eq!(v["error"], "io");
}

#[test]
fn model_pipeline_train_encode_decode_predict() {
    let dir = tempfile::tempdir().unwrap();
    let d = |n: &str| dir.path().join(n);
    std::fs::write(
        d("cfg.toml"),
        "seed = 3\n[train]\nepochs = 2\nbatch_size = 10\n[mcmc]\niterations = 60\nburn_in = 20\n",
    )
    .unwrap();
    ok(&["simulate", "--kind", "st", "--n", "12", "--t", "3", "--seed", "5", "--out", p(&d("st.jsonl"))]);
    ok(&["train-vae", "--data", p(&d("st.jsonl")), "--config", p(&d("cfg.toml")), "--model-out", p(&d("m.stvae"))]);
    ok(&["encode", "--model", p(&d("m.stvae")), "--in", p(&d("st.jsonl")), "--out", p(&d("codes.csv"))]);
    let codes = std::fs::read_to_string(d("codes.csv")).unwrap();
    assert_eq!(codes.lines().count(), 1 + 36);
    assert!(codes.starts_with("series_id,visit_index,time,z0,"));
    ok(&["decode", "--model", p(&d("m.stvae")), "--in", p(&d("codes.csv")), "--out", p(&d("dec.jsonl"))]);
    let dec = stvae::data::load_dataset(&d("dec.jsonl")).unwrap();
    assert_eq!(dec.len(), 12);

    for method in ["vae", "st", "pw"] {
        let out = d(&format!("pred_{method}.csv"));
        ok(&[
            "predict", "--method", method, "--model", p(&d("m.stvae")), "--data", p(&d("st.jsonl")), "--horizons", "1,3",
            "--config", p(&d("cfg.toml")), "--out", p(&out),
        ]);
        let recs = stvae::forecast::read_prediction_records(std::fs::File::open(&out).unwrap()).unwrap();
        assert_eq!(recs.len(), 12 * 2 * 52);
        assert!(recs.iter().all(|r| r.horizon_time == 3.0 || r.horizon_time == 5.0));
    }
    let r = run(&["predict", "--method", "vae", "--data", p(&d("st.jsonl")), "--horizons", "1", "--out", p(&d("z.csv"))]);
    assert!(!r.status.success());
    assert!(!d("z.csv").exists());

    ok(&["fit-pw", "--data", p(&d("st.jsonl")), "--out", p(&d("pw.csv"))]);
    assert_eq!(std::fs::read_to_string(d("pw.csv")).unwrap().lines().count(), 1 + 12 * 52);
    ok(&["fit-st", "--data", p(&d("st.jsonl")), "--config", p(&d("cfg.toml")), "--out", p(&d("st_fit"))]);
    let post = std::fs::read_to_string(d("st_fit/posterior_st-000000.csv")).unwrap();
    assert!(post.starts_with("iteration,beta,tau2,eta2,rho,psi\n"));
    assert_eq!(post.lines().count(), 1 + 40);
    assert!(d("st_fit/manifest.json").exists());

    ok(&["correlations", "--data", p(&d("st.jsonl")), "--model", p(&d("m.stvae")), "--out", p(&d("corr"))]);
    for f in ["spatial_raw.csv", "temporal_raw.csv", "spatial_decoded.csv", "smoothing_summary.csv", "correlations.svg", "manifest.json"] {
        assert!(d("corr").join(f).exists(), "{f}");
    }
    let raw = std::fs::read_to_string(d("corr/spatial_raw.csv")).unwrap();
    assert_eq!(raw.lines().count(), 52);
}

#[test]
fn study_sim_smoke_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim");
    ok(&["study-sim", "--config", p(&configs().join("smoke.toml")), "--out", p(&out)]);
    for f in ["sim_long.csv", "sim_summary.csv", "sim_rse.svg", "sim_mae.svg", "manifest.json", "generator_vae.stvae"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let long = std::fs::read_to_string(out.join("sim_long.csv")).unwrap();
    // 3 methods x 3 generators x 1 length x 2 series
    assert_eq!(long.lines().count(), 1 + 18);
    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["sim"]["test_series"], 2);
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 5);
}

#[test]
fn study_predict_smoke_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("pred");
    ok(&["study-predict", "--config", p(&configs().join("smoke.toml")), "--out", p(&out)]);
    let grid = std::fs::read_to_string(out.join("predict_grid.csv")).unwrap();
    // 4 groups x 15 cells x 3 methods
    assert_eq!(grid.lines().count(), 1 + 4 * 15 * 3);
    for f in ["predictions_base3.csv", "predict_mae_overall.svg", "test.jsonl", "vae.stvae", "manifest.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn bad_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[sim]\ntest_series = 0\n").unwrap();
    let out = dir.path().join("o");
    let r = run(&["study-sim", "--config", p(&cfg), "--out", p(&out)]);
    assert!(!r.status.success());
    let v: serde_json::Value = serde_json::from_slice(&r.stderr).unwrap();
    assert!(v["message"].as_str().unwrap().contains("test_series"));
    assert!(!out.exists());
}
