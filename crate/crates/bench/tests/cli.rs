use std::path::Path;
use std::process::{Command, Output};

use gridfree_bench::report::{BenchReport, CRB_METHOD};

fn gridfree(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gridfree"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = gridfree(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const DATA: &str = r#"{"grid": {"n_freq": 16, "n_time": 16, "delta_f": 1.0, "delta_t": 1.0, "f0": -8.0, "t0": 0.0},
 "path_count": [1, 3], "p_max": 3, "count": 6, "snr_range_db": [20.0, 40.0]}"#;

const TRAIN: &str = r#"
[network]
n_freq = 16
n_time = 16
p_max = 3
stage1_blocks = 3
base_channels = 4
downsample_blocks = 1
order_conv_channels = 4
eta_hidden = 16
order_hidden = 8

[training]
epochs = 1
batch_size = 3
"#;

#[test]
fn full_pipeline_on_a_tiny_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("data.json"), DATA).unwrap();
    std::fs::write(d.join("train.toml"), TRAIN).unwrap();
    let data = d.join("data");
    let dataset = data.join("dataset");
    let run = d.join("run");

    ok(&["gen", "--config", s(&d.join("data.json")), "--out", s(&data), "--seed", "3"]);
    ok(&["train", "--config", s(&d.join("train.toml")), "--dataset", s(&dataset), "--out", s(&run), "--plots"]);
    for f in ["weights.bin", "history.csv", "loss.svg"] {
        assert!(run.join(f).exists(), "{f} missing");
    }
    let weights = run.join("weights.bin");

    ok(&["infer", "--weights", s(&weights), "--dataset", s(&dataset), "--out", s(&run)]);
    let est = std::fs::read_to_string(run.join("estimates.csv")).unwrap();
    assert!(est.starts_with("record,method,p_hat"));

    ok(&["refine", "--dataset", s(&dataset), "--out", s(&d.join("oracle"))]);
    assert!(d.join("oracle/refine_trace.csv").exists());

    ok(&[
        "bench", "--dataset", s(&dataset), "--weights", s(&weights),
        "--methods", "periodogram,cnn,cnn+gn", "--snr-bins", "20,30,41", "--out", s(&run), "--plots",
    ]);
    let rep = BenchReport::read_csv(std::fs::File::open(run.join("bench.csv")).unwrap()).unwrap();
    assert_eq!(rep.methods(), ["periodogram", "cnn", "cnn+gn", CRB_METHOD]);
    let trials: usize = rep.rows_for("periodogram").map(|r| r.n_trials).sum();
    assert_eq!(trials, 6);
    assert!(run.join("mse_tau.svg").exists());

    ok(&["crb", "--dataset", s(&dataset), "--snr-bins", "10", "--out", s(&run)]);
    let crb = BenchReport::read_csv(std::fs::File::open(run.join("crb.csv")).unwrap()).unwrap();
    assert!(crb.rows.iter().all(|r| r.method == CRB_METHOD && r.mse_tau > 0.0));
}

#[test]
fn bench_without_weights_skips_cnn_methods() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("data.json"), DATA).unwrap();
    ok(&["gen", "--config", s(&d.join("data.json")), "--out", s(d)]);
    ok(&["bench", "--dataset", s(&d.join("dataset")), "--out", s(d)]);
    let rep = BenchReport::read_csv(std::fs::File::open(d.join("bench.csv")).unwrap()).unwrap();
    assert!(rep.rows_for("cnn").next().is_none());
    assert!(rep.rows_for("periodogram").next().is_some());
}

#[test]
fn config_errors_name_the_field_and_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"count": "many"}"#).unwrap();
    let out = gridfree(&["gen", "--config", s(&cfg), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("count"));

    let out = gridfree(&["bench", "--dataset", s(&dir.path().join("missing")), "--out", s(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
}
