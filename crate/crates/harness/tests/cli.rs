use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mlbfgs"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

const QUAD: &str = r#"{
    "schema_version": 1,
    "objective": {"kind": "quadratic", "diag": [1.0, 2.0, 3.0], "noise_sigma": 0.1},
    "optimizer": {"kind": "mlbfgs", "update_period": 5, "history": 4, "beta": 0.9},
    "schedule": {"kind": "cosine", "lr": 0.1},
    "workers": 3,
    "blocks": {"kind": "equal", "count": 3},
    "grad_chunks": 3,
    "iterations": ITERS,
    "seed": 4
}"#;

fn write_config(dir: &Path, iters: usize) -> PathBuf {
    let path = dir.join("cfg.json");
    std::fs::write(&path, QUAD.replace("ITERS", &iters.to_string())).unwrap();
    path
}

#[test]
fn run_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 60);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = run(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let ta = std::fs::read(a.join("metrics.csv")).unwrap();
    let tb = std::fs::read(b.join("metrics.csv")).unwrap();
    assert_eq!(ta, tb);
    let text = String::from_utf8(ta).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("iter,epoch,split,loss,grad_norm,lr,elapsed_ms"));
    let iters: Vec<usize> = lines.map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(iters, (0..=60).collect::<Vec<_>>());
}

#[test]
fn seed_flag_changes_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 20);
    let cfg = cfg.to_str().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(run(&["run", "--config", cfg, "--out", a.to_str().unwrap()]).status.success());
    assert!(run(&["run", "--config", cfg, "--seed", "99", "--out", b.to_str().unwrap()]).status.success());
    assert_ne!(
        std::fs::read(a.join("metrics.csv")).unwrap(),
        std::fs::read(b.join("metrics.csv")).unwrap()
    );
}

#[test]
fn zero_budget_writes_initial_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 0);
    let out = dir.path().join("o");
    assert!(run(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]).status.success());
    let text = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.lines().nth(1).unwrap().starts_with("0,0,train,"));
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, QUAD.replace("ITERS", "5").replace("\"beta\": 0.9", "\"beta\": 2.0")).unwrap();
    let o = run(&["run", "--config", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("optimizer.beta"));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["verify", "--suite", "nope"]).status.code(), Some(1));
}

#[test]
fn verify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("v.csv");
    let o = run(&["verify", "--suite", "secant", "--out", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("suite,check,kind,measured,expected,tolerance,pass\n"));
    assert_eq!(text.lines().count(), 4);
    // the spectral bounds do not hold for general damped pairs
    assert_eq!(run(&["verify", "--suite", "spectral"]).status.code(), Some(2));
}

#[test]
fn fig1_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fig1.csv");
    let o = run(&["fig1", "--sigma", "0.2", "--beta", "0.9", "--iters", "10", "--seeds", "2", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("method,seed,iter,theta0,theta1,loss"));
    assert_eq!(lines.count(), 4 * 2 * 11);
}

#[test]
fn cost_table_and_missing_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cost.csv");
    let inputs = configs().join("cost_inputs.json");
    let o = run(&["cost", "--kind", "all", "--inputs", inputs.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let kinds: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    // no layer dims, so the Kronecker-factored row is skipped
    assert_eq!(kinds, vec!["sgd", "slbfgs", "mlbfgs"]);
    let o = run(&["cost", "--kind", "kfac", "--inputs", inputs.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("layers"));
}

#[test]
fn ablate_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("ablation.json");
    let o = run(&["ablate", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = std::fs::read_to_string(dir.path().join("ablation_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 5);
    assert!(dir.path().join("ablation_blocks.csv").exists());
}

#[test]
fn shipped_configs_parse() {
    for name in ["quadratic_mlbfgs.json", "ablation.json", "mlp_blobs.json"] {
        mlbfgs_harness::RunConfig::load(configs().join(name)).unwrap();
    }
}
