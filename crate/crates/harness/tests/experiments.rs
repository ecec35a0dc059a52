use mlbfgs_harness::config::{AblationSpec, RunConfig};
use mlbfgs_harness::presets::{ablation_default_config, ablation_run};
use mlbfgs_harness::execute;

fn mlp(workers: usize) -> RunConfig {
    let mut cfg = RunConfig::load(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/mlp_blobs.json")).unwrap();
    cfg.iterations = 120;
    cfg.workers = workers;
    cfg
}

#[test]
fn mlp_run_independent_of_worker_count() {
    let a = execute(&mlp(1)).unwrap();
    let b = execute(&mlp(2)).unwrap();
    assert!(a.theta.bit_eq(&b.theta));
    assert_eq!(a.rows, b.rows);
    assert!(a.final_loss() < a.rows[0].loss);
}

#[test]
fn every_optimizer_runs() {
    for opt in [
        r#"{"kind": "sgd", "momentum": 0.9}"#,
        r#"{"kind": "adam"}"#,
        r#"{"kind": "lbfgs", "history": 5}"#,
        r#"{"kind": "newton"}"#,
        r#"{"kind": "mlbfgs", "update_period": 5}"#,
    ] {
        let cfg = RunConfig::from_json(&format!(
            r#"{{"schema_version": 1,
                "objective": {{"kind": "quadratic", "matrix": [[2.0, 0.5], [0.5, 1.0]], "linear": [1.0, -1.0]}},
                "optimizer": {opt},
                "schedule": {{"kind": "constant", "lr": 0.1}},
                "iterations": 100}}"#
        ))
        .unwrap();
        let out = execute(&cfg).unwrap();
        assert!(!out.diverged, "{opt}");
        assert!(out.final_loss() < out.rows[0].loss, "{opt}");
    }
}

#[test]
fn logistic_run_improves() {
    let cfg = RunConfig::from_json(
        r#"{"schema_version": 1,
            "objective": {"kind": "logistic", "wd": 1e-3,
                "data": {"source": "blobs", "n": 400, "m": 3, "classes": 2, "separation": 3.0}},
            "optimizer": {"kind": "mlbfgs", "update_period": 10, "beta": 0.99},
            "schedule": {"kind": "cosine", "lr": 0.1},
            "batch_size": 64,
            "iterations": 200}"#,
    )
    .unwrap();
    let out = execute(&cfg).unwrap();
    assert!(out.final_loss() < 0.5 * out.rows[0].loss);
}

#[test]
fn single_block_beats_four_blocks() {
    let mut base = ablation_default_config();
    base.ablation = Some(AblationSpec {
        seeds: 4,
        compare_iter: None,
        tail: None,
        block_counts: vec![1, 4],
    });
    let r = ablation_run(&base, None).unwrap();
    assert!(r.blocks[0].mean_final_loss <= r.blocks[1].mean_final_loss);
}
