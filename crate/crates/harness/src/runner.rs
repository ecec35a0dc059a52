//! Executes a [`RunConfig`] and records metrics.

use std::path::{Path, PathBuf};
use std::time::Instant;

use mlbfgs_core::dist::{measured_costs, Cluster, MeasuredNode};
use mlbfgs_core::objectives::{ChunkedGradient, Objective};
use mlbfgs_core::optim::{Adam, Newton, Optimizer, Sgd, VanillaLbfgs};
use mlbfgs_core::{RngStream, Vector};

use crate::config::{BuiltObjective, OptimizerSpec, RunConfig};
use crate::error::Result;
use crate::metrics::{is_divergent, write_metrics_file, MetricsRow, SPLIT_DIVERGED, SPLIT_TRAIN};

pub const METRICS_FILE: &str = "metrics.csv";

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub rows: Vec<MetricsRow>,
    pub theta: Vector,
    pub diverged: bool,
    /// Per-node counters (mL-BFGS runs only).
    pub nodes: Option<Vec<MeasuredNode>>,
}

impl RunOutcome {
    pub fn final_loss(&self) -> f64 {
        self.rows.last().map_or(f64::NAN, |r| r.loss)
    }

    /// Loss recorded at iteration `t`; `INFINITY` if the run diverged before reaching it.
    pub fn loss_at(&self, t: usize) -> f64 {
        match self.rows.iter().find(|r| r.iter >= t) {
            Some(r) if r.iter == t && !r.is_diverged() => r.loss,
            Some(r) if r.is_diverged() => f64::INFINITY,
            None if self.diverged => f64::INFINITY,
            _ => f64::NAN,
        }
    }
}

/// Steps either a simulated cluster or a plain optimizer with a monolithic gradient.
enum Stepper {
    Cluster(Cluster<f64>),
    Plain {
        opt: Box<dyn Optimizer<f64>>,
        grads: ChunkedGradient,
        theta: Vector,
    },
}

impl Stepper {
    fn theta(&self) -> &Vector {
        match self {
            Self::Cluster(c) => c.theta(),
            Self::Plain { theta, .. } => theta,
        }
    }

    /// One iteration; returns the minibatch loss at the pre-step parameters.
    fn step(&mut self, t: usize, obj: &dyn Objective<f64>) -> mlbfgs_core::Result<f64> {
        match self {
            Self::Cluster(c) => c.step(obj).map(|(loss, _)| loss),
            Self::Plain { opt, grads, theta } => {
                let (loss, g) = grads.evaluate(obj, theta)?;
                *theta = opt.step(t, theta, &g)?;
                Ok(loss)
            }
        }
    }
}

fn build_stepper(cfg: &RunConfig, obj: &BuiltObjective, theta0: &Vector, root: &RngStream) -> Result<Stepper> {
    let schedule = cfg.schedule();
    let plain = |opt: Box<dyn Optimizer<f64>>| -> Result<Stepper> {
        Ok(Stepper::Plain {
            opt,
            grads: ChunkedGradient::new(root, cfg.grad_chunks, cfg.batch_size)?,
            theta: theta0.clone(),
        })
    };
    match &cfg.optimizer {
        OptimizerSpec::Sgd { momentum } => plain(Box::new(Sgd::new(schedule, *momentum)?)),
        OptimizerSpec::Adam { beta1, beta2, eps } => plain(Box::new(Adam::new(schedule, *beta1, *beta2, *eps)?)),
        OptimizerSpec::Lbfgs { history } => plain(Box::new(VanillaLbfgs::new(schedule, *history)?)),
        OptimizerSpec::Newton {} => plain(Box::new(Newton::for_objective(obj.as_dyn())?)),
        OptimizerSpec::Mlbfgs { .. } => {
            let layout = cfg.build_layout(obj)?;
            Ok(Stepper::Cluster(Cluster::new(
                layout,
                cfg.mlbfgs_config()?,
                theta0,
                root,
                cfg.grad_chunks,
                cfg.batch_size,
            )?))
        }
    }
}

fn stepper_lr(stepper: &Stepper, cfg: &RunConfig, t: usize) -> f64 {
    match stepper {
        Stepper::Plain { opt, .. } => opt.lr(t.max(1)),
        Stepper::Cluster(_) => cfg.schedule().lr(t.saturating_sub(1)),
    }
}

/// Runs `cfg` to its iteration budget (or to divergence) without touching the filesystem.
pub fn execute(cfg: &RunConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let obj = cfg.build_objective()?;
    let root = RngStream::new(cfg.seed);
    let theta0 = obj.initial_point(&root);
    let mut stepper = build_stepper(cfg, &obj, &theta0, &root)?;
    let examples = obj.examples();
    let per_step = match (examples, cfg.batch_size) {
        (Some(n), Some(b)) => b.min(n) as f64 / n as f64,
        _ => 1.0,
    };
    let start = Instant::now();
    let dynobj = obj.as_dyn();

    let row = |t: usize, stepper: &Stepper, split: &'static str, loss: f64, grad_norm: f64| MetricsRow {
        iter: t,
        epoch: t as f64 * per_step,
        split,
        loss,
        grad_norm,
        lr: stepper_lr(stepper, cfg, t),
        elapsed_ms: if cfg.record_timing {
            start.elapsed().as_millis() as u64
        } else {
            0
        },
    };

    let mut rows = Vec::new();
    let mut diverged = false;
    for t in 0..=cfg.iterations {
        let mut batch_loss = 0.0;
        if t > 0 {
            match stepper.step(t, dynobj) {
                Ok(l) => batch_loss = l,
                Err(mlbfgs_core::Error::NonFinite { .. }) => batch_loss = f64::NAN,
                Err(e) => return Err(e.into()),
            }
        }
        let theta = stepper.theta();
        if !theta.is_finite() {
            rows.push(row(t, &stepper, SPLIT_DIVERGED, f64::NAN, f64::NAN));
            diverged = true;
            break;
        }
        if t % cfg.eval_every == 0 || t == cfg.iterations {
            let (loss, grad) = match dynobj.full(theta) {
                Ok(v) => v,
                Err(mlbfgs_core::Error::NonFinite { .. }) => (f64::NAN, Vector::zeros(theta.dim())),
                Err(e) => return Err(e.into()),
            };
            let split = if is_divergent(loss) { SPLIT_DIVERGED } else { SPLIT_TRAIN };
            rows.push(row(t, &stepper, split, loss, grad.norm()));
            if split == SPLIT_DIVERGED {
                diverged = true;
                break;
            }
        } else if is_divergent(batch_loss) {
            // between evaluations the minibatch loss of the step is the divergence signal
            rows.push(row(t, &stepper, SPLIT_DIVERGED, batch_loss, f64::NAN));
            diverged = true;
            break;
        }
    }
    let nodes = match &stepper {
        Stepper::Cluster(c) => Some(measured_costs(c.workers())),
        Stepper::Plain { .. } => None,
    };
    Ok(RunOutcome {
        rows,
        theta: stepper.theta().clone(),
        diverged,
        nodes,
    })
}

/// Runs `cfg` and writes `metrics.csv` into `out_dir`; returns the file path.
pub fn run_experiment(cfg: &RunConfig, out_dir: impl AsRef<Path>) -> Result<(PathBuf, RunOutcome)> {
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir)?;
    let outcome = execute(cfg)?;
    let path = out_dir.join(METRICS_FILE);
    write_metrics_file(&path, &outcome.rows)?;
    Ok((path, outcome))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RunConfig;

    fn quad(opt: &str, iters: usize, lr: f64) -> RunConfig {
        RunConfig::from_json(&format!(
            r#"{{
            "schema_version": 1,
            "objective": {{"kind": "quadratic", "diag": [1.0, 1.0, 1.0], "theta0": [1.0, -2.0, 0.5]}},
            "optimizer": {opt},
            "schedule": {{"kind": "constant", "lr": {lr}}},
            "iterations": {iters}
        }}"#
        ))
        .unwrap()
    }

    #[test]
    fn sgd_halving_recursion() {
        let out = execute(&quad(r#"{"kind": "sgd"}"#, 10, 0.5)).unwrap();
        let l0 = out.rows[0].loss;
        assert_eq!(l0, 0.5 * (1.0 + 4.0 + 0.25));
        for r in &out.rows {
            let expected = 0.25f64.powi(r.iter as i32) * l0;
            assert!((r.loss - expected).abs() <= 1e-15 * l0, "{} {} {}", r.iter, r.loss, expected);
        }
    }

    #[test]
    fn zero_budget_gives_initial_row() {
        let out = execute(&quad(r#"{"kind": "mlbfgs"}"#, 0, 0.1)).unwrap();
        assert_eq!(out.rows.len(), 1);
        assert_eq!(out.rows[0].iter, 0);
        assert_eq!(out.rows[0].split, SPLIT_TRAIN);
    }

    #[test]
    fn divergence_flags_final_row() {
        let out = execute(&quad(r#"{"kind": "sgd"}"#, 200, 5.0)).unwrap();
        assert!(out.diverged);
        let last = out.rows.last().unwrap();
        assert!(last.is_diverged());
        assert!(out.rows[..out.rows.len() - 1].iter().all(|r| r.loss.is_finite()));
        assert!(last.iter < 200);
    }

    #[test]
    fn eval_every_keeps_last() {
        let mut cfg = quad(r#"{"kind": "sgd"}"#, 7, 0.1);
        cfg.eval_every = 3;
        let out = execute(&cfg).unwrap();
        let iters: Vec<_> = out.rows.iter().map(|r| r.iter).collect();
        assert_eq!(iters, vec![0, 3, 6, 7]);
    }

    #[test]
    fn newton_one_step() {
        let out = execute(&quad(r#"{"kind": "newton"}"#, 1, 0.1)).unwrap();
        assert_eq!(out.rows[1].loss, 0.0);
    }
}
