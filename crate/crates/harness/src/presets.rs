//! Canned experiments: the two-dimensional trajectory comparison and the
//! momentum/damping ablation.

use std::collections::BTreeMap;
use std::path::Path;

use mlbfgs_core::objectives::{ChunkedGradient, Objective, QuadraticObjective};
use mlbfgs_core::optim::{Mlbfgs, MlbfgsConfig, Newton, Optimizer, Schedule, Sgd, VanillaLbfgs};
use mlbfgs_core::qn::DampingConfig;
use mlbfgs_core::{RngStream, Vector};
use serde::Serialize;

use crate::config::{BlockSpec, DampingSpec, ObjectiveSpec, OptimizerSpec, RunConfig, ScheduleSpec, SCHEMA_VERSION};
use crate::error::{HarnessError, Result};
use crate::runner::execute;

pub const FIG1_METHODS: [&str; 4] = ["sgd", "lbfgs", "mlbfgs", "newton"];
pub const FIG1_THETA0: [f64; 2] = [-2.5, 2.0];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub method: &'static str,
    pub seed: u64,
    pub iter: usize,
    pub theta0: f64,
    pub theta1: f64,
    pub loss: f64,
}

#[derive(Debug, Clone)]
pub struct Fig1Result {
    pub rows: Vec<TrajectoryRow>,
    /// Seed-averaged loss at the last iteration, per method.
    pub final_mean: BTreeMap<&'static str, f64>,
}

/// mL-BFGS settings used on the two-dimensional problem.
pub fn fig1_mlbfgs_config(beta: f64, schedule: Schedule) -> MlbfgsConfig {
    MlbfgsConfig {
        update_period: 2,
        history: 1,
        beta,
        damping: Some(DampingConfig {
            sigma_lo: 0.5,
            sigma_hi: 1.5,
            tau0: 0.99,
        }),
        schedule,
        momentum: 0.0,
        filter: None,
        record_pairs: false,
    }
}

fn fig1_optimizer(method: &str, beta: f64, schedule: Schedule, obj: &QuadraticObjective<f64>) -> Result<Box<dyn Optimizer<f64>>> {
    Ok(match method {
        "sgd" => Box::new(Sgd::new(schedule, 0.0)?),
        "lbfgs" => Box::new(VanillaLbfgs::new(schedule, 1)?),
        "mlbfgs" => Box::new(Mlbfgs::single_block(fig1_mlbfgs_config(beta, schedule), 2)?),
        "newton" => Box::new(Newton::for_objective(obj)?),
        other => return Err(HarnessError::config("method", format!("unknown method `{other}`"))),
    })
}

/// Runs SGD, vanilla L-BFGS, mL-BFGS and exact Newton on `½‖θ‖²` in two dimensions with
/// per-coordinate gradient noise `sigma`. All methods share each seed's noise sequence.
pub fn fig1_trajectories(sigma: f64, beta: f64, iters: usize, seeds: u64, out: Option<&Path>) -> Result<Fig1Result> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(HarnessError::config("sigma", "must be finite and >= 0"));
    }
    if !(0.0..1.0).contains(&beta) {
        return Err(HarnessError::config("beta", "must lie in [0, 1)"));
    }
    let obj = QuadraticObjective::isotropic(2, sigma)?;
    let schedule = Schedule::cosine(1.0, 1e-4, iters.max(1));
    let theta0 = Vector::from_f64(&FIG1_THETA0)?;
    let mut rows = Vec::with_capacity(4 * seeds as usize * (iters + 1));
    let mut final_mean = BTreeMap::new();
    for method in FIG1_METHODS {
        let mut total = 0.0;
        for seed in 0..seeds {
            let mut opt = fig1_optimizer(method, beta, schedule, &obj)?;
            let mut grads = ChunkedGradient::new(&RngStream::new(seed), 1, None)?;
            let mut theta = theta0.clone();
            let mut loss = obj.loss(&theta)?;
            rows.push(TrajectoryRow {
                method,
                seed,
                iter: 0,
                theta0: theta[0],
                theta1: theta[1],
                loss,
            });
            for t in 1..=iters {
                let (_, g) = grads.evaluate(&obj, &theta)?;
                theta = opt.step(t, &theta, &g)?;
                loss = obj.loss(&theta)?;
                rows.push(TrajectoryRow {
                    method,
                    seed,
                    iter: t,
                    theta0: theta[0],
                    theta1: theta[1],
                    loss,
                });
            }
            total += loss;
        }
        final_mean.insert(method, total / seeds.max(1) as f64);
    }
    if let Some(path) = out {
        write_rows(path, &rows)?;
    }
    Ok(Fig1Result { rows, final_mean })
}

fn write_rows<S: Serialize>(path: &Path, rows: &[S]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub const ABLATION_VARIANTS: [&str; 4] = ["both", "momentum_only", "damping_only", "neither"];

/// The noisy quadratic used for the ablation: `B = diag(0.1, 0.2, …, 1.0)`,
/// `θ₀ = 2·1`, per-coordinate noise 0.2.
pub fn ablation_default_config() -> RunConfig {
    let diag: Vec<f64> = (0..10).map(|i| 0.1 + 0.1 * i as f64).collect();
    RunConfig {
        schema_version: SCHEMA_VERSION,
        objective: ObjectiveSpec::Quadratic {
            diag: Some(diag),
            matrix: None,
            linear: None,
            noise_sigma: 0.2,
            theta0: Some(vec![2.0; 10]),
        },
        optimizer: OptimizerSpec::Mlbfgs {
            update_period: 10,
            history: 10,
            beta: 0.99,
            damping: Some(DampingSpec::default()),
            momentum: 0.0,
            filter: None,
        },
        schedule: ScheduleSpec::Constant { lr: 0.05 },
        workers: 1,
        blocks: BlockSpec::Single,
        assignment: Default::default(),
        batch_size: None,
        grad_chunks: 1,
        iterations: 300,
        eval_every: 1,
        seed: 0,
        output_dir: None,
        record_timing: false,
        ablation: None,
    }
}

/// Base config with momentum and/or damping switched off.
pub fn ablation_variant(base: &RunConfig, variant: &str) -> Result<RunConfig> {
    let mut cfg = base.clone();
    let OptimizerSpec::Mlbfgs { beta, damping, .. } = &mut cfg.optimizer else {
        return Err(HarnessError::config("optimizer.kind", "ablation needs an mlbfgs base config"));
    };
    let (keep_momentum, keep_damping) = match variant {
        "both" => (true, true),
        "momentum_only" => (true, false),
        "damping_only" => (false, true),
        "neither" => (false, false),
        other => return Err(HarnessError::config("variant", format!("unknown variant `{other}`"))),
    };
    if !keep_momentum {
        *beta = 0.0;
    }
    if !keep_damping {
        *damping = None;
    } else if damping.is_none() {
        *damping = Some(DampingSpec::default());
    }
    Ok(cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationRow {
    pub variant: String,
    pub seed: u64,
    pub iter: usize,
    pub split: &'static str,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariantSummary {
    pub variant: String,
    pub compare_iter: usize,
    /// Seed-averaged loss at `compare_iter`; infinite if any seed diverged first.
    pub mean_loss: f64,
    /// Seed-averaged variance of the loss over the trailing window.
    pub tail_variance: f64,
    pub diverged_seeds: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockSweepRow {
    pub blocks: usize,
    pub mean_final_loss: f64,
    pub diverged_seeds: u64,
}

#[derive(Debug, Clone)]
pub struct AblationResult {
    pub rows: Vec<AblationRow>,
    pub summaries: Vec<VariantSummary>,
    pub blocks: Vec<BlockSweepRow>,
}

impl AblationResult {
    pub fn summary(&self, variant: &str) -> Option<&VariantSummary> {
        self.summaries.iter().find(|s| s.variant == variant)
    }
}

fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

/// Runs the four variants over `ablation.seeds` seeds (`seed, seed+1, …`), then the
/// optional block-count sweep on the full variant. Writes `ablation.csv`,
/// `ablation_summary.csv` and, with a sweep, `ablation_blocks.csv` when `out_dir` is given.
pub fn ablation_run(base: &RunConfig, out_dir: Option<&Path>) -> Result<AblationResult> {
    base.validate()?;
    let spec = base.ablation.clone().unwrap_or_default();
    let compare_iter = spec.compare_iter.unwrap_or(200).min(base.iterations);
    let tail = spec.tail.unwrap_or(100).min(base.iterations + 1);
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for variant in ABLATION_VARIANTS {
        let cfg = ablation_variant(base, variant)?;
        let mut loss_sum = 0.0;
        let mut var_sum = 0.0;
        let mut diverged = 0;
        for k in 0..spec.seeds {
            let mut run = cfg.clone();
            run.seed = base.seed.wrapping_add(k);
            let out = execute(&run)?;
            for r in &out.rows {
                rows.push(AblationRow {
                    variant: variant.to_string(),
                    seed: run.seed,
                    iter: r.iter,
                    split: r.split,
                    loss: r.loss,
                });
            }
            if out.diverged {
                diverged += 1;
                loss_sum += out.loss_at(compare_iter);
                var_sum = f64::INFINITY;
            } else {
                loss_sum += out.loss_at(compare_iter);
                let losses: Vec<f64> = out.rows.iter().map(|r| r.loss).collect();
                var_sum += variance(&losses[losses.len() - tail.min(losses.len())..]);
            }
        }
        let n = spec.seeds as f64;
        summaries.push(VariantSummary {
            variant: variant.to_string(),
            compare_iter,
            mean_loss: loss_sum / n,
            tail_variance: var_sum / n,
            diverged_seeds: diverged,
        });
    }
    let mut blocks = Vec::new();
    for &count in &spec.block_counts {
        let mut cfg = ablation_variant(base, "both")?;
        cfg.blocks = if count == 1 {
            BlockSpec::Single
        } else {
            BlockSpec::Equal { count }
        };
        let mut total = 0.0;
        let mut diverged = 0;
        for k in 0..spec.seeds {
            let mut run = cfg.clone();
            run.seed = base.seed.wrapping_add(k);
            let out = execute(&run)?;
            if out.diverged {
                diverged += 1;
                total = f64::INFINITY;
            } else {
                total += out.final_loss();
            }
        }
        blocks.push(BlockSweepRow {
            blocks: count,
            mean_final_loss: total / spec.seeds as f64,
            diverged_seeds: diverged,
        });
    }
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        write_rows(&dir.join("ablation.csv"), &rows)?;
        write_rows(&dir.join("ablation_summary.csv"), &summaries)?;
        if !blocks.is_empty() {
            write_rows(&dir.join("ablation_blocks.csv"), &blocks)?;
        }
    }
    Ok(AblationResult {
        rows,
        summaries,
        blocks,
    })
}
