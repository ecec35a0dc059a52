//! JSON run configuration.

use std::path::Path;

use mlbfgs_core::dist::CostModelInputs;
use mlbfgs_core::objectives::{
    load_csv, synth_blobs, Activation, Dataset, LogisticObjective, MlpObjective, MlpSpec, Objective, QuadraticObjective,
};
use mlbfgs_core::optim::{MlbfgsConfig, PairFilter, Schedule};
use mlbfgs_core::qn::DampingConfig;
use mlbfgs_core::{build_balanced_layout, build_block_layout, equal_block_sizes, BlockLayout, DenseMatrix, RngStream, Vector};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Stream ids reserved next to the per-chunk gradient streams.
pub(crate) const INIT_STREAM: u64 = 1 << 32;
pub(crate) const DATA_STREAM: u64 = (1 << 32) + 1;

fn one() -> usize {
    1
}
fn four() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub objective: ObjectiveSpec,
    pub optimizer: OptimizerSpec,
    pub schedule: ScheduleSpec,
    #[serde(default = "one")]
    pub workers: usize,
    #[serde(default)]
    pub blocks: BlockSpec,
    #[serde(default)]
    pub assignment: Assignment,
    /// Total minibatch size; `null` means full batch.
    #[serde(default)]
    pub batch_size: Option<usize>,
    /// Fixed number of gradient chunks; every worker count dividing the run must be <= this.
    #[serde(default = "four")]
    pub grad_chunks: usize,
    pub iterations: usize,
    #[serde(default = "one")]
    pub eval_every: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<String>,
    /// Write wall-clock milliseconds; off by default so outputs are byte-reproducible.
    #[serde(default)]
    pub record_timing: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ablation: Option<AblationSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObjectiveSpec {
    Quadratic {
        #[serde(default)]
        diag: Option<Vec<f64>>,
        #[serde(default)]
        matrix: Option<Vec<Vec<f64>>>,
        #[serde(default)]
        linear: Option<Vec<f64>>,
        #[serde(default)]
        noise_sigma: f64,
        #[serde(default)]
        theta0: Option<Vec<f64>>,
    },
    Logistic {
        data: DataSpec,
        #[serde(default)]
        wd: f64,
    },
    Mlp {
        data: DataSpec,
        hidden: Vec<usize>,
        #[serde(default)]
        activation: ActivationSpec,
        #[serde(default)]
        wd: f64,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationSpec {
    #[default]
    Tanh,
    Relu,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSpec {
    Blobs {
        n: usize,
        m: usize,
        classes: usize,
        separation: f64,
        /// Dataset seed; defaults to the run seed.
        #[serde(default)]
        seed: Option<u64>,
    },
    Csv {
        path: String,
    },
}

fn default_momentum() -> f64 {
    0.9
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_adam_eps() -> f64 {
    1e-8
}
fn default_history() -> usize {
    10
}
fn default_period() -> usize {
    50
}
fn default_beta() -> f64 {
    0.999
}
fn default_damping() -> Option<DampingSpec> {
    Some(DampingSpec::default())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OptimizerSpec {
    Sgd {
        #[serde(default)]
        momentum: f64,
    },
    Adam {
        #[serde(default = "default_beta1")]
        beta1: f64,
        #[serde(default = "default_beta2")]
        beta2: f64,
        #[serde(default = "default_adam_eps")]
        eps: f64,
    },
    Lbfgs {
        #[serde(default = "default_history")]
        history: usize,
    },
    Newton {},
    Mlbfgs {
        #[serde(default = "default_period")]
        update_period: usize,
        #[serde(default = "default_history")]
        history: usize,
        #[serde(default = "default_beta")]
        beta: f64,
        /// `null` disables damping.
        #[serde(default = "default_damping")]
        damping: Option<DampingSpec>,
        #[serde(default = "default_momentum")]
        momentum: f64,
        #[serde(default)]
        filter: Option<FilterSpec>,
    },
}

impl OptimizerSpec {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Sgd { .. } => "sgd",
            Self::Adam { .. } => "adam",
            Self::Lbfgs { .. } => "lbfgs",
            Self::Newton {} => "newton",
            Self::Mlbfgs { .. } => "mlbfgs",
        }
    }

    /// Default mL-BFGS hyperparameters.
    pub fn mlbfgs_default() -> Self {
        Self::Mlbfgs {
            update_period: default_period(),
            history: default_history(),
            beta: default_beta(),
            damping: default_damping(),
            momentum: default_momentum(),
            filter: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DampingSpec {
    pub sigma_lo: f64,
    pub sigma_hi: f64,
    pub tau0: f64,
}

impl Default for DampingSpec {
    fn default() -> Self {
        let d = DampingConfig::default();
        Self {
            sigma_lo: d.sigma_lo,
            sigma_hi: d.sigma_hi,
            tau0: d.tau0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSpec {
    pub alpha: f64,
    pub eps: f64,
}

fn default_min_lr() -> f64 {
    1e-4
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleSpec {
    Constant {
        lr: f64,
    },
    Cosine {
        lr: f64,
        #[serde(default = "default_min_lr")]
        min_lr: f64,
        /// Defaults to the iteration budget.
        #[serde(default)]
        horizon: Option<usize>,
    },
    Step {
        lr: f64,
        factor: f64,
        interval: usize,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BlockSpec {
    #[default]
    Single,
    Equal {
        count: usize,
    },
    Sizes {
        sizes: Vec<usize>,
    },
    /// One block per network layer (MLP only).
    Layers,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Assignment {
    #[default]
    RoundRobin,
    Balanced,
}

fn default_ablation_seeds() -> u64 {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblationSpec {
    #[serde(default = "default_ablation_seeds")]
    pub seeds: u64,
    /// Iteration at which variant losses are compared.
    #[serde(default)]
    pub compare_iter: Option<usize>,
    /// Trailing window for the loss-variance statistic.
    #[serde(default)]
    pub tail: Option<usize>,
    /// Optional sweep over equal-block counts.
    #[serde(default)]
    pub block_counts: Vec<usize>,
}

/// An objective instantiated from a spec.
pub enum BuiltObjective {
    Quadratic(QuadraticObjective<f64>, Vector),
    Logistic(LogisticObjective<f64>),
    Mlp(MlpObjective<f64>),
}

impl BuiltObjective {
    pub fn as_dyn(&self) -> &dyn Objective<f64> {
        match self {
            Self::Quadratic(q, _) => q,
            Self::Logistic(l) => l,
            Self::Mlp(m) => m,
        }
    }

    /// Examples per epoch (`None` for the data-free quadratic).
    pub fn examples(&self) -> Option<usize> {
        match self {
            Self::Quadratic(..) => None,
            Self::Logistic(l) => Some(l.data().len()),
            Self::Mlp(m) => Some(m.data().len()),
        }
    }

    pub fn initial_point(&self, root: &RngStream) -> Vector {
        match self {
            Self::Quadratic(_, theta0) => theta0.clone(),
            Self::Logistic(l) => Vector::zeros(l.dim()),
            Self::Mlp(m) => m.spec().init(&mut root.split(INIT_STREAM)),
        }
    }

    pub fn layer_sizes(&self) -> Option<Vec<usize>> {
        match self {
            Self::Mlp(m) => Some(m.spec().layer_sizes()),
            _ => None,
        }
    }
}

fn check(cond: bool, field: &str, reason: impl Into<String>) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(HarnessError::config(field, reason))
    }
}

fn core_to_config(prefix: &str, e: mlbfgs_core::Error) -> HarnessError {
    match e {
        mlbfgs_core::Error::InvalidArgument { name, reason } => {
            let name = match name {
                "T" => "update_period",
                "sigma_lo" | "sigma_hi" | "tau0" => return HarnessError::config(format!("{prefix}.damping.{name}"), reason),
                "alpha" | "eps" if prefix == "optimizer" => {
                    return HarnessError::config(format!("{prefix}.filter.{name}"), reason)
                }
                "M" => "history",
                other => other,
            };
            HarnessError::config(format!("{prefix}.{name}"), reason)
        }
        other => HarnessError::config(prefix, other.to_string()),
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        check(
            self.schema_version == SCHEMA_VERSION,
            "schema_version",
            format!("unsupported version {} (expected {SCHEMA_VERSION})", self.schema_version),
        )?;
        check(self.workers >= 1, "workers", "must be >= 1")?;
        check(self.grad_chunks >= 1, "grad_chunks", "must be >= 1")?;
        check(
            self.grad_chunks >= self.workers,
            "grad_chunks",
            format!("must be >= workers ({})", self.workers),
        )?;
        check(self.eval_every >= 1, "eval_every", "must be >= 1")?;
        if let Some(b) = self.batch_size {
            check(b >= self.grad_chunks, "batch_size", format!("must be >= grad_chunks ({})", self.grad_chunks))?;
        }
        if self.workers > 1 {
            check(
                matches!(self.optimizer, OptimizerSpec::Mlbfgs { .. }),
                "workers",
                "multiple workers are only simulated for the mlbfgs optimizer",
            )?;
        }
        self.schedule().validate().map_err(|e| core_to_config("schedule", e))?;
        match &self.optimizer {
            OptimizerSpec::Sgd { momentum } => check(
                (0.0..1.0).contains(momentum),
                "optimizer.momentum",
                "must lie in [0, 1)",
            )?,
            OptimizerSpec::Adam { beta1, beta2, eps } => {
                check((0.0..1.0).contains(beta1), "optimizer.beta1", "must lie in [0, 1)")?;
                check((0.0..1.0).contains(beta2), "optimizer.beta2", "must lie in [0, 1)")?;
                check(*eps > 0.0, "optimizer.eps", "must be > 0")?;
            }
            OptimizerSpec::Lbfgs { history } => check(*history >= 1, "optimizer.history", "must be >= 1")?,
            OptimizerSpec::Newton {} => check(
                matches!(self.objective, ObjectiveSpec::Quadratic { .. }),
                "optimizer.kind",
                "newton requires a quadratic objective",
            )?,
            OptimizerSpec::Mlbfgs { .. } => {
                self.mlbfgs_config()?
                    .validate()
                    .map_err(|e| core_to_config("optimizer", e))?;
            }
        }
        match &self.objective {
            ObjectiveSpec::Quadratic {
                diag,
                matrix,
                noise_sigma,
                ..
            } => {
                check(
                    diag.is_some() != matrix.is_some(),
                    "objective.diag",
                    "exactly one of `diag` or `matrix` is required",
                )?;
                check(*noise_sigma >= 0.0, "objective.noise_sigma", "must be >= 0")?;
            }
            ObjectiveSpec::Logistic { data, wd } | ObjectiveSpec::Mlp { data, wd, .. } => {
                check(*wd >= 0.0, "objective.wd", "must be >= 0")?;
                if let DataSpec::Blobs { n, classes, .. } = data {
                    check(*classes >= 2 && n >= classes, "objective.data.n", "need n >= classes >= 2")?;
                }
            }
        }
        if let ObjectiveSpec::Mlp { hidden, .. } = &self.objective {
            check(hidden.iter().all(|&h| h > 0), "objective.hidden", "widths must be positive")?;
        }
        if matches!(self.blocks, BlockSpec::Layers) {
            check(
                matches!(self.objective, ObjectiveSpec::Mlp { .. }),
                "blocks.kind",
                "`layers` blocks need an mlp objective",
            )?;
        }
        if let Some(a) = &self.ablation {
            check(a.seeds >= 1, "ablation.seeds", "must be >= 1")?;
            check(a.block_counts.iter().all(|&c| c >= 1), "ablation.block_counts", "must be >= 1")?;
        }
        Ok(())
    }

    pub fn schedule(&self) -> Schedule {
        match self.schedule {
            ScheduleSpec::Constant { lr } => Schedule::constant(lr),
            ScheduleSpec::Cosine { lr, min_lr, horizon } => {
                Schedule::cosine(lr, min_lr, horizon.unwrap_or(self.iterations.max(1)))
            }
            ScheduleSpec::Step { lr, factor, interval } => Schedule::Step { lr, factor, interval },
        }
    }

    pub fn mlbfgs_config(&self) -> Result<MlbfgsConfig> {
        let OptimizerSpec::Mlbfgs {
            update_period,
            history,
            beta,
            damping,
            momentum,
            filter,
        } = &self.optimizer
        else {
            return Err(HarnessError::config("optimizer.kind", "expected mlbfgs"));
        };
        Ok(MlbfgsConfig {
            update_period: *update_period,
            history: *history,
            beta: *beta,
            damping: damping.map(|d| DampingConfig {
                sigma_lo: d.sigma_lo,
                sigma_hi: d.sigma_hi,
                tau0: d.tau0,
            }),
            schedule: self.schedule(),
            momentum: *momentum,
            filter: filter.map(|f| PairFilter {
                alpha: f.alpha,
                eps: f.eps,
            }),
            record_pairs: false,
        })
    }

    fn build_data(&self, spec: &DataSpec) -> Result<Dataset<f64>> {
        Ok(match spec {
            DataSpec::Blobs {
                n,
                m,
                classes,
                separation,
                seed,
            } => {
                let mut rng = RngStream::new(seed.unwrap_or(self.seed)).split(DATA_STREAM);
                synth_blobs(&mut rng, *n, *m, *classes, *separation).map_err(|e| core_to_config("objective.data", e))?
            }
            DataSpec::Csv { path } => load_csv(path)?,
        })
    }

    pub fn build_objective(&self) -> Result<BuiltObjective> {
        match &self.objective {
            ObjectiveSpec::Quadratic {
                diag,
                matrix,
                linear,
                noise_sigma,
                theta0,
            } => {
                let b = match (diag, matrix) {
                    (Some(d), None) => DenseMatrix::diag(d),
                    (None, Some(m)) => DenseMatrix::from_rows(m).map_err(|e| core_to_config("objective.matrix", e))?,
                    _ => return Err(HarnessError::config("objective.diag", "exactly one of `diag` or `matrix` is required")),
                };
                let d = b.rows();
                let c = linear
                    .as_ref()
                    .map(|c| Vector::from_f64(c))
                    .transpose()
                    .map_err(|e| core_to_config("objective.linear", e))?;
                let q = QuadraticObjective::new(b, c, *noise_sigma).map_err(|e| core_to_config("objective", e))?;
                let theta0 = match theta0 {
                    Some(t) => {
                        check(t.len() == d, "objective.theta0", format!("expected {d} entries, got {}", t.len()))?;
                        Vector::from_f64(t).map_err(|e| core_to_config("objective.theta0", e))?
                    }
                    None => Vector::filled(d, 1.0),
                };
                Ok(BuiltObjective::Quadratic(q, theta0))
            }
            ObjectiveSpec::Logistic { data, wd } => {
                let data = self.build_data(data)?;
                Ok(BuiltObjective::Logistic(
                    LogisticObjective::new(data, *wd).map_err(|e| core_to_config("objective", e))?,
                ))
            }
            ObjectiveSpec::Mlp {
                data,
                hidden,
                activation,
                wd,
            } => {
                let data = self.build_data(data)?;
                let mut widths = vec![data.feature_dim()];
                widths.extend(hidden);
                widths.push(data.classes());
                let act = match activation {
                    ActivationSpec::Tanh => Activation::Tanh,
                    ActivationSpec::Relu => Activation::Relu,
                };
                let spec = MlpSpec::new(widths, act, *wd).map_err(|e| core_to_config("objective", e))?;
                Ok(BuiltObjective::Mlp(
                    MlpObjective::new(spec, data).map_err(|e| core_to_config("objective", e))?,
                ))
            }
        }
    }

    pub fn build_layout(&self, obj: &BuiltObjective) -> Result<BlockLayout> {
        let d = obj.as_dyn().dim();
        let sizes = match &self.blocks {
            BlockSpec::Single => vec![d],
            BlockSpec::Equal { count } => equal_block_sizes(d, *count).map_err(|e| core_to_config("blocks.count", e))?,
            BlockSpec::Sizes { sizes } => sizes.clone(),
            BlockSpec::Layers => obj
                .layer_sizes()
                .ok_or_else(|| HarnessError::config("blocks.kind", "`layers` blocks need an mlp objective"))?,
        };
        let layout = match self.assignment {
            Assignment::RoundRobin => build_block_layout(&sizes, self.workers, d),
            Assignment::Balanced => build_balanced_layout(&sizes, self.workers, d),
        };
        layout.map_err(|e| core_to_config("blocks", e))
    }
}

impl Default for AblationSpec {
    fn default() -> Self {
        Self {
            seeds: default_ablation_seeds(),
            compare_iter: None,
            tail: None,
            block_counts: Vec::new(),
        }
    }
}

/// JSON form of the cost-model inputs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostInputsSpec {
    #[serde(default)]
    pub d: Option<f64>,
    #[serde(default)]
    pub b: Option<f64>,
    #[serde(default)]
    pub b_h: Option<f64>,
    #[serde(default)]
    pub p: Option<f64>,
    #[serde(default, rename = "T")]
    pub t: Option<f64>,
    #[serde(default, rename = "M")]
    pub m: Option<f64>,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub layers: Option<Vec<LayerSpec>>,
    #[serde(default)]
    pub c_fb: Option<f64>,
    #[serde(default)]
    pub m_fb: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSpec {
    pub d: f64,
    pub l: f64,
}

impl CostInputsSpec {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn to_inputs(&self) -> CostModelInputs {
        CostModelInputs {
            d: self.d,
            b: self.b,
            b_h: self.b_h,
            p: self.p,
            t: self.t,
            m: self.m,
            gamma: self.gamma,
            layers: self.layers.as_ref().map(|ls| {
                ls.iter()
                    .map(|l| mlbfgs_core::dist::LayerDims { d: l.d, l: l.l })
                    .collect()
            }),
            c_fb: self.c_fb,
            m_fb: self.m_fb,
        }
    }
}
