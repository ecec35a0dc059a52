use crate::error::{check_dim, invalid, Result};
use crate::layout::BlockLayout;
use crate::qn::{damp_pair, pair_filter, DampingConfig, EmaState, HistoryBuffer};
use crate::scalar::Scalar;
use crate::vector::FlatVector;

use super::{sgd_step, Optimizer, Schedule};

/// Optional curvature-pair acceptance rule `⟨s, y⟩ ≥ α·ε·‖s‖`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairFilter {
    pub alpha: f64,
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlbfgsConfig {
    /// Hessian update period T.
    pub update_period: usize,
    /// History capacity M.
    pub history: usize,
    /// Momentum coefficient of the parameter/gradient accumulators.
    pub beta: f64,
    /// `None` disables damping; pairs with non-positive curvature are then skipped.
    pub damping: Option<DampingConfig>,
    pub schedule: Schedule,
    /// Heavy-ball momentum applied to the (preconditioned) step direction.
    pub momentum: f64,
    pub filter: Option<PairFilter>,
    /// Keep every formed raw pair for inspection.
    pub record_pairs: bool,
}

impl Default for MlbfgsConfig {
    fn default() -> Self {
        Self {
            update_period: 50,
            history: 10,
            beta: 0.999,
            damping: Some(DampingConfig::default()),
            schedule: Schedule::cosine(0.1, 1e-4, 1000),
            momentum: 0.9,
            filter: None,
            record_pairs: false,
        }
    }
}

impl MlbfgsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.update_period == 0 {
            return Err(invalid("T", "update period must be >= 1"));
        }
        if self.history == 0 {
            return Err(invalid("M", "history capacity must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.beta) {
            return Err(invalid("beta", format!("must lie in [0, 1), got {}", self.beta)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(invalid("momentum", format!("must lie in [0, 1), got {}", self.momentum)));
        }
        if let Some(d) = &self.damping {
            d.validate()?;
        }
        if let Some(f) = &self.filter {
            if !(f.alpha > 2.0) {
                return Err(invalid("alpha", format!("pair filter needs alpha > 2, got {}", f.alpha)));
            }
            if !(f.eps >= 0.0) {
                return Err(invalid("eps", "must be >= 0"));
            }
        }
        self.schedule.validate()
    }

    /// Last iteration of the SGD warmup.
    pub fn warmup(&self) -> usize {
        2 * self.update_period
    }
}

/// Operation and pair counters for one block.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BlockCounters {
    /// Multiply-adds spent on the accumulators, the two-loop recursion and the step.
    pub flops_opt: u64,
    /// Multiply-adds spent forming, filtering and damping pairs.
    pub flops_hessian: u64,
    pub pairs_pushed: u64,
    pub pairs_degenerate: u64,
    pub pairs_filtered: u64,
    pub pairs_nonpositive: u64,
}

/// A formed pair before filtering and damping.
#[derive(Debug, Clone, PartialEq)]
pub struct RawPair<T: Scalar> {
    pub t: usize,
    pub s: FlatVector<T>,
    pub y: FlatVector<T>,
}

/// Optimizer state of one parameter block.
#[derive(Debug, Clone)]
pub struct MlbfgsBlock<T: Scalar> {
    dim: usize,
    ema: Option<EmaState<T>>,
    buf: HistoryBuffer<T>,
    velocity: FlatVector<T>,
    counters: BlockCounters,
    pair_log: Vec<RawPair<T>>,
}

impl<T: Scalar> MlbfgsBlock<T> {
    pub fn new(dim: usize, cfg: &MlbfgsConfig) -> Result<Self> {
        Ok(Self {
            dim,
            ema: None,
            buf: HistoryBuffer::new(cfg.history)?,
            velocity: FlatVector::zeros(dim),
            counters: BlockCounters::default(),
            pair_log: Vec::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn history(&self) -> &HistoryBuffer<T> {
        &self.buf
    }

    pub fn ema(&self) -> Option<&EmaState<T>> {
        self.ema.as_ref()
    }

    pub fn counters(&self) -> &BlockCounters {
        &self.counters
    }

    pub fn pair_log(&self) -> &[RawPair<T>] {
        &self.pair_log
    }

    /// Stored history elements of this block.
    pub fn history_elems(&self) -> usize {
        self.buf.stored_elems()
    }

    /// Preconditioned direction `Ĥ·g`, or `g` while no curvature is stored.
    pub fn direction(&self, grad: &FlatVector<T>) -> Result<FlatVector<T>> {
        if self.buf.is_empty() {
            Ok(grad.clone())
        } else {
            self.buf.two_loop_apply(grad)
        }
    }

    /// One iteration on this block: accumulator update, SGD or preconditioned step, then
    /// Hessian bookkeeping. The first call also initializes the accumulators.
    pub fn step(
        &mut self,
        t: usize,
        theta: &FlatVector<T>,
        grad: &FlatVector<T>,
        lr: f64,
        cfg: &MlbfgsConfig,
    ) -> Result<FlatVector<T>> {
        check_dim(self.dim, theta.dim())?;
        check_dim(self.dim, grad.dim())?;
        if t == 0 {
            return Err(invalid("t", "iterations start at 1"));
        }
        let d = self.dim as u64;
        let ema = match &mut self.ema {
            Some(e) => e,
            None => self.ema.insert(EmaState::new(theta.clone(), grad.clone(), cfg.beta)?),
        };
        ema.ema_update(theta, grad)?;
        self.counters.flops_opt += 4 * d;

        let next = if t <= cfg.warmup() || self.buf.is_empty() {
            sgd_step(theta, grad, lr, &mut self.velocity, cfg.momentum)?
        } else {
            let dir = self.buf.two_loop_apply(grad)?;
            self.counters.flops_opt += (4 * self.buf.len() as u64 + 1) * d;
            sgd_step(theta, &dir, lr, &mut self.velocity, cfg.momentum)?
        };
        self.counters.flops_opt += 2 * d;

        if t % cfg.update_period == 0 {
            if t > cfg.update_period {
                self.update_hessian(t, cfg)?;
            } else {
                ema.take_snapshot();
            }
        }
        Ok(next)
    }

    fn update_hessian(&mut self, t: usize, cfg: &MlbfgsConfig) -> Result<()> {
        let d = self.dim as u64;
        let (s, y) = self.ema.as_mut().expect("accumulators initialized").form_pair()?;
        self.counters.flops_hessian += 2 * d;
        if cfg.record_pairs {
            self.pair_log.push(RawPair {
                t,
                s: s.clone(),
                y: y.clone(),
            });
        }
        let floor = T::lit(1e-12) * T::from_usize(self.dim).unwrap().sqrt();
        if !(s.norm() >= floor) {
            self.counters.pairs_degenerate += 1;
            return Ok(());
        }
        if let Some(f) = &cfg.filter {
            self.counters.flops_hessian += 2 * d;
            if !pair_filter(&s, &y, f.alpha, f.eps) {
                self.counters.pairs_filtered += 1;
                return Ok(());
            }
        }
        let y_hat = match &cfg.damping {
            Some(dc) => {
                self.counters.flops_hessian += 4 * d;
                damp_pair(&s, &y, dc)?.0
            }
            None => y,
        };
        if s.dot(&y_hat) > T::zero() && self.buf.push_pair(s, y_hat).is_ok() {
            self.counters.pairs_pushed += 1;
        } else {
            self.counters.pairs_nonpositive += 1;
        }
        Ok(())
    }
}

/// Free-function form of one mL-BFGS iteration over every block of `layout`.
pub fn mlbfgs_step<T: Scalar>(
    blocks: &mut [MlbfgsBlock<T>],
    layout: &BlockLayout,
    theta: &FlatVector<T>,
    grad: &FlatVector<T>,
    t: usize,
    cfg: &MlbfgsConfig,
) -> Result<FlatVector<T>> {
    check_dim(layout.num_blocks(), blocks.len())?;
    let lr = cfg.schedule.lr(t.saturating_sub(1));
    let mut next = theta.clone();
    for (i, block) in blocks.iter_mut().enumerate() {
        let th = layout.block_view(theta, i)?;
        let g = layout.block_view(grad, i)?;
        let out = block.step(t, &th, &g, lr, cfg)?;
        layout.scatter(&mut next, i, &out)?;
    }
    Ok(next)
}

/// mL-BFGS over all blocks of a layout in one process.
#[derive(Debug, Clone)]
pub struct Mlbfgs<T: Scalar> {
    cfg: MlbfgsConfig,
    layout: BlockLayout,
    blocks: Vec<MlbfgsBlock<T>>,
}

impl<T: Scalar> Mlbfgs<T> {
    pub fn new(cfg: MlbfgsConfig, layout: BlockLayout) -> Result<Self> {
        cfg.validate()?;
        let blocks = layout
            .block_sizes()
            .into_iter()
            .map(|d| MlbfgsBlock::new(d, &cfg))
            .collect::<Result<_>>()?;
        Ok(Self { cfg, layout, blocks })
    }

    /// Single block over `d` parameters.
    pub fn single_block(cfg: MlbfgsConfig, d: usize) -> Result<Self> {
        Self::new(cfg, BlockLayout::single(d)?)
    }

    pub fn config(&self) -> &MlbfgsConfig {
        &self.cfg
    }

    pub fn layout(&self) -> &BlockLayout {
        &self.layout
    }

    pub fn blocks(&self) -> &[MlbfgsBlock<T>] {
        &self.blocks
    }

    /// Block-diagonal preconditioner applied to `g` (identity on blocks without history).
    pub fn precondition(&self, g: &FlatVector<T>) -> Result<FlatVector<T>> {
        let mut out = g.clone();
        for (i, block) in self.blocks.iter().enumerate() {
            let gb = self.layout.block_view(g, i)?;
            self.layout.scatter(&mut out, i, &block.direction(&gb)?)?;
        }
        Ok(out)
    }
}

impl<T: Scalar> Optimizer<T> for Mlbfgs<T> {
    fn name(&self) -> &'static str {
        "mlbfgs"
    }

    fn lr(&self, t: usize) -> f64 {
        self.cfg.schedule.lr(t - 1)
    }

    fn step(&mut self, t: usize, theta: &FlatVector<T>, grad: &FlatVector<T>) -> Result<FlatVector<T>> {
        mlbfgs_step(&mut self.blocks, &self.layout, theta, grad, t, &self.cfg)
    }
}
