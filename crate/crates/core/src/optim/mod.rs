//! Step rules and learning-rate schedules.

mod first_order;
mod mlbfgs;
mod schedule;
mod second_order;

pub use first_order::{adam_step, sgd_step, Adam, AdamState, Sgd};
pub use mlbfgs::{mlbfgs_step, BlockCounters, Mlbfgs, MlbfgsBlock, MlbfgsConfig, PairFilter, RawPair};
pub use schedule::{lr_schedule, Schedule};
pub use second_order::{newton_step_quadratic, vanilla_lbfgs_step, Newton, VanillaLbfgs, VanillaState};

use crate::error::Result;
use crate::scalar::Scalar;
use crate::vector::FlatVector;

/// Iterative step rule. Iterations are numbered from 1; step `t` receives the current
/// iterate and its (stochastic) gradient and returns the next iterate.
pub trait Optimizer<T: Scalar>: Send {
    fn name(&self) -> &'static str;

    /// Learning rate used at iteration `t`.
    fn lr(&self, t: usize) -> f64;

    fn step(&mut self, t: usize, theta: &FlatVector<T>, grad: &FlatVector<T>) -> Result<FlatVector<T>>;
}
