//! Momentum accumulators, damping, bounded pair history and the two-loop recursion.

mod damping;
mod ema;
mod history;

pub use damping::{damp_pair, damping_tau, DampingConfig};
pub use ema::EmaState;
pub use history::{dense_inverse_hessian, pair_filter, two_loop_apply, CurvaturePair, HistoryBuffer};
