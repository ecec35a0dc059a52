//! Configuration, experiment presets, cost reports and verification suites for the
//! mL-BFGS toolkit.

pub mod config;
pub mod cost_report;
pub mod error;
pub mod metrics;
pub mod oracles;
pub mod presets;
pub mod runner;

pub use config::RunConfig;
pub use error::{HarnessError, Result};
pub use metrics::{MetricsRow, METRICS_HEADER};
pub use runner::{execute, run_experiment, RunOutcome};
