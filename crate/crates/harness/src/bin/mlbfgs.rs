use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mlbfgs_harness::config::{CostInputsSpec, RunConfig};
use mlbfgs_harness::cost_report::cost_report;
use mlbfgs_harness::oracles::{run_suite, write_reports_file};
use mlbfgs_harness::presets::{ablation_run, fig1_trajectories};
use mlbfgs_harness::{run_experiment, HarnessError};

#[derive(Parser)]
#[command(name = "mlbfgs", version, about = "Momentum-smoothed, damped, block-wise L-BFGS toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configured experiment and write metrics.csv.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (defaults to the config's output_dir).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Two-dimensional trajectory comparison of SGD, L-BFGS, mL-BFGS and Newton.
    Fig1 {
        #[arg(long, default_value_t = 0.2)]
        sigma: f64,
        #[arg(long, default_value_t = 0.9)]
        beta: f64,
        #[arg(long, default_value_t = 100)]
        iters: usize,
        #[arg(long, default_value_t = 20)]
        seeds: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Momentum/damping ablation from a base mL-BFGS config.
    Ablate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Analytic per-node cost table.
    Cost {
        /// sgd, kfac, slbfgs, mlbfgs or all
        #[arg(long, default_value = "all")]
        kind: String,
        #[arg(long)]
        inputs: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a verification suite.
    Verify {
        /// ema, secant, damping, spectral, rate, floor, variance or all
        #[arg(long)]
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

const EXIT_CONFIG: u8 = 1;
const EXIT_VERIFY: u8 = 2;

fn run(cli: Cli) -> Result<ExitCode, HarnessError> {
    match cli.command {
        Command::Run { config, seed, out } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let dir = out
                .or_else(|| cfg.output_dir.as_ref().map(PathBuf::from))
                .ok_or_else(|| HarnessError::config("output_dir", "no --out given and no output_dir in config"))?;
            let (path, outcome) = run_experiment(&cfg, &dir)?;
            if outcome.diverged {
                let last = outcome.rows.last().map_or(0, |r| r.iter);
                eprintln!("run diverged at iteration {last}; flagged row written");
            }
            println!("{}", path.display());
        }
        Command::Fig1 {
            sigma,
            beta,
            iters,
            seeds,
            out,
        } => {
            let r = fig1_trajectories(sigma, beta, iters, seeds, Some(&out))?;
            for (method, loss) in &r.final_mean {
                println!("{method:<8} mean final loss {loss:.6e}");
            }
            println!("{}", out.display());
        }
        Command::Ablate { config, out } => {
            let cfg = RunConfig::load(&config)?;
            let r = ablation_run(&cfg, Some(&out))?;
            for s in &r.summaries {
                println!(
                    "{:<14} loss@{} {:.6e}  tail var {:.6e}  diverged {}",
                    s.variant, s.compare_iter, s.mean_loss, s.tail_variance, s.diverged_seeds
                );
            }
            for b in &r.blocks {
                println!("blocks={:<3} final loss {:.6e}  diverged {}", b.blocks, b.mean_final_loss, b.diverged_seeds);
            }
            println!("{}", out.display());
        }
        Command::Cost { kind, inputs, out } => {
            let inputs = CostInputsSpec::load(&inputs)?.to_inputs();
            print!("{}", cost_report(&kind, &inputs, out.as_deref())?);
        }
        Command::Verify { suite, seed, out } => {
            let reports = run_suite(&suite, seed)?;
            for r in &reports {
                print!("{r}");
            }
            if let Some(path) = out {
                write_reports_file(&path, &reports)?;
            }
            if !reports.iter().all(|r| r.passed()) {
                return Ok(ExitCode::from(EXIT_VERIFY));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}
