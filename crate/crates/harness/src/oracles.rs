//! Executable checks of the method's variance, secant, damping, spectral, rate, noise
//! floor and gradient-variance properties.

use std::fmt;
use std::path::Path;

use mlbfgs_core::objectives::{ChunkedGradient, Objective, QuadraticObjective};
use mlbfgs_core::optim::{Mlbfgs, MlbfgsConfig, Optimizer, PairFilter, Schedule};
use mlbfgs_core::qn::{damp_pair, damping_tau, DampingConfig, EmaState, HistoryBuffer};
use mlbfgs_core::{RngStream, Vector};
use serde::Serialize;

use crate::error::{HarnessError, Result};
use crate::presets::fig1_mlbfgs_config;

pub const SUITES: [&str; 7] = ["ema", "secant", "damping", "spectral", "rate", "floor", "variance"];

/// How `measured` is compared with `expected`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    /// `|measured − expected| ≤ tolerance`
    Within,
    /// `measured ≤ expected + tolerance`
    AtMost,
    /// `measured ≥ expected − tolerance`
    AtLeast,
    /// Negative control: `measured > expected + tolerance`.
    Exceeds,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub kind: CheckKind,
    pub measured: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, kind: CheckKind, measured: f64, expected: f64, tolerance: f64) -> Self {
        let pass = match kind {
            CheckKind::Within => (measured - expected).abs() <= tolerance,
            CheckKind::AtMost => measured <= expected + tolerance,
            CheckKind::AtLeast => measured >= expected - tolerance,
            CheckKind::Exceeds => measured > expected + tolerance,
        };
        Self {
            name: name.into(),
            kind,
            measured,
            expected,
            tolerance,
            pass,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub suite: String,
    pub checks: Vec<Check>,
}

#[derive(Serialize)]
struct CsvRow<'a> {
    suite: &'a str,
    check: &'a str,
    kind: CheckKind,
    measured: f64,
    expected: f64,
    tolerance: f64,
    pass: bool,
}

impl VerifyReport {
    pub fn new(suite: impl Into<String>) -> Self {
        Self {
            suite: suite.into(),
            checks: Vec::new(),
        }
    }

    pub fn push(&mut self, check: Check) {
        self.checks.push(check);
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{} {}/{}: measured={:.6e} expected={:.6e} tol={:.3e} ({:?})",
                if c.pass { "PASS" } else { "FAIL" },
                self.suite,
                c.name,
                c.measured,
                c.expected,
                c.tolerance,
                c.kind
            )?;
        }
        Ok(())
    }
}

pub fn write_reports<W: std::io::Write>(w: W, reports: &[VerifyReport]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in reports {
        for c in &r.checks {
            out.serialize(CsvRow {
                suite: &r.suite,
                check: &c.name,
                kind: c.kind,
                measured: c.measured,
                expected: c.expected,
                tolerance: c.tolerance,
                pass: c.pass,
            })?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_reports_file(path: &Path, reports: &[VerifyReport]) -> Result<()> {
    write_reports(std::io::BufWriter::new(std::fs::File::create(path)?), reports)
}

/// Steady-state variance factor of the accumulators: `(1−β)/(1+β)`.
pub fn ema_variance_factor(beta: f64) -> f64 {
    (1.0 - beta) / (1.0 + beta)
}

/// Burn-in and snapshot spacing for an accumulator with coefficient `beta`.
pub fn ema_schedule(beta: f64) -> (usize, usize) {
    let horizon = 1.0 / (1.0 - beta);
    ((10.0 * horizon).ceil() as usize, horizon.ceil() as usize)
}

/// Runs `trials` independent accumulators over pure noise of scale `eps` for `steps`
/// steps. After the burn-in, every spacing-th step contributes one sample per chain to
/// the accumulator variance and to the variance of the difference between consecutive
/// snapshots.
pub fn verify_ema_variance(beta: f64, eps: f64, steps: usize, trials: usize, seed: u64) -> Result<VerifyReport> {
    if !(0.0..1.0).contains(&beta) {
        return Err(HarnessError::config("beta", "must lie in [0, 1)"));
    }
    let (burn_in, spacing) = ema_schedule(beta);
    if steps < burn_in + spacing {
        return Err(HarnessError::config(
            "steps",
            format!("need at least {} steps for beta = {beta}", burn_in + spacing),
        ));
    }
    if trials < 2 {
        return Err(HarnessError::config("trials", "must be >= 2"));
    }
    let mut rng = RngStream::new(seed);
    let mut ema: Option<EmaState<f64>> = None;
    let mut prev: Option<Vector> = None;
    let (mut m_sq, mut m_n) = (0.0, 0usize);
    let (mut y_sq, mut y_n) = (0.0, 0usize);
    for t in 1..=steps {
        let noise: Vector = rng.gaussian_noise(trials, eps)?;
        let e = match &mut ema {
            Some(e) => e,
            None => ema.insert(EmaState::new(noise.clone(), noise.clone(), beta)?),
        };
        e.ema_update(&noise, &noise)?;
        if t >= burn_in && (t - burn_in) % spacing == 0 {
            let m = e.m_grad().clone();
            m_sq += m.norm_sq();
            m_n += trials;
            if let Some(p) = &prev {
                y_sq += m.sub(p).norm_sq();
                y_n += trials;
            }
            prev = Some(m);
        }
    }
    let var = m_sq / m_n as f64;
    let expected = ema_variance_factor(beta) * eps * eps;
    let mut report = VerifyReport::new("ema");
    report.push(Check::new(
        format!("ema_variance beta={beta}"),
        CheckKind::Within,
        var,
        expected,
        0.1 * expected,
    ));
    if y_n > 0 {
        let bound = 4.0 * expected;
        report.push(Check::new(
            format!("y_variance beta={beta}"),
            CheckKind::AtMost,
            y_sq / y_n as f64,
            bound,
            0.15 * bound,
        ));
    }
    Ok(report)
}

fn secant_config(update_period: usize) -> MlbfgsConfig {
    MlbfgsConfig {
        update_period,
        history: 10,
        beta: 0.9,
        damping: Some(DampingConfig::default()),
        schedule: Schedule::constant(0.05),
        momentum: 0.0,
        filter: None,
        record_pairs: true,
    }
}

/// Largest `‖y − B·s‖ / ‖B·s‖` over the raw pairs formed by an mL-BFGS run on the
/// quadratic with diagonal `b`, plus the number of pairs.
pub fn secant_residual(b: &[f64], update_period: usize, steps: usize, noise: f64, seed: u64) -> Result<(f64, usize)> {
    let obj = QuadraticObjective::diagonal(b, noise)?;
    let mut opt = Mlbfgs::single_block(secant_config(update_period), b.len())?;
    let mut grads = ChunkedGradient::new(&RngStream::new(seed), 1, None)?;
    let mut theta = Vector::filled(b.len(), 1.0);
    for t in 1..=steps {
        let (_, g) = grads.evaluate(&obj, &theta)?;
        theta = opt.step(t, &theta, &g)?;
    }
    let log = opt.blocks()[0].pair_log();
    let mut worst: f64 = 0.0;
    for p in log {
        let bs = obj.b().matvec(&p.s)?;
        worst = worst.max(p.y.sub(&bs).norm() / bs.norm());
    }
    Ok((worst, log.len()))
}

/// Noise-free secant residual plus a noisy negative control that must exceed the
/// tolerance.
pub fn verify_secant(b: &[f64], update_period: usize, steps: usize, seed: u64) -> Result<VerifyReport> {
    let mut report = VerifyReport::new("secant");
    let (res, pairs) = secant_residual(b, update_period, steps, 0.0, seed)?;
    report.push(Check::new("pairs_formed", CheckKind::AtLeast, pairs as f64, 3.0, 0.0));
    report.push(Check::new("secant_residual", CheckKind::AtMost, res, 0.0, 1e-10));
    let (noisy, _) = secant_residual(b, update_period, steps, 0.1, seed)?;
    report.push(Check::new("noisy_control_exceeds", CheckKind::Exceeds, noisy, 0.0, 1e-10));
    Ok(report)
}

/// Random pair with `y = c·s + e`, `c ~ U(−10, 10)`, `e ~ N(0, 0.25·I)`.
fn random_pair(rng: &mut RngStream, d: usize) -> Result<(Vector, Vector)> {
    let s: Vector = rng.gaussian_noise(d, 1.0)?;
    let c = rng.uniform(-10.0, 10.0);
    let e: Vector = rng.gaussian_noise(d, 0.5)?;
    let y = s.lincomb(c, &e, 1.0);
    Ok((s, y))
}

/// Damped curvature ratio `sᵀŷ/sᵀs` stays in `[σ_L, σ_H]` and sits on the bound
/// whenever the damping coefficient is clamped below `τ₀`.
pub fn verify_damping(cfg: &DampingConfig, pairs: usize, seed: u64) -> Result<VerifyReport> {
    cfg.validate()?;
    let mut rng = RngStream::new(seed);
    let mut below: f64 = 0.0;
    let mut above: f64 = 0.0;
    let mut clamp_dev: f64 = 0.0;
    let mut clamped = 0usize;
    for _ in 0..pairs {
        let d = 1 + rng.index(20);
        let (s, y) = random_pair(&mut rng, d)?;
        let (y_hat, _) = damp_pair(&s, &y, cfg)?;
        let r = s.dot(&y_hat) / s.norm_sq();
        below = below.max(cfg.sigma_lo - r);
        above = above.max(r - cfg.sigma_hi);
        let mu = s.dot(&y) / s.norm_sq();
        if damping_tau(mu, cfg) < cfg.tau0 {
            clamped += 1;
            let target = if mu <= cfg.sigma_lo { cfg.sigma_lo } else { cfg.sigma_hi };
            clamp_dev = clamp_dev.max((r - target).abs());
        }
    }
    let mut report = VerifyReport::new("damping");
    report.push(Check::new("lower_violation", CheckKind::AtMost, below, 0.0, 1e-12));
    report.push(Check::new("upper_violation", CheckKind::AtMost, above, 0.0, 1e-12));
    report.push(Check::new("clamped_cases", CheckKind::AtLeast, clamped as f64, 1.0, 0.0));
    report.push(Check::new("clamped_deviation", CheckKind::Within, clamp_dev, 0.0, 1e-12));
    Ok(report)
}

/// `[1/σ_H, (M+1)/σ_L]`
pub fn spectral_bounds(cfg: &DampingConfig, history: usize) -> (f64, f64) {
    (1.0 / cfg.sigma_hi, (history as f64 + 1.0) / cfg.sigma_lo)
}

/// Rayleigh quotients of the two-loop operator over buffers of damped random pairs.
pub fn verify_spectral(cfg: &DampingConfig, history: usize, trials: usize, seed: u64) -> Result<VerifyReport> {
    cfg.validate()?;
    let (lo, hi) = spectral_bounds(cfg, history);
    let mut rng = RngStream::new(seed);
    let mut rq_min = f64::INFINITY;
    let mut rq_max = f64::NEG_INFINITY;
    for _ in 0..trials {
        let d = 2 + rng.index(19);
        let mut buf = HistoryBuffer::new(history)?;
        while buf.len() < history {
            let (s, y) = random_pair(&mut rng, d)?;
            let (y_hat, _) = damp_pair(&s, &y, cfg)?;
            buf.push_pair(s, y_hat)?;
        }
        for _ in 0..100 {
            let g: Vector = rng.gaussian_noise(d, 1.0)?;
            let rq = g.dot(&buf.two_loop_apply(&g)?) / g.norm_sq();
            rq_min = rq_min.min(rq);
            rq_max = rq_max.max(rq);
        }
    }
    // one pair with s = y: Ĥ acts as the identity on span(s)
    let mut single = HistoryBuffer::new(1)?;
    let s: Vector = rng.gaussian_noise(3, 1.0)?;
    single.push_pair(s.clone(), s.clone())?;
    let rq_single = s.dot(&single.two_loop_apply(&s)?) / s.norm_sq();

    let mut report = VerifyReport::new("spectral");
    report.push(Check::new("single_pair_identity", CheckKind::Within, rq_single, 1.0, 1e-12));
    report.push(Check::new("rayleigh_min", CheckKind::AtLeast, rq_min, lo, 1e-9));
    report.push(Check::new("rayleigh_max", CheckKind::AtMost, rq_max, hi, 1e-9));
    Ok(report)
}

/// Contraction factor `α = 1 − ηλξ + η²Λ²Ξ²` with `ξ = 1/σ_H`, `Ξ = (M+1)/σ_L`, and the
/// step size at which `α` is smallest.
pub fn rate_constant(lambda: f64, big_lambda: f64, cfg: &DampingConfig, history: usize, eta: f64) -> (f64, f64) {
    let (xi, big_xi) = spectral_bounds(cfg, history);
    let alpha = 1.0 - eta * lambda * xi + eta * eta * big_lambda * big_lambda * big_xi * big_xi;
    let eta_max = lambda * xi / (big_lambda * big_lambda * big_xi * big_xi);
    (alpha, eta_max)
}

/// Deterministic envelope `L(θ_t) ≤ α^{t−2T}·L(θ_{2T})` on the quadratic with diagonal `b`.
pub fn verify_rate(
    b: &[f64],
    cfg: &DampingConfig,
    history: usize,
    update_period: usize,
    eta: f64,
    iters: usize,
) -> Result<VerifyReport> {
    let obj = QuadraticObjective::diagonal(b, 0.0)?;
    let (lambda, big_lambda) = obj.curvature_bounds().expect("quadratic");
    let (alpha, eta_max) = rate_constant(lambda, big_lambda, cfg, history, eta);
    if !(alpha < 1.0) {
        return Err(HarnessError::Inadmissible { eta, alpha, eta_max });
    }
    let ml = MlbfgsConfig {
        update_period,
        history,
        beta: 0.9,
        damping: Some(*cfg),
        schedule: Schedule::constant(eta),
        momentum: 0.0,
        filter: None,
        record_pairs: false,
    };
    let warm = ml.warmup();
    let mut opt = Mlbfgs::single_block(ml, b.len())?;
    let mut theta = Vector::filled(b.len(), 1.0);
    let mut base = f64::NAN;
    let mut worst: f64 = 0.0;
    for t in 1..=warm + iters {
        let (_, g) = obj.exact(&theta)?;
        theta = opt.step(t, &theta, &g)?;
        let loss = obj.loss(&theta)?;
        if t == warm {
            base = loss;
        } else if t > warm {
            worst = worst.max(loss / (alpha.powi((t - warm) as i32) * base));
        }
    }
    let mut report = VerifyReport::new("rate");
    report.push(Check::new("alpha_below_one", CheckKind::AtMost, alpha, 1.0, 0.0));
    report.push(Check::new("envelope_ratio", CheckKind::AtMost, worst, 1.0, 1e-9));
    Ok(report)
}

/// `(α−2)²λ/(2Λ²)·ε²`
pub fn noise_floor(alpha: f64, eps: f64, lambda: f64, big_lambda: f64) -> f64 {
    (alpha - 2.0).powi(2) * lambda / (2.0 * big_lambda * big_lambda) * eps * eps
}

/// Seed-averaged tail loss of filtered mL-BFGS on the two-dimensional quadratic with
/// eigenvalues `λ`, `Λ` and total gradient noise `eps` (per coordinate `eps/√2`),
/// against the noise floor.
pub fn verify_noise_floor(
    alpha: f64,
    eps: f64,
    lambda: f64,
    big_lambda: f64,
    iters: usize,
    seeds: u64,
) -> Result<VerifyReport> {
    let obj = QuadraticObjective::diagonal(&[lambda, big_lambda], eps / 2f64.sqrt())?;
    let mut cfg = fig1_mlbfgs_config(0.9, Schedule::constant(1.0));
    cfg.filter = Some(PairFilter { alpha, eps });
    let tail_start = iters - iters / 10;
    let mut total = 0.0;
    for seed in 0..seeds {
        let mut opt = Mlbfgs::single_block(cfg.clone(), 2)?;
        let mut grads = ChunkedGradient::new(&RngStream::new(seed), 1, None)?;
        let mut theta = Vector::from_f64(&[-2.5, 2.0])?;
        let mut tail = 0.0;
        for t in 1..=iters {
            let (_, g) = grads.evaluate(&obj, &theta)?;
            theta = opt.step(t, &theta, &g)?;
            if t > tail_start {
                tail += obj.loss(&theta)?;
            }
        }
        total += tail / (iters - tail_start) as f64;
    }
    let floor = noise_floor(alpha, eps, lambda, big_lambda);
    let mut report = VerifyReport::new("floor");
    report.push(Check::new("tail_loss_above_floor", CheckKind::AtLeast, total / seeds as f64, floor, 0.0));
    Ok(report)
}

/// Monte Carlo `E‖∇L(θ; S)‖²` for `ℓ_i = ½‖θ − x_i‖²` with `|S| = batch` drawn with
/// replacement, and `L(θ)`.
pub fn minibatch_grad_moment(
    xs: &[Vector],
    theta: &Vector,
    batch: usize,
    trials: usize,
    rng: &mut RngStream,
) -> (f64, f64) {
    let n = xs.len();
    let loss = xs.iter().map(|x| 0.5 * theta.sub(x).norm_sq()).sum::<f64>() / n as f64;
    let mut acc = 0.0;
    for _ in 0..trials {
        let mut mean = Vector::zeros(theta.dim());
        for _ in 0..batch {
            mean.axpy(1.0, &xs[rng.index(n)]);
        }
        let g = theta.lincomb(1.0, &mean, -1.0 / batch as f64);
        acc += g.norm_sq();
    }
    (acc / trials as f64, loss)
}

/// Gradient second moment against `2Λ·L(θ)` (here `Λ = 1`).
pub fn verify_grad_variance(n: usize, d: usize, batch: usize, trials: usize, seed: u64) -> Result<VerifyReport> {
    if batch == 0 || n == 0 || trials == 0 {
        return Err(HarnessError::config("batch", "n, batch and trials must be >= 1"));
    }
    let mut rng = RngStream::new(seed);
    let xs: Vec<Vector> = (0..n).map(|_| rng.gaussian_noise(d, 1.0)).collect::<mlbfgs_core::Result<_>>()?;
    let slack = 1.0 + 3.0 / (trials as f64).sqrt();
    let mut report = VerifyReport::new("variance");

    let theta = Vector::zeros(d);
    let (m, loss) = minibatch_grad_moment(&xs, &theta, batch, trials, &mut rng);
    report.push(Check::new(format!("random_data b={batch}"), CheckKind::AtMost, m, 2.0 * loss * slack, 0.0));

    // full batch: the exact mean gradient
    let mean = xs.iter().fold(Vector::zeros(d), |acc, x| acc.add(x)).scale(1.0 / n as f64);
    let full = theta.sub(&mean).norm_sq();
    report.push(Check::new("full_batch", CheckKind::AtMost, full, 2.0 * loss, 0.0));

    let same = vec![xs[0].clone(); n];
    let theta1: Vector = rng.gaussian_noise(d, 1.0)?;
    let (m, loss) = minibatch_grad_moment(&same, &theta1, batch, trials.min(1000), &mut rng);
    report.push(Check::new("identical_data_equality", CheckKind::Within, m, 2.0 * loss, 1e-12 * loss.max(1.0)));
    Ok(report)
}

/// Runs a named suite with its default settings.
pub fn run_suite(name: &str, seed: u64) -> Result<Vec<VerifyReport>> {
    let damping = DampingConfig::default();
    Ok(match name {
        "ema" => [0.9, 0.99, 0.999]
            .iter()
            .map(|&beta| {
                let (burn, spacing) = ema_schedule(beta);
                verify_ema_variance(beta, 1.0, burn + 10 * spacing, 10_000, seed)
            })
            .collect::<Result<_>>()?,
        "secant" => vec![verify_secant(&[1.0, 2.0, 5.0], 5, 40, seed)?],
        "damping" => vec![
            verify_damping(&damping, 1000, seed)?,
            verify_damping(&DampingConfig::new(0.5, 1.5, 0.99)?, 1000, seed)?,
        ],
        "spectral" => vec![verify_spectral(&damping, 10, 100, seed)?],
        "rate" => {
            let b: Vec<f64> = (0..8).map(|i| 0.6 + 0.8 * i as f64 / 7.0).collect();
            vec![verify_rate(&b, &DampingConfig::new(0.5, 1.5, 0.99)?, 4, 5, 0.001, 500)?]
        }
        "floor" => vec![verify_noise_floor(4.0, 0.2, 1.0, 1.0, 1000, 20)?],
        "variance" => vec![verify_grad_variance(1000, 5, 1, 100_000, seed)?],
        "all" => {
            let mut out = Vec::new();
            for s in SUITES {
                out.extend(run_suite(s, seed)?);
            }
            out
        }
        other => {
            return Err(HarnessError::config(
                "suite",
                format!("unknown suite `{other}` (ema, secant, damping, spectral, rate, floor, variance, all)"),
            ))
        }
    })
}
