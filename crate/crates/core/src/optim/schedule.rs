use crate::error::{invalid, Result};

/// Learning-rate schedule evaluated at a zero-based step index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Schedule {
    Constant { lr: f64 },
    /// `min_lr + ½(lr − min_lr)(1 + cos(πt/horizon))`, held at `min_lr` for `t ≥ horizon`.
    Cosine { lr: f64, min_lr: f64, horizon: usize },
    /// `lr · factor^⌊t/interval⌋`
    Step { lr: f64, factor: f64, interval: usize },
}

impl Schedule {
    pub fn constant(lr: f64) -> Self {
        Self::Constant { lr }
    }

    pub fn cosine(lr: f64, min_lr: f64, horizon: usize) -> Self {
        Self::Cosine { lr, min_lr, horizon }
    }

    pub fn base(&self) -> f64 {
        match *self {
            Self::Constant { lr } | Self::Cosine { lr, .. } | Self::Step { lr, .. } => lr,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let lr = self.base();
        if !(lr >= 0.0) || !lr.is_finite() {
            return Err(invalid("lr", format!("must be finite and >= 0, got {lr}")));
        }
        match *self {
            Self::Constant { .. } => Ok(()),
            Self::Cosine { lr, min_lr, horizon } => {
                if !(min_lr >= 0.0 && min_lr <= lr) {
                    return Err(invalid("min_lr", format!("must lie in [0, lr], got {min_lr}")));
                }
                if horizon == 0 {
                    return Err(invalid("horizon", "must be >= 1"));
                }
                Ok(())
            }
            Self::Step { factor, interval, .. } => {
                if !(factor > 0.0) || !factor.is_finite() {
                    return Err(invalid("factor", format!("must be finite and > 0, got {factor}")));
                }
                if interval == 0 {
                    return Err(invalid("interval", "must be >= 1"));
                }
                Ok(())
            }
        }
    }

    pub fn lr(&self, t: usize) -> f64 {
        match *self {
            Self::Constant { lr } => lr,
            Self::Cosine { lr, min_lr, horizon } => {
                if t >= horizon {
                    min_lr
                } else {
                    let c = (std::f64::consts::PI * t as f64 / horizon as f64).cos();
                    min_lr + 0.5 * (lr - min_lr) * (1.0 + c)
                }
            }
            Self::Step { lr, factor, interval } => lr * factor.powi((t / interval) as i32),
        }
    }
}

/// Free-function form of [`Schedule::lr`].
pub fn lr_schedule(s: &Schedule, t: usize) -> f64 {
    s.lr(t)
}
