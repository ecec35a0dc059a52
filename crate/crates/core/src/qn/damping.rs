use crate::error::{check_dim, invalid, Error, Result};
use crate::scalar::Scalar;
use crate::vector::FlatVector;

/// Thresholds for adaptive damping: keeps `sᵀŷ/sᵀs` inside `[sigma_lo, sigma_hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DampingConfig {
    pub sigma_lo: f64,
    pub sigma_hi: f64,
    pub tau0: f64,
}

impl Default for DampingConfig {
    fn default() -> Self {
        Self {
            sigma_lo: 0.01,
            sigma_hi: 1.5,
            tau0: 0.99,
        }
    }
}

impl DampingConfig {
    pub fn new(sigma_lo: f64, sigma_hi: f64, tau0: f64) -> Result<Self> {
        let cfg = Self {
            sigma_lo,
            sigma_hi,
            tau0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_lo > 0.0 && self.sigma_lo < 1.0) {
            return Err(invalid("sigma_lo", format!("must lie in (0, 1), got {}", self.sigma_lo)));
        }
        if !(self.sigma_hi > 1.0 && self.sigma_hi.is_finite()) {
            return Err(invalid("sigma_hi", format!("must be finite and > 1, got {}", self.sigma_hi)));
        }
        if !(self.tau0 > 0.0 && self.tau0 < 1.0) {
            return Err(invalid("tau0", format!("must lie in (0, 1), got {}", self.tau0)));
        }
        Ok(())
    }
}

/// Damping coefficient for curvature ratio `mu`.
pub fn damping_tau(mu: f64, cfg: &DampingConfig) -> f64 {
    if mu <= cfg.sigma_lo {
        ((1.0 - cfg.sigma_lo) / (1.0 - mu)).min(cfg.tau0)
    } else if mu >= cfg.sigma_hi {
        ((cfg.sigma_hi - 1.0) / (mu - 1.0)).min(cfg.tau0)
    } else {
        cfg.tau0
    }
}

/// Returns `(ŷ, τ)` with `ŷ = τ·y + (1−τ)·s`.
pub fn damp_pair<T: Scalar>(
    s: &FlatVector<T>,
    y: &FlatVector<T>,
    cfg: &DampingConfig,
) -> Result<(FlatVector<T>, T)> {
    check_dim(s.dim(), y.dim())?;
    let ss = s.norm_sq();
    if !(ss > T::zero()) {
        return Err(Error::ZeroStep);
    }
    let mu = (s.dot(y) / ss).to_f64_lossy();
    let tau = T::lit(damping_tau(mu, cfg));
    Ok((y.lincomb(tau, s, T::one() - tau), tau))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    type V = FlatVector<f64>;

    fn v(x: &[f64]) -> V {
        V::from_f64(x).unwrap()
    }

    fn ratio(s: &V, y: &V) -> f64 {
        s.dot(y) / s.norm_sq()
    }

    #[test]
    fn fixed_point() {
        let cfg = DampingConfig::default();
        let (yh, tau) = damp_pair(&v(&[1.0, 0.0]), &v(&[1.0, 0.0]), &cfg).unwrap();
        assert_eq!(tau, 0.99);
        assert_eq!(yh.as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn upper_clamp() {
        let cfg = DampingConfig::default();
        let s = v(&[1.0, 0.0]);
        let (yh, tau) = damp_pair(&s, &v(&[2.0, 0.0]), &cfg).unwrap();
        assert_eq!(tau, 0.5);
        assert_eq!(yh.as_slice(), &[1.5, 0.0]);
        assert_eq!(ratio(&s, &yh), 1.5);
    }

    #[test]
    fn lower_clamp() {
        let cfg = DampingConfig::default();
        let s = v(&[1.0, 0.0]);
        let (yh, tau) = damp_pair(&s, &v(&[-1.0, 0.0]), &cfg).unwrap();
        assert_eq!(tau, 0.495);
        assert!((yh[0] - 0.01).abs() < 1e-16);
        assert!((ratio(&s, &yh) - 0.01).abs() < 1e-16);
    }

    #[test]
    fn zero_step_rejected() {
        let cfg = DampingConfig::default();
        assert_eq!(damp_pair(&v(&[0.0]), &v(&[1.0]), &cfg).unwrap_err(), Error::ZeroStep);
    }

    #[test]
    fn config_validation() {
        assert!(DampingConfig::new(0.0, 1.5, 0.99).is_err());
        assert!(DampingConfig::new(0.01, 1.0, 0.99).is_err());
        assert!(DampingConfig::new(0.01, 1.5, 1.0).is_err());
        assert!(DampingConfig::new(0.01, 1.5, 0.99).is_ok());
    }

    #[test]
    fn bounds_on_random_pairs() {
        let cfg = DampingConfig::default();
        let mut rng = RngStream::new(17);
        for _ in 0..1000 {
            let d = 1 + rng.index(10);
            let s: V = rng.gaussian_noise(d, 1.0).unwrap();
            let mu = rng.uniform(-10.0, 10.0);
            let perp: V = rng.gaussian_noise(d, 1.0).unwrap();
            let y = s.lincomb(mu, &perp, 0.1);
            let (yh, _) = damp_pair(&s, &y, &cfg).unwrap();
            let r = ratio(&s, &yh);
            assert!(r >= cfg.sigma_lo - 1e-12 && r <= cfg.sigma_hi + 1e-12, "ratio {r}");
        }
    }
}
