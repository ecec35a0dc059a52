use crate::error::{check_dim, invalid, Error, Result};
use crate::scalar::Scalar;
use crate::vector::FlatVector;

/// Momentum accumulators over parameters and gradients, plus the snapshots taken at the
/// last Hessian update.
#[derive(Debug, Clone, PartialEq)]
pub struct EmaState<T: Scalar> {
    m_theta: FlatVector<T>,
    m_grad: FlatVector<T>,
    beta: T,
    snap_theta: Option<FlatVector<T>>,
    snap_grad: Option<FlatVector<T>>,
}

impl<T: Scalar> EmaState<T> {
    /// Starts with `Mθ₀ = θ₀`, `Mg₀ = g₀` and no snapshot.
    pub fn new(theta0: FlatVector<T>, grad0: FlatVector<T>, beta: f64) -> Result<Self> {
        check_dim(theta0.dim(), grad0.dim())?;
        if !(0.0..1.0).contains(&beta) {
            return Err(invalid("beta", format!("must lie in [0, 1), got {beta}")));
        }
        Ok(Self {
            m_theta: theta0,
            m_grad: grad0,
            beta: T::lit(beta),
            snap_theta: None,
            snap_grad: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.m_theta.dim()
    }

    pub fn beta(&self) -> T {
        self.beta
    }

    pub fn m_theta(&self) -> &FlatVector<T> {
        &self.m_theta
    }

    pub fn m_grad(&self) -> &FlatVector<T> {
        &self.m_grad
    }

    pub fn has_snapshot(&self) -> bool {
        self.snap_theta.is_some()
    }

    /// `Mθ ← β·Mθ + (1−β)·θ_t`, `Mg ← β·Mg + (1−β)·g_t`.
    pub fn ema_update(&mut self, theta: &FlatVector<T>, grad: &FlatVector<T>) -> Result<()> {
        check_dim(self.dim(), theta.dim())?;
        check_dim(self.dim(), grad.dim())?;
        let b = self.beta;
        let a = T::one() - b;
        self.m_theta = self.m_theta.lincomb(b, theta, a);
        self.m_grad = self.m_grad.lincomb(b, grad, a);
        Ok(())
    }

    /// Copies the current accumulators into the snapshots.
    pub fn take_snapshot(&mut self) {
        self.snap_theta = Some(self.m_theta.clone());
        self.snap_grad = Some(self.m_grad.clone());
    }

    /// `s = Mθ − snapθ`, `y = Mg − snapg`, then refreshes the snapshots.
    pub fn form_pair(&mut self) -> Result<(FlatVector<T>, FlatVector<T>)> {
        let (Some(st), Some(sg)) = (&self.snap_theta, &self.snap_grad) else {
            return Err(Error::NoSnapshot);
        };
        let s = self.m_theta.sub(st);
        let y = self.m_grad.sub(sg);
        self.take_snapshot();
        Ok((s, y))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    type V = FlatVector<f64>;

    fn v(x: &[f64]) -> V {
        V::from_f64(x).unwrap()
    }

    #[test]
    fn one_step_arithmetic() {
        let mut e = EmaState::new(v(&[1.0]), v(&[0.0]), 0.9).unwrap();
        e.ema_update(&v(&[0.0]), &v(&[0.0])).unwrap();
        assert_eq!(e.m_theta().as_slice(), &[0.9]);
    }

    #[test]
    fn zero_beta_passthrough() {
        let mut e = EmaState::new(v(&[5.0, -3.0]), v(&[1.0, 1.0]), 0.0).unwrap();
        e.ema_update(&v(&[0.25, 7.0]), &v(&[2.0, 3.0])).unwrap();
        assert_eq!(e.m_theta().as_slice(), &[0.25, 7.0]);
        assert_eq!(e.m_grad().as_slice(), &[2.0, 3.0]);
    }

    #[test]
    fn geometric_convergence() {
        let (m0, c) = (10.0, 2.0);
        let mut e = EmaState::new(v(&[m0]), v(&[0.0]), 0.9).unwrap();
        for _ in 0..100 {
            e.ema_update(&v(&[c]), &v(&[0.0])).unwrap();
        }
        let bound = 0.9f64.powi(100) * (m0 - c).abs();
        assert!((e.m_theta()[0] - c).abs() <= bound * (1.0 + 1e-9));
    }

    #[test]
    fn pair_formation() {
        let mut e = EmaState::new(v(&[1.0]), v(&[3.0]), 0.0).unwrap();
        assert_eq!(e.form_pair().unwrap_err(), Error::NoSnapshot);
        e.take_snapshot();
        e.ema_update(&v(&[2.0]), &v(&[5.0])).unwrap();
        let (s, y) = e.form_pair().unwrap();
        assert_eq!(s.as_slice(), &[1.0]);
        assert_eq!(y.as_slice(), &[2.0]);
        let (s2, y2) = e.form_pair().unwrap();
        assert_eq!(s2.norm(), 0.0);
        assert_eq!(y2.norm(), 0.0);
    }

    #[test]
    fn validation() {
        assert!(EmaState::new(v(&[1.0]), v(&[1.0]), 1.0).is_err());
        assert!(EmaState::new(v(&[1.0]), v(&[1.0]), -0.1).is_err());
        assert!(EmaState::new(v(&[1.0]), v(&[1.0, 2.0]), 0.5).is_err());
        let mut e = EmaState::new(v(&[1.0]), v(&[1.0]), 0.5).unwrap();
        assert!(e.ema_update(&v(&[1.0, 2.0]), &v(&[1.0])).is_err());
    }

    proptest! {
        #[test]
        fn update_is_convex_combination(
            beta in 0.0f64..0.999,
            m in -100.0f64..100.0,
            x in -100.0f64..100.0,
        ) {
            let mut e = EmaState::new(v(&[m]), v(&[m]), beta).unwrap();
            e.ema_update(&v(&[x]), &v(&[x])).unwrap();
            let r = e.m_theta()[0];
            prop_assert_eq!(r, beta * m + (1.0 - beta) * x);
            let tol = 1e-12 * (m.abs() + x.abs());
            prop_assert!(r >= m.min(x) - tol && r <= m.max(x) + tol);
        }
    }
}
