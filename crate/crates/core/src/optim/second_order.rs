use crate::error::{check_dim, invalid, Result};
use crate::matrix::DenseMatrix;
use crate::objectives::Objective;
use crate::qn::HistoryBuffer;
use crate::scalar::Scalar;
use crate::vector::FlatVector;

use super::{Optimizer, Schedule};

/// Raw previous iterate plus the undamped pair history.
#[derive(Debug, Clone)]
pub struct VanillaState<T: Scalar> {
    pub buf: HistoryBuffer<T>,
    pub prev: Option<(FlatVector<T>, FlatVector<T>)>,
    pub skipped: usize,
}

impl<T: Scalar> VanillaState<T> {
    pub fn new(history: usize) -> Result<Self> {
        Ok(Self {
            buf: HistoryBuffer::new(history)?,
            prev: None,
            skipped: 0,
        })
    }
}

/// Classic L-BFGS step on raw per-iteration pairs. Pairs with `sᵀy ≤ 0` are skipped;
/// with an empty history the step is plain SGD.
pub fn vanilla_lbfgs_step<T: Scalar>(
    theta: &FlatVector<T>,
    grad: &FlatVector<T>,
    lr: f64,
    state: &mut VanillaState<T>,
) -> Result<FlatVector<T>> {
    check_dim(theta.dim(), grad.dim())?;
    if let Some((pt, pg)) = state.prev.take() {
        let s = theta.sub(&pt);
        let y = grad.sub(&pg);
        if s.dot(&y) > T::zero() {
            if state.buf.push_pair(s, y).is_err() {
                state.skipped += 1;
            }
        } else {
            state.skipped += 1;
        }
    }
    state.prev = Some((theta.clone(), grad.clone()));
    let dir = if state.buf.is_empty() {
        grad.clone()
    } else {
        state.buf.two_loop_apply(grad)?
    };
    Ok(theta.lincomb(T::one(), &dir, -T::lit(lr)))
}

#[derive(Debug, Clone)]
pub struct VanillaLbfgs<T: Scalar> {
    schedule: Schedule,
    state: VanillaState<T>,
}

impl<T: Scalar> VanillaLbfgs<T> {
    pub fn new(schedule: Schedule, history: usize) -> Result<Self> {
        schedule.validate()?;
        Ok(Self {
            schedule,
            state: VanillaState::new(history)?,
        })
    }

    pub fn state(&self) -> &VanillaState<T> {
        &self.state
    }
}

impl<T: Scalar> Optimizer<T> for VanillaLbfgs<T> {
    fn name(&self) -> &'static str {
        "lbfgs"
    }

    fn lr(&self, t: usize) -> f64 {
        self.schedule.lr(t - 1)
    }

    fn step(&mut self, t: usize, theta: &FlatVector<T>, grad: &FlatVector<T>) -> Result<FlatVector<T>> {
        vanilla_lbfgs_step(theta, grad, self.schedule.lr(t - 1), &mut self.state)
    }
}

/// Full Newton step `θ − B⁻¹g`.
pub fn newton_step_quadratic<T: Scalar>(
    theta: &FlatVector<T>,
    grad: &FlatVector<T>,
    b: &DenseMatrix<T>,
) -> Result<FlatVector<T>> {
    check_dim(theta.dim(), grad.dim())?;
    let step = b.spd_solve(grad)?;
    Ok(theta.sub(&step))
}

#[derive(Debug, Clone)]
pub struct Newton<T: Scalar> {
    b: DenseMatrix<T>,
}

impl<T: Scalar> Newton<T> {
    pub fn new(b: DenseMatrix<T>) -> Self {
        Self { b }
    }

    /// Fails for objectives without an exact Hessian.
    pub fn for_objective(obj: &dyn Objective<T>) -> Result<Self> {
        obj.hessian()
            .cloned()
            .map(Self::new)
            .ok_or_else(|| invalid("objective", "exact Newton requires a quadratic objective"))
    }
}

impl<T: Scalar> Optimizer<T> for Newton<T> {
    fn name(&self) -> &'static str {
        "newton"
    }

    fn lr(&self, _t: usize) -> f64 {
        1.0
    }

    fn step(&mut self, _t: usize, theta: &FlatVector<T>, grad: &FlatVector<T>) -> Result<FlatVector<T>> {
        newton_step_quadratic(theta, grad, &self.b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{LogisticObjective, QuadraticObjective, Dataset};
    use crate::optim::sgd_step;

    type V = FlatVector<f64>;

    fn v(x: &[f64]) -> V {
        V::from_f64(x).unwrap()
    }

    fn angle_deg(a: &V, b: &V) -> f64 {
        (a.dot(b) / (a.norm() * b.norm())).clamp(-1.0, 1.0).acos().to_degrees()
    }

    #[test]
    fn newton_examples() {
        let id = DenseMatrix::<f64>::identity(2);
        let theta = v(&[3.0, -1.0]);
        let g = v(&[0.5, 0.5]);
        assert_eq!(newton_step_quadratic(&theta, &g, &id).unwrap(), theta.sub(&g));
        let b = DenseMatrix::diag(&[2.0, 1.0]);
        let out = newton_step_quadratic(&V::zeros(2), &v(&[2.0, 1.0]), &b).unwrap();
        assert_eq!(out.as_slice(), &[-1.0, -1.0]);
    }

    #[test]
    fn newton_one_step_convergence() {
        let q = QuadraticObjective::<f64>::diagonal(&[3.0, 0.5, 1.0], 0.0).unwrap();
        let mut n = Newton::for_objective(&q).unwrap();
        let theta = v(&[1.0, -4.0, 2.0]);
        let (_, g) = q.exact(&theta).unwrap();
        let next = n.step(1, &theta, &g).unwrap();
        assert!(next.max_abs() < 1e-15);
    }

    #[test]
    fn newton_rejects_non_quadratic() {
        let data = Dataset::new(vec![1.0], 1, vec![1], 2).unwrap();
        let obj = LogisticObjective::new(data, 0.0).unwrap();
        assert!(Newton::for_objective(&obj).is_err());
    }

    #[test]
    fn vanilla_first_step_is_sgd() {
        let mut st = VanillaState::<f64>::new(5).unwrap();
        let theta = v(&[1.0, 2.0]);
        let g = v(&[0.3, -0.2]);
        let a = vanilla_lbfgs_step(&theta, &g, 0.1, &mut st).unwrap();
        let b = sgd_step(&theta, &g, 0.1, &mut V::zeros(2), 0.0).unwrap();
        assert!(a.bit_eq(&b));
    }

    #[test]
    fn vanilla_aligns_with_newton_direction() {
        let q = QuadraticObjective::<f64>::diagonal(&[2.0, 1.0], 0.0).unwrap();
        let mut st = VanillaState::<f64>::new(5).unwrap();
        let mut theta = v(&[1.0, 1.0]);
        for step in 0..=5 {
            let (_, g) = q.exact(&theta).unwrap();
            if step >= 2 {
                let dir = st.buf.two_loop_apply(&g).unwrap();
                let newton = q.b().spd_solve(&g).unwrap();
                let angle = angle_deg(&dir, &newton);
                assert!(angle < 15.0, "step {step}: {angle}");
                if step == 5 {
                    assert!(angle < 1e-6, "step {step}: {angle}");
                }
            }
            theta = vanilla_lbfgs_step(&theta, &g, 1.0, &mut st).unwrap();
        }
    }

    #[test]
    fn vanilla_skips_negative_curvature() {
        let mut st = VanillaState::<f64>::new(5).unwrap();
        vanilla_lbfgs_step(&v(&[0.0]), &v(&[1.0]), 0.1, &mut st).unwrap();
        vanilla_lbfgs_step(&v(&[1.0]), &v(&[0.0]), 0.1, &mut st).unwrap();
        assert!(st.buf.is_empty());
        assert_eq!(st.skipped, 1);
    }
}
