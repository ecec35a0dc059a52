use crate::error::{check_dim, invalid, Result};
use crate::scalar::Scalar;
use crate::vector::FlatVector;

use super::{Optimizer, Schedule};

/// `θ − η·g` when `momentum = 0`; otherwise heavy ball with `v ← momentum·v + g`.
pub fn sgd_step<T: Scalar>(
    theta: &FlatVector<T>,
    grad: &FlatVector<T>,
    lr: f64,
    velocity: &mut FlatVector<T>,
    momentum: f64,
) -> Result<FlatVector<T>> {
    check_dim(theta.dim(), grad.dim())?;
    let eta = T::lit(lr);
    if momentum == 0.0 {
        return Ok(theta.lincomb(T::one(), grad, -eta));
    }
    check_dim(theta.dim(), velocity.dim())?;
    *velocity = velocity.lincomb(T::lit(momentum), grad, T::one());
    Ok(theta.lincomb(T::one(), velocity, -eta))
}

#[derive(Debug, Clone)]
pub struct Sgd<T: Scalar> {
    schedule: Schedule,
    momentum: f64,
    velocity: Option<FlatVector<T>>,
}

impl<T: Scalar> Sgd<T> {
    pub fn new(schedule: Schedule, momentum: f64) -> Result<Self> {
        schedule.validate()?;
        if !(0.0..1.0).contains(&momentum) {
            return Err(invalid("momentum", format!("must lie in [0, 1), got {momentum}")));
        }
        Ok(Self {
            schedule,
            momentum,
            velocity: None,
        })
    }
}

impl<T: Scalar> Optimizer<T> for Sgd<T> {
    fn name(&self) -> &'static str {
        "sgd"
    }

    fn lr(&self, t: usize) -> f64 {
        self.schedule.lr(t - 1)
    }

    fn step(&mut self, t: usize, theta: &FlatVector<T>, grad: &FlatVector<T>) -> Result<FlatVector<T>> {
        let v = self.velocity.get_or_insert_with(|| FlatVector::zeros(theta.dim()));
        sgd_step(theta, grad, self.schedule.lr(t - 1), v, self.momentum)
    }
}

/// First/second moment estimates and step count.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T: Scalar> {
    pub m: FlatVector<T>,
    pub v: FlatVector<T>,
    pub t: u32,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(dim: usize) -> Self {
        Self {
            m: FlatVector::zeros(dim),
            v: FlatVector::zeros(dim),
            t: 0,
        }
    }
}

/// Adam with bias correction: `θ − η·m̂/(√v̂ + eps)`.
pub fn adam_step<T: Scalar>(
    theta: &FlatVector<T>,
    grad: &FlatVector<T>,
    lr: f64,
    state: &mut AdamState<T>,
    beta1: f64,
    beta2: f64,
    eps: f64,
) -> Result<FlatVector<T>> {
    check_dim(theta.dim(), grad.dim())?;
    check_dim(theta.dim(), state.m.dim())?;
    state.t += 1;
    let (b1, b2) = (T::lit(beta1), T::lit(beta2));
    state.m = state.m.lincomb(b1, grad, T::one() - b1);
    state.v = state.v.zip_map(grad, |v, g| b2 * v + (T::one() - b2) * g * g);
    let c1 = T::one() - T::lit(beta1.powi(state.t as i32));
    let c2 = T::one() - T::lit(beta2.powi(state.t as i32));
    let (eta, eps) = (T::lit(lr), T::lit(eps));
    let step = state.m.zip_map(&state.v, |m, v| (m / c1) / ((v / c2).sqrt() + eps));
    Ok(theta.lincomb(T::one(), &step, -eta))
}

#[derive(Debug, Clone)]
pub struct Adam<T: Scalar> {
    schedule: Schedule,
    beta1: f64,
    beta2: f64,
    eps: f64,
    state: Option<AdamState<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(schedule: Schedule, beta1: f64, beta2: f64, eps: f64) -> Result<Self> {
        schedule.validate()?;
        if !(0.0..1.0).contains(&beta1) {
            return Err(invalid("beta1", "must lie in [0, 1)"));
        }
        if !(0.0..1.0).contains(&beta2) {
            return Err(invalid("beta2", "must lie in [0, 1)"));
        }
        if !(eps > 0.0) {
            return Err(invalid("eps", "must be > 0"));
        }
        Ok(Self {
            schedule,
            beta1,
            beta2,
            eps,
            state: None,
        })
    }
}

impl<T: Scalar> Optimizer<T> for Adam<T> {
    fn name(&self) -> &'static str {
        "adam"
    }

    fn lr(&self, t: usize) -> f64 {
        self.schedule.lr(t - 1)
    }

    fn step(&mut self, t: usize, theta: &FlatVector<T>, grad: &FlatVector<T>) -> Result<FlatVector<T>> {
        let st = self.state.get_or_insert_with(|| AdamState::new(theta.dim()));
        adam_step(theta, grad, self.schedule.lr(t - 1), st, self.beta1, self.beta2, self.eps)
    }
}
