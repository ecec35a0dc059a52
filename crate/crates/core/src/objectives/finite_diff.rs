use crate::error::{invalid, Result};
use crate::scalar::Scalar;
use crate::vector::FlatVector;

pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Central differences `(f(θ+he_i) − f(θ−he_i)) / 2h` per coordinate.
pub fn finite_diff_grad<T, F>(f: F, theta: &FlatVector<T>, h: f64) -> Result<FlatVector<T>>
where
    T: Scalar,
    F: Fn(&FlatVector<T>) -> Result<T>,
{
    if !(h > 0.0) || !h.is_finite() {
        return Err(invalid("h", "must be finite and > 0"));
    }
    let step = T::lit(h);
    let two_h = step + step;
    let mut probe = theta.clone();
    let mut grad = Vec::with_capacity(theta.dim());
    for i in 0..theta.dim() {
        let orig = theta[i];
        probe.as_mut_slice()[i] = orig + step;
        let plus = f(&probe)?;
        probe.as_mut_slice()[i] = orig - step;
        let minus = f(&probe)?;
        probe.as_mut_slice()[i] = orig;
        grad.push((plus - minus) / two_h);
    }
    FlatVector::new(grad)
}
