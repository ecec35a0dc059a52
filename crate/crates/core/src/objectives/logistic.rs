use crate::error::{check_dim, invalid, Result};
use crate::rng::RngStream;
use crate::scalar::Scalar;
use crate::vector::FlatVector;

use super::{add_weight_decay, chunk_indices, mean_of, ChunkSum, Dataset, Objective};

/// Numerically stable `ln(1 + e^z)`.
fn softplus<T: Scalar>(z: T) -> T {
    if z > T::zero() {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// Summed negative log-likelihood and gradient over `batch`; θ = (w, bias).
fn logistic_sums<T: Scalar>(data: &Dataset<T>, batch: &[usize], theta: &FlatVector<T>) -> Result<(T, FlatVector<T>)> {
    let m = data.feature_dim();
    check_dim(m + 1, theta.dim())?;
    data.check_batch(batch)?;
    let w = theta.as_slice();
    let mut loss = T::zero();
    let mut grad = vec![T::zero(); m + 1];
    for &i in batch {
        let label = data.label(i);
        if label > 1 {
            return Err(invalid("labels", format!("logistic regression needs binary labels, got {label}")));
        }
        let x = data.row(i);
        let z = x.iter().zip(w).fold(w[m], |acc, (&a, &b)| acc + a * b);
        let y = if label == 1 { T::one() } else { T::zero() };
        loss = loss + softplus(z) - y * z;
        let r = sigmoid(z) - y;
        for (g, &xj) in grad.iter_mut().zip(x) {
            *g = *g + r * xj;
        }
        grad[m] = grad[m] + r;
    }
    Ok((loss, FlatVector::from_vec_unchecked(grad)))
}

/// Mean binary cross-entropy over `batch` plus `½·wd·‖θ‖²`.
pub fn logistic_loss_grad<T: Scalar>(
    data: &Dataset<T>,
    batch: &[usize],
    theta: &FlatVector<T>,
    wd: T,
) -> Result<(T, FlatVector<T>)> {
    let (loss_sum, grad_sum) = logistic_sums(data, batch, theta)?;
    let (loss, grad) = mean_of(&ChunkSum {
        loss_sum,
        grad_sum,
        count: batch.len(),
    })?;
    Ok(add_weight_decay(theta, wd, loss, grad))
}

#[derive(Debug, Clone)]
pub struct LogisticObjective<T: Scalar> {
    data: Dataset<T>,
    wd: T,
}

impl<T: Scalar> LogisticObjective<T> {
    pub fn new(data: Dataset<T>, wd: f64) -> Result<Self> {
        if data.labels().iter().any(|&l| l > 1) {
            return Err(invalid("labels", "logistic regression needs binary labels"));
        }
        Ok(Self { data, wd: T::lit(wd) })
    }

    pub fn data(&self) -> &Dataset<T> {
        &self.data
    }

    /// Fraction of examples classified correctly at threshold 0.5.
    pub fn accuracy(&self, theta: &FlatVector<T>) -> f64 {
        let m = self.data.feature_dim();
        let w = theta.as_slice();
        let correct = (0..self.data.len())
            .filter(|&i| {
                let z = self.data.row(i).iter().zip(w).fold(w[m], |acc, (&a, &b)| acc + a * b);
                (z > T::zero()) == (self.data.label(i) == 1)
            })
            .count();
        correct as f64 / self.data.len() as f64
    }
}

impl<T: Scalar> Objective<T> for LogisticObjective<T> {
    fn dim(&self) -> usize {
        self.data.feature_dim() + 1
    }

    fn chunk_sum(
        &self,
        theta: &FlatVector<T>,
        chunk: usize,
        chunks: usize,
        batch: Option<usize>,
        rng: &mut RngStream,
    ) -> Result<ChunkSum<T>> {
        let idx = chunk_indices(self.data.len(), chunk, chunks, batch, rng)?;
        let (loss_sum, grad_sum) = logistic_sums(&self.data, &idx, theta)?;
        Ok(ChunkSum {
            loss_sum,
            grad_sum,
            count: idx.len(),
        })
    }

    fn finalize(&self, theta: &FlatVector<T>, total: ChunkSum<T>) -> Result<(T, FlatVector<T>)> {
        let (loss, grad) = mean_of(&total)?;
        Ok(add_weight_decay(theta, self.wd, loss, grad))
    }

    fn full(&self, theta: &FlatVector<T>) -> Result<(T, FlatVector<T>)> {
        let all: Vec<usize> = (0..self.data.len()).collect();
        logistic_loss_grad(&self.data, &all, theta, self.wd)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{finite_diff_grad, synth_blobs, DEFAULT_FD_STEP};

    type V = FlatVector<f64>;

    #[test]
    fn zero_parameters_give_ln2() {
        let data = Dataset::new(vec![1.0, 2.0, -1.0, 0.5, 3.0, 1.0], 2, vec![1, 0, 1], 2).unwrap();
        let batch = [0, 1, 2];
        let (l, g) = logistic_loss_grad(&data, &batch, &V::zeros(3), 0.0).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
        // −mean((y − ½)·[x, 1])
        let mut expected = [0.0; 3];
        for &i in &batch {
            let c = data.label(i) as f64 - 0.5;
            expected[0] -= c * data.row(i)[0] / 3.0;
            expected[1] -= c * data.row(i)[1] / 3.0;
            expected[2] -= c / 3.0;
        }
        for j in 0..3 {
            assert!((g[j] - expected[j]).abs() < 1e-15);
        }
    }

    #[test]
    fn single_sample_hand_value() {
        let data = Dataset::new(vec![1.0], 1, vec![1], 2).unwrap();
        let (_, g) = logistic_loss_grad(&data, &[0], &V::zeros(2), 0.0).unwrap();
        assert_eq!(g.as_slice(), &[-0.5, -0.5]);
    }

    #[test]
    fn empty_batch_rejected() {
        let data = Dataset::new(vec![1.0], 1, vec![1], 2).unwrap();
        assert!(logistic_loss_grad(&data, &[], &V::zeros(2), 0.0).is_err());
    }

    #[test]
    fn matches_finite_differences() {
        let mut rng = RngStream::new(21);
        let data: Dataset<f64> = synth_blobs(&mut rng, 40, 3, 2, 2.0).unwrap();
        let batch: Vec<usize> = (0..40).collect();
        for _ in 0..20 {
            let theta: V = rng.gaussian_noise(4, 1.0).unwrap();
            let (_, g) = logistic_loss_grad(&data, &batch, &theta, 0.01).unwrap();
            let fd = finite_diff_grad(
                |t: &V| Ok(logistic_loss_grad(&data, &batch, t, 0.01)?.0),
                &theta,
                DEFAULT_FD_STEP,
            )
            .unwrap();
            let rel = g.sub(&fd).norm() / g.norm().max(1e-12);
            assert!(rel <= 1e-6, "rel {rel}");
        }
    }

    #[test]
    fn stable_for_large_margins() {
        let data = Dataset::new(vec![1.0], 1, vec![0], 2).unwrap();
        let theta = V::from_f64(&[800.0, 0.0]).unwrap();
        let (l, g) = logistic_loss_grad(&data, &[0], &theta, 0.0).unwrap();
        assert!((l - 800.0).abs() < 1e-9);
        assert!(g.is_finite());
    }
}
