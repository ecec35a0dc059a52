use crate::error::{check_dim, invalid, Result};
use crate::rng::RngStream;
use crate::scalar::Scalar;
use crate::vector::FlatVector;

use super::{add_weight_decay, chunk_indices, mean_of, ChunkSum, Dataset, Objective};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    fn apply<T: Scalar>(self, z: T) -> T {
        match self {
            Self::Tanh => z.tanh(),
            Self::Relu => z.max(T::zero()),
        }
    }

    /// Derivative expressed through the activation output `a`.
    fn derivative<T: Scalar>(self, a: T) -> T {
        match self {
            Self::Tanh => T::one() - a * a,
            Self::Relu => {
                if a > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
        }
    }
}

/// Fully connected network with softmax cross-entropy output.
///
/// Parameters are laid out layer by layer; each layer stores its weight matrix
/// (`out × in`, row-major) followed by its bias.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpSpec {
    widths: Vec<usize>,
    activation: Activation,
    wd: f64,
}

impl MlpSpec {
    pub fn new(widths: Vec<usize>, activation: Activation, wd: f64) -> Result<Self> {
        if widths.len() < 2 {
            return Err(invalid("widths", "need at least input and output layers"));
        }
        if widths.iter().any(|&w| w == 0) {
            return Err(invalid("widths", "all widths must be positive"));
        }
        if !(wd >= 0.0) {
            return Err(invalid("wd", "must be >= 0"));
        }
        Ok(Self {
            widths,
            activation,
            wd,
        })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn wd(&self) -> f64 {
        self.wd
    }

    /// Parameter count per layer (weights plus bias).
    pub fn layer_sizes(&self) -> Vec<usize> {
        self.widths.windows(2).map(|w| w[0] * w[1] + w[1]).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layer_sizes().iter().sum()
    }

    /// Per-layer uniform draws in `[−1/√fan_in, 1/√fan_in]`.
    pub fn init<T: Scalar>(&self, rng: &mut RngStream) -> FlatVector<T> {
        let mut out = Vec::with_capacity(self.param_count());
        for w in self.widths.windows(2) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            for _ in 0..(w[0] * w[1] + w[1]) {
                out.push(T::lit(rng.uniform(-bound, bound)));
            }
        }
        FlatVector::from_vec_unchecked(out)
    }

    /// Output logits for one input.
    fn forward<T: Scalar>(&self, params: &[T], x: &[T]) -> Vec<Vec<T>> {
        let layers = self.widths.len() - 1;
        let mut acts: Vec<Vec<T>> = vec![x.to_vec()];
        let mut offset = 0;
        for l in 0..layers {
            let (n_in, n_out) = (self.widths[l], self.widths[l + 1]);
            let w = &params[offset..offset + n_in * n_out];
            let b = &params[offset + n_in * n_out..offset + n_in * n_out + n_out];
            offset += n_in * n_out + n_out;
            let input = &acts[l];
            let out: Vec<T> = (0..n_out)
                .map(|o| {
                    let z = w[o * n_in..(o + 1) * n_in]
                        .iter()
                        .zip(input)
                        .fold(b[o], |acc, (&wi, &xi)| acc + wi * xi);
                    if l + 1 < layers {
                        self.activation.apply(z)
                    } else {
                        z
                    }
                })
                .collect();
            acts.push(out);
        }
        acts
    }

    /// Summed cross-entropy and gradient over `batch`.
    fn sums<T: Scalar>(&self, params: &FlatVector<T>, data: &Dataset<T>, batch: &[usize]) -> Result<(T, Vec<T>)> {
        check_dim(self.param_count(), params.dim())?;
        check_dim(self.widths[0], data.feature_dim())?;
        let classes = *self.widths.last().unwrap();
        if data.classes() > classes {
            return Err(invalid("widths", format!("output width {classes} < {} classes", data.classes())));
        }
        data.check_batch(batch)?;
        let p = params.as_slice();
        let layers = self.widths.len() - 1;
        let mut offsets = Vec::with_capacity(layers);
        let mut off = 0;
        for w in self.widths.windows(2) {
            offsets.push(off);
            off += w[0] * w[1] + w[1];
        }
        let mut grad = vec![T::zero(); p.len()];
        let mut loss = T::zero();
        for &i in batch {
            let acts = self.forward(p, data.row(i));
            let logits = &acts[layers];
            let max = logits.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
            let exps: Vec<T> = logits.iter().map(|&z| (z - max).exp()).collect();
            let total: T = exps.iter().copied().sum();
            let label = data.label(i);
            loss = loss + (total.ln() + max - logits[label]);
            // dL/dz for the output layer
            let mut delta: Vec<T> = exps.iter().map(|&e| e / total).collect();
            delta[label] = delta[label] - T::one();
            for l in (0..layers).rev() {
                let (n_in, n_out) = (self.widths[l], self.widths[l + 1]);
                let input = &acts[l];
                let o = offsets[l];
                for r in 0..n_out {
                    let dr = delta[r];
                    let row = &mut grad[o + r * n_in..o + (r + 1) * n_in];
                    for (g, &xi) in row.iter_mut().zip(input) {
                        *g = *g + dr * xi;
                    }
                    let bi = o + n_in * n_out + r;
                    grad[bi] = grad[bi] + dr;
                }
                if l > 0 {
                    let w = &p[o..o + n_in * n_out];
                    delta = (0..n_in)
                        .map(|c| {
                            let back = (0..n_out).fold(T::zero(), |acc, r| acc + w[r * n_in + c] * delta[r]);
                            back * self.activation.derivative(input[c])
                        })
                        .collect();
                }
            }
        }
        Ok((loss, grad))
    }

    /// Predicted class for one input.
    pub fn predict<T: Scalar>(&self, params: &FlatVector<T>, x: &[T]) -> usize {
        let acts = self.forward(params.as_slice(), x);
        let logits = acts.last().unwrap();
        (0..logits.len())
            .max_by(|&a, &b| logits[a].partial_cmp(&logits[b]).unwrap_or(std::cmp::Ordering::Equal))
            .unwrap_or(0)
    }
}

/// Mean cross-entropy over `batch` plus `½·wd·‖params‖²`.
pub fn mlp_loss_grad<T: Scalar>(
    spec: &MlpSpec,
    params: &FlatVector<T>,
    data: &Dataset<T>,
    batch: &[usize],
) -> Result<(T, FlatVector<T>)> {
    let (loss_sum, grad) = spec.sums(params, data, batch)?;
    let (loss, grad) = mean_of(&ChunkSum {
        loss_sum,
        grad_sum: FlatVector::from_vec_unchecked(grad),
        count: batch.len(),
    })?;
    Ok(add_weight_decay(params, T::lit(spec.wd), loss, grad))
}

#[derive(Debug, Clone)]
pub struct MlpObjective<T: Scalar> {
    spec: MlpSpec,
    data: Dataset<T>,
}

impl<T: Scalar> MlpObjective<T> {
    pub fn new(spec: MlpSpec, data: Dataset<T>) -> Result<Self> {
        check_dim(spec.widths[0], data.feature_dim())?;
        if data.classes() > *spec.widths.last().unwrap() {
            return Err(invalid("widths", "output width smaller than class count"));
        }
        Ok(Self { spec, data })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn data(&self) -> &Dataset<T> {
        &self.data
    }

    pub fn accuracy(&self, params: &FlatVector<T>) -> f64 {
        let correct = (0..self.data.len())
            .filter(|&i| self.spec.predict(params, self.data.row(i)) == self.data.label(i))
            .count();
        correct as f64 / self.data.len() as f64
    }
}

impl<T: Scalar> Objective<T> for MlpObjective<T> {
    fn dim(&self) -> usize {
        self.spec.param_count()
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
        let (loss_sum, grad) = self.spec.sums(theta, &self.data, &idx)?;
        Ok(ChunkSum {
            loss_sum,
            grad_sum: FlatVector::from_vec_unchecked(grad),
            count: idx.len(),
        })
    }

    fn finalize(&self, theta: &FlatVector<T>, total: ChunkSum<T>) -> Result<(T, FlatVector<T>)> {
        let (loss, grad) = mean_of(&total)?;
        Ok(add_weight_decay(theta, T::lit(self.spec.wd), loss, grad))
    }

    fn full(&self, theta: &FlatVector<T>) -> Result<(T, FlatVector<T>)> {
        let all: Vec<usize> = (0..self.data.len()).collect();
        mlp_loss_grad(&self.spec, theta, &self.data, &all)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{finite_diff_grad, synth_blobs, DEFAULT_FD_STEP};

    type V = FlatVector<f64>;

    #[test]
    fn zero_weights_uniform_softmax() {
        let spec = MlpSpec::new(vec![2, 3, 2], Activation::Tanh, 0.0).unwrap();
        let data = Dataset::new(vec![1.0, 2.0, -1.0, 0.5], 2, vec![0, 1], 2).unwrap();
        let (l, _) = mlp_loss_grad(&spec, &V::zeros(spec.param_count()), &data, &[0, 1]).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn param_count() {
        let spec = MlpSpec::new(vec![2, 3, 4], Activation::Relu, 0.0).unwrap();
        assert_eq!(spec.layer_sizes(), vec![9, 16]);
        assert_eq!(spec.param_count(), 25);
        assert!(MlpSpec::new(vec![2], Activation::Relu, 0.0).is_err());
        assert!(MlpSpec::new(vec![2, 0, 1], Activation::Relu, 0.0).is_err());
    }

    #[test]
    fn shape_mismatch_rejected() {
        let spec = MlpSpec::new(vec![2, 3, 2], Activation::Tanh, 0.0).unwrap();
        let data = Dataset::new(vec![1.0, 2.0], 2, vec![0], 2).unwrap();
        assert!(mlp_loss_grad(&spec, &V::zeros(3), &data, &[0]).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = RngStream::new(5);
        let data: Dataset<f64> = synth_blobs(&mut rng, 8, 3, 3, 2.0).unwrap();
        let batch: Vec<usize> = (0..8).collect();
        for act in [Activation::Tanh, Activation::Relu] {
            let spec = MlpSpec::new(vec![3, 5, 3], act, 1e-3).unwrap();
            for _ in 0..10 {
                let params: V = spec.init(&mut rng);
                let (_, g) = mlp_loss_grad(&spec, &params, &data, &batch).unwrap();
                let fd = finite_diff_grad(
                    |p: &V| Ok(mlp_loss_grad(&spec, p, &data, &batch)?.0),
                    &params,
                    DEFAULT_FD_STEP,
                )
                .unwrap();
                let rel = g.sub(&fd).norm() / g.norm().max(1e-12);
                assert!(rel <= 1e-5, "{act:?} rel {rel}");
            }
        }
    }

    #[test]
    fn duplicating_batch_is_invariant() {
        let mut rng = RngStream::new(6);
        let data: Dataset<f64> = synth_blobs(&mut rng, 8, 2, 2, 2.0).unwrap();
        let spec = MlpSpec::new(vec![2, 4, 2], Activation::Tanh, 0.0).unwrap();
        let params: V = spec.init(&mut rng);
        let batch: Vec<usize> = (0..8).collect();
        let doubled: Vec<usize> = batch.iter().chain(batch.iter()).copied().collect();
        let (l1, g1) = mlp_loss_grad(&spec, &params, &data, &batch).unwrap();
        let (l2, g2) = mlp_loss_grad(&spec, &params, &data, &doubled).unwrap();
        assert!((l1 - l2).abs() <= 1e-15 * l1.abs().max(1.0));
        assert!(g1.sub(&g2).max_abs() <= 1e-15);
    }

    #[test]
    fn init_within_bounds() {
        let spec = MlpSpec::new(vec![4, 9, 2], Activation::Tanh, 0.0).unwrap();
        let p: V = spec.init(&mut RngStream::new(0));
        let (a, b) = p.as_slice().split_at(4 * 9 + 9);
        assert!(a.iter().all(|v| v.abs() <= 0.5));
        assert!(b.iter().all(|v| v.abs() <= 1.0 / 3.0));
    }
}
