use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result};
use crate::scalar::Scalar;
use crate::vector::FlatVector;

/// Seeded, splittable random stream.
///
/// Identical seed and call sequence produce bit-identical output. Independent streams are
/// derived with [`RngStream::split`], which keys a distinct ChaCha stream on the same seed
/// so that per-worker or per-chunk draws never depend on the draw order of other streams.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    rng: ChaCha12Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    fn with_stream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, stream, rng }
    }

    /// Child stream `id`; stream 0 is reserved for the root.
    pub fn split(&self, id: u64) -> Self {
        Self::with_stream(self.seed, id.wrapping_add(1))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Number of 32-bit words consumed so far.
    pub fn position(&self) -> u128 {
        self.rng.get_word_pos()
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Uniform draw from [lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.rng.random::<f64>()
    }

    /// Uniform index in [0, n).
    pub fn index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    pub fn shuffle<U>(&mut self, items: &mut [U]) {
        use rand::seq::SliceRandom;
        items.shuffle(&mut self.rng);
    }

    /// Vector of i.i.d. N(0, sigma²) entries. `sigma = 0` returns zeros without consuming draws.
    pub fn gaussian_noise<T: Scalar>(&mut self, dim: usize, sigma: f64) -> Result<FlatVector<T>> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(invalid("sigma", format!("must be finite and >= 0, got {sigma}")));
        }
        if sigma == 0.0 {
            return Ok(FlatVector::zeros(dim));
        }
        let values = (0..dim)
            .map(|_| T::lit(sigma * self.standard_normal()))
            .collect();
        Ok(FlatVector::from_vec_unchecked(values))
    }
}

/// Free-function form of [`RngStream::gaussian_noise`].
pub fn gaussian_noise<T: Scalar>(rng: &mut RngStream, dim: usize, sigma: f64) -> Result<FlatVector<T>> {
    rng.gaussian_noise(dim, sigma)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_sigma_is_zero_vector() {
        let mut rng = RngStream::new(1);
        let v: FlatVector<f64> = rng.gaussian_noise(3, 0.0).unwrap();
        assert_eq!(v.as_slice(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn negative_sigma_rejected() {
        let mut rng = RngStream::new(1);
        assert!(rng.gaussian_noise::<f64>(3, -0.1).is_err());
        assert!(rng.gaussian_noise::<f64>(3, f64::NAN).is_err());
    }

    #[test]
    fn same_seed_same_vector() {
        let a: FlatVector<f64> = RngStream::new(7).gaussian_noise(50, 1.0).unwrap();
        let b: FlatVector<f64> = RngStream::new(7).gaussian_noise(50, 1.0).unwrap();
        assert!(a.bit_eq(&b));
        let c: FlatVector<f64> = RngStream::new(8).gaussian_noise(50, 1.0).unwrap();
        assert!(!a.bit_eq(&c));
    }

    #[test]
    fn split_streams_are_independent_of_parent_position() {
        let root = RngStream::new(3);
        let mut advanced = root.clone();
        advanced.standard_normal();
        let a: FlatVector<f64> = root.split(2).gaussian_noise(8, 1.0).unwrap();
        let b: FlatVector<f64> = advanced.split(2).gaussian_noise(8, 1.0).unwrap();
        assert!(a.bit_eq(&b));
        let c: FlatVector<f64> = root.split(3).gaussian_noise(8, 1.0).unwrap();
        assert!(!a.bit_eq(&c));
    }

    #[test]
    fn sample_variance_and_mean() {
        let n = 100_000;
        let sigma = 0.2;
        let v: FlatVector<f64> = RngStream::new(42).gaussian_noise(n, sigma).unwrap();
        let mean = v.iter().sum::<f64>() / n as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((var - 0.04).abs() <= 0.05 * 0.04, "var {var}");
        assert!(mean.abs() <= 5.0 * sigma / (n as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn position_advances() {
        let mut rng = RngStream::new(0);
        let p0 = rng.position();
        rng.standard_normal();
        assert!(rng.position() > p0);
    }
}
