use crate::error::{check_dim, invalid, Error, Result};
use crate::matrix::DenseMatrix;
use crate::rng::RngStream;
use crate::scalar::Scalar;
use crate::vector::FlatVector;

use super::{ChunkSum, Objective};

/// `L(θ) = ½θᵀBθ + cᵀθ` with additive Gaussian gradient noise of std `noise_sigma`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticObjective<T: Scalar> {
    b: DenseMatrix<T>,
    c: Option<FlatVector<T>>,
    noise_sigma: f64,
    lambda_min: f64,
    lambda_max: f64,
}

impl<T: Scalar> QuadraticObjective<T> {
    pub fn new(b: DenseMatrix<T>, c: Option<FlatVector<T>>, noise_sigma: f64) -> Result<Self> {
        if !b.is_square() {
            return Err(invalid("B", "must be square"));
        }
        if b.asymmetry().to_f64_lossy() > 1e-12 {
            return Err(invalid("B", "must be symmetric"));
        }
        if let Some(c) = &c {
            check_dim(b.rows(), c.dim())?;
        }
        if !(noise_sigma >= 0.0) || !noise_sigma.is_finite() {
            return Err(invalid("noise_sigma", "must be finite and >= 0"));
        }
        let ev = b.symmetric_eigenvalues()?;
        let lambda_min = ev.first().copied().unwrap_or(0.0);
        let lambda_max = ev.last().copied().unwrap_or(0.0);
        if !(lambda_min > 0.0) {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(Self {
            b,
            c,
            noise_sigma,
            lambda_min,
            lambda_max,
        })
    }

    pub fn diagonal(diag: &[f64], noise_sigma: f64) -> Result<Self> {
        let d: Vec<T> = diag.iter().map(|&v| T::lit(v)).collect();
        Self::new(DenseMatrix::diag(&d), None, noise_sigma)
    }

    /// `½‖θ‖²` in `d` dimensions.
    pub fn isotropic(d: usize, noise_sigma: f64) -> Result<Self> {
        Self::diagonal(&vec![1.0; d], noise_sigma)
    }

    pub fn b(&self) -> &DenseMatrix<T> {
        &self.b
    }

    pub fn noise_sigma(&self) -> f64 {
        self.noise_sigma
    }

    pub fn lambda_min(&self) -> f64 {
        self.lambda_min
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    pub fn with_noise(&self, noise_sigma: f64) -> Result<Self> {
        Self::new(self.b.clone(), self.c.clone(), noise_sigma)
    }

    /// Noise-free loss and gradient.
    pub fn exact(&self, theta: &FlatVector<T>) -> Result<(T, FlatVector<T>)> {
        check_dim(self.b.cols(), theta.dim())?;
        let mut grad = self.b.matvec(theta)?;
        let mut loss = T::lit(0.5) * theta.dot(&grad);
        if let Some(c) = &self.c {
            loss = loss + c.dot(theta);
            grad.axpy(T::one(), c);
        }
        Ok((loss, grad))
    }
}

/// Loss and noisy gradient `Bθ + c + n`, `n ~ N(0, ε²I)`, from a single draw.
pub fn quadratic_loss_grad<T: Scalar>(
    obj: &QuadraticObjective<T>,
    theta: &FlatVector<T>,
    rng: &mut RngStream,
) -> Result<(T, FlatVector<T>)> {
    let (loss, mut grad) = obj.exact(theta)?;
    let noise = rng.gaussian_noise::<T>(theta.dim(), obj.noise_sigma)?;
    grad.axpy(T::one(), &noise);
    Ok((loss, grad))
}

impl<T: Scalar> Objective<T> for QuadraticObjective<T> {
    fn dim(&self) -> usize {
        self.b.rows()
    }

    /// Each chunk contributes noise of variance `chunks·ε²` and weight 1, so the chunk
    /// mean has variance `ε²`.
    fn chunk_sum(
        &self,
        theta: &FlatVector<T>,
        _chunk: usize,
        chunks: usize,
        _batch: Option<usize>,
        rng: &mut RngStream,
    ) -> Result<ChunkSum<T>> {
        check_dim(self.dim(), theta.dim())?;
        let sigma = self.noise_sigma * (chunks as f64).sqrt();
        Ok(ChunkSum {
            loss_sum: T::zero(),
            grad_sum: rng.gaussian_noise(theta.dim(), sigma)?,
            count: 1,
        })
    }

    fn finalize(&self, theta: &FlatVector<T>, total: ChunkSum<T>) -> Result<(T, FlatVector<T>)> {
        let (loss, mut grad) = self.exact(theta)?;
        if total.count == 0 {
            return Err(Error::EmptyBatch);
        }
        let inv = T::one() / T::from_usize(total.count).unwrap();
        grad.axpy(inv, &total.grad_sum);
        Ok((loss, grad))
    }

    fn full(&self, theta: &FlatVector<T>) -> Result<(T, FlatVector<T>)> {
        self.exact(theta)
    }

    fn hessian(&self) -> Option<&DenseMatrix<T>> {
        Some(&self.b)
    }

    fn curvature_bounds(&self) -> Option<(f64, f64)> {
        Some((self.lambda_min, self.lambda_max))
    }
}
