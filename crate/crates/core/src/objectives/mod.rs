//! Differentiable objectives with chunked, order-deterministic gradient evaluation.
//!
//! Every objective splits a minibatch gradient into `G` fixed chunks. Each chunk draws from
//! its own random stream and its own data shard and returns raw sums. Sums are combined by
//! an ascending left fold and divided by the total count, then [`Objective::finalize`] adds
//! deterministic terms (the exact quadratic gradient, weight decay). Because the chunking
//! does not depend on how chunks are spread over workers, a run with any worker count that
//! divides `G` performs the same floating-point operations in the same order.

mod data;
mod finite_diff;
mod logistic;
mod mlp;
mod quadratic;

pub use data::{load_csv, parse_csv, synth_blobs, Dataset};
pub use finite_diff::{finite_diff_grad, DEFAULT_FD_STEP};
pub use logistic::{logistic_loss_grad, LogisticObjective};
pub use mlp::{mlp_loss_grad, Activation, MlpObjective, MlpSpec};
pub use quadratic::{quadratic_loss_grad, QuadraticObjective};

use std::ops::Range;

use crate::error::{check_dim, invalid, Error, Result};
use crate::matrix::DenseMatrix;
use crate::rng::RngStream;
use crate::scalar::Scalar;
use crate::vector::FlatVector;

/// Raw per-chunk sums before averaging.
#[derive(Debug, Clone, PartialEq)]
pub struct ChunkSum<T: Scalar> {
    pub loss_sum: T,
    pub grad_sum: FlatVector<T>,
    pub count: usize,
}

impl<T: Scalar> ChunkSum<T> {
    pub fn zero(dim: usize) -> Self {
        Self {
            loss_sum: T::zero(),
            grad_sum: FlatVector::zeros(dim),
            count: 0,
        }
    }
}

/// Ascending left fold of chunk sums.
pub fn reduce_chunks<T: Scalar>(parts: &[ChunkSum<T>]) -> Result<ChunkSum<T>> {
    let first = parts.first().ok_or(Error::EmptyBatch)?;
    let mut acc = first.clone();
    for p in &parts[1..] {
        check_dim(acc.grad_sum.dim(), p.grad_sum.dim())?;
        acc.loss_sum = acc.loss_sum + p.loss_sum;
        acc.grad_sum.axpy(T::one(), &p.grad_sum);
        acc.count += p.count;
    }
    Ok(acc)
}

pub trait Objective<T: Scalar>: Send + Sync {
    fn dim(&self) -> usize;

    /// Sums for chunk `chunk` of `chunks`. `batch` is the total minibatch size across all
    /// chunks (`None` means the full shard).
    fn chunk_sum(
        &self,
        theta: &FlatVector<T>,
        chunk: usize,
        chunks: usize,
        batch: Option<usize>,
        rng: &mut RngStream,
    ) -> Result<ChunkSum<T>>;

    /// Turns the reduced sums into (loss, gradient) of the full objective.
    fn finalize(&self, theta: &FlatVector<T>, total: ChunkSum<T>) -> Result<(T, FlatVector<T>)>;

    /// Deterministic full (loss, gradient): no noise, all data.
    fn full(&self, theta: &FlatVector<T>) -> Result<(T, FlatVector<T>)>;

    /// Deterministic full objective value.
    fn loss(&self, theta: &FlatVector<T>) -> Result<T> {
        Ok(self.full(theta)?.0)
    }

    /// Exact Hessian when the objective is quadratic.
    fn hessian(&self) -> Option<&DenseMatrix<T>> {
        None
    }

    /// Lower and upper curvature bounds when known.
    fn curvature_bounds(&self) -> Option<(f64, f64)> {
        None
    }
}

/// Index range of shard `chunk` among `chunks` contiguous shards of `n` examples.
pub fn shard_range(n: usize, chunk: usize, chunks: usize) -> Range<usize> {
    (chunk * n / chunks)..((chunk + 1) * n / chunks)
}

/// Indices used by one chunk: the whole shard, or `batch / chunks` draws with replacement.
pub(crate) fn chunk_indices(
    n: usize,
    chunk: usize,
    chunks: usize,
    batch: Option<usize>,
    rng: &mut RngStream,
) -> Result<Vec<usize>> {
    let shard = shard_range(n, chunk, chunks);
    if shard.is_empty() {
        return Err(Error::EmptyBatch);
    }
    match batch {
        None => Ok(shard.collect()),
        Some(b) => {
            let per = (b / chunks).max(1);
            Ok((0..per).map(|_| shard.start + rng.index(shard.len())).collect())
        }
    }
}

/// Per-chunk random streams plus minibatch settings; the single gradient entry point
/// shared by monolithic and distributed runs.
#[derive(Debug, Clone)]
pub struct ChunkedGradient {
    chunks: usize,
    batch: Option<usize>,
    streams: Vec<RngStream>,
}

impl ChunkedGradient {
    /// Chunk `j` uses stream `root.split(j)`.
    pub fn new(root: &RngStream, chunks: usize, batch: Option<usize>) -> Result<Self> {
        if chunks == 0 {
            return Err(invalid("chunks", "must be >= 1"));
        }
        if batch == Some(0) {
            return Err(Error::EmptyBatch);
        }
        Ok(Self {
            chunks,
            batch,
            streams: (0..chunks as u64).map(|j| root.split(j)).collect(),
        })
    }

    pub fn chunks(&self) -> usize {
        self.chunks
    }

    pub fn chunk<T: Scalar, O: Objective<T> + ?Sized>(
        &mut self,
        obj: &O,
        theta: &FlatVector<T>,
        j: usize,
    ) -> Result<ChunkSum<T>> {
        obj.chunk_sum(theta, j, self.chunks, self.batch, &mut self.streams[j])
    }

    /// Sums of a contiguous range of chunks, in ascending order.
    pub fn chunk_range<T: Scalar, O: Objective<T> + ?Sized>(
        &mut self,
        obj: &O,
        theta: &FlatVector<T>,
        range: Range<usize>,
    ) -> Result<Vec<ChunkSum<T>>> {
        range.map(|j| self.chunk(obj, theta, j)).collect()
    }

    /// Full minibatch (loss, gradient) with all chunks evaluated locally.
    pub fn evaluate<T: Scalar, O: Objective<T> + ?Sized>(
        &mut self,
        obj: &O,
        theta: &FlatVector<T>,
    ) -> Result<(T, FlatVector<T>)> {
        check_dim(obj.dim(), theta.dim())?;
        let parts = self.chunk_range(obj, theta, 0..self.chunks)?;
        obj.finalize(theta, reduce_chunks(&parts)?)
    }
}

/// `sum / count` as a mean.
pub(crate) fn mean_of<T: Scalar>(total: &ChunkSum<T>) -> Result<(T, FlatVector<T>)> {
    if total.count == 0 {
        return Err(Error::EmptyBatch);
    }
    let n = T::from_usize(total.count).unwrap();
    Ok((total.loss_sum / n, total.grad_sum.scale(T::one() / n)))
}

/// Adds `½·wd·‖θ‖²` and `wd·θ`.
pub(crate) fn add_weight_decay<T: Scalar>(
    theta: &FlatVector<T>,
    wd: T,
    loss: T,
    mut grad: FlatVector<T>,
) -> (T, FlatVector<T>) {
    if wd == T::zero() {
        return (loss, grad);
    }
    let half = T::lit(0.5);
    grad.axpy(wd, theta);
    (loss + half * wd * theta.norm_sq(), grad)
}
