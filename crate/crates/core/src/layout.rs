use std::ops::Range;

use crate::error::{check_dim, invalid, Error, Result};
use crate::scalar::Scalar;
use crate::vector::FlatVector;

/// Partition of `[0, d)` into contiguous, non-empty blocks, each owned by one worker.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockLayout {
    ranges: Vec<Range<usize>>,
    worker_of_block: Vec<usize>,
    workers: usize,
}

fn ranges_from_sizes(block_sizes: &[usize], d: usize) -> Result<Vec<Range<usize>>> {
    if block_sizes.is_empty() {
        return Err(Error::InvalidLayout("at least one block is required".into()));
    }
    if let Some(i) = block_sizes.iter().position(|&s| s == 0) {
        return Err(Error::InvalidLayout(format!("block {i} has zero size")));
    }
    check_dim(d, block_sizes.iter().sum())?;
    let mut start = 0;
    Ok(block_sizes
        .iter()
        .map(|&s| {
            let r = start..start + s;
            start += s;
            r
        })
        .collect())
}

/// Blocks with the given sizes, assigned to `p` workers round-robin by block index.
pub fn build_block_layout(block_sizes: &[usize], p: usize, d: usize) -> Result<BlockLayout> {
    if p == 0 {
        return Err(invalid("p", "worker count must be >= 1"));
    }
    let ranges = ranges_from_sizes(block_sizes, d)?;
    let worker_of_block = (0..ranges.len()).map(|i| i % p).collect();
    Ok(BlockLayout {
        ranges,
        worker_of_block,
        workers: p,
    })
}

/// Blocks with the given sizes, assigned greedily largest-first to the least-loaded worker.
/// Ties go to the lower block index and the lower worker id.
pub fn build_balanced_layout(block_sizes: &[usize], p: usize, d: usize) -> Result<BlockLayout> {
    if p == 0 {
        return Err(invalid("p", "worker count must be >= 1"));
    }
    let ranges = ranges_from_sizes(block_sizes, d)?;
    let mut order: Vec<usize> = (0..ranges.len()).collect();
    order.sort_by(|&a, &b| block_sizes[b].cmp(&block_sizes[a]).then(a.cmp(&b)));
    let mut load = vec![0usize; p];
    let mut worker_of_block = vec![0; ranges.len()];
    for i in order {
        let w = (0..p).min_by_key(|&w| (load[w], w)).unwrap();
        load[w] += block_sizes[i];
        worker_of_block[i] = w;
    }
    Ok(BlockLayout {
        ranges,
        worker_of_block,
        workers: p,
    })
}

/// Splits `d` into `n` contiguous blocks whose sizes differ by at most one.
pub fn equal_block_sizes(d: usize, n: usize) -> Result<Vec<usize>> {
    if n == 0 || n > d {
        return Err(Error::InvalidLayout(format!(
            "cannot split {d} parameters into {n} non-empty blocks"
        )));
    }
    Ok((0..n).map(|i| d / n + usize::from(i < d % n)).collect())
}

impl BlockLayout {
    /// One block spanning `[0, d)` on a single worker.
    pub fn single(d: usize) -> Result<Self> {
        build_block_layout(&[d], 1, d)
    }

    /// Explicit assignment. Every worker id must be `< workers`.
    pub fn with_assignment(block_sizes: &[usize], worker_of_block: Vec<usize>, workers: usize) -> Result<Self> {
        let d = block_sizes.iter().sum();
        let ranges = ranges_from_sizes(block_sizes, d)?;
        check_dim(ranges.len(), worker_of_block.len())?;
        if workers == 0 {
            return Err(invalid("p", "worker count must be >= 1"));
        }
        if let Some(&w) = worker_of_block.iter().find(|&&w| w >= workers) {
            return Err(Error::InvalidLayout(format!(
                "block assigned to worker {w} but only {workers} workers exist"
            )));
        }
        Ok(Self {
            ranges,
            worker_of_block,
            workers,
        })
    }

    pub fn dim(&self) -> usize {
        self.ranges.last().map_or(0, |r| r.end)
    }

    pub fn num_blocks(&self) -> usize {
        self.ranges.len()
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn ranges(&self) -> &[Range<usize>] {
        &self.ranges
    }

    pub fn range(&self, i: usize) -> Result<Range<usize>> {
        self.ranges
            .get(i)
            .cloned()
            .ok_or(Error::BlockOutOfRange {
                index: i,
                blocks: self.ranges.len(),
            })
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        self.ranges.iter().map(|r| r.len()).collect()
    }

    pub fn worker_of(&self, i: usize) -> usize {
        self.worker_of_block[i]
    }

    pub fn worker_of_block(&self) -> &[usize] {
        &self.worker_of_block
    }

    pub fn blocks_of_worker(&self, w: usize) -> Vec<usize> {
        (0..self.ranges.len())
            .filter(|&i| self.worker_of_block[i] == w)
            .collect()
    }

    pub fn owned_dims(&self, w: usize) -> usize {
        self.blocks_of_worker(w)
            .into_iter()
            .map(|i| self.ranges[i].len())
            .sum()
    }

    /// Copy of the sub-vector for block `i`.
    pub fn block_view<T: Scalar>(&self, v: &FlatVector<T>, i: usize) -> Result<FlatVector<T>> {
        check_dim(self.dim(), v.dim())?;
        let r = self.range(i)?;
        Ok(FlatVector::from_vec_unchecked(v.as_slice()[r].to_vec()))
    }

    /// Writes `block` back into block `i` of `v`.
    pub fn scatter<T: Scalar>(&self, v: &mut FlatVector<T>, i: usize, block: &FlatVector<T>) -> Result<()> {
        check_dim(self.dim(), v.dim())?;
        let r = self.range(i)?;
        check_dim(r.len(), block.dim())?;
        v.as_mut_slice()[r].copy_from_slice(block.as_slice());
        Ok(())
    }

    /// All block views in block order.
    pub fn split<T: Scalar>(&self, v: &FlatVector<T>) -> Result<Vec<FlatVector<T>>> {
        (0..self.num_blocks()).map(|i| self.block_view(v, i)).collect()
    }
}

/// Free-function form of [`BlockLayout::block_view`].
pub fn block_view<T: Scalar>(v: &FlatVector<T>, layout: &BlockLayout, i: usize) -> Result<FlatVector<T>> {
    layout.block_view(v, i)
}
