use std::ops::Index;

use crate::error::{check_dim, Error, Result};
use crate::scalar::Scalar;

/// Dense parameter-space vector with a fixed dimension and finite entries.
///
/// Element-wise arithmetic methods panic on a dimension mismatch (a programming error);
/// the `try_*` variants report it as [`Error::DimensionMismatch`] instead.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FlatVector<T: Scalar> {
    values: Vec<T>,
}

impl<T: Scalar> FlatVector<T> {
    /// Builds a vector, rejecting NaN and infinite entries.
    pub fn new(values: Vec<T>) -> Result<Self> {
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { values })
    }

    pub fn from_f64(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&v| T::lit(v)).collect())
    }

    /// Wraps values without the finiteness check. Used internally on hot paths where the
    /// inputs are already known to be finite, and by divergence detection which must be
    /// able to hold the offending iterate.
    pub fn from_vec_unchecked(values: Vec<T>) -> Self {
        Self { values }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            values: vec![T::zero(); dim],
        }
    }

    pub fn filled(dim: usize, value: T) -> Self {
        Self {
            values: vec![value; dim],
        }
    }

    /// Standard basis vector e_i.
    pub fn basis(dim: usize, i: usize) -> Self {
        let mut v = Self::zeros(dim);
        v.values[i] = T::one();
        v
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<T> {
        self.values
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.to_f64_lossy()).collect()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.values.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    fn assert_same(&self, other: &Self) {
        assert_eq!(
            self.dim(),
            other.dim(),
            "FlatVector dimension mismatch: {} vs {}",
            self.dim(),
            other.dim()
        );
    }

    pub fn dot(&self, other: &Self) -> T {
        self.assert_same(other);
        self.values
            .iter()
            .zip(&other.values)
            .fold(T::zero(), |acc, (&a, &b)| acc + a * b)
    }

    pub fn try_dot(&self, other: &Self) -> Result<T> {
        check_dim(self.dim(), other.dim())?;
        Ok(self.dot(other))
    }

    pub fn norm_sq(&self) -> T {
        self.dot(self)
    }

    pub fn norm(&self) -> T {
        self.norm_sq().sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.values
            .iter()
            .fold(T::zero(), |acc, v| acc.max(v.abs()))
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        check_dim(self.dim(), other.dim())?;
        Ok(self.add(other))
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self> {
        check_dim(self.dim(), other.dim())?;
        Ok(self.sub(other))
    }

    pub fn scale(&self, a: T) -> Self {
        self.map(|v| a * v)
    }

    /// `a·self + b·other`
    pub fn lincomb(&self, a: T, other: &Self, b: T) -> Self {
        self.zip_map(other, |x, y| a * x + b * y)
    }

    /// In place `self += a·x`.
    pub fn axpy(&mut self, a: T, x: &Self) {
        self.assert_same(x);
        for (v, &xi) in self.values.iter_mut().zip(&x.values) {
            *v = *v + a * xi;
        }
    }

    pub fn scale_mut(&mut self, a: T) {
        for v in &mut self.values {
            *v = a * *v;
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        self.assert_same(other);
        Self {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// Concatenates vectors in order.
    pub fn concat(parts: &[Self]) -> Self {
        Self {
            values: parts.iter().flat_map(|p| p.values.iter().copied()).collect(),
        }
    }

    /// Bitwise equality, distinguishing -0.0 from 0.0.
    pub fn bit_eq(&self, other: &Self) -> bool {
        self.dim() == other.dim()
            && self
                .values
                .iter()
                .zip(&other.values)
                .all(|(a, b)| a.to_f64_lossy().to_bits() == b.to_f64_lossy().to_bits())
    }
}

impl<T: Scalar> Index<usize> for FlatVector<T> {
    type Output = T;

    fn index(&self, i: usize) -> &T {
        &self.values[i]
    }
}

impl<T: Scalar> AsRef<[T]> for FlatVector<T> {
    fn as_ref(&self) -> &[T] {
        &self.values
    }
}
