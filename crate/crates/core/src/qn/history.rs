use std::collections::VecDeque;

use crate::error::{check_dim, invalid, Error, Result};
use crate::matrix::DenseMatrix;
use crate::scalar::Scalar;
use crate::vector::FlatVector;

/// Curvature pair with `ρ = 1/(sᵀŷ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvaturePair<T: Scalar> {
    s: FlatVector<T>,
    y_hat: FlatVector<T>,
    rho: T,
}

impl<T: Scalar> CurvaturePair<T> {
    /// Rejects pairs whose curvature `sᵀŷ` is not strictly positive.
    pub fn new(s: FlatVector<T>, y_hat: FlatVector<T>) -> Result<Self> {
        check_dim(s.dim(), y_hat.dim())?;
        let sy = s.dot(&y_hat);
        let rho = T::one() / sy;
        if !(sy > T::zero()) || !rho.is_finite() {
            return Err(Error::NonPositiveCurvature { sy: sy.to_f64_lossy() });
        }
        Ok(Self { s, y_hat, rho })
    }

    pub fn s(&self) -> &FlatVector<T> {
        &self.s
    }

    pub fn y_hat(&self) -> &FlatVector<T> {
        &self.y_hat
    }

    pub fn rho(&self) -> T {
        self.rho
    }
}

/// Bounded FIFO of curvature pairs, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryBuffer<T: Scalar> {
    pairs: VecDeque<CurvaturePair<T>>,
    capacity: usize,
    pushes: usize,
}

impl<T: Scalar> HistoryBuffer<T> {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(invalid("M", "history capacity must be >= 1"));
        }
        Ok(Self {
            pairs: VecDeque::with_capacity(capacity),
            capacity,
            pushes: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Total number of successful pushes.
    pub fn pushes(&self) -> usize {
        self.pushes
    }

    pub fn pairs(&self) -> impl Iterator<Item = &CurvaturePair<T>> {
        self.pairs.iter()
    }

    pub fn newest(&self) -> Option<&CurvaturePair<T>> {
        self.pairs.back()
    }

    pub fn dim(&self) -> Option<usize> {
        self.pairs.front().map(|p| p.s.dim())
    }

    /// Stored vector elements (`2 · pairs · dim`).
    pub fn stored_elems(&self) -> usize {
        self.pairs.iter().map(|p| p.s.dim() + p.y_hat.dim()).sum()
    }

    /// Appends a pair, evicting the oldest when over capacity.
    pub fn push_pair(&mut self, s: FlatVector<T>, y_hat: FlatVector<T>) -> Result<()> {
        if let Some(d) = self.dim() {
            check_dim(d, s.dim())?;
        }
        let pair = CurvaturePair::new(s, y_hat)?;
        if self.pairs.len() == self.capacity {
            self.pairs.pop_front();
        }
        self.pairs.push_back(pair);
        self.pushes += 1;
        Ok(())
    }

    /// Initial scaling `sᵀŷ / ŷᵀŷ` from the newest pair.
    pub fn initial_scale(&self) -> Result<T> {
        let p = self.newest().ok_or(Error::NoCurvature)?;
        Ok(p.s.dot(&p.y_hat) / p.y_hat.norm_sq())
    }

    /// Two-loop recursion: `Ĥ·g`.
    pub fn two_loop_apply(&self, g: &FlatVector<T>) -> Result<FlatVector<T>> {
        let gamma = self.initial_scale()?;
        check_dim(self.dim().unwrap(), g.dim())?;
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(self.pairs.len());
        for p in self.pairs.iter().rev() {
            let a = p.rho * p.s.dot(&q);
            q.axpy(-a, &p.y_hat);
            alphas.push(a);
        }
        let mut r = q;
        r.scale_mut(gamma);
        for (p, &a) in self.pairs.iter().zip(alphas.iter().rev()) {
            let b = p.rho * p.y_hat.dot(&r);
            r.axpy(a - b, &p.s);
        }
        Ok(r)
    }

    /// Dense inverse-Hessian approximation built by the explicit recursion
    /// `H ← VᵀHV + ρssᵀ`, `V = I − ρŷsᵀ`, from the scaled identity. Test oracle only.
    pub fn dense_inverse_hessian(&self) -> Result<DenseMatrix<T>> {
        let gamma = self.initial_scale()?;
        let d = self.dim().unwrap();
        let mut h = DenseMatrix::identity(d).scale(gamma);
        for p in &self.pairs {
            let v = DenseMatrix::identity(d).add(&DenseMatrix::outer(&p.y_hat, &p.s).scale(-p.rho))?;
            h = v
                .transpose()
                .matmul(&h)?
                .matmul(&v)?
                .add(&DenseMatrix::outer(&p.s, &p.s).scale(p.rho))?;
        }
        Ok(h)
    }
}

/// Free-function form of [`HistoryBuffer::two_loop_apply`].
pub fn two_loop_apply<T: Scalar>(buf: &HistoryBuffer<T>, g: &FlatVector<T>) -> Result<FlatVector<T>> {
    buf.two_loop_apply(g)
}

/// Free-function form of [`HistoryBuffer::dense_inverse_hessian`].
pub fn dense_inverse_hessian<T: Scalar>(buf: &HistoryBuffer<T>) -> Result<DenseMatrix<T>> {
    buf.dense_inverse_hessian()
}

/// Accepts a pair iff `⟨s, y⟩ ≥ alpha·eps·‖s‖`.
pub fn pair_filter<T: Scalar>(s: &FlatVector<T>, y: &FlatVector<T>, alpha: f64, eps: f64) -> bool {
    s.dot(y) >= T::lit(alpha * eps) * s.norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qn::{damp_pair, DampingConfig};
    use crate::rng::RngStream;
    use proptest::prelude::*;

    type V = FlatVector<f64>;

    fn v(x: &[f64]) -> V {
        V::from_f64(x).unwrap()
    }

    fn random_buffer(rng: &mut RngStream, d: usize, k: usize, m: usize) -> HistoryBuffer<f64> {
        let cfg = DampingConfig::default();
        let mut buf = HistoryBuffer::new(m).unwrap();
        for _ in 0..k {
            let s: V = rng.gaussian_noise(d, 1.0).unwrap();
            let noise: V = rng.gaussian_noise(d, 1.0).unwrap();
            let y = s.lincomb(rng.uniform(-10.0, 10.0), &noise, 1.0);
            let (yh, _) = damp_pair(&s, &y, &cfg).unwrap();
            buf.push_pair(s, yh).unwrap();
        }
        buf
    }

    #[test]
    fn fifo_eviction() {
        let mut buf = HistoryBuffer::<f64>::new(2).unwrap();
        buf.push_pair(v(&[1.0]), v(&[1.0])).unwrap();
        assert_eq!(buf.len(), 1);
        buf.push_pair(v(&[2.0]), v(&[1.0])).unwrap();
        buf.push_pair(v(&[3.0]), v(&[1.0])).unwrap();
        let s: Vec<f64> = buf.pairs().map(|p| p.s()[0]).collect();
        assert_eq!(s, vec![2.0, 3.0]);
        assert_eq!(buf.pushes(), 3);
        assert_eq!(buf.stored_elems(), 4);
    }

    #[test]
    fn non_positive_curvature_rejected() {
        let mut buf = HistoryBuffer::<f64>::new(2).unwrap();
        let err = buf.push_pair(v(&[1.0, 0.0]), v(&[0.0, 1.0])).unwrap_err();
        assert_eq!(err, Error::NonPositiveCurvature { sy: 0.0 });
        assert!(buf.push_pair(v(&[1.0]), v(&[-1.0])).is_err());
        assert!(buf.is_empty());
        assert_eq!(buf.pushes(), 0);
    }

    #[test]
    fn empty_buffer_has_no_curvature() {
        let buf = HistoryBuffer::<f64>::new(2).unwrap();
        assert_eq!(buf.two_loop_apply(&v(&[1.0])).unwrap_err(), Error::NoCurvature);
        assert!(buf.dense_inverse_hessian().is_err());
        assert!(HistoryBuffer::<f64>::new(0).is_err());
    }

    #[test]
    fn identity_curvature() {
        let mut buf = HistoryBuffer::<f64>::new(3).unwrap();
        buf.push_pair(v(&[1.0, 0.0]), v(&[1.0, 0.0])).unwrap();
        assert_eq!(buf.two_loop_apply(&v(&[1.0, 0.0])).unwrap().as_slice(), &[1.0, 0.0]);
        let h = buf.dense_inverse_hessian().unwrap();
        assert_eq!(h, DenseMatrix::identity(2));
    }

    #[test]
    fn scalar_secant() {
        let mut buf = HistoryBuffer::<f64>::new(3).unwrap();
        buf.push_pair(v(&[2.0]), v(&[1.0])).unwrap();
        assert_eq!(buf.two_loop_apply(&v(&[3.0])).unwrap().as_slice(), &[6.0]);
    }

    #[test]
    fn dimension_checks() {
        let mut buf = HistoryBuffer::<f64>::new(3).unwrap();
        buf.push_pair(v(&[1.0, 0.0]), v(&[1.0, 0.0])).unwrap();
        assert!(buf.push_pair(v(&[1.0]), v(&[1.0])).is_err());
        assert!(buf.two_loop_apply(&v(&[1.0])).is_err());
    }

    #[test]
    fn filter_examples() {
        assert!(pair_filter(&v(&[1.0, 0.0]), &v(&[3.0, 0.0]), 2.5, 1.0));
        assert!(!pair_filter(&v(&[1.0, 0.0]), &v(&[1.0, 0.0]), 2.5, 1.0));
        assert!(pair_filter(&v(&[1.0, 0.0]), &v(&[0.0, 1.0]), 2.5, 0.0));
        assert!(!pair_filter(&v(&[1.0, 0.0]), &v(&[-0.1, 1.0]), 2.5, 0.0));
    }

    #[test]
    fn f32_two_loop() {
        let mut buf = HistoryBuffer::<f32>::new(2).unwrap();
        buf.push_pair(FlatVector::from_f64(&[2.0]).unwrap(), FlatVector::from_f64(&[1.0]).unwrap())
            .unwrap();
        let r = buf.two_loop_apply(&FlatVector::from_f64(&[3.0]).unwrap()).unwrap();
        assert_eq!(r.as_slice(), &[6.0f32]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn two_loop_matches_dense(seed in any::<u64>(), d in 1usize..=20, m in 1usize..=5, extra in 0usize..3) {
            let mut rng = RngStream::new(seed);
            let buf = random_buffer(&mut rng, d, m + extra, m);
            let h = buf.dense_inverse_hessian().unwrap();
            prop_assert!(h.asymmetry() <= 1e-12 * h.diagonal().iter().fold(1.0f64, |a, b| a.max(b.abs())));
            for _ in 0..5 {
                let g: V = rng.gaussian_noise(d, 1.0).unwrap();
                let a = buf.two_loop_apply(&g).unwrap();
                let b = h.matvec(&g).unwrap();
                prop_assert!(a.sub(&b).norm() <= 1e-10 * b.norm());
            }
        }

        #[test]
        fn secant_holds_for_newest(seed in any::<u64>(), d in 1usize..=20, k in 1usize..=5) {
            let mut rng = RngStream::new(seed);
            let buf = random_buffer(&mut rng, d, k, 5);
            let p = buf.newest().unwrap();
            let r = buf.two_loop_apply(p.y_hat()).unwrap();
            prop_assert!(r.sub(p.s()).norm() <= 1e-10 * p.s().norm());
        }

        #[test]
        fn filter_with_zero_eps_is_sign_test(a in -10.0f64..10.0, b in -10.0f64..10.0) {
            let s = v(&[1.0, 0.0]);
            let y = v(&[a, b]);
            prop_assert_eq!(pair_filter(&s, &y, 4.0, 0.0), a >= 0.0);
        }
    }
}
