//! Small dense linear algebra, activations, seeded randomness and a
//! finite-difference gradient oracle.
//!
//! Everything here works on `f64`. Transcendentals go through `libm` so that
//! results do not depend on the platform's C math library.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from row-major entries, rejecting wrong lengths and
    /// non-finite values.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape {
                context: "matrix entries",
                expected: (rows * cols, 1),
                actual: (data.len(), 1),
            });
        }
        check_finite("matrix entries", &data)?;
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::Shape {
                    context: "matrix rows",
                    expected: (1, cols),
                    actual: (1, r.len()),
                });
            }
            data.extend_from_slice(r);
        }
        Self::from_row_major(rows.len(), cols, data)
    }

    /// Entries drawn uniformly from `[-bound, bound]`.
    pub fn uniform(rows: usize, cols: usize, bound: f64, rng: &mut Rng) -> Self {
        let data = (0..rows * cols).map(|_| rng.uniform(-bound, bound)).collect();
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `self * v`.
    pub fn matvec(&self, v: &DenseVector) -> Result<DenseVector> {
        if v.len() != self.cols {
            return Err(Error::Shape {
                context: "matvec",
                expected: (self.rows, self.cols),
                actual: (v.len(), 1),
            });
        }
        Ok(DenseVector(self.matvec_slice(v.as_slice())))
    }

    /// Unchecked-length product used on hot paths after shapes were validated.
    pub(crate) fn matvec_slice(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.cols);
        self.data
            .chunks_exact(self.cols.max(1))
            .take(self.rows)
            .map(|row| dot(row, v))
            .collect()
    }

    /// Accumulates `self^T * v` into `out`.
    pub(crate) fn add_transpose_matvec(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        for (row, &scale) in self.data.chunks_exact(self.cols.max(1)).zip(v) {
            if scale == 0.0 {
                continue;
            }
            for (o, &w) in out.iter_mut().zip(row) {
                *o += w * scale;
            }
        }
    }

    /// Accumulates the outer product `u v^T` into `self`.
    pub(crate) fn add_outer(&mut self, u: &[f64], v: &[f64]) {
        debug_assert_eq!(u.len(), self.rows);
        debug_assert_eq!(v.len(), self.cols);
        let cols = self.cols.max(1);
        for (row, &scale) in self.data.chunks_exact_mut(cols).zip(u) {
            if scale == 0.0 {
                continue;
            }
            for (w, &x) in row.iter_mut().zip(v) {
                *w += scale * x;
            }
        }
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }
}

/// Dense column vector.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DenseVector(Vec<f64>);

impl DenseVector {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    /// Wraps `data`, rejecting NaN and infinities.
    pub fn new(data: Vec<f64>) -> Result<Self> {
        check_finite("vector entries", &data)?;
        Ok(Self(data))
    }

    pub fn filled(n: usize, value: f64) -> Self {
        Self(vec![value; n])
    }

    pub fn uniform(n: usize, bound: f64, rng: &mut Rng) -> Self {
        Self((0..n).map(|_| rng.uniform(-bound, bound)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn iter(&self) -> core::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn dot(&self, other: &DenseVector) -> Result<f64> {
        if self.len() != other.len() {
            return Err(Error::Shape {
                context: "dot",
                expected: (self.len(), 1),
                actual: (other.len(), 1),
            });
        }
        Ok(dot(&self.0, &other.0))
    }

    pub fn add(&self, other: &DenseVector) -> Result<DenseVector> {
        if self.len() != other.len() {
            return Err(Error::Shape {
                context: "vector add",
                expected: (self.len(), 1),
                actual: (other.len(), 1),
            });
        }
        Ok(Self(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect()))
    }

    pub fn norm_sq(&self) -> f64 {
        dot(&self.0, &self.0)
    }
}

impl From<Vec<f64>> for DenseVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl Index<usize> for DenseVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for DenseVector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

fn check_finite(context: &'static str, data: &[f64]) -> Result<()> {
    match data.iter().position(|x| !x.is_finite()) {
        Some(index) => Err(Error::NonFinite { context, index }),
        None => Ok(()),
    }
}

/// Left-to-right dot product.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc + x * y)
}

pub fn matvec(m: &DenseMatrix, v: &DenseVector) -> Result<DenseVector> {
    m.matvec(v)
}

#[inline]
pub fn sigmoid_scalar(x: f64) -> f64 {
    // Branching keeps exp's argument nonpositive so it never overflows.
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

#[inline]
pub fn tanh_scalar(x: f64) -> f64 {
    libm::tanh(x)
}

/// Elementwise logistic function.
pub fn sigmoid(v: &DenseVector) -> DenseVector {
    DenseVector(v.iter().map(|&x| sigmoid_scalar(x)).collect())
}

pub fn tanh(v: &DenseVector) -> DenseVector {
    DenseVector(v.iter().map(|&x| tanh_scalar(x)).collect())
}

/// Normalized exponentials, computed after subtracting the maximum.
pub fn softmax(v: &DenseVector) -> Result<DenseVector> {
    if v.is_empty() {
        return Err(Error::Empty("softmax input"));
    }
    Ok(DenseVector(softmax_slice(v.as_slice())))
}

pub(crate) fn softmax_slice(v: &[f64]) -> Vec<f64> {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = v.iter().map(|&x| libm::exp(x - max)).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Central-difference gradient of `f` at `p` with step `h`.
///
/// Fails with the coordinate index if `f` is non-finite at either probe.
pub fn finite_diff_grad<F>(mut f: F, p: &DenseVector, h: f64) -> Result<DenseVector>
where
    F: FnMut(&DenseVector) -> f64,
{
    if !(h > 0.0) {
        return Err(Error::InvalidConfig(alloc::format!(
            "finite-difference step must be positive, got {h}"
        )));
    }
    let mut probe = p.clone();
    let mut grad = Vec::with_capacity(p.len());
    for i in 0..p.len() {
        let orig = probe[i];
        probe[i] = orig + h;
        let up = f(&probe);
        probe[i] = orig - h;
        let down = f(&probe);
        probe[i] = orig;
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::NonFinite {
                context: "finite-difference probe",
                index: i,
            });
        }
        grad.push((up - down) / (2.0 * h));
    }
    Ok(DenseVector(grad))
}

/// Seeded ChaCha8 generator.
///
/// The same seed yields the same stream on every platform. Independent
/// sub-streams come from [`Rng::stream`].
#[derive(Debug, Clone)]
pub struct Rng {
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Sub-stream `stream` of the generator seeded with `seed`.
    pub fn stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { inner }
    }

    /// Uniform draw in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in `0..n`; `n` must be positive.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        // Lemire's multiply-shift; the bias is below 2^-32 for our sizes.
        ((self.inner.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

impl RngCore for Rng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> DenseVector {
        DenseVector::new(x.to_vec()).unwrap()
    }

    #[test]
    fn matvec_examples() {
        let id = DenseMatrix::identity(2);
        assert_eq!(id.matvec(&v(&[3.0, 4.0])).unwrap(), v(&[3.0, 4.0]));

        let z = DenseMatrix::zeros(2, 3);
        assert_eq!(z.matvec(&v(&[1.0, 1.0, 1.0])).unwrap(), v(&[0.0, 0.0]));

        let m = DenseMatrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap();
        assert_eq!(m.matvec(&v(&[1.0, 1.0])).unwrap(), v(&[3.0, 7.0]));
    }

    #[test]
    fn matvec_reports_both_shapes() {
        let m = DenseMatrix::zeros(2, 3);
        let err = m.matvec(&v(&[1.0, 2.0])).unwrap_err();
        assert_eq!(
            err,
            Error::Shape {
                context: "matvec",
                expected: (2, 3),
                actual: (2, 1)
            }
        );
    }

    #[test]
    fn sigmoid_examples() {
        assert_eq!(sigmoid(&v(&[0.0]))[0], 0.5);
        assert!((sigmoid(&v(&[50.0]))[0] - 1.0).abs() < 1e-15);
        let expected = 1.0 / (1.0 + (-1.0f64).exp());
        assert!((sigmoid(&v(&[1.0]))[0] - expected).abs() < 1e-15);
        assert!((sigmoid(&v(&[1.0]))[0] - 0.731_058_578_630_004_9).abs() < 1e-15);
        let far = sigmoid(&v(&[-800.0, 800.0]));
        assert!(far[0].is_finite() && far[1].is_finite());
    }

    #[test]
    fn softmax_examples() {
        let s = softmax(&v(&[2.5, 2.5, 2.5])).unwrap();
        for x in s.iter() {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
        let s = softmax(&v(&[1.0, 2.0])).unwrap();
        let e1 = 1.0f64.exp();
        let e2 = 2.0f64.exp();
        assert!((s[0] - e1 / (e1 + e2)).abs() < 1e-15);
        assert!((s[0] - 0.268_941_421_369_995_1).abs() < 1e-12);
        assert!((s[1] - 0.731_058_578_630_004_9).abs() < 1e-12);
        assert_eq!(softmax(&DenseVector::zeros(0)), Err(Error::Empty("softmax input")));
    }

    #[test]
    fn finite_diff_examples() {
        let g = finite_diff_grad(|p| p.norm_sq(), &v(&[1.0, 2.0]), 1e-5).unwrap();
        assert!((g[0] - 2.0).abs() < 1e-6 && (g[1] - 4.0).abs() < 1e-6);

        let g = finite_diff_grad(|_| 7.0, &v(&[1.0, 2.0, 3.0]), 1e-5).unwrap();
        assert!(g.iter().all(|&x| x == 0.0));

        let g = finite_diff_grad(|p| p[0] * p[1], &v(&[3.0, 5.0]), 1e-5).unwrap();
        assert!((g[0] - 5.0).abs() < 1e-6 && (g[1] - 3.0).abs() < 1e-6);
    }

    #[test]
    fn finite_diff_rejects_nonfinite() {
        let err = finite_diff_grad(
            |p| if p[1] > 1.0 { f64::NAN } else { 0.0 },
            &v(&[0.0, 1.0]),
            1e-3,
        )
        .unwrap_err();
        assert_eq!(
            err,
            Error::NonFinite {
                context: "finite-difference probe",
                index: 1
            }
        );
    }

    #[test]
    fn rng_is_reproducible() {
        let mut a = Rng::new(7);
        let mut b = Rng::new(7);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
        let mut s0 = Rng::stream(7, 0);
        let mut s1 = Rng::stream(7, 1);
        assert_ne!(s0.next_u64(), s1.next_u64());
    }

    #[test]
    fn rejects_nonfinite_construction() {
        assert!(DenseVector::new(alloc::vec![1.0, f64::INFINITY]).is_err());
        assert!(DenseMatrix::from_row_major(1, 2, alloc::vec![0.0, f64::NAN]).is_err());
    }
}
