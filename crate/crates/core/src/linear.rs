//! Linear baseline `f(x) = w . x + b` over the flattened feature sequence,
//! fitted in closed form by ridge least squares on transformed targets.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::Transform;
use crate::numerics::{dot, DenseVector};
use crate::training::Example;

/// Ridge strength used by the command line and experiments.
pub const DEFAULT_RIDGE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    /// `steps * input_dim` feature weights followed by the bias.
    pub weights: DenseVector,
    pub steps: usize,
    pub input_dim: usize,
    pub horizon: u32,
    pub target_transform: Transform,
}

impl LinearModel {
    pub fn new(
        weights: DenseVector,
        steps: usize,
        input_dim: usize,
        horizon: u32,
        target_transform: Transform,
    ) -> Result<Self> {
        if weights.len() != steps * input_dim + 1 {
            return Err(Error::Shape {
                context: "linear weights",
                expected: (steps * input_dim + 1, 1),
                actual: (weights.len(), 1),
            });
        }
        Ok(Self {
            weights,
            steps,
            input_dim,
            horizon,
            target_transform,
        })
    }

    pub fn bias(&self) -> f64 {
        self.weights[self.weights.len() - 1]
    }

    /// Output on the transformed scale.
    pub fn raw_output(&self, xs: &[DenseVector]) -> Result<f64> {
        let flat = flatten(xs, self.steps, self.input_dim)?;
        let w = self.weights.as_slice();
        let n = w.len() - 1;
        Ok(dot(&w[..n], &flat) + w[n])
    }
}

fn flatten(xs: &[DenseVector], steps: usize, dim: usize) -> Result<Vec<f64>> {
    if xs.len() != steps || xs.iter().any(|x| x.len() != dim) {
        return Err(Error::Shape {
            context: "linear features",
            expected: (steps, dim),
            actual: (xs.len(), xs.first().map_or(0, DenseVector::len)),
        });
    }
    Ok(xs.iter().flat_map(|x| x.iter().copied()).collect())
}

/// Solves `a x = b` for symmetric positive definite `a` (row-major `n x n`)
/// by Cholesky factorization.
pub fn solve_spd(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let n = b.len();
    assert_eq!(a.len(), n * n);
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(s > 0.0) {
                    return Err(Error::Singular);
                }
                l[i * n + i] = libm::sqrt(s);
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    Ok(x)
}

/// Ridge least squares on `transform(target)`. The bias is not penalized.
///
/// Sums run over examples in index order.
pub fn fit_linear(
    examples: &[Example<'_>],
    steps: usize,
    input_dim: usize,
    horizon: u32,
    target_transform: Transform,
    ridge: f64,
) -> Result<LinearModel> {
    if examples.is_empty() {
        return Err(Error::Empty("linear training data"));
    }
    if !(ridge > 0.0) {
        return Err(Error::InvalidConfig("ridge strength must be positive".into()));
    }
    let n = steps * input_dim + 1;
    let mut gram = vec![0.0; n * n];
    let mut rhs = vec![0.0; n];
    let mut row = vec![0.0; n];
    for (index, ex) in examples.iter().enumerate() {
        if !(ex.target > 0.0) {
            return Err(Error::NonPositiveTarget {
                index,
                value: ex.target,
            });
        }
        row[..n - 1].copy_from_slice(&flatten(ex.features, steps, input_dim)?);
        row[n - 1] = 1.0;
        let y = target_transform.forward(ex.target);
        for i in 0..n {
            if row[i] == 0.0 {
                continue;
            }
            for j in 0..n {
                gram[i * n + j] += row[i] * row[j];
            }
            rhs[i] += row[i] * y;
        }
    }
    for i in 0..n - 1 {
        gram[i * n + i] += ridge;
    }
    let weights = solve_spd(&gram, &rhs)?;
    LinearModel::new(weights.into(), steps, input_dim, horizon, target_transform)
}

/// Clamped prediction in count space.
pub fn predict_linear(m: &LinearModel, xs: &[DenseVector]) -> Result<f64> {
    Ok(m.target_transform.inverse(m.raw_output(xs)?).max(0.0))
}
