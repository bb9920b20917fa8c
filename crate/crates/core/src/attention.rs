//! Input-weighted attention over a sequence.
//!
//! Each timestep gets a scalar score `a^t = tanh(W_a [x^t, h^t])` computed
//! from that timestep alone. The scores go through a softmax and the weights
//! average the *inputs* `x^t` (not the hidden states) into a context `O`. A
//! learned affine readout maps `O` to one scalar.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::numerics::{dot, softmax_slice, tanh_scalar, DenseMatrix, DenseVector, Rng};
use crate::params::Parameters;

/// Score projection `W_a` (one row over `[x, h]`) and the readout `O -> R`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    pub score: DenseMatrix,
    pub readout: DenseVector,
    pub bias: f64,
}

impl AttentionParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            score: DenseMatrix::zeros(1, input + hidden),
            readout: DenseVector::zeros(input),
            bias: 0.0,
        }
    }

    pub fn init(input: usize, hidden: usize, rng: &mut Rng) -> Self {
        let score_bound = 1.0 / libm::sqrt((input + hidden) as f64);
        let readout_bound = 1.0 / libm::sqrt(input as f64);
        Self {
            score: DenseMatrix::uniform(1, input + hidden, score_bound, rng),
            readout: DenseVector::uniform(input, readout_bound, rng),
            bias: 0.0,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.readout.len()
    }

    pub fn hidden(&self) -> usize {
        self.score.cols() - self.readout.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.score.rows() != 1 || self.score.cols() < self.readout.len() {
            return Err(Error::Shape {
                context: "attention score projection",
                expected: (1, self.readout.len()),
                actual: self.score.shape(),
            });
        }
        Ok(())
    }
}

impl Parameters for AttentionParams {
    fn slices(&self) -> Vec<&[f64]> {
        vec![
            self.score.as_slice(),
            self.readout.as_slice(),
            core::slice::from_ref(&self.bias),
        ]
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.score.as_mut_slice(),
            self.readout.as_mut_slice(),
            core::slice::from_mut(&mut self.bias),
        ]
    }
}

/// Scores, weights and context from one attention pass.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionTrace {
    pub scores: DenseVector,
    pub weights: DenseVector,
    pub context: DenseVector,
}

impl AttentionTrace {
    /// Timestep with the largest weight (first one on ties).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (t, &w) in self.weights.iter().enumerate() {
            if w > self.weights[best] {
                best = t;
            }
        }
        best
    }
}

fn check_sequences(p: &AttentionParams, xs: &[DenseVector], hs: &[DenseVector]) -> Result<()> {
    p.validate()?;
    if xs.is_empty() {
        return Err(Error::Empty("attention input sequence"));
    }
    if xs.len() != hs.len() {
        return Err(Error::Shape {
            context: "attention inputs vs hidden states",
            expected: (xs.len(), 1),
            actual: (hs.len(), 1),
        });
    }
    let (k, h) = (p.input_dim(), p.hidden());
    for (x, hh) in xs.iter().zip(hs) {
        if x.len() != k || hh.len() != h {
            return Err(Error::Shape {
                context: "attention step widths",
                expected: (k, h),
                actual: (x.len(), hh.len()),
            });
        }
    }
    Ok(())
}

/// Score of a single timestep. Depends on nothing but `x` and `h`.
pub fn score_step(p: &AttentionParams, x: &DenseVector, h: &DenseVector) -> f64 {
    let w = p.score.row(0);
    let k = x.len();
    tanh_scalar(dot(&w[..k], x.as_slice()) + dot(&w[k..], h.as_slice()))
}

pub fn attention_forward(
    p: &AttentionParams,
    xs: &[DenseVector],
    hs: &[DenseVector],
) -> Result<AttentionTrace> {
    check_sequences(p, xs, hs)?;
    let scores: Vec<f64> = xs.iter().zip(hs).map(|(x, h)| score_step(p, x, h)).collect();
    let weights = softmax_slice(&scores);
    Ok(AttentionTrace {
        context: weighted_mean(&weights, xs),
        scores: scores.into(),
        weights: weights.into(),
    })
}

fn weighted_mean(weights: &[f64], xs: &[DenseVector]) -> DenseVector {
    let mut context = vec![0.0; xs[0].len()];
    for (&w, x) in weights.iter().zip(xs) {
        for (o, v) in context.iter_mut().zip(x.iter()) {
            *o += w * v;
        }
    }
    context.into()
}

/// Scalar readout `r . O + b`.
pub fn readout(p: &AttentionParams, trace: &AttentionTrace) -> f64 {
    dot(p.readout.as_slice(), trace.context.as_slice()) + p.bias
}

/// Gradient of the softmax inputs given the gradient of its outputs.
pub fn softmax_backward(weights: &[f64], d_weights: &[f64]) -> Vec<f64> {
    let mean = dot(weights, d_weights);
    weights
        .iter()
        .zip(d_weights)
        .map(|(w, d)| w * (d - mean))
        .collect()
}

/// Gradients produced by the attention backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionGrads {
    pub params: AttentionParams,
    pub d_x: Vec<DenseVector>,
    pub d_h: Vec<DenseVector>,
}

fn check_trace(trace: &AttentionTrace, xs: &[DenseVector], k: usize) -> Result<()> {
    if trace.weights.len() != xs.len()
        || trace.scores.len() != xs.len()
        || trace.context.len() != k
    {
        return Err(Error::Shape {
            context: "attention trace",
            expected: (xs.len(), k),
            actual: (trace.weights.len(), trace.context.len()),
        });
    }
    Ok(())
}

/// Backward pass from a gradient on the context vector `O`.
///
/// The readout entries of the returned parameter gradient are zero.
pub fn context_backward(
    p: &AttentionParams,
    trace: &AttentionTrace,
    xs: &[DenseVector],
    hs: &[DenseVector],
    d_context: &DenseVector,
) -> Result<AttentionGrads> {
    check_sequences(p, xs, hs)?;
    let k = p.input_dim();
    check_trace(trace, xs, k)?;
    if d_context.len() != k {
        return Err(Error::Shape {
            context: "context gradient",
            expected: (k, 1),
            actual: (d_context.len(), 1),
        });
    }
    let mut grads = AttentionParams::zeros(k, p.hidden());
    let alpha = trace.weights.as_slice();

    // O = sum_t alpha_t x_t
    let d_alpha: Vec<f64> = xs.iter().map(|x| d_context.dot(x).unwrap_or(0.0)).collect();
    let mut d_x: Vec<Vec<f64>> = alpha
        .iter()
        .map(|&a| d_context.iter().map(|d| a * d).collect())
        .collect();

    let d_scores = softmax_backward(alpha, &d_alpha);
    let w = p.score.row(0);
    let mut d_h = Vec::with_capacity(xs.len());
    let mut z = vec![0.0; w.len()];
    for t in 0..xs.len() {
        let a = trace.scores[t];
        let d_pre = d_scores[t] * (1.0 - a * a);
        z[..k].copy_from_slice(xs[t].as_slice());
        z[k..].copy_from_slice(hs[t].as_slice());
        grads.score.add_outer(&[d_pre], &z);
        for (dx, &wk) in d_x[t].iter_mut().zip(&w[..k]) {
            *dx += d_pre * wk;
        }
        d_h.push(DenseVector::from(w[k..].iter().map(|wh| d_pre * wh).collect::<Vec<_>>()));
    }
    Ok(AttentionGrads {
        params: grads,
        d_x: d_x.into_iter().map(DenseVector::from).collect(),
        d_h,
    })
}

/// Backward pass from a gradient on the scalar readout.
pub fn attention_backward(
    p: &AttentionParams,
    trace: &AttentionTrace,
    xs: &[DenseVector],
    hs: &[DenseVector],
    d_output: f64,
) -> Result<AttentionGrads> {
    let d_context: DenseVector = p.readout.iter().map(|r| d_output * r).collect::<Vec<_>>().into();
    let mut grads = context_backward(p, trace, xs, hs, &d_context)?;
    for (g, o) in grads.params.readout.as_mut_slice().iter_mut().zip(trace.context.iter()) {
        *g = d_output * o;
    }
    grads.params.bias = d_output;
    Ok(grads)
}
