//! LSTM cell, stacked recurrent network and backpropagation through time.
//!
//! Every gate reads the concatenation `[h_prev, x]`, hidden state first.
//! Swapping that order changes which weight columns pair with which inputs,
//! so saved models depend on it.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::numerics::{sigmoid_scalar, tanh_scalar, DenseMatrix, DenseVector, Rng};
use crate::params::Parameters;

/// Bias given to the forget gate at initialization.
pub const FORGET_BIAS_INIT: f64 = 1.0;

/// Weights and biases of one LSTM layer. Each matrix is `H x (H + K_in)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayerParams {
    pub w_i: DenseMatrix,
    pub w_f: DenseMatrix,
    pub w_c: DenseMatrix,
    pub w_o: DenseMatrix,
    pub b_i: DenseVector,
    pub b_f: DenseVector,
    pub b_c: DenseVector,
    pub b_o: DenseVector,
}

impl LstmLayerParams {
    pub fn zeros(hidden: usize, input: usize) -> Self {
        let w = DenseMatrix::zeros(hidden, hidden + input);
        let b = DenseVector::zeros(hidden);
        Self {
            w_i: w.clone(),
            w_f: w.clone(),
            w_c: w.clone(),
            w_o: w,
            b_i: b.clone(),
            b_f: b.clone(),
            b_c: b.clone(),
            b_o: b,
        }
    }

    /// Weights uniform in `±1/sqrt(H + K_in)`, forget bias [`FORGET_BIAS_INIT`],
    /// other biases zero.
    pub fn init(hidden: usize, input: usize, rng: &mut Rng) -> Self {
        let fan_in = hidden + input;
        let bound = 1.0 / libm::sqrt(fan_in as f64);
        let mut p = Self::zeros(hidden, input);
        p.w_i = DenseMatrix::uniform(hidden, fan_in, bound, rng);
        p.w_f = DenseMatrix::uniform(hidden, fan_in, bound, rng);
        p.w_c = DenseMatrix::uniform(hidden, fan_in, bound, rng);
        p.w_o = DenseMatrix::uniform(hidden, fan_in, bound, rng);
        p.b_f = DenseVector::filled(hidden, FORGET_BIAS_INIT);
        p
    }

    pub fn hidden(&self) -> usize {
        self.w_i.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.w_i.cols() - self.w_i.rows()
    }

    /// Checks that all four matrices and biases agree with `w_i`.
    pub fn validate(&self, layer: usize) -> Result<()> {
        let (h, cols) = self.w_i.shape();
        if cols < h {
            return Err(Error::LayerShape {
                layer,
                context: "weight columns",
                expected: h,
                actual: cols,
            });
        }
        for m in [&self.w_f, &self.w_c, &self.w_o] {
            if m.shape() != (h, cols) {
                return Err(Error::LayerShape {
                    layer,
                    context: "gate weight matrix",
                    expected: h * cols,
                    actual: m.rows() * m.cols(),
                });
            }
        }
        for b in [&self.b_i, &self.b_f, &self.b_c, &self.b_o] {
            if b.len() != h {
                return Err(Error::LayerShape {
                    layer,
                    context: "bias",
                    expected: h,
                    actual: b.len(),
                });
            }
        }
        Ok(())
    }
}

impl Parameters for LstmLayerParams {
    fn slices(&self) -> Vec<&[f64]> {
        vec![
            self.w_i.as_slice(),
            self.w_f.as_slice(),
            self.w_c.as_slice(),
            self.w_o.as_slice(),
            self.b_i.as_slice(),
            self.b_f.as_slice(),
            self.b_c.as_slice(),
            self.b_o.as_slice(),
        ]
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.w_i.as_mut_slice(),
            self.w_f.as_mut_slice(),
            self.w_c.as_mut_slice(),
            self.w_o.as_mut_slice(),
            self.b_i.as_mut_slice(),
            self.b_f.as_mut_slice(),
            self.b_c.as_mut_slice(),
            self.b_o.as_mut_slice(),
        ]
    }
}

/// Working state `h` and memory cell `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: DenseVector,
    pub c: DenseVector,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            h: DenseVector::zeros(hidden),
            c: DenseVector::zeros(hidden),
        }
    }
}

/// Activations of one cell step, kept for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct StepCache {
    pub x: DenseVector,
    pub h_prev: DenseVector,
    pub c_prev: DenseVector,
    pub input_gate: DenseVector,
    pub forget_gate: DenseVector,
    pub output_gate: DenseVector,
    pub candidate: DenseVector,
    pub c: DenseVector,
    pub h: DenseVector,
}

/// One forward step of the cell.
pub fn lstm_cell_forward(
    p: &LstmLayerParams,
    x: &DenseVector,
    prev: &LstmState,
) -> Result<(LstmState, StepCache)> {
    cell_forward(p, 0, x, prev)
}

fn cell_forward(
    p: &LstmLayerParams,
    layer: usize,
    x: &DenseVector,
    prev: &LstmState,
) -> Result<(LstmState, StepCache)> {
    let hidden = p.hidden();
    if x.len() != p.input_dim() {
        return Err(Error::LayerShape {
            layer,
            context: "input",
            expected: p.input_dim(),
            actual: x.len(),
        });
    }
    for v in [&prev.h, &prev.c] {
        if v.len() != hidden {
            return Err(Error::LayerShape {
                layer,
                context: "previous state",
                expected: hidden,
                actual: v.len(),
            });
        }
    }

    let mut z = Vec::with_capacity(hidden + x.len());
    z.extend_from_slice(prev.h.as_slice());
    z.extend_from_slice(x.as_slice());

    let pre = |w: &DenseMatrix, b: &DenseVector| -> Vec<f64> {
        let mut out = w.matvec_slice(&z);
        for (o, bb) in out.iter_mut().zip(b.iter()) {
            *o += bb;
        }
        out
    };
    let input_gate: Vec<f64> = pre(&p.w_i, &p.b_i).into_iter().map(sigmoid_scalar).collect();
    let forget_gate: Vec<f64> = pre(&p.w_f, &p.b_f).into_iter().map(sigmoid_scalar).collect();
    let candidate: Vec<f64> = pre(&p.w_c, &p.b_c).into_iter().map(tanh_scalar).collect();
    let output_gate: Vec<f64> = pre(&p.w_o, &p.b_o).into_iter().map(sigmoid_scalar).collect();

    let c: Vec<f64> = (0..hidden)
        .map(|j| forget_gate[j] * prev.c[j] + input_gate[j] * candidate[j])
        .collect();
    let h: Vec<f64> = (0..hidden)
        .map(|j| output_gate[j] * tanh_scalar(c[j]))
        .collect();

    let next = LstmState {
        h: DenseVector::from(h),
        c: DenseVector::from(c),
    };
    let cache = StepCache {
        x: x.clone(),
        h_prev: prev.h.clone(),
        c_prev: prev.c.clone(),
        input_gate: input_gate.into(),
        forget_gate: forget_gate.into(),
        output_gate: output_gate.into(),
        candidate: candidate.into(),
        c: next.c.clone(),
        h: next.h.clone(),
    };
    Ok((next, cache))
}

/// Parameters of an `L`-layer stack; layer `l > 0` reads layer `l - 1`'s `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct StackParams {
    pub layers: Vec<LstmLayerParams>,
}

impl StackParams {
    /// Checks the chaining constraint and builds the stack.
    pub fn new(layers: Vec<LstmLayerParams>) -> Result<Self> {
        let sp = Self { layers };
        sp.validate()?;
        Ok(sp)
    }

    pub fn init(num_layers: usize, hidden: usize, input: usize, rng: &mut Rng) -> Self {
        let layers = (0..num_layers)
            .map(|l| LstmLayerParams::init(hidden, if l == 0 { input } else { hidden }, rng))
            .collect();
        Self { layers }
    }

    pub fn zeros(num_layers: usize, hidden: usize, input: usize) -> Self {
        let layers = (0..num_layers)
            .map(|l| LstmLayerParams::zeros(hidden, if l == 0 { input } else { hidden }))
            .collect();
        Self { layers }
    }

    /// Zero-valued parameters with the same layout.
    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| LstmLayerParams::zeros(l.hidden(), l.input_dim()))
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Empty("LSTM stack"));
        }
        for (i, layer) in self.layers.iter().enumerate() {
            layer.validate(i)?;
            if i > 0 {
                let below = self.layers[i - 1].hidden();
                if layer.input_dim() != below {
                    return Err(Error::LayerShape {
                        layer: i,
                        context: "input width (must equal hidden size below)",
                        expected: below,
                        actual: layer.input_dim(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn hidden(&self) -> usize {
        self.layers[self.layers.len() - 1].hidden()
    }
}

impl Parameters for StackParams {
    fn slices(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(|l| l.slices()).collect()
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers.iter_mut().flat_map(|l| l.slices_mut()).collect()
    }
}

/// Per-layer, per-timestep caches from [`stack_forward`]; indexed `[layer][t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StackCache {
    pub steps: Vec<Vec<StepCache>>,
}

impl StackCache {
    pub fn len(&self) -> usize {
        self.steps.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Runs the stack over `xs` from zero initial states and returns the top
/// layer's hidden states.
pub fn stack_forward(sp: &StackParams, xs: &[DenseVector]) -> Result<(Vec<DenseVector>, StackCache)> {
    if xs.is_empty() {
        return Err(Error::Empty("input sequence"));
    }
    sp.validate()?;
    let mut current: Vec<DenseVector> = xs.to_vec();
    let mut steps = Vec::with_capacity(sp.layers.len());
    for (l, layer) in sp.layers.iter().enumerate() {
        let mut state = LstmState::zeros(layer.hidden());
        let mut layer_steps = Vec::with_capacity(current.len());
        let mut outputs = Vec::with_capacity(current.len());
        for x in &current {
            let (next, cache) = cell_forward(layer, l, x, &state)?;
            outputs.push(next.h.clone());
            layer_steps.push(cache);
            state = next;
        }
        steps.push(layer_steps);
        current = outputs;
    }
    Ok((current, StackCache { steps }))
}

/// Reverse-mode pass through the unrolled stack.
///
/// `d_top[t]` is the loss gradient with respect to the top layer's `h^t`.
/// Returns parameter gradients laid out like `sp` and the input gradients.
pub fn stack_backward(
    sp: &StackParams,
    cache: &StackCache,
    d_top: &[DenseVector],
) -> Result<(StackParams, Vec<DenseVector>)> {
    sp.validate()?;
    if cache.steps.len() != sp.layers.len() {
        return Err(Error::Shape {
            context: "cache layers vs stack layers",
            expected: (sp.layers.len(), 1),
            actual: (cache.steps.len(), 1),
        });
    }
    let steps = cache.len();
    if d_top.len() != steps {
        return Err(Error::Shape {
            context: "upstream gradient length",
            expected: (steps, 1),
            actual: (d_top.len(), 1),
        });
    }
    for (l, layer_steps) in cache.steps.iter().enumerate() {
        if layer_steps.len() != steps {
            return Err(Error::Shape {
                context: "cache timesteps",
                expected: (steps, 1),
                actual: (layer_steps.len(), 1),
            });
        }
        let layer = &sp.layers[l];
        if let Some(first) = layer_steps.first() {
            if first.x.len() != layer.input_dim() || first.h.len() != layer.hidden() {
                return Err(Error::LayerShape {
                    layer: l,
                    context: "cached activations",
                    expected: layer.input_dim(),
                    actual: first.x.len(),
                });
            }
        }
    }
    let hidden_top = sp.hidden();
    if let Some(bad) = d_top.iter().find(|d| d.len() != hidden_top) {
        return Err(Error::Shape {
            context: "upstream gradient width",
            expected: (hidden_top, 1),
            actual: (bad.len(), 1),
        });
    }

    let mut grads = sp.zeros_like();
    let mut d_h: Vec<Vec<f64>> = d_top.iter().map(|d| d.as_slice().to_vec()).collect();
    for l in (0..sp.layers.len()).rev() {
        d_h = layer_backward(&sp.layers[l], &cache.steps[l], &d_h, &mut grads.layers[l]);
    }
    Ok((grads, d_h.into_iter().map(DenseVector::from).collect()))
}

/// BPTT through one layer. Accumulates into `grads` and returns `dL/dx^t`.
fn layer_backward(
    p: &LstmLayerParams,
    steps: &[StepCache],
    d_h_out: &[Vec<f64>],
    grads: &mut LstmLayerParams,
) -> Vec<Vec<f64>> {
    let hidden = p.hidden();
    let input = p.input_dim();
    let mut d_x = vec![Vec::new(); steps.len()];
    let mut d_h_next = vec![0.0; hidden];
    let mut d_c_next = vec![0.0; hidden];
    let mut z = vec![0.0; hidden + input];
    let mut dz_i = vec![0.0; hidden];
    let mut dz_f = vec![0.0; hidden];
    let mut dz_c = vec![0.0; hidden];
    let mut dz_o = vec![0.0; hidden];

    for t in (0..steps.len()).rev() {
        let s = &steps[t];
        for j in 0..hidden {
            let dh = d_h_out[t][j] + d_h_next[j];
            let tc = tanh_scalar(s.c[j]);
            let o = s.output_gate[j];
            let dc = d_c_next[j] + dh * o * (1.0 - tc * tc);
            let i = s.input_gate[j];
            let f = s.forget_gate[j];
            let g = s.candidate[j];
            dz_o[j] = dh * tc * o * (1.0 - o);
            dz_i[j] = dc * g * i * (1.0 - i);
            dz_f[j] = dc * s.c_prev[j] * f * (1.0 - f);
            dz_c[j] = dc * i * (1.0 - g * g);
            d_c_next[j] = dc * f;
        }

        z[..hidden].copy_from_slice(s.h_prev.as_slice());
        z[hidden..].copy_from_slice(s.x.as_slice());
        grads.w_i.add_outer(&dz_i, &z);
        grads.w_f.add_outer(&dz_f, &z);
        grads.w_c.add_outer(&dz_c, &z);
        grads.w_o.add_outer(&dz_o, &z);
        for j in 0..hidden {
            grads.b_i[j] += dz_i[j];
            grads.b_f[j] += dz_f[j];
            grads.b_c[j] += dz_c[j];
            grads.b_o[j] += dz_o[j];
        }

        let mut d_z = vec![0.0; hidden + input];
        p.w_i.add_transpose_matvec(&dz_i, &mut d_z);
        p.w_f.add_transpose_matvec(&dz_f, &mut d_z);
        p.w_c.add_transpose_matvec(&dz_c, &mut d_z);
        p.w_o.add_transpose_matvec(&dz_o, &mut d_z);
        d_h_next.copy_from_slice(&d_z[..hidden]);
        d_x[t] = d_z[hidden..].to_vec();
    }
    d_x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::finite_diff_grad;

    fn seq(rng: &mut Rng, len: usize, dim: usize) -> Vec<DenseVector> {
        (0..len).map(|_| DenseVector::uniform(dim, 1.0, rng)).collect()
    }

    /// Straight-line evaluation of the five cell equations, written
    /// independently of `cell_forward`.
    fn oracle_step(p: &LstmLayerParams, x: &[f64], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let hidden = h.len();
        let mut z = h.to_vec();
        z.extend_from_slice(x);
        let affine = |w: &DenseMatrix, b: &DenseVector, j: usize| -> f64 {
            let mut s = b[j];
            for k in 0..z.len() {
                s += w[(j, k)] * z[k];
            }
            s
        };
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let mut h_new = vec![0.0; hidden];
        let mut c_new = vec![0.0; hidden];
        for j in 0..hidden {
            let gi = sig(affine(&p.w_i, &p.b_i, j));
            let gf = sig(affine(&p.w_f, &p.b_f, j));
            let cand = affine(&p.w_c, &p.b_c, j).tanh();
            let go = sig(affine(&p.w_o, &p.b_o, j));
            c_new[j] = gf * c[j] + gi * cand;
            h_new[j] = go * c_new[j].tanh();
        }
        (h_new, c_new)
    }

    #[test]
    fn zero_parameters_are_a_fixed_point() {
        let p = LstmLayerParams::zeros(3, 2);
        let x = DenseVector::new(vec![4.0, -1.0]).unwrap();
        let (next, cache) = lstm_cell_forward(&p, &x, &LstmState::zeros(3)).unwrap();
        assert!(cache.input_gate.iter().all(|&g| g == 0.5));
        assert!(cache.forget_gate.iter().all(|&g| g == 0.5));
        assert!(cache.output_gate.iter().all(|&g| g == 0.5));
        assert!(cache.candidate.iter().all(|&g| g == 0.0));
        assert!(next.c.iter().all(|&v| v == 0.0));
        assert!(next.h.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn open_forget_gate_retains_memory() {
        let mut p = LstmLayerParams::init(3, 2, &mut Rng::new(1));
        p.w_i = DenseMatrix::zeros(3, 5);
        p.b_i = DenseVector::filled(3, -50.0);
        p.w_f = DenseMatrix::zeros(3, 5);
        p.b_f = DenseVector::filled(3, 50.0);
        let prev = LstmState {
            h: DenseVector::zeros(3),
            c: DenseVector::filled(3, 1.7),
        };
        let x = DenseVector::new(vec![0.3, -2.0]).unwrap();
        let (next, _) = lstm_cell_forward(&p, &x, &prev).unwrap();
        for j in 0..3 {
            assert!((next.c[j] - 1.7).abs() < 1e-10);
        }
    }

    #[test]
    fn cell_matches_straight_line_oracle() {
        let mut rng = Rng::new(99);
        let p = LstmLayerParams::init(2, 1, &mut rng);
        let x = DenseVector::new(vec![1.0]).unwrap();
        let (next, _) = lstm_cell_forward(&p, &x, &LstmState::zeros(2)).unwrap();
        let (h, c) = oracle_step(&p, &[1.0], &[0.0, 0.0], &[0.0, 0.0]);
        for j in 0..2 {
            assert!((next.h[j] - h[j]).abs() < 1e-12);
            assert!((next.c[j] - c[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn cell_rejects_bad_shapes() {
        let p = LstmLayerParams::zeros(3, 2);
        let err = lstm_cell_forward(&p, &DenseVector::zeros(4), &LstmState::zeros(3)).unwrap_err();
        assert_eq!(
            err,
            Error::LayerShape {
                layer: 0,
                context: "input",
                expected: 2,
                actual: 4
            }
        );
        let err = lstm_cell_forward(&p, &DenseVector::zeros(2), &LstmState::zeros(2)).unwrap_err();
        assert!(matches!(err, Error::LayerShape { layer: 0, .. }));
    }

    #[test]
    fn stack_rejects_broken_chaining() {
        let layers = vec![LstmLayerParams::zeros(3, 2), LstmLayerParams::zeros(3, 4)];
        assert!(matches!(
            StackParams::new(layers),
            Err(Error::LayerShape { layer: 1, .. })
        ));
        assert_eq!(StackParams::new(vec![]), Err(Error::Empty("LSTM stack")));
    }

    #[test]
    fn single_layer_stack_is_repeated_cell() {
        let mut rng = Rng::new(3);
        let sp = StackParams::init(1, 3, 2, &mut rng);
        let xs = seq(&mut rng, 4, 2);
        let (top, _) = stack_forward(&sp, &xs).unwrap();
        let mut state = LstmState::zeros(3);
        for (t, x) in xs.iter().enumerate() {
            state = lstm_cell_forward(&sp.layers[0], x, &state).unwrap().0;
            assert_eq!(top[t], state.h);
        }
    }

    #[test]
    fn zero_stack_outputs_zero() {
        let sp = StackParams::zeros(2, 3, 2);
        let xs = seq(&mut Rng::new(5), 4, 2);
        let (top, _) = stack_forward(&sp, &xs).unwrap();
        assert!(top.iter().all(|h| h.iter().all(|&v| v == 0.0)));
        assert_eq!(stack_forward(&sp, &[]).unwrap_err(), Error::Empty("input sequence"));
    }

    #[test]
    fn two_layer_stack_composes() {
        let mut rng = Rng::new(11);
        let sp = StackParams::init(2, 3, 2, &mut rng);
        let xs = seq(&mut rng, 4, 2);
        let (top, _) = stack_forward(&sp, &xs).unwrap();
        let lower = StackParams::new(vec![sp.layers[0].clone()]).unwrap();
        let upper = StackParams::new(vec![sp.layers[1].clone()]).unwrap();
        let (mid, _) = stack_forward(&lower, &xs).unwrap();
        let (manual, _) = stack_forward(&upper, &mid).unwrap();
        assert_eq!(top, manual);
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = Rng::new(8);
        let sp = StackParams::init(2, 4, 3, &mut rng);
        let xs = seq(&mut rng, 5, 3);
        let (_, cache) = stack_forward(&sp, &xs).unwrap();
        let d_top = vec![DenseVector::zeros(4); 5];
        let (grads, dx) = stack_backward(&sp, &cache, &d_top).unwrap();
        assert!(grads.flatten().iter().all(|&g| g == 0.0));
        assert!(dx.iter().all(|d| d.iter().all(|&g| g == 0.0)));
    }

    fn probe_loss(sp: &StackParams, xs: &[DenseVector], w: &[DenseVector]) -> f64 {
        let (top, _) = stack_forward(sp, xs).unwrap();
        top.iter().zip(w).map(|(h, w)| h.dot(w).unwrap()).sum()
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / (a.abs() + b.abs()).max(1e-8)
    }

    #[test]
    fn bptt_matches_finite_differences() {
        let mut rng = Rng::new(2024);
        let sp = StackParams::init(2, 4, 3, &mut rng);
        let xs = seq(&mut rng, 5, 3);
        let w = seq(&mut rng, 5, 4);
        let (_, cache) = stack_forward(&sp, &xs).unwrap();
        let (grads, dx) = stack_backward(&sp, &cache, &w).unwrap();

        let flat = DenseVector::from(sp.flatten());
        let numeric = finite_diff_grad(
            |p| {
                let mut probe = sp.clone();
                probe.assign_flat(p.as_slice());
                probe_loss(&probe, &xs, &w)
            },
            &flat,
            1e-5,
        )
        .unwrap();
        let analytic = grads.flatten();
        let worst = analytic
            .iter()
            .zip(numeric.iter())
            .map(|(&a, &n)| rel_err(a, n))
            .fold(0.0, f64::max);
        assert!(worst < 1e-4, "worst relative error {worst}");

        for t in 0..xs.len() {
            let numeric_x = finite_diff_grad(
                |x| {
                    let mut probe = xs.clone();
                    probe[t] = x.clone();
                    probe_loss(&sp, &probe, &w)
                },
                &xs[t],
                1e-5,
            )
            .unwrap();
            for k in 0..3 {
                assert!(rel_err(dx[t][k], numeric_x[k]) < 1e-4);
            }
        }
    }

    #[test]
    fn duplicated_sequence_doubles_gradient() {
        let mut rng = Rng::new(4);
        let sp = StackParams::init(2, 3, 2, &mut rng);
        let xs = seq(&mut rng, 4, 2);
        let w = seq(&mut rng, 4, 3);
        let (_, cache) = stack_forward(&sp, &xs).unwrap();
        let (once, _) = stack_backward(&sp, &cache, &w).unwrap();
        let mut twice = once.clone();
        let (again, _) = stack_backward(&sp, &cache, &w).unwrap();
        twice.accumulate(&again);
        for (a, b) in once.flatten().iter().zip(twice.flatten()) {
            assert!((2.0 * a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn backward_rejects_mismatched_cache() {
        let mut rng = Rng::new(6);
        let sp = StackParams::init(2, 3, 2, &mut rng);
        let xs = seq(&mut rng, 4, 2);
        let (_, cache) = stack_forward(&sp, &xs).unwrap();
        let other = StackParams::init(1, 3, 2, &mut rng);
        assert!(stack_backward(&other, &cache, &vec![DenseVector::zeros(3); 4]).is_err());
        assert!(stack_backward(&sp, &cache, &vec![DenseVector::zeros(3); 3]).is_err());
    }

    #[test]
    fn input_gate_shut_and_low_forget_bias_decays_cell() {
        // Aging: memory fades once nothing new enters.
        let s = 0.7;
        let mut p = LstmLayerParams::zeros(2, 1);
        p.b_i = DenseVector::filled(2, -50.0);
        p.b_f = DenseVector::filled(2, -s);
        let mut state = LstmState {
            h: DenseVector::zeros(2),
            c: DenseVector::new(vec![2.0, -1.5]).unwrap(),
        };
        let x = DenseVector::new(vec![1.0]).unwrap();
        let mut last = state.c.norm_sq();
        for _ in 0..10 {
            state = lstm_cell_forward(&p, &x, &state).unwrap().0;
            let norm = state.c.norm_sq();
            assert!(norm < last);
            last = norm;
        }
    }

    #[test]
    fn saturated_gates_accumulate_cell() {
        // Matthew effect: with both gates open and a positive candidate the
        // cell only grows.
        let mut p = LstmLayerParams::zeros(3, 2);
        p.b_i = DenseVector::filled(3, 50.0);
        p.b_f = DenseVector::filled(3, 50.0);
        p.b_c = DenseVector::filled(3, 0.8);
        let mut rng = Rng::new(12);
        let mut state = LstmState::zeros(3);
        for _ in 0..20 {
            let x = DenseVector::uniform(2, 5.0, &mut rng);
            let next = lstm_cell_forward(&p, &x, &state).unwrap().0;
            for j in 0..3 {
                assert!(next.c[j] >= state.c[j]);
            }
            state = next;
        }
    }
}
