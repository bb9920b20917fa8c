//! The full predictor: LSTM stack followed by either the attention head
//! (DLAM) or a readout over the last hidden state (the LT-CCP ablation).

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::attention::{attention_backward, attention_forward, readout, AttentionParams, AttentionTrace};
use crate::error::{Error, Result};
use crate::lstm::{stack_backward, stack_forward, StackCache, StackParams};
use crate::numerics::{dot, DenseVector, Rng};
use crate::params::Parameters;

/// Which head sits on top of the stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    /// Attention over the input sequence.
    Dlam,
    /// Attention removed; readout over the final hidden state.
    LtCcp,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Dlam => "DLAM",
            Variant::LtCcp => "LT-CCP",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "DLAM" => Ok(Variant::Dlam),
            "LT-CCP" | "LTCCP" | "LT_CCP" => Ok(Variant::LtCcp),
            _ => Err(Error::InvalidConfig(alloc::format!("unknown model variant {s:?}"))),
        }
    }
}

/// Elementwise transform applied to counts before modelling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Transform {
    Identity,
    /// `ln(1 + x)`, inverted with `exp(z) - 1`.
    Log1p,
}

impl Transform {
    pub fn forward(self, x: f64) -> f64 {
        match self {
            Transform::Identity => x,
            Transform::Log1p => libm::log1p(x),
        }
    }

    pub fn inverse(self, z: f64) -> f64 {
        match self {
            Transform::Identity => z,
            Transform::Log1p => libm::expm1(z),
        }
    }

    /// Derivative of [`Transform::inverse`] at `z`.
    pub fn inverse_derivative(self, z: f64) -> f64 {
        match self {
            Transform::Identity => 1.0,
            Transform::Log1p => libm::exp(z),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Transform::Identity => "identity",
            Transform::Log1p => "log1p",
        }
    }
}

impl FromStr for Transform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Transform::Identity),
            "log1p" => Ok(Transform::Log1p),
            _ => Err(Error::InvalidConfig(alloc::format!("unknown transform {s:?}"))),
        }
    }
}

/// Shape and preprocessing of a model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub variant: Variant,
    pub layers: usize,
    pub hidden: usize,
    /// Feature width `K` per timestep.
    pub input_dim: usize,
    /// Sequence length `T`.
    pub steps: usize,
    /// Years after the training window that the model predicts.
    pub horizon: u32,
    pub input_transform: Transform,
    pub target_transform: Transform,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(alloc::format!("{what} must be at least 1")));
        if self.layers == 0 {
            return bad("layers");
        }
        if self.hidden == 0 {
            return bad("hidden size");
        }
        if self.input_dim == 0 {
            return bad("input width");
        }
        if self.steps == 0 {
            return bad("sequence length");
        }
        Ok(())
    }
}

/// Readout over the last hidden state, used by the LT-CCP ablation.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutParams {
    pub weights: DenseVector,
    pub bias: f64,
}

impl Parameters for ReadoutParams {
    fn slices(&self) -> Vec<&[f64]> {
        alloc::vec![self.weights.as_slice(), core::slice::from_ref(&self.bias)]
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        alloc::vec![
            self.weights.as_mut_slice(),
            core::slice::from_mut(&mut self.bias)
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Head {
    Attention(AttentionParams),
    LastState(ReadoutParams),
}

/// Every trainable tensor of a model. Also used for its gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub stack: StackParams,
    pub head: Head,
}

impl ModelParams {
    pub fn zeros_like(&self) -> Self {
        let head = match &self.head {
            Head::Attention(a) => Head::Attention(AttentionParams::zeros(a.input_dim(), a.hidden())),
            Head::LastState(r) => Head::LastState(ReadoutParams {
                weights: DenseVector::zeros(r.weights.len()),
                bias: 0.0,
            }),
        };
        Self {
            stack: self.stack.zeros_like(),
            head,
        }
    }
}

impl Parameters for ModelParams {
    fn slices(&self) -> Vec<&[f64]> {
        let mut out = self.stack.slices();
        match &self.head {
            Head::Attention(a) => out.extend(a.slices()),
            Head::LastState(r) => out.extend(r.slices()),
        }
        out
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = self.stack.slices_mut();
        match &mut self.head {
            Head::Attention(a) => out.extend(a.slices_mut()),
            Head::LastState(r) => out.extend(r.slices_mut()),
        }
        out
    }
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone)]
pub struct Forward {
    /// Inputs after the input transform.
    pub inputs: Vec<DenseVector>,
    pub hidden: Vec<DenseVector>,
    pub cache: StackCache,
    pub trace: Option<AttentionTrace>,
    /// Head output on the transformed target scale.
    pub output: f64,
}

/// A trained or freshly initialized popularity predictor.
#[derive(Debug, Clone, PartialEq)]
pub struct DlamModel {
    pub config: ModelConfig,
    pub params: ModelParams,
}

impl DlamModel {
    /// Random initialization; see [`StackParams::init`] and [`AttentionParams::init`].
    pub fn new(config: ModelConfig, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let stack = StackParams::init(config.layers, config.hidden, config.input_dim, rng);
        let head = match config.variant {
            Variant::Dlam => Head::Attention(AttentionParams::init(config.input_dim, config.hidden, rng)),
            Variant::LtCcp => {
                let bound = 1.0 / libm::sqrt(config.hidden as f64);
                Head::LastState(ReadoutParams {
                    weights: DenseVector::uniform(config.hidden, bound, rng),
                    bias: 0.0,
                })
            }
        };
        Ok(Self {
            config,
            params: ModelParams { stack, head },
        })
    }

    /// Assembles a model from explicit parameters, checking every shape.
    pub fn from_parts(config: ModelConfig, params: ModelParams) -> Result<Self> {
        config.validate()?;
        params.stack.validate()?;
        let stack = &params.stack;
        if stack.num_layers() != config.layers
            || stack.hidden() != config.hidden
            || stack.input_dim() != config.input_dim
        {
            return Err(Error::InvalidConfig(alloc::format!(
                "stack is {} layers of width {} over {} inputs, config says {} x {} over {}",
                stack.num_layers(),
                stack.hidden(),
                stack.input_dim(),
                config.layers,
                config.hidden,
                config.input_dim
            )));
        }
        match (&params.head, config.variant) {
            (Head::Attention(a), Variant::Dlam) => {
                a.validate()?;
                if a.input_dim() != config.input_dim || a.hidden() != config.hidden {
                    return Err(Error::Shape {
                        context: "attention head",
                        expected: (config.input_dim, config.hidden),
                        actual: (a.input_dim(), a.hidden()),
                    });
                }
            }
            (Head::LastState(r), Variant::LtCcp) => {
                if r.weights.len() != config.hidden {
                    return Err(Error::Shape {
                        context: "last-state readout",
                        expected: (config.hidden, 1),
                        actual: (r.weights.len(), 1),
                    });
                }
            }
            _ => {
                return Err(Error::InvalidConfig(alloc::format!(
                    "head does not match variant {}",
                    config.variant
                )))
            }
        }
        Ok(Self { config, params })
    }

    pub fn variant(&self) -> Variant {
        self.config.variant
    }

    fn check_features(&self, xs: &[DenseVector]) -> Result<()> {
        if xs.len() != self.config.steps {
            return Err(Error::Shape {
                context: "feature sequence",
                expected: (self.config.steps, self.config.input_dim),
                actual: (xs.len(), xs.first().map_or(0, DenseVector::len)),
            });
        }
        if let Some(bad) = xs.iter().find(|x| x.len() != self.config.input_dim) {
            return Err(Error::Shape {
                context: "feature sequence",
                expected: (self.config.steps, self.config.input_dim),
                actual: (xs.len(), bad.len()),
            });
        }
        Ok(())
    }

    /// Forward pass on raw (untransformed) features.
    pub fn forward(&self, xs: &[DenseVector]) -> Result<Forward> {
        self.check_features(xs)?;
        let tf = self.config.input_transform;
        let inputs: Vec<DenseVector> = xs
            .iter()
            .map(|x| x.iter().map(|&v| tf.forward(v)).collect::<Vec<_>>().into())
            .collect();
        let (hidden, cache) = stack_forward(&self.params.stack, &inputs)?;
        let (trace, output) = match &self.params.head {
            Head::Attention(a) => {
                let trace = attention_forward(a, &inputs, &hidden)?;
                let y = readout(a, &trace);
                (Some(trace), y)
            }
            Head::LastState(r) => {
                let last = &hidden[hidden.len() - 1];
                (None, dot(r.weights.as_slice(), last.as_slice()) + r.bias)
            }
        };
        Ok(Forward {
            inputs,
            hidden,
            cache,
            trace,
            output,
        })
    }

    /// Gradient of the loss with respect to every parameter, given
    /// `d_output`, the loss gradient on [`Forward::output`].
    pub fn backward(&self, fwd: &Forward, d_output: f64) -> Result<ModelParams> {
        let mut grads = self.params.zeros_like();
        let d_hidden = match (&self.params.head, &mut grads.head) {
            (Head::Attention(a), Head::Attention(ga)) => {
                let trace = fwd.trace.as_ref().ok_or(Error::Empty("attention trace"))?;
                let g = attention_backward(a, trace, &fwd.inputs, &fwd.hidden, d_output)?;
                *ga = g.params;
                g.d_h
            }
            (Head::LastState(r), Head::LastState(gr)) => {
                let steps = fwd.hidden.len();
                let mut d_hidden = alloc::vec![DenseVector::zeros(r.weights.len()); steps];
                d_hidden[steps - 1] = r.weights.iter().map(|w| d_output * w).collect::<Vec<_>>().into();
                gr.weights = fwd.hidden[steps - 1]
                    .iter()
                    .map(|h| d_output * h)
                    .collect::<Vec<_>>()
                    .into();
                gr.bias = d_output;
                d_hidden
            }
            _ => unreachable!("gradient head mirrors parameter head"),
        };
        let (stack_grads, _) = stack_backward(&self.params.stack, &fwd.cache, &d_hidden)?;
        grads.stack = stack_grads;
        Ok(grads)
    }

    /// Predicted popularity for raw features `xs`, clamped at zero.
    pub fn predict(&self, xs: &[DenseVector]) -> Result<f64> {
        let fwd = self.forward(xs)?;
        Ok(self.config.target_transform.inverse(fwd.output).max(0.0))
    }

    /// Prediction together with the attention trace, if the model has one.
    pub fn predict_with_trace(&self, xs: &[DenseVector]) -> Result<(f64, Option<AttentionTrace>)> {
        let fwd = self.forward(xs)?;
        let y = self.config.target_transform.inverse(fwd.output).max(0.0);
        Ok((y, fwd.trace))
    }
}
