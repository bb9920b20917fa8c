//! MAPE loss, the Adadelta optimizer and the mini-batch training loop.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::{DlamModel, ModelParams};
use crate::numerics::{DenseVector, Rng};
use crate::params::{clip_global_norm, Parameters};

/// Mean absolute percentage error and its subgradient with respect to the
/// predictions. `sign(0)` is taken as 0.
pub fn mape_loss(preds: &[f64], targets: &[f64]) -> Result<(f64, Vec<f64>)> {
    if preds.is_empty() {
        return Err(Error::Empty("predictions"));
    }
    if preds.len() != targets.len() {
        return Err(Error::Shape {
            context: "predictions vs targets",
            expected: (targets.len(), 1),
            actual: (preds.len(), 1),
        });
    }
    if let Some((index, &value)) = targets.iter().enumerate().find(|(_, &t)| !(t > 0.0)) {
        return Err(Error::NonPositiveTarget { index, value });
    }
    let m = preds.len() as f64;
    let mut total = 0.0;
    let mut grads = Vec::with_capacity(preds.len());
    for (&p, &n) in preds.iter().zip(targets) {
        total += libm::fabs((p - n) / n);
        let sign = if p > n {
            1.0
        } else if p < n {
            -1.0
        } else {
            0.0
        };
        grads.push(sign / (m * n));
    }
    Ok((total / m, grads))
}

/// Adadelta accumulators, one buffer per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdadeltaState {
    pub rho: f64,
    pub eps: f64,
    /// Running average of squared gradients.
    pub sq_grad: Vec<Vec<f64>>,
    /// Running average of squared updates.
    pub sq_update: Vec<Vec<f64>>,
}

impl AdadeltaState {
    pub fn new<P: Parameters>(params: &P, rho: f64, eps: f64) -> Self {
        let zeros: Vec<Vec<f64>> = params.slices().iter().map(|s| vec![0.0; s.len()]).collect();
        Self {
            rho,
            eps,
            sq_grad: zeros.clone(),
            sq_update: zeros,
        }
    }

    fn check_layout(&self, layout: &[&[f64]], context: &'static str) -> Result<()> {
        if layout.len() != self.sq_grad.len() {
            return Err(Error::Shape {
                context,
                expected: (self.sq_grad.len(), 1),
                actual: (layout.len(), 1),
            });
        }
        for (acc, s) in self.sq_grad.iter().zip(layout) {
            if acc.len() != s.len() {
                return Err(Error::Shape {
                    context,
                    expected: (acc.len(), 1),
                    actual: (s.len(), 1),
                });
            }
        }
        Ok(())
    }

    /// One update. There is no learning rate: the step is the ratio of the
    /// RMS of past updates to the RMS of past gradients.
    pub fn step<P: Parameters>(&mut self, params: &mut P, grads: &P) -> Result<()> {
        let grad_slices = grads.slices();
        self.check_layout(&grad_slices, "gradient layout vs optimizer state")?;
        self.check_layout(&params.slices(), "parameter layout vs optimizer state")?;
        let (rho, eps) = (self.rho, self.eps);
        for (((param, grad), sq_g), sq_u) in params
            .slices_mut()
            .into_iter()
            .zip(grad_slices)
            .zip(self.sq_grad.iter_mut())
            .zip(self.sq_update.iter_mut())
        {
            for i in 0..param.len() {
                let g = grad[i];
                sq_g[i] = rho * sq_g[i] + (1.0 - rho) * g * g;
                let delta = -(libm::sqrt(sq_u[i] + eps) / libm::sqrt(sq_g[i] + eps)) * g;
                sq_u[i] = rho * sq_u[i] + (1.0 - rho) * delta * delta;
                param[i] += delta;
            }
        }
        Ok(())
    }
}

/// Hyperparameters of a training run. There is deliberately no step size.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Epochs without a new best validation loss before stopping.
    pub patience: usize,
    pub validation_fraction: f64,
    pub seed: u64,
    pub rho: f64,
    pub eps: f64,
    /// Global gradient-norm ceiling applied before each update.
    pub clip_norm: f64,
    /// Training stops once the epoch's training loss is at or below this.
    pub loss_floor: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 32,
            patience: 20,
            validation_fraction: 0.1,
            seed: 42,
            rho: 0.95,
            eps: 1e-6,
            clip_norm: 5.0,
            loss_floor: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if self.batch_size == 0 {
            return fail("batch size must be positive");
        }
        if self.patience == 0 {
            return fail("patience must be positive");
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return fail("validation fraction must lie in (0, 1)");
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return fail("rho must lie in (0, 1)");
        }
        if !(self.eps > 0.0) || !(self.clip_norm > 0.0) || !(self.loss_floor > 0.0) {
            return fail("eps, clip norm and loss floor must be positive");
        }
        Ok(())
    }
}

/// One training example: raw features and the count to predict.
#[derive(Debug, Clone, Copy)]
pub struct Example<'a> {
    pub features: &'a [DenseVector],
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    /// 1-based epoch number.
    pub epoch: usize,
    /// Mean per-sample loss seen while training this epoch.
    pub train_loss: f64,
    pub val_loss: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were restored, if any epoch ran.
    pub best_epoch: Option<usize>,
    pub stopped_early: bool,
}

impl TrainReport {
    pub fn best_val_loss(&self) -> Option<f64> {
        self.best_epoch.map(|e| self.epochs[e - 1].val_loss)
    }
}

/// Result of [`train`]: the best-validation model plus the optimizer state
/// at the end of the run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: DlamModel,
    pub report: TrainReport,
    pub optimizer: AdadeltaState,
}

/// Hooks for timing and progress reporting.
pub trait TrainObserver {
    /// Monotonic seconds; the default clock always reads zero.
    fn now(&mut self) -> f64 {
        0.0
    }

    fn on_epoch(&mut self, _record: &EpochRecord) {}
}

/// Observer that does nothing.
pub struct Silent;

impl TrainObserver for Silent {}

/// MAPE of `model` on `batch` (count space, before clamping) and its
/// gradient with respect to every parameter.
///
/// Per-sample gradients are accumulated in batch order.
pub fn loss_and_gradient(model: &DlamModel, batch: &[Example<'_>]) -> Result<(f64, ModelParams)> {
    let tf = model.config.target_transform;
    let mut forwards = Vec::with_capacity(batch.len());
    let mut preds = Vec::with_capacity(batch.len());
    let mut targets = Vec::with_capacity(batch.len());
    for ex in batch {
        let fwd = model.forward(ex.features)?;
        preds.push(tf.inverse(fwd.output));
        targets.push(ex.target);
        forwards.push(fwd);
    }
    let (loss, d_preds) = mape_loss(&preds, &targets)?;
    let mut grads = model.params.zeros_like();
    for (fwd, d_pred) in forwards.iter().zip(d_preds) {
        let d_output = d_pred * tf.inverse_derivative(fwd.output);
        if d_output == 0.0 {
            continue;
        }
        grads.accumulate(&model.backward(fwd, d_output)?);
    }
    Ok((loss, grads))
}

/// MAPE of unclamped predictions over `examples`.
pub fn evaluate_loss(model: &DlamModel, examples: &[Example<'_>]) -> Result<f64> {
    let tf = model.config.target_transform;
    let mut total = 0.0;
    for ex in examples {
        let p = tf.inverse(model.forward(ex.features)?.output);
        total += libm::fabs((p - ex.target) / ex.target);
    }
    Ok(total / examples.len() as f64)
}

/// [`train_observed`] without timing or progress output.
pub fn train(model: DlamModel, data: &[Example<'_>], cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_observed(model, data, cfg, &mut Silent)
}

/// Mini-batch training with early stopping on a held-out split.
///
/// The seed drives the train/validation split and every epoch's shuffle.
/// The returned model carries the parameters of the epoch with the lowest
/// validation loss.
pub fn train_observed(
    mut model: DlamModel,
    data: &[Example<'_>],
    cfg: &TrainConfig,
    observer: &mut dyn TrainObserver,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Empty("training data"));
    }
    if let Some((index, ex)) = data.iter().enumerate().find(|(_, e)| !(e.target > 0.0)) {
        return Err(Error::NonPositiveTarget {
            index,
            value: ex.target,
        });
    }
    let mut optimizer = AdadeltaState::new(&model.params, cfg.rho, cfg.eps);
    let mut report = TrainReport::default();
    if cfg.epochs == 0 {
        return Ok(TrainOutcome {
            model,
            report,
            optimizer,
        });
    }

    let mut rng = Rng::new(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    rng.shuffle(&mut order);
    let n_val = if data.len() > 1 {
        let v = libm::round(cfg.validation_fraction * data.len() as f64) as usize;
        v.clamp(1, data.len() - 1)
    } else {
        0
    };
    let (val_idx, train_idx) = order.split_at(n_val);
    let val: Vec<Example<'_>> = val_idx.iter().map(|&i| data[i]).collect();
    let mut train_idx = train_idx.to_vec();

    let mut best = model.params.clone();
    let mut best_loss = f64::INFINITY;
    let mut since_best = 0;
    for epoch in 1..=cfg.epochs {
        let start = observer.now();
        rng.shuffle(&mut train_idx);
        let mut loss_sum = 0.0;
        for (b, chunk) in train_idx.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<Example<'_>> = chunk.iter().map(|&i| data[i]).collect();
            let (loss, mut grads) = loss_and_gradient(&model, &batch)?;
            if !loss.is_finite() || !grads.all_finite() {
                return Err(Error::Diverged { epoch, batch: b + 1 });
            }
            loss_sum += loss * batch.len() as f64;
            clip_global_norm(&mut grads, cfg.clip_norm);
            optimizer.step(&mut model.params, &grads)?;
            if !model.params.all_finite() {
                return Err(Error::Diverged { epoch, batch: b + 1 });
            }
        }
        let train_loss = loss_sum / train_idx.len() as f64;
        let val_loss = if val.is_empty() {
            evaluate_loss(&model, &train_idx.iter().map(|&i| data[i]).collect::<Vec<_>>())?
        } else {
            evaluate_loss(&model, &val)?
        };
        if !val_loss.is_finite() {
            return Err(Error::Diverged { epoch, batch: 0 });
        }
        let record = EpochRecord {
            epoch,
            train_loss,
            val_loss,
            seconds: observer.now() - start,
        };
        observer.on_epoch(&record);
        report.epochs.push(record);

        if val_loss < best_loss {
            best_loss = val_loss;
            best = model.params.clone();
            report.best_epoch = Some(epoch);
            since_best = 0;
        } else {
            since_best += 1;
        }
        if since_best >= cfg.patience || train_loss <= cfg.loss_floor {
            report.stopped_early = epoch < cfg.epochs;
            break;
        }
    }
    model.params = best;
    Ok(TrainOutcome {
        model,
        report,
        optimizer,
    })
}
