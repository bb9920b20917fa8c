//! MAPE and tolerance accuracy (ACC), per horizon.
//!
//! Sums run left to right in index order so reports are reproducible bit for
//! bit.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::numerics::DenseVector;

/// Default relative-error tolerance for [`acc`].
pub const DEFAULT_EPSILON: f64 = 0.3;

fn check(preds: &[f64], obs: &[f64]) -> Result<()> {
    if obs.is_empty() {
        return Err(Error::Empty("observations"));
    }
    if preds.len() != obs.len() {
        return Err(Error::Shape {
            context: "predictions vs observations",
            expected: (obs.len(), 1),
            actual: (preds.len(), 1),
        });
    }
    match obs.iter().position(|&n| !(n > 0.0)) {
        Some(index) => Err(Error::NonPositiveTarget {
            index,
            value: obs[index],
        }),
        None => Ok(()),
    }
}

#[inline]
fn relative_error(pred: f64, obs: f64) -> f64 {
    libm::fabs((pred - obs) / obs)
}

pub fn mape(preds: &[f64], obs: &[f64]) -> Result<f64> {
    check(preds, obs)?;
    let mut sum = 0.0;
    for (&p, &n) in preds.iter().zip(obs) {
        sum += relative_error(p, n);
    }
    Ok(sum / obs.len() as f64)
}

/// Fraction of items whose relative error is at most `epsilon` (inclusive).
pub fn acc(preds: &[f64], obs: &[f64], epsilon: f64) -> Result<f64> {
    check(preds, obs)?;
    if !(epsilon > 0.0) {
        return Err(Error::InvalidConfig(alloc::format!(
            "tolerance must be positive, got {epsilon}"
        )));
    }
    let mut hits = 0.0;
    for (&p, &n) in preds.iter().zip(obs) {
        if relative_error(p, n) <= epsilon {
            hits += 1.0;
        }
    }
    Ok(hits / obs.len() as f64)
}

/// Metrics for one horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub horizon: u32,
    pub mape: f64,
    pub acc: f64,
    pub epsilon: f64,
    /// Number of evaluated items.
    pub items: usize,
}

impl EvalReport {
    pub fn from_predictions(horizon: u32, preds: &[f64], obs: &[f64], epsilon: f64) -> Result<Self> {
        Ok(Self {
            horizon,
            mape: mape(preds, obs)?,
            acc: acc(preds, obs, epsilon)?,
            epsilon,
            items: obs.len(),
        })
    }
}

/// Anything that maps a raw feature sequence to a predicted count.
pub trait Predictor {
    fn predict_count(&self, features: &[DenseVector]) -> Result<f64>;
}

impl Predictor for crate::model::DlamModel {
    fn predict_count(&self, features: &[DenseVector]) -> Result<f64> {
        self.predict(features)
    }
}

impl Predictor for crate::linear::LinearModel {
    fn predict_count(&self, features: &[DenseVector]) -> Result<f64> {
        crate::linear::predict_linear(self, features)
    }
}

/// One report per horizon, in ascending horizon order.
///
/// `pairs` maps each horizon to its `(prediction, observation)` list; a
/// requested horizon without pairs is an error rather than a silent gap.
pub fn evaluate(
    pairs: &BTreeMap<u32, Vec<(f64, f64)>>,
    horizons: &[u32],
    epsilon: f64,
) -> Result<Vec<EvalReport>> {
    let mut sorted = horizons.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    sorted
        .into_iter()
        .map(|h| {
            let bucket = pairs.get(&h).filter(|b| !b.is_empty()).ok_or(Error::EmptyHorizon(h))?;
            let (preds, obs): (Vec<f64>, Vec<f64>) = bucket.iter().copied().unzip();
            EvalReport::from_predictions(h, &preds, &obs, epsilon)
        })
        .collect()
}
