//! Model comparison across horizons: DLAM, the LT-CCP ablation and the
//! linear baseline, each trained per horizon on one shared split.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::data::{build_samples, FilterConfig, PopularityHistory, SampleConfig, TrainingSample};
use crate::error::{Error, Result};
use crate::linear::{fit_linear, DEFAULT_RIDGE};
use crate::metrics::{EvalReport, Predictor, DEFAULT_EPSILON};
use crate::model::{DlamModel, ModelConfig, Transform, Variant};
use crate::numerics::Rng;
use crate::training::{train_observed, Example, TrainConfig, TrainObserver, TrainReport};

/// Default number of stacked LSTM layers.
pub const DEFAULT_LAYERS: usize = 2;
/// Default LSTM width.
pub const DEFAULT_HIDDEN: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelKind {
    Dlam,
    LtCcp,
    Linear,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Dlam, ModelKind::LtCcp, ModelKind::Linear];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Dlam => "DLAM",
            ModelKind::LtCcp => "LT-CCP",
            ModelKind::Linear => "LINEAR",
        }
    }

    pub fn variant(self) -> Option<Variant> {
        match self {
            ModelKind::Dlam => Some(Variant::Dlam),
            ModelKind::LtCcp => Some(Variant::LtCcp),
            ModelKind::Linear => None,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("linear") {
            return Ok(ModelKind::Linear);
        }
        Ok(match s.parse::<Variant>()? {
            Variant::Dlam => ModelKind::Dlam,
            Variant::LtCcp => ModelKind::LtCcp,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub layers: usize,
    pub hidden: usize,
    pub sample: SampleConfig,
    pub filter: FilterConfig,
    pub train: TrainConfig,
    pub epsilon: f64,
    /// Fraction of filtered items held out for testing.
    pub test_fraction: f64,
    pub models: Vec<ModelKind>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            layers: DEFAULT_LAYERS,
            hidden: DEFAULT_HIDDEN,
            sample: SampleConfig::default(),
            filter: FilterConfig::default(),
            train: TrainConfig::default(),
            epsilon: DEFAULT_EPSILON,
            test_fraction: 0.2,
            models: ModelKind::ALL.to_vec(),
        }
    }
}

impl ExperimentConfig {
    pub fn model_config(&self, variant: Variant, horizon: u32) -> ModelConfig {
        ModelConfig {
            variant,
            layers: self.layers,
            hidden: self.hidden,
            input_dim: self.sample.window,
            steps: self.sample.train_years,
            horizon,
            input_transform: Transform::Log1p,
            target_transform: Transform::Log1p,
        }
    }
}

/// Filtered samples split into training and test items.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: Vec<TrainingSample>,
    pub test: Vec<TrainingSample>,
}

/// Filters `histories`, cuts samples and splits them with the training seed.
pub fn prepare(histories: &[PopularityHistory], cfg: &ExperimentConfig) -> Result<Split> {
    if !(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0) {
        return Err(Error::InvalidConfig("test fraction must lie in (0, 1)".into()));
    }
    let filter = FilterConfig {
        first_years: cfg.sample.train_years,
        min_followup: cfg.sample.horizons.iter().copied().max().unwrap_or(0) as usize,
        ..cfg.filter
    };
    let mut samples: Vec<TrainingSample> = histories
        .iter()
        .filter(|h| filter.keeps(h))
        .map(|h| build_samples(h, &cfg.sample))
        .collect::<Result<_>>()?;
    if samples.len() < 2 {
        return Err(Error::Empty("filtered sample set"));
    }
    let mut rng = Rng::new(cfg.train.seed ^ 0x5eed_5917);
    rng.shuffle(&mut samples);
    let n_test = (libm::round(cfg.test_fraction * samples.len() as f64) as usize).clamp(1, samples.len() - 1);
    let train = samples.split_off(n_test);
    Ok(Split { train, test: samples })
}

/// One (model, horizon) pair of the comparison grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cell {
    pub kind: ModelKind,
    pub horizon: u32,
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at horizon {}", self.kind, self.horizon)
    }
}

/// Grid cells in output order: model-major, ascending horizon.
pub fn cells(cfg: &ExperimentConfig) -> Vec<Cell> {
    let mut horizons = cfg.sample.horizons.clone();
    horizons.sort_unstable();
    horizons.dedup();
    cfg.models
        .iter()
        .flat_map(|&kind| horizons.iter().map(move |&horizon| Cell { kind, horizon }))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterPoint {
    pub item: String,
    pub predicted: f64,
    pub actual: f64,
}

#[derive(Debug, Clone)]
pub enum TrainedModel {
    Neural(DlamModel),
    Linear(crate::linear::LinearModel),
}

impl Predictor for TrainedModel {
    fn predict_count(&self, features: &[crate::numerics::DenseVector]) -> Result<f64> {
        match self {
            TrainedModel::Neural(m) => m.predict_count(features),
            TrainedModel::Linear(m) => m.predict_count(features),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CellOutput {
    pub cell: Cell,
    pub report: EvalReport,
    pub predictions: Vec<ScatterPoint>,
    /// Attention weights per test item (DLAM only).
    pub attention: Vec<(String, Vec<f64>)>,
    pub training: Option<TrainReport>,
    pub model: TrainedModel,
}

fn examples(samples: &[TrainingSample], horizon: u32) -> Vec<Example<'_>> {
    samples.iter().filter_map(|s| s.example(horizon)).collect()
}

/// Fits the cell's model on `split.train` and scores it on `split.test`.
pub fn run_cell(
    cell: Cell,
    split: &Split,
    cfg: &ExperimentConfig,
    observer: &mut dyn TrainObserver,
) -> Result<CellOutput> {
    let train_set = examples(&split.train, cell.horizon);
    if train_set.is_empty() {
        return Err(Error::EmptyHorizon(cell.horizon));
    }
    let (model, training) = match cell.kind.variant() {
        Some(variant) => {
            let mut rng = Rng::new(cfg.train.seed);
            let init = DlamModel::new(cfg.model_config(variant, cell.horizon), &mut rng)?;
            let outcome = train_observed(init, &train_set, &cfg.train, observer)?;
            (TrainedModel::Neural(outcome.model), Some(outcome.report))
        }
        None => {
            let m = fit_linear(
                &train_set,
                cfg.sample.train_years,
                cfg.sample.window,
                cell.horizon,
                Transform::Log1p,
                DEFAULT_RIDGE,
            )?;
            (TrainedModel::Linear(m), None)
        }
    };

    let mut predictions = Vec::new();
    let mut attention = Vec::new();
    for s in &split.test {
        let Some(&actual) = s.targets.get(&cell.horizon) else {
            continue;
        };
        let predicted = match &model {
            TrainedModel::Neural(m) => {
                let (p, trace) = m.predict_with_trace(&s.features)?;
                if let Some(trace) = trace {
                    attention.push((s.item.clone(), trace.weights.into_vec()));
                }
                p
            }
            TrainedModel::Linear(m) => m.predict_count(&s.features)?,
        };
        predictions.push(ScatterPoint {
            item: s.item.clone(),
            predicted,
            actual,
        });
    }
    if predictions.is_empty() {
        return Err(Error::EmptyHorizon(cell.horizon));
    }
    let (preds, obs): (Vec<f64>, Vec<f64>) = predictions.iter().map(|p| (p.predicted, p.actual)).unzip();
    let report = EvalReport::from_predictions(cell.horizon, &preds, &obs, cfg.epsilon)?;
    Ok(CellOutput {
        cell,
        report,
        predictions,
        attention,
        training,
        model,
    })
}
