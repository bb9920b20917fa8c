//! Run configuration: a TOML document whose every key is optional.
//!
//! ```toml
//! seed = 7
//! hidden = 16
//! horizons = [1, 2, 3]
//! models = ["DLAM", "LINEAR"]
//! ```
//!
//! Command-line flags override values from the file, which override the
//! built-in defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};

use dlam_core::data::{FilterConfig, SampleConfig, DEFAULT_MIN_COUNT, DEFAULT_TRAIN_YEARS, DEFAULT_WINDOW};
use dlam_core::experiment::{ExperimentConfig, ModelKind, DEFAULT_HIDDEN, DEFAULT_LAYERS};
use dlam_core::metrics::DEFAULT_EPSILON;
use dlam_core::training::TrainConfig;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub layers: usize,
    pub hidden: usize,
    pub train_years: usize,
    pub window: usize,
    pub horizons: Vec<u32>,
    pub min_count: u64,
    pub epsilon: f64,
    pub test_fraction: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub patience: usize,
    pub validation_fraction: f64,
    pub clip_norm: f64,
    pub loss_floor: f64,
    pub rho: f64,
    pub eps: f64,
    pub models: Vec<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let train = TrainConfig::default();
        Self {
            seed: train.seed,
            layers: DEFAULT_LAYERS,
            hidden: DEFAULT_HIDDEN,
            train_years: DEFAULT_TRAIN_YEARS,
            window: DEFAULT_WINDOW,
            horizons: SampleConfig::default().horizons,
            min_count: DEFAULT_MIN_COUNT,
            epsilon: DEFAULT_EPSILON,
            test_fraction: ExperimentConfig::default().test_fraction,
            epochs: train.epochs,
            batch_size: train.batch_size,
            patience: train.patience,
            validation_fraction: train.validation_fraction,
            clip_norm: train.clip_norm,
            loss_floor: train.loss_floor,
            rho: train.rho,
            eps: train.eps,
            models: ModelKind::ALL.iter().map(|k| k.as_str().to_string()).collect(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|source| Error::Config {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Reads `path` if given, else starts from the defaults.
    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            patience: self.patience,
            validation_fraction: self.validation_fraction,
            seed: self.seed,
            rho: self.rho,
            eps: self.eps,
            clip_norm: self.clip_norm,
            loss_floor: self.loss_floor,
        }
    }

    pub fn model_kinds(&self) -> Result<Vec<ModelKind>> {
        let mut kinds: Vec<ModelKind> = self
            .models
            .iter()
            .map(|m| m.parse().map_err(|_| Error::Usage(format!("unknown model `{m}`"))))
            .collect::<Result<_>>()?;
        kinds.sort_unstable();
        kinds.dedup();
        Ok(kinds)
    }

    /// Checks ranges and converts to the core experiment description.
    pub fn experiment(&self) -> Result<ExperimentConfig> {
        let usage = |m: String| Err(Error::Usage(m));
        if self.layers == 0 || self.hidden == 0 || self.window == 0 || self.train_years == 0 {
            return usage("layers, hidden, window and train-years must be at least 1".into());
        }
        if self.horizons.is_empty() || self.horizons.contains(&0) {
            return usage("horizons must be a non-empty list of positive integers".into());
        }
        if !(self.epsilon > 0.0) {
            return usage(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return usage(format!("test fraction must lie in (0, 1), got {}", self.test_fraction));
        }
        let train = self.train_config();
        train
            .validate()
            .map_err(|e| Error::Usage(e.to_string()))?;
        let models = self.model_kinds()?;
        if models.is_empty() {
            return usage("at least one model is required".into());
        }
        let mut horizons = self.horizons.clone();
        horizons.sort_unstable();
        horizons.dedup();
        Ok(ExperimentConfig {
            layers: self.layers,
            hidden: self.hidden,
            sample: SampleConfig {
                train_years: self.train_years,
                window: self.window,
                horizons,
            },
            filter: FilterConfig {
                min_count: self.min_count,
                ..FilterConfig::default()
            },
            train,
            epsilon: self.epsilon,
            test_fraction: self.test_fraction,
            models,
        })
    }
}
