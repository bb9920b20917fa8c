//! Runs the model comparison grid and writes its artifacts.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use dlam_core::data::PopularityHistory;
use dlam_core::experiment::{cells, prepare, run_cell, CellOutput, ExperimentConfig, TrainedModel};
use dlam_core::training::{EpochRecord, TrainObserver};

use crate::error::{Error, Result};
use crate::format::{model_to_string, SavedModel};
use crate::output;

/// Logs one line per epoch at debug level.
pub struct EpochLog {
    label: String,
    start: Instant,
}

impl EpochLog {
    pub fn new(label: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            start: Instant::now(),
        }
    }
}

impl TrainObserver for EpochLog {
    fn now(&mut self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }

    fn on_epoch(&mut self, r: &EpochRecord) {
        log::debug!(
            "{}: epoch {} train {:.6} val {:.6} ({:.2}s)",
            self.label,
            r.epoch,
            r.train_loss,
            r.val_loss,
            r.seconds
        );
    }
}

pub fn model_file_name(cell: &dlam_core::experiment::Cell) -> String {
    format!("{}_h{}.model", cell.kind.as_str().to_ascii_lowercase(), cell.horizon)
}

pub fn saved(model: &TrainedModel) -> SavedModel {
    match model {
        TrainedModel::Neural(m) => SavedModel::Neural(m.clone()),
        TrainedModel::Linear(m) => SavedModel::Linear(m.clone()),
    }
}

#[derive(Debug)]
pub struct ExperimentOutput {
    pub cells: Vec<CellOutput>,
    pub train_items: usize,
    pub test_items: usize,
}

impl ExperimentOutput {
    pub fn metrics_csv(&self) -> Result<Vec<u8>> {
        let rows: Vec<_> = self.cells.iter().map(|c| (c.cell.kind, c.report.clone())).collect();
        output::metrics_csv(&rows)
    }
}

/// Trains every (model, horizon) cell, in parallel, and returns the results
/// in grid order. When `models_dir` is set each trained model is saved there
/// as soon as its cell finishes.
pub fn run(
    histories: &[PopularityHistory],
    cfg: &ExperimentConfig,
    models_dir: Option<&Path>,
) -> Result<ExperimentOutput> {
    let split = prepare(histories, cfg).map_err(|e| Error::core("preparing samples", e))?;
    log::info!(
        "{} training items, {} test items",
        split.train.len(),
        split.test.len()
    );
    let grid = cells(cfg);
    let results: Vec<Result<CellOutput>> = grid
        .par_iter()
        .map(|&cell| {
            let started = Instant::now();
            let mut log = EpochLog::new(cell.to_string());
            let out = run_cell(cell, &split, cfg, &mut log).map_err(|e| Error::core(format!("{cell}"), e))?;
            if let Some(dir) = models_dir {
                let path = dir.join(model_file_name(&cell));
                output::write_atomic(&path, model_to_string(&saved(&out.model)).as_bytes())?;
            }
            log::info!(
                "{cell}: MAPE {:.4} ACC {:.4} ({:.1}s)",
                out.report.mape,
                out.report.acc,
                started.elapsed().as_secs_f64()
            );
            Ok(out)
        })
        .collect();
    Ok(ExperimentOutput {
        cells: results.into_iter().collect::<Result<_>>()?,
        train_items: split.train.len(),
        test_items: split.test.len(),
    })
}

/// Files written by [`run_to_dir`].
pub const METRICS_FILE: &str = "metrics.csv";
pub const SCATTER_FILE: &str = "scatter.csv";
pub const ATTENTION_FILE: &str = "attention.csv";
pub const TRAINING_FILE: &str = "training.csv";
pub const MODELS_DIR: &str = "models";

/// Runs the grid and writes metrics, scatter, attention and training tables
/// plus one model file per cell under `out_dir`.
pub fn run_to_dir(
    histories: &[PopularityHistory],
    cfg: &ExperimentConfig,
    out_dir: &Path,
) -> Result<(ExperimentOutput, PathBuf)> {
    let models = out_dir.join(MODELS_DIR);
    let result = run(histories, cfg, Some(&models))?;
    let metrics = out_dir.join(METRICS_FILE);
    output::write_atomic(&metrics, &result.metrics_csv()?)?;
    output::write_atomic(&out_dir.join(SCATTER_FILE), &output::scatter_csv(&result.cells)?)?;
    output::write_atomic(&out_dir.join(ATTENTION_FILE), &output::attention_csv(&result.cells)?)?;
    output::write_atomic(
        &out_dir.join(TRAINING_FILE),
        &output::experiment_training_csv(&result.cells)?,
    )?;
    Ok((result, metrics))
}
