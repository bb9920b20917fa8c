//! CSV tables and atomic file writes.
//!
//! Floats are written with Rust's shortest round-trip formatting so the same
//! numbers always produce the same bytes.

use std::io::Write;
use std::path::Path;

use dlam_core::data::{DistributionHistogram, LogBin};
use dlam_core::experiment::{CellOutput, ModelKind};
use dlam_core::metrics::EvalReport;
use dlam_core::training::TrainReport;

use crate::error::{Error, Result};

/// Writes `bytes` to a temporary file next to `path`, then renames it over
/// `path`, so readers never observe a half-written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

type Table = csv::Writer<Vec<u8>>;

fn table(header: &[&str]) -> Result<Table> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    Ok(w)
}

fn finish(w: Table) -> Result<Vec<u8>> {
    w.into_inner()
        .map_err(|e| Error::Csv(csv::Error::from(e.into_error())))
}

pub fn metrics_csv(rows: &[(ModelKind, EvalReport)]) -> Result<Vec<u8>> {
    let mut w = table(&["model", "horizon", "MAPE", "ACC", "epsilon", "M"])?;
    for (kind, r) in rows {
        w.write_record([
            kind.as_str().to_string(),
            r.horizon.to_string(),
            r.mape.to_string(),
            r.acc.to_string(),
            r.epsilon.to_string(),
            r.items.to_string(),
        ])?;
    }
    finish(w)
}

/// Per-epoch losses. Wall time is optional because it is never reproducible.
pub fn training_csv(report: &TrainReport, with_seconds: bool) -> Result<Vec<u8>> {
    let mut header = vec!["epoch", "train_loss", "val_loss"];
    if with_seconds {
        header.push("seconds");
    }
    let mut w = table(&header)?;
    for e in &report.epochs {
        let mut row = vec![e.epoch.to_string(), e.train_loss.to_string(), e.val_loss.to_string()];
        if with_seconds {
            row.push(e.seconds.to_string());
        }
        w.write_record(&row)?;
    }
    finish(w)
}

/// Number of items per final citation count.
pub fn histogram_csv(hist: &DistributionHistogram) -> Result<Vec<u8>> {
    let mut w = table(&["citations", "items"])?;
    for (count, items) in &hist.buckets {
        w.write_record([count.to_string(), items.to_string()])?;
    }
    finish(w)
}

pub fn log_bins_csv(bins: &[LogBin]) -> Result<Vec<u8>> {
    let mut w = table(&["lower", "upper", "items", "density"])?;
    for b in bins {
        w.write_record([
            b.lower.to_string(),
            b.upper.to_string(),
            b.items.to_string(),
            b.density.to_string(),
        ])?;
    }
    finish(w)
}

pub fn predictions_csv(horizon: u32, rows: &[(String, f64)]) -> Result<Vec<u8>> {
    let mut w = table(&["item", "horizon", "predicted"])?;
    for (item, p) in rows {
        w.write_record([item.clone(), horizon.to_string(), p.to_string()])?;
    }
    finish(w)
}

pub fn scatter_csv(cells: &[CellOutput]) -> Result<Vec<u8>> {
    let mut w = table(&["model", "horizon", "item", "predicted", "actual"])?;
    for c in cells {
        for p in &c.predictions {
            w.write_record([
                c.cell.kind.as_str().to_string(),
                c.cell.horizon.to_string(),
                p.item.clone(),
                p.predicted.to_string(),
                p.actual.to_string(),
            ])?;
        }
    }
    finish(w)
}

/// Attention weights in long form, one row per (item, timestep).
pub fn attention_csv(cells: &[CellOutput]) -> Result<Vec<u8>> {
    let mut w = table(&["model", "horizon", "item", "t", "weight"])?;
    for c in cells {
        for (item, weights) in &c.attention {
            for (t, a) in weights.iter().enumerate() {
                w.write_record([
                    c.cell.kind.as_str().to_string(),
                    c.cell.horizon.to_string(),
                    item.clone(),
                    t.to_string(),
                    a.to_string(),
                ])?;
            }
        }
    }
    finish(w)
}

/// Training curves of every neural cell, without wall time.
pub fn experiment_training_csv(cells: &[CellOutput]) -> Result<Vec<u8>> {
    let mut w = table(&["model", "horizon", "epoch", "train_loss", "val_loss"])?;
    for c in cells {
        let Some(report) = &c.training else { continue };
        for e in &report.epochs {
            w.write_record([
                c.cell.kind.as_str().to_string(),
                c.cell.horizon.to_string(),
                e.epoch.to_string(),
                e.train_loss.to_string(),
                e.val_loss.to_string(),
            ])?;
        }
    }
    finish(w)
}

/// Renders CSV bytes as a column-aligned table for humans. Numbers are
/// right-aligned and shortened to 4 decimals.
pub fn pretty(csv_bytes: &[u8]) -> Result<String> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(csv_bytes);
    let mut rows: Vec<Vec<String>> = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        rows.push(
            rec.iter()
                .map(|f| match f.parse::<f64>() {
                    Ok(v) if f.contains('.') || f.contains('e') => format!("{v:.4}"),
                    _ => f.to_string(),
                })
                .collect(),
        );
    }
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (i, row) in rows.iter().enumerate() {
        let cells: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, s)| {
                if i > 0 && s.parse::<f64>().is_ok() {
                    format!("{s:>w$}", w = widths[c])
                } else {
                    format!("{s:<w$}", w = widths[c])
                }
            })
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
        if i == 0 {
            let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
            out.push_str(&rule.join("  "));
            out.push('\n');
        }
    }
    Ok(out)
}
