//! Text file formats: model documents, training checkpoints, the histories
//! cache and the synthetic ground-truth sidecar.
//!
//! Model and checkpoint documents are line oriented:
//!
//! ```text
//! dlam-model 1
//! mode DLAM
//! layers 2
//! ...
//! tensor layer0.w_i 32 42
//! <one row per line, values separated by spaces>
//! ...
//! end
//! ```
//!
//! Values are written with 17 significant digits, which is enough for every
//! `f64` to parse back to the same bits.

use std::fmt::Write as _;
use std::str::FromStr;

use dlam_core::attention::AttentionParams;
use dlam_core::data::PopularityHistory;
use dlam_core::linear::LinearModel;
use dlam_core::lstm::StackParams;
use dlam_core::model::{Head, ModelParams, ReadoutParams};
use dlam_core::synth::SyntheticItem;
use dlam_core::training::AdadeltaState;
use dlam_core::{DenseVector, DlamModel, ModelConfig, Parameters, Transform, Variant};

use crate::error::FormatError;

pub const MODEL_MAGIC: &str = "dlam-model";
pub const CHECKPOINT_MAGIC: &str = "dlam-checkpoint";
pub const HISTORIES_MAGIC: &str = "# dlam-histories 1";
pub const FORMAT_VERSION: u32 = 1;

const LSTM_TENSORS: [&str; 8] = ["w_i", "w_f", "w_c", "w_o", "b_i", "b_f", "b_c", "b_o"];

/// Anything the model file can hold.
#[derive(Debug, Clone, PartialEq)]
pub enum SavedModel {
    Neural(DlamModel),
    Linear(LinearModel),
}

impl SavedModel {
    pub fn mode(&self) -> &'static str {
        match self {
            SavedModel::Neural(m) => m.config.variant.as_str(),
            SavedModel::Linear(_) => "LINEAR",
        }
    }

    pub fn horizon(&self) -> u32 {
        match self {
            SavedModel::Neural(m) => m.config.horizon,
            SavedModel::Linear(m) => m.horizon,
        }
    }

    pub fn steps(&self) -> usize {
        match self {
            SavedModel::Neural(m) => m.config.steps,
            SavedModel::Linear(m) => m.steps,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            SavedModel::Neural(m) => m.config.input_dim,
            SavedModel::Linear(m) => m.input_dim,
        }
    }

    pub fn predict(&self, features: &[DenseVector]) -> dlam_core::Result<f64> {
        match self {
            SavedModel::Neural(m) => m.predict(features),
            SavedModel::Linear(m) => dlam_core::linear::predict_linear(m, features),
        }
    }
}

/// Name and shape of every tensor of a neural model, in parameter order.
pub fn tensor_layout(config: &ModelConfig) -> Vec<(String, usize, usize)> {
    let h = config.hidden;
    let mut out = Vec::new();
    for layer in 0..config.layers {
        let input = if layer == 0 { config.input_dim } else { h };
        for (k, name) in LSTM_TENSORS.iter().enumerate() {
            let cols = if k < 4 { h + input } else { 1 };
            out.push((format!("layer{layer}.{name}"), h, cols));
        }
    }
    match config.variant {
        Variant::Dlam => {
            out.push(("attention.score".into(), 1, config.input_dim + h));
            out.push(("attention.readout".into(), 1, config.input_dim));
            out.push(("attention.bias".into(), 1, 1));
        }
        Variant::LtCcp => {
            out.push(("readout.weights".into(), 1, h));
            out.push(("readout.bias".into(), 1, 1));
        }
    }
    out
}

fn write_tensor(out: &mut String, name: &str, rows: usize, cols: usize, values: &[f64]) {
    debug_assert_eq!(rows * cols, values.len());
    let _ = writeln!(out, "tensor {name} {rows} {cols}");
    for row in values.chunks(cols.max(1)) {
        let mut first = true;
        for v in row {
            if !first {
                out.push(' ');
            }
            first = false;
            let _ = write!(out, "{v:.16e}");
        }
        out.push('\n');
    }
}

fn write_neural_body(out: &mut String, m: &DlamModel) {
    let c = &m.config;
    let _ = writeln!(out, "mode {}", c.variant.as_str());
    let _ = writeln!(out, "layers {}", c.layers);
    let _ = writeln!(out, "hidden {}", c.hidden);
    let _ = writeln!(out, "input_dim {}", c.input_dim);
    let _ = writeln!(out, "steps {}", c.steps);
    let _ = writeln!(out, "horizon {}", c.horizon);
    let _ = writeln!(out, "input_transform {}", c.input_transform.as_str());
    let _ = writeln!(out, "target_transform {}", c.target_transform.as_str());
    for ((name, rows, cols), values) in tensor_layout(c).iter().zip(m.params.slices()) {
        write_tensor(out, name, *rows, *cols, values);
    }
}

pub fn model_to_string(model: &SavedModel) -> String {
    let mut out = format!("{MODEL_MAGIC} {FORMAT_VERSION}\n");
    match model {
        SavedModel::Neural(m) => write_neural_body(&mut out, m),
        SavedModel::Linear(m) => {
            let _ = writeln!(out, "mode LINEAR");
            let _ = writeln!(out, "input_dim {}", m.input_dim);
            let _ = writeln!(out, "steps {}", m.steps);
            let _ = writeln!(out, "horizon {}", m.horizon);
            let _ = writeln!(out, "target_transform {}", m.target_transform.as_str());
            write_tensor(&mut out, "weights", 1, m.weights.len(), m.weights.as_slice());
        }
    }
    out.push_str("end\n");
    out
}

/// A model plus optimizer accumulators, enough to resume training.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: DlamModel,
    pub optimizer: AdadeltaState,
}

pub fn checkpoint_to_string(ckpt: &Checkpoint) -> String {
    let mut out = format!("{CHECKPOINT_MAGIC} {FORMAT_VERSION}\n");
    write_neural_body(&mut out, &ckpt.model);
    let opt = &ckpt.optimizer;
    let _ = writeln!(out, "rho {:.16e}", opt.rho);
    let _ = writeln!(out, "eps {:.16e}", opt.eps);
    let layout = tensor_layout(&ckpt.model.config);
    for (prefix, buffers) in [("sq_grad", &opt.sq_grad), ("sq_update", &opt.sq_update)] {
        for ((name, rows, cols), values) in layout.iter().zip(buffers) {
            write_tensor(&mut out, &format!("{prefix}.{name}"), *rows, *cols, values);
        }
    }
    out.push_str("end\n");
    out
}

struct Token<'a> {
    line: usize,
    column: usize,
    text: &'a str,
}

impl Token<'_> {
    fn error(&self, message: impl Into<String>) -> FormatError {
        FormatError::new(self.line, self.column, message)
    }

    fn parse<T: FromStr>(&self, what: &str) -> Result<T, FormatError> {
        self.text
            .parse()
            .map_err(|_| self.error(format!("invalid {what} `{}`", self.text)))
    }
}

fn tokens(line: usize, text: &str) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in text.char_indices().chain(std::iter::once((text.len(), ' '))) {
        match (ch.is_whitespace(), start) {
            (true, Some(s)) => {
                out.push(Token {
                    line,
                    column: text[..s].chars().count() + 1,
                    text: &text[s..i],
                });
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    out
}

/// Line reader that skips blank lines and remembers where it is.
struct Reader<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Reader<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            lines: text.lines().enumerate(),
            last: 0,
        }
    }

    fn next_line(&mut self, expecting: &str) -> Result<(usize, Vec<Token<'a>>), FormatError> {
        for (i, text) in self.lines.by_ref() {
            self.last = i + 1;
            let toks = tokens(i + 1, text);
            if !toks.is_empty() {
                return Ok((i + 1, toks));
            }
        }
        Err(FormatError::new(
            self.last + 1,
            1,
            format!("unexpected end of file, expected {expecting}"),
        ))
    }

    fn header(&mut self, magic: &str) -> Result<(), FormatError> {
        let (line, toks) = self.next_line("header")?;
        let got = toks.iter().map(|t| t.text).collect::<Vec<_>>();
        if got.len() != 2 || got[0] != magic {
            return Err(FormatError::new(line, 1, format!("expected header `{magic} {FORMAT_VERSION}`")));
        }
        let version: u32 = toks[1].parse("version")?;
        if version != FORMAT_VERSION {
            return Err(toks[1].error(format!(
                "unsupported version {version}, this build reads version {FORMAT_VERSION}"
            )));
        }
        Ok(())
    }

    fn field(&mut self, key: &str) -> Result<Token<'a>, FormatError> {
        let (line, mut toks) = self.next_line(&format!("`{key}`"))?;
        if toks[0].text != key {
            return Err(toks[0].error(format!("expected `{key}`, found `{}`", toks[0].text)));
        }
        if toks.len() != 2 {
            let col = toks.get(2).map_or(toks[0].column, |t| t.column);
            return Err(FormatError::new(line, col, format!("`{key}` takes exactly one value")));
        }
        Ok(toks.pop().expect("two tokens"))
    }

    fn value<T: FromStr>(&mut self, key: &str) -> Result<T, FormatError> {
        self.field(key)?.parse(key)
    }

    fn tensor(&mut self, name: &str, rows: usize, cols: usize) -> Result<Vec<f64>, FormatError> {
        let (line, toks) = self.next_line(&format!("tensor `{name}`"))?;
        if toks[0].text != "tensor" {
            return Err(toks[0].error(format!("expected `tensor {name}`, found `{}`", toks[0].text)));
        }
        if toks.len() != 4 {
            return Err(FormatError::new(line, toks[0].column, "tensor header is `tensor NAME ROWS COLS`"));
        }
        if toks[1].text != name {
            return Err(toks[1].error(format!("expected tensor `{name}`, found `{}`", toks[1].text)));
        }
        let r: usize = toks[2].parse("row count")?;
        if r != rows {
            return Err(toks[2].error(format!("tensor `{name}` must have {rows} rows, found {r}")));
        }
        let c: usize = toks[3].parse("column count")?;
        if c != cols {
            return Err(toks[3].error(format!("tensor `{name}` must have {cols} columns, found {c}")));
        }
        let mut values = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let (line, toks) = self.next_line(&format!("a row of tensor `{name}`"))?;
            if toks.len() != cols {
                let col = toks.get(cols).map_or(toks[0].column, |t| t.column);
                return Err(FormatError::new(
                    line,
                    col,
                    format!("expected {cols} values, found {}", toks.len()),
                ));
            }
            for t in &toks {
                let v: f64 = t.parse("number")?;
                if !v.is_finite() {
                    return Err(t.error(format!("non-finite value `{}`", t.text)));
                }
                values.push(v);
            }
        }
        Ok(values)
    }

    fn end(&mut self) -> Result<(), FormatError> {
        let (line, toks) = self.next_line("`end`")?;
        if toks.len() != 1 || toks[0].text != "end" {
            return Err(FormatError::new(line, 1, "expected `end`"));
        }
        if let Ok((line, _)) = self.next_line("") {
            return Err(FormatError::new(line, 1, "trailing content after `end`"));
        }
        Ok(())
    }
}

fn parse_transform(tok: &Token<'_>) -> Result<Transform, FormatError> {
    tok.text
        .parse()
        .map_err(|_| tok.error(format!("unknown transform `{}`", tok.text)))
}

fn parse_neural_body(r: &mut Reader<'_>, variant: Variant) -> Result<DlamModel, FormatError> {
    let layers_tok = r.field("layers")?;
    let layers: usize = layers_tok.parse("layer count")?;
    let hidden: usize = r.value("hidden")?;
    let input_dim: usize = r.value("input_dim")?;
    let steps: usize = r.value("steps")?;
    let horizon: u32 = r.value("horizon")?;
    let input_transform = parse_transform(&r.field("input_transform")?)?;
    let target_transform = parse_transform(&r.field("target_transform")?)?;
    let config = ModelConfig {
        variant,
        layers,
        hidden,
        input_dim,
        steps,
        horizon,
        input_transform,
        target_transform,
    };
    config.validate().map_err(|e| layers_tok.error(e.to_string()))?;

    let head = match variant {
        Variant::Dlam => Head::Attention(AttentionParams::zeros(input_dim, hidden)),
        Variant::LtCcp => Head::LastState(ReadoutParams {
            weights: DenseVector::zeros(hidden),
            bias: 0.0,
        }),
    };
    let mut params = ModelParams {
        stack: StackParams::zeros(layers, hidden, input_dim),
        head,
    };
    let layout = tensor_layout(&config);
    for ((name, rows, cols), slot) in layout.iter().zip(params.slices_mut()) {
        let values = r.tensor(name, *rows, *cols)?;
        slot.copy_from_slice(&values);
    }
    DlamModel::from_parts(config, params).map_err(|e| FormatError::new(r.last, 1, e.to_string()))
}

pub fn parse_model(text: &str) -> Result<SavedModel, FormatError> {
    let mut r = Reader::new(text);
    r.header(MODEL_MAGIC)?;
    let mode = r.field("mode")?;
    let model = match mode.text {
        "LINEAR" => {
            let input_dim: usize = r.value("input_dim")?;
            let steps: usize = r.value("steps")?;
            let horizon: u32 = r.value("horizon")?;
            let target_transform = parse_transform(&r.field("target_transform")?)?;
            let weights = r.tensor("weights", 1, steps * input_dim + 1)?;
            let m = LinearModel::new(weights.into(), steps, input_dim, horizon, target_transform)
                .map_err(|e| FormatError::new(r.last, 1, e.to_string()))?;
            SavedModel::Linear(m)
        }
        other => {
            let variant: Variant = other
                .parse()
                .map_err(|_| mode.error(format!("unknown mode `{other}`")))?;
            SavedModel::Neural(parse_neural_body(&mut r, variant)?)
        }
    };
    r.end()?;
    Ok(model)
}

pub fn parse_checkpoint(text: &str) -> Result<Checkpoint, FormatError> {
    let mut r = Reader::new(text);
    r.header(CHECKPOINT_MAGIC)?;
    let mode = r.field("mode")?;
    let variant: Variant = mode
        .text
        .parse()
        .map_err(|_| mode.error(format!("checkpoints hold DLAM or LT-CCP models, found `{}`", mode.text)))?;
    let model = parse_neural_body(&mut r, variant)?;
    let rho: f64 = r.value("rho")?;
    let eps: f64 = r.value("eps")?;
    let layout = tensor_layout(&model.config);
    let mut buffers = [Vec::new(), Vec::new()];
    for (prefix, out) in ["sq_grad", "sq_update"].into_iter().zip(buffers.iter_mut()) {
        for (name, rows, cols) in &layout {
            out.push(r.tensor(&format!("{prefix}.{name}"), *rows, *cols)?);
        }
    }
    r.end()?;
    let [sq_grad, sq_update] = buffers;
    Ok(Checkpoint {
        model,
        optimizer: AdadeltaState {
            rho,
            eps,
            sq_grad,
            sq_update,
        },
    })
}

/// One history per line: `item<TAB>publication_year<TAB>c0,c1,...`.
pub fn histories_to_string(histories: &[PopularityHistory]) -> String {
    let mut out = String::from(HISTORIES_MAGIC);
    out.push('\n');
    for h in histories {
        let _ = write!(out, "{}\t{}\t", h.item, h.publication_year);
        let mut first = true;
        for c in h.yearly() {
            if !first {
                out.push(',');
            }
            first = false;
            let _ = write!(out, "{c}");
        }
        out.push('\n');
    }
    out
}

pub fn parse_histories(text: &str) -> Result<Vec<PopularityHistory>, FormatError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(FormatError::new(
                n,
                1,
                format!("expected 3 tab-separated fields, found {}", fields.len()),
            ));
        }
        let col2 = fields[0].chars().count() + 2;
        let col3 = col2 + fields[1].chars().count() + 1;
        if fields[0].is_empty() {
            return Err(FormatError::new(n, 1, "empty item id"));
        }
        let year: i32 = fields[1]
            .parse()
            .map_err(|_| FormatError::new(n, col2, format!("invalid year `{}`", fields[1])))?;
        dlam_core::data::check_year(year).map_err(|e| FormatError::new(n, col2, e.to_string()))?;
        let mut yearly = Vec::new();
        let mut col = col3;
        if !fields[2].is_empty() {
            for part in fields[2].split(',') {
                let c: u64 = part
                    .parse()
                    .map_err(|_| FormatError::new(n, col, format!("invalid count `{part}`")))?;
                yearly.push(c);
                col += part.chars().count() + 1;
            }
        }
        out.push(PopularityHistory::new(fields[0], year, yearly));
    }
    Ok(out)
}

/// CSV with the generating parameters of each synthetic item.
pub fn ground_truth_csv(items: &[SyntheticItem]) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["item", "fitness", "mu", "sigma", "offset"])?;
    for it in items {
        let p = &it.params;
        w.write_record([
            it.history.item.clone(),
            format!("{:.16e}", p.fitness),
            format!("{:.16e}", p.mu),
            format!("{:.16e}", p.sigma),
            format!("{:.16e}", p.offset),
        ])?;
    }
    w.into_inner().map_err(|e| csv::Error::from(e.into_error()))
}
