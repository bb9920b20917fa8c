//! The `dlam` command line.

use std::fmt::Display;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use dlam_core::data::{build_samples, citation_distribution, gini, top_share, FilterConfig, PopularityHistory, SampleConfig};
use dlam_core::experiment::{ModelKind, TrainedModel};
use dlam_core::linear::{fit_linear, DEFAULT_RIDGE};
use dlam_core::metrics::EvalReport;
use dlam_core::synth::{generate_corpus, CorpusSpec};
use dlam_core::training::train_observed;
use dlam_core::{DlamModel, Rng, Transform};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::experiment::{self, saved, EpochLog};
use crate::format::{self, checkpoint_to_string, model_to_string, Checkpoint, SavedModel};
use crate::ingest::ingest_files;
use crate::output::{self, write_atomic};

/// Environment variable holding the log filter, e.g. `DLAM_LOG=debug`.
pub const LOG_ENV: &str = "DLAM_LOG";

fn with_default(text: &str, value: impl Display) -> String {
    format!("{text} [default: {value}]")
}

fn list<T: Display>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

fn defaults() -> RunConfig {
    RunConfig::default()
}

#[derive(Debug, Parser)]
#[command(
    name = "dlam",
    version,
    about = "Long-term citation count prediction with an attention LSTM",
    after_help = "Set DLAM_LOG=debug for one log line per training epoch."
)]
pub struct Cli {
    /// Print tables aligned for reading instead of CSV
    #[arg(long, global = true)]
    pub pretty: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Aggregate a citation event log into a histories cache
    Ingest(IngestArgs),
    /// Distribution of final citation counts
    Stats(StatsArgs),
    /// Generate a synthetic corpus from a reinforced Poisson process
    Generate(GenerateArgs),
    /// Train one model for one horizon
    Train(TrainArgs),
    /// Predict cumulative counts with a saved model
    Predict(PredictArgs),
    /// Score a saved model against observed histories
    Evaluate(EvaluateArgs),
    /// Compare DLAM, LT-CCP and the linear baseline across horizons
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Citation events, one `cited_id<TAB>citing_year` per line
    #[arg(long, value_name = "PATH")]
    pub events: PathBuf,
    /// Items, one `item_id<TAB>publication_year` per line
    #[arg(long, value_name = "PATH")]
    pub manifest: PathBuf,
    /// Histories cache to write
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Last observed year; histories are zero-filled up to it [default: latest citing year]
    #[arg(long, value_name = "YEAR")]
    pub last_year: Option<i32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Bins {
    /// One row per distinct count
    Linear,
    /// Logarithmic bins with item density
    Log,
    /// Item count, citation total, Gini and top-decile share
    Summary,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Histories cache
    #[arg(long, value_name = "PATH")]
    pub histories: PathBuf,
    /// Table to emit
    #[arg(long, value_enum, default_value_t = Bins::Linear)]
    pub bins: Bins,
    /// Growth factor between logarithmic bin edges
    #[arg(long, default_value_t = 2.0)]
    pub base: f64,
    /// Write the table here instead of standard output
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Histories cache to write
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Ground-truth CSV with each item's generating parameters
    #[arg(long, value_name = "PATH")]
    pub truth: Option<PathBuf>,
    #[arg(long, help = with_default("Number of items", CorpusSpec::default().items))]
    pub items: Option<usize>,
    #[arg(long, help = with_default("Observed years per item", CorpusSpec::default().years))]
    pub years: Option<usize>,
    #[arg(long, help = with_default("Random seed", CorpusSpec::default().seed))]
    pub seed: Option<u64>,
    #[arg(long, help = with_default("Median item fitness", CorpusSpec::default().fitness_median))]
    pub fitness_median: Option<f64>,
    #[arg(long, help = with_default("Standard deviation of log fitness", CorpusSpec::default().fitness_log_sd))]
    pub fitness_log_sd: Option<f64>,
}

/// Hyperparameters shared by `train`, `experiment` and friends.
#[derive(Debug, Clone, Default, Args)]
pub struct ModelArgs {
    /// TOML run configuration; flags override its values
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, help = with_default("Random seed", defaults().seed))]
    pub seed: Option<u64>,
    #[arg(long, short = 'L', help = with_default("Stacked LSTM layers", defaults().layers))]
    pub layers: Option<usize>,
    #[arg(long, help = with_default("LSTM hidden width", defaults().hidden))]
    pub hidden: Option<usize>,
    #[arg(long, help = with_default("Training period in years", defaults().train_years))]
    pub train_years: Option<usize>,
    #[arg(long, help = with_default("Sub-window length W in years", defaults().window))]
    pub window: Option<usize>,
    #[arg(long, value_delimiter = ',', help = with_default("Prediction horizons in years", list(&defaults().horizons)))]
    pub horizons: Option<Vec<u32>>,
    #[arg(long, help = with_default("Keep items with more citations than this in the training period", defaults().min_count))]
    pub min_count: Option<u64>,
    #[arg(long, help = with_default("ACC relative-error tolerance", defaults().epsilon))]
    pub epsilon: Option<f64>,
    #[arg(long, help = with_default("Fraction of items held out for testing", defaults().test_fraction))]
    pub test_fraction: Option<f64>,
    #[arg(long, help = with_default("Maximum training epochs", defaults().epochs))]
    pub epochs: Option<usize>,
    #[arg(long, help = with_default("Mini-batch size", defaults().batch_size))]
    pub batch_size: Option<usize>,
    #[arg(long, help = with_default("Epochs without validation improvement before stopping", defaults().patience))]
    pub patience: Option<usize>,
    #[arg(long, help = with_default("Fraction of training items used for validation", defaults().validation_fraction))]
    pub validation_fraction: Option<f64>,
    #[arg(long, help = with_default("Global gradient-norm clip", defaults().clip_norm))]
    pub clip_norm: Option<f64>,
    #[arg(long, value_delimiter = ',', help = with_default("Models to compare", defaults().models.join(",")))]
    pub models: Option<Vec<String>>,
}

impl ModelArgs {
    /// Defaults, then the config file, then flags.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut c = RunConfig::load_or_default(self.config.as_deref())?;
        macro_rules! apply {
            ($($field:ident),*) => {$(
                if let Some(v) = &self.$field {
                    c.$field = v.clone();
                }
            )*};
        }
        apply!(
            seed,
            layers,
            hidden,
            train_years,
            window,
            horizons,
            min_count,
            epsilon,
            test_fraction,
            epochs,
            batch_size,
            patience,
            validation_fraction,
            clip_norm,
            models
        );
        Ok(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelChoice {
    #[value(name = "DLAM", alias = "dlam")]
    Dlam,
    #[value(name = "LT-CCP", alias = "lt-ccp")]
    LtCcp,
    #[value(name = "LINEAR", alias = "linear")]
    Linear,
}

impl From<ModelChoice> for ModelKind {
    fn from(c: ModelChoice) -> Self {
        match c {
            ModelChoice::Dlam => ModelKind::Dlam,
            ModelChoice::LtCcp => ModelKind::LtCcp,
            ModelChoice::Linear => ModelKind::Linear,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Histories cache
    #[arg(long, value_name = "PATH")]
    pub histories: PathBuf,
    /// Model file to write
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Model to train
    #[arg(long, value_enum, default_value_t = ModelChoice::Dlam)]
    pub model: ModelChoice,
    /// Horizon in years after the training period
    #[arg(long, default_value_t = 1)]
    pub horizon: u32,
    /// Per-epoch losses as CSV
    #[arg(long, value_name = "PATH")]
    pub report: Option<PathBuf>,
    /// Checkpoint with optimizer state, for neural models
    #[arg(long, value_name = "PATH")]
    pub checkpoint: Option<PathBuf>,
    #[command(flatten)]
    pub params: ModelArgs,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Model file
    #[arg(long, value_name = "PATH")]
    pub model: PathBuf,
    /// Histories cache
    #[arg(long, value_name = "PATH")]
    pub histories: PathBuf,
    #[arg(long, help = with_default("Sub-window length W in years", defaults().window))]
    pub window: Option<usize>,
    /// Write predictions here instead of standard output
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Model file
    #[arg(long, value_name = "PATH")]
    pub model: PathBuf,
    /// Histories cache with enough follow-up years for the model's horizon
    #[arg(long, value_name = "PATH")]
    pub histories: PathBuf,
    #[arg(long, help = with_default("ACC relative-error tolerance", defaults().epsilon))]
    pub epsilon: Option<f64>,
    #[arg(long, help = with_default("Keep items with more citations than this in the training period", defaults().min_count))]
    pub min_count: Option<u64>,
    /// Write the report here instead of standard output
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Histories cache; omit to use a freshly generated synthetic corpus
    #[arg(long, value_name = "PATH")]
    pub histories: Option<PathBuf>,
    /// Directory for metrics.csv, scatter.csv, attention.csv, training.csv and models/
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    #[arg(long, help = with_default("Synthetic corpus size when no histories are given", CorpusSpec::default().items))]
    pub items: Option<usize>,
    #[arg(long, help = with_default("Synthetic corpus seed", CorpusSpec::default().seed))]
    pub corpus_seed: Option<u64>,
    #[command(flatten)]
    pub params: ModelArgs,
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn load_histories(path: &Path) -> Result<Vec<PopularityHistory>> {
    format::parse_histories(&read_text(path)?).map_err(|source| Error::Format {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_model(path: &Path) -> Result<SavedModel> {
    format::parse_model(&read_text(path)?).map_err(|source| Error::Format {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    format::parse_checkpoint(&read_text(path)?).map_err(|source| Error::Format {
        path: path.to_path_buf(),
        source,
    })
}

/// Where a command sends its table.
struct Sink<'a> {
    pretty: bool,
    stdout: &'a mut dyn Write,
}

impl Sink<'_> {
    fn emit(&mut self, csv: &[u8], path: Option<&Path>) -> Result<()> {
        if let Some(path) = path {
            return write_atomic(path, csv);
        }
        let res = if self.pretty {
            self.stdout.write_all(output::pretty(csv)?.as_bytes())
        } else {
            self.stdout.write_all(csv)
        };
        res.map_err(|e| Error::io("<stdout>", e))
    }
}

fn cmd_ingest(a: &IngestArgs, sink: &mut Sink<'_>) -> Result<()> {
    let ing = ingest_files(&a.manifest, &a.events, a.last_year)?;
    write_atomic(&a.out, format::histories_to_string(&ing.histories).as_bytes())?;
    for f in [&ing.manifest, &ing.events] {
        eprintln!("{}: {} records, {} skipped", f.path.display(), f.records, f.skipped);
        for (line, reason) in &f.samples {
            eprintln!("  line {line}: {reason}");
        }
    }
    let r = &ing.report;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["items", "accepted", "before_publication", "unknown_item", "malformed"])?;
    w.write_record([
        ing.histories.len().to_string(),
        r.accepted.to_string(),
        r.before_publication.to_string(),
        r.unknown_item.to_string(),
        r.malformed.to_string(),
    ])?;
    let bytes = w.into_inner().map_err(|e| Error::Csv(csv::Error::from(e.into_error())))?;
    sink.emit(&bytes, None)
}

fn cmd_stats(a: &StatsArgs, sink: &mut Sink<'_>) -> Result<()> {
    let hs = load_histories(&a.histories)?;
    let hist = citation_distribution(&hs).map_err(|e| Error::Data(format!("{}: {e}", a.histories.display())))?;
    let bytes = match a.bins {
        Bins::Linear => output::histogram_csv(&hist)?,
        Bins::Log => {
            if !(a.base > 1.0) {
                return Err(Error::Usage(format!("--base must exceed 1, got {}", a.base)));
            }
            output::log_bins_csv(&hist.log_binned(a.base))?
        }
        Bins::Summary => {
            let totals: Vec<u64> = hs.iter().map(PopularityHistory::total).collect();
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["items", "citations", "gini", "top_decile_share"])?;
            w.write_record([
                hs.len().to_string(),
                totals.iter().sum::<u64>().to_string(),
                gini(&totals).to_string(),
                top_share(&totals, 0.1).to_string(),
            ])?;
            w.into_inner().map_err(|e| Error::Csv(csv::Error::from(e.into_error())))?
        }
    };
    sink.emit(&bytes, a.out.as_deref())
}

fn corpus_spec(items: Option<usize>, years: Option<usize>, seed: Option<u64>) -> CorpusSpec {
    let d = CorpusSpec::default();
    CorpusSpec {
        items: items.unwrap_or(d.items),
        years: years.unwrap_or(d.years),
        seed: seed.unwrap_or(d.seed),
        ..d
    }
}

fn cmd_generate(a: &GenerateArgs) -> Result<()> {
    let d = CorpusSpec::default();
    let spec = CorpusSpec {
        fitness_median: a.fitness_median.unwrap_or(d.fitness_median),
        fitness_log_sd: a.fitness_log_sd.unwrap_or(d.fitness_log_sd),
        ..corpus_spec(a.items, a.years, a.seed)
    };
    let items = generate_corpus(&spec).map_err(|e| Error::Usage(e.to_string()))?;
    let histories: Vec<PopularityHistory> = items.iter().map(|i| i.history.clone()).collect();
    write_atomic(&a.out, format::histories_to_string(&histories).as_bytes())?;
    if let Some(truth) = &a.truth {
        write_atomic(truth, &format::ground_truth_csv(&items)?)?;
    }
    log::info!("wrote {} items to {}", items.len(), a.out.display());
    Ok(())
}

fn cmd_train(a: &TrainArgs) -> Result<()> {
    let rc = a.params.resolve()?;
    let cfg = rc.experiment()?;
    let hs = load_histories(&a.histories)?;
    if a.horizon == 0 {
        return Err(Error::Usage("--horizon must be at least 1".into()));
    }
    let sample = SampleConfig {
        horizons: vec![a.horizon],
        ..cfg.sample.clone()
    };
    let filter = FilterConfig {
        first_years: sample.train_years,
        min_followup: a.horizon as usize,
        ..cfg.filter
    };
    let samples = hs
        .iter()
        .filter(|h| filter.keeps(h))
        .map(|h| build_samples(h, &sample))
        .collect::<dlam_core::Result<Vec<_>>>()
        .map_err(|e| Error::core("building samples", e))?;
    let examples: Vec<_> = samples.iter().filter_map(|s| s.example(a.horizon)).collect();
    if examples.len() < 2 {
        return Err(Error::Data(format!(
            "{}: {} items pass the filter, at least 2 are needed",
            a.histories.display(),
            examples.len()
        )));
    }
    log::info!("training on {} items", examples.len());
    let kind = ModelKind::from(a.model);
    let model = match kind.variant() {
        Some(variant) => {
            let mut rng = Rng::new(cfg.train.seed);
            let init = DlamModel::new(cfg.model_config(variant, a.horizon), &mut rng)
                .map_err(|e| Error::Usage(e.to_string()))?;
            let mut log = EpochLog::new(kind.as_str());
            let outcome = train_observed(init, &examples, &cfg.train, &mut log)
                .map_err(|e| Error::core(format!("training {kind}"), e))?;
            if let Some(path) = &a.report {
                write_atomic(path, &output::training_csv(&outcome.report, true)?)?;
            }
            if let Some(path) = &a.checkpoint {
                let ckpt = Checkpoint {
                    model: outcome.model.clone(),
                    optimizer: outcome.optimizer,
                };
                write_atomic(path, checkpoint_to_string(&ckpt).as_bytes())?;
            }
            TrainedModel::Neural(outcome.model)
        }
        None => {
            let m = fit_linear(
                &examples,
                sample.train_years,
                sample.window,
                a.horizon,
                Transform::Log1p,
                DEFAULT_RIDGE,
            )
            .map_err(|e| Error::core("fitting the linear baseline", e))?;
            TrainedModel::Linear(m)
        }
    };
    write_atomic(&a.out, model_to_string(&saved(&model)).as_bytes())
}

fn features_for(model: &SavedModel, h: &PopularityHistory, window: usize) -> Result<Vec<dlam_core::DenseVector>> {
    let sample = SampleConfig {
        train_years: model.steps(),
        window,
        horizons: Vec::new(),
    };
    if window != model.input_dim() {
        return Err(Error::Usage(format!(
            "--window {window} does not match the model's input width {}",
            model.input_dim()
        )));
    }
    build_samples(h, &sample)
        .map(|s| s.features)
        .map_err(|e| Error::core(format!("item {}", h.item), e))
}

fn cmd_predict(a: &PredictArgs, sink: &mut Sink<'_>) -> Result<()> {
    let model = load_model(&a.model)?;
    let hs = load_histories(&a.histories)?;
    let window = a.window.unwrap_or(model.input_dim());
    let mut rows = Vec::new();
    let mut skipped = 0usize;
    for h in &hs {
        if h.observed_years() < model.steps() {
            skipped += 1;
            continue;
        }
        let xs = features_for(&model, h, window)?;
        let p = model
            .predict(&xs)
            .map_err(|e| Error::core(format!("predicting {}", h.item), e))?;
        rows.push((h.item.clone(), p));
    }
    if skipped > 0 {
        log::warn!("{skipped} items have fewer than {} observed years and were skipped", model.steps());
    }
    sink.emit(&output::predictions_csv(model.horizon(), &rows)?, a.out.as_deref())
}

fn cmd_evaluate(a: &EvaluateArgs, sink: &mut Sink<'_>) -> Result<()> {
    let model = load_model(&a.model)?;
    let hs = load_histories(&a.histories)?;
    let d = defaults();
    let epsilon = a.epsilon.unwrap_or(d.epsilon);
    let filter = FilterConfig {
        min_count: a.min_count.unwrap_or(d.min_count),
        first_years: model.steps(),
        min_followup: model.horizon() as usize,
    };
    let mut preds = Vec::new();
    let mut obs = Vec::new();
    for h in hs.iter().filter(|h| filter.keeps(h)) {
        let xs = features_for(&model, h, model.input_dim())?;
        preds.push(
            model
                .predict(&xs)
                .map_err(|e| Error::core(format!("predicting {}", h.item), e))?,
        );
        let target = h
            .cumulative_at(model.steps() + model.horizon() as usize)
            .expect("filter guarantees follow-up");
        obs.push(target as f64);
    }
    if obs.is_empty() {
        return Err(Error::Data(format!(
            "{}: no item passes the filter for horizon {}",
            a.histories.display(),
            model.horizon()
        )));
    }
    let report = EvalReport::from_predictions(model.horizon(), &preds, &obs, epsilon)
        .map_err(|e| Error::core("scoring", e))?;
    let kind: ModelKind = model.mode().parse().expect("mode names are model kinds");
    sink.emit(&output::metrics_csv(&[(kind, report)])?, a.out.as_deref())
}

fn cmd_experiment(a: &ExperimentArgs, sink: &mut Sink<'_>) -> Result<()> {
    let rc = a.params.resolve()?;
    let cfg = rc.experiment()?;
    let hs = match &a.histories {
        Some(path) => load_histories(path)?,
        None => {
            let spec = corpus_spec(a.items, None, a.corpus_seed);
            generate_corpus(&spec)
                .map_err(|e| Error::Usage(e.to_string()))?
                .into_iter()
                .map(|i| i.history)
                .collect()
        }
    };
    let (result, _) = experiment::run_to_dir(&hs, &cfg, &a.out)?;
    sink.emit(&result.metrics_csv()?, None)
}

/// Runs a parsed command, writing tables to `stdout`.
pub fn run(cli: &Cli, stdout: &mut dyn Write) -> Result<()> {
    let mut sink = Sink {
        pretty: cli.pretty,
        stdout,
    };
    match &cli.command {
        Command::Ingest(a) => cmd_ingest(a, &mut sink),
        Command::Stats(a) => cmd_stats(a, &mut sink),
        Command::Generate(a) => cmd_generate(a),
        Command::Train(a) => cmd_train(a),
        Command::Predict(a) => cmd_predict(a, &mut sink),
        Command::Evaluate(a) => cmd_evaluate(a, &mut sink),
        Command::Experiment(a) => cmd_experiment(a, &mut sink),
    }
}
