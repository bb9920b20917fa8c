//! Citation histories: aggregation from events, the training-set filter,
//! windowed feature construction and the final-count distribution.
//!
//! All modelling uses years since publication. Index 0 of a yearly count
//! vector is the publication year itself.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::numerics::DenseVector;
use crate::training::Example;

pub const MIN_YEAR: i32 = 1900;
pub const MAX_YEAR: i32 = 2100;

/// Training-window length in years.
pub const DEFAULT_TRAIN_YEARS: usize = 5;
/// Width of the trailing feature window.
pub const DEFAULT_WINDOW: usize = 10;
/// Items need strictly more citations than this in the training window.
pub const DEFAULT_MIN_COUNT: u64 = 5;
pub const DEFAULT_HORIZONS: [u32; 5] = [1, 2, 3, 4, 5];

/// One citation received by `item` in calendar year `year`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CitationEvent {
    pub item: String,
    pub year: i32,
}

impl CitationEvent {
    pub fn new(item: impl Into<String>, year: i32) -> Result<Self> {
        check_year(year)?;
        Ok(Self {
            item: item.into(),
            year,
        })
    }
}

pub fn check_year(year: i32) -> Result<()> {
    if !(MIN_YEAR..=MAX_YEAR).contains(&year) {
        return Err(Error::InvalidConfig(alloc::format!(
            "year {year} outside [{MIN_YEAR}, {MAX_YEAR}]"
        )));
    }
    Ok(())
}

/// Yearly citation counts of one item.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PopularityHistory {
    pub item: String,
    pub publication_year: i32,
    yearly: Vec<u64>,
}

impl PopularityHistory {
    pub fn new(item: impl Into<String>, publication_year: i32, yearly: Vec<u64>) -> Self {
        Self {
            item: item.into(),
            publication_year,
            yearly,
        }
    }

    /// Counts received in each year since publication.
    pub fn yearly(&self) -> &[u64] {
        &self.yearly
    }

    pub fn observed_years(&self) -> usize {
        self.yearly.len()
    }

    /// Running totals; nondecreasing since counts are unsigned.
    pub fn cumulative(&self) -> Vec<u64> {
        let mut total = 0;
        let out: Vec<u64> = self
            .yearly
            .iter()
            .map(|&c| {
                total += c;
                total
            })
            .collect();
        debug_assert!(out.windows(2).all(|w| w[0] <= w[1]));
        out
    }

    /// Total over the first `years` years, if that many were observed.
    pub fn cumulative_at(&self, years: usize) -> Option<u64> {
        (years <= self.yearly.len()).then(|| self.yearly[..years].iter().sum())
    }

    pub fn total(&self) -> u64 {
        self.yearly.iter().sum()
    }
}

/// Counters describing what ingestion accepted and set aside.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IngestReport {
    pub accepted: u64,
    /// Events dated before the cited item's publication.
    pub before_publication: u64,
    /// Events for items missing from the manifest.
    pub unknown_item: u64,
    /// Unparseable records; filled in by whoever parses the raw input.
    pub malformed: u64,
}

impl IngestReport {
    pub fn quarantined(&self) -> u64 {
        self.before_publication + self.unknown_item
    }
}

/// Streaming aggregator from citation events to histories.
///
/// Memory grows with the number of distinct items, not with the number of
/// events, and the result does not depend on event order.
#[derive(Debug, Clone, Default)]
pub struct HistoryBuilder {
    publication: BTreeMap<String, i32>,
    counts: BTreeMap<String, Vec<u64>>,
    last_year: Option<i32>,
    report: IngestReport,
}

impl HistoryBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers an item and its publication year.
    pub fn add_item(&mut self, item: impl Into<String>, publication_year: i32) -> Result<()> {
        check_year(publication_year)?;
        self.publication.insert(item.into(), publication_year);
        Ok(())
    }

    pub fn add_event(&mut self, event: &CitationEvent) {
        let Some(&published) = self.publication.get(&event.item) else {
            self.report.unknown_item += 1;
            return;
        };
        if event.year < published {
            self.report.before_publication += 1;
            return;
        }
        let offset = (event.year - published) as usize;
        let counts = self.counts.entry(event.item.clone()).or_default();
        if counts.len() <= offset {
            counts.resize(offset + 1, 0);
        }
        counts[offset] += 1;
        self.last_year = Some(self.last_year.map_or(event.year, |y| y.max(event.year)));
        self.report.accepted += 1;
    }

    pub fn report(&self) -> &IngestReport {
        &self.report
    }

    /// Builds one history per manifest item, sorted by item id.
    ///
    /// Every history runs from its publication year through `last_year`
    /// (default: the latest accepted citing year), zero-filled.
    pub fn finish(self, last_year: Option<i32>) -> (Vec<PopularityHistory>, IngestReport) {
        let end = last_year.or(self.last_year);
        let mut counts = self.counts;
        let histories = self
            .publication
            .into_iter()
            .map(|(item, published)| {
                let mut yearly = counts.remove(&item).unwrap_or_default();
                if let Some(end) = end {
                    let span = (end - published + 1).max(0) as usize;
                    if yearly.len() < span {
                        yearly.resize(span, 0);
                    }
                }
                PopularityHistory::new(item, published, yearly)
            })
            .collect();
        (histories, self.report)
    }
}

/// Parameters of the training-set filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FilterConfig {
    /// Keep items with strictly more than this many citations in the window.
    pub min_count: u64,
    pub first_years: usize,
    /// Observed years required after the window.
    pub min_followup: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            min_count: DEFAULT_MIN_COUNT,
            first_years: DEFAULT_TRAIN_YEARS,
            min_followup: DEFAULT_HORIZONS.len(),
        }
    }
}

impl FilterConfig {
    pub fn keeps(&self, h: &PopularityHistory) -> bool {
        h.observed_years() >= self.first_years + self.min_followup
            && h.cumulative_at(self.first_years).is_some_and(|c| c > self.min_count)
    }
}

pub fn filter_training_set(histories: &[PopularityHistory], cfg: &FilterConfig) -> Vec<PopularityHistory> {
    histories.iter().filter(|h| cfg.keeps(h)).cloned().collect()
}

/// How features are cut from a history.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleConfig {
    pub train_years: usize,
    pub window: usize,
    pub horizons: Vec<u32>,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self {
            train_years: DEFAULT_TRAIN_YEARS,
            window: DEFAULT_WINDOW,
            horizons: DEFAULT_HORIZONS.to_vec(),
        }
    }
}

/// Features of one item plus its cumulative count at each horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    pub item: String,
    /// `train_years` vectors of `window` yearly counts each.
    pub features: Vec<DenseVector>,
    pub targets: BTreeMap<u32, f64>,
    /// Requested horizons past the end of the observed history.
    pub missing: Vec<u32>,
}

impl TrainingSample {
    pub fn example(&self, horizon: u32) -> Option<Example<'_>> {
        self.targets.get(&horizon).map(|&target| Example {
            features: &self.features,
            target,
        })
    }

    /// Cumulative count at the end of the training window.
    pub fn window_total(&self) -> f64 {
        let last = &self.features[self.features.len() - 1];
        last.iter().sum()
    }
}

/// Cuts the feature sequence and horizon targets from one history.
///
/// Timestep `t` (1-based) carries the `window` yearly counts ending at year
/// `t`, zero-padded on the left. Only the first `train_years` years are read
/// for features.
pub fn build_samples(history: &PopularityHistory, cfg: &SampleConfig) -> Result<TrainingSample> {
    if cfg.train_years == 0 || cfg.window == 0 {
        return Err(Error::InvalidConfig("train years and window must be positive".into()));
    }
    let yearly = history.yearly();
    if yearly.len() < cfg.train_years {
        return Err(Error::InvalidConfig(alloc::format!(
            "history of {} covers {} years, the training window needs {}",
            history.item,
            yearly.len(),
            cfg.train_years
        )));
    }
    let features = (1..=cfg.train_years)
        .map(|t| {
            let mut x = vec![0.0; cfg.window];
            for (k, slot) in x.iter_mut().enumerate() {
                // slot k holds year t - window + k (0-based yearly index t-1 at the end)
                let year = t as isize - cfg.window as isize + k as isize;
                if year >= 0 {
                    *slot = yearly[year as usize] as f64;
                }
            }
            DenseVector::from(x)
        })
        .collect();
    let mut targets = BTreeMap::new();
    let mut missing = Vec::new();
    for &h in &cfg.horizons {
        match history.cumulative_at(cfg.train_years + h as usize) {
            Some(c) if h > 0 => {
                targets.insert(h, c as f64);
            }
            _ => missing.push(h),
        }
    }
    Ok(TrainingSample {
        item: history.item.clone(),
        features,
        targets,
        missing,
    })
}

/// Number of items per final cumulative count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistributionHistogram {
    pub buckets: BTreeMap<u64, usize>,
    pub items: usize,
}

/// One logarithmic bin `[lower, upper)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogBin {
    pub lower: u64,
    pub upper: u64,
    pub items: usize,
    /// Items divided by bin width.
    pub density: f64,
}

impl DistributionHistogram {
    /// Bins `[0,1), [1,b), [b,b^2), ...` with integer edges.
    pub fn log_binned(&self, base: f64) -> Vec<LogBin> {
        assert!(base > 1.0, "log-bin base must exceed 1");
        let max = self.buckets.keys().next_back().copied().unwrap_or(0);
        let mut edges = vec![0u64, 1];
        let mut edge = 1.0f64;
        while *edges.last().unwrap() <= max {
            edge *= base;
            let next = libm::ceil(edge) as u64;
            if next > *edges.last().unwrap() {
                edges.push(next);
            }
        }
        edges
            .windows(2)
            .map(|w| {
                let items = self.buckets.range(w[0]..w[1]).map(|(_, &n)| n).sum();
                LogBin {
                    lower: w[0],
                    upper: w[1],
                    items,
                    density: items as f64 / (w[1] - w[0]) as f64,
                }
            })
            .collect()
    }
}

pub fn citation_distribution(histories: &[PopularityHistory]) -> Result<DistributionHistogram> {
    if histories.is_empty() {
        return Err(Error::Empty("history collection"));
    }
    let mut buckets = BTreeMap::new();
    for h in histories {
        *buckets.entry(h.total()).or_insert(0) += 1;
    }
    Ok(DistributionHistogram {
        buckets,
        items: histories.len(),
    })
}

/// Share of all citations held by the top `fraction` of items.
pub fn top_share(totals: &[u64], fraction: f64) -> f64 {
    let mut sorted = totals.to_vec();
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    let all: u64 = sorted.iter().sum();
    if all == 0 {
        return 0.0;
    }
    let k = libm::ceil(fraction * sorted.len() as f64) as usize;
    sorted[..k.min(sorted.len())].iter().sum::<u64>() as f64 / all as f64
}

/// Sample Gini coefficient.
pub fn gini(totals: &[u64]) -> f64 {
    let mut sorted = totals.to_vec();
    sorted.sort_unstable();
    let n = sorted.len() as f64;
    let sum: f64 = sorted.iter().map(|&v| v as f64).sum();
    if sum == 0.0 {
        return 0.0;
    }
    let weighted: f64 = sorted
        .iter()
        .enumerate()
        .map(|(i, &v)| (i as f64 + 1.0) * v as f64)
        .sum();
    (2.0 * weighted) / (n * sum) - (n + 1.0) / n
}
