//! Synthetic citation trajectories from a yearly reinforced-Poisson-style
//! process.
//!
//! The expected number of citations in year `y` (since publication) is
//!
//! ```text
//! fitness * P(y <= Y < y + 1) * (offset + C_{y-1})
//! ```
//!
//! where `Y` is log-normal with parameters `(mu, sigma)` and `C` is the
//! running total. Yearly counts are Poisson draws with that mean.
//!
//! This reproduces the qualitative ingredients of reinforced Poisson models
//! (fitness, aging, rich-get-richer) for test corpora. It is not a faithful
//! reimplementation of any published intensity and is not fitted to data.

use alloc::format;
use alloc::vec::Vec;

use rand_distr::{Distribution, LogNormal, Poisson};

use crate::data::PopularityHistory;
use crate::error::{Error, Result};
use crate::numerics::Rng;

/// Per-item generating parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RppParams {
    /// Intrinsic attractiveness. Zero means the item is never cited.
    pub fitness: f64,
    /// Log-normal aging location (log-years).
    pub mu: f64,
    /// Log-normal aging scale.
    pub sigma: f64,
    /// Pseudo-count added to the running total.
    pub offset: f64,
    /// When false the running total is ignored and only `offset` multiplies.
    pub reinforce: bool,
}

impl RppParams {
    pub fn new(fitness: f64, mu: f64, sigma: f64, offset: f64) -> Result<Self> {
        let p = Self {
            fitness,
            mu,
            sigma,
            offset,
            reinforce: true,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fitness >= 0.0 && self.fitness.is_finite()) {
            return Err(Error::InvalidConfig(format!("fitness {} must be >= 0", self.fitness)));
        }
        if !(self.sigma > 0.0) || !(self.offset > 0.0) || !self.mu.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "need sigma > 0, offset > 0 and finite mu (got {}, {}, {})",
                self.sigma, self.offset, self.mu
            )));
        }
        Ok(())
    }

    /// Log-normal probability mass of the year `[year, year + 1)`.
    pub fn aging_mass(&self, year: usize) -> f64 {
        lognormal_cdf(year as f64 + 1.0, self.mu, self.sigma) - lognormal_cdf(year as f64, self.mu, self.sigma)
    }
}

pub fn lognormal_cdf(t: f64, mu: f64, sigma: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    0.5 * libm::erfc(-(libm::log(t) - mu) / (sigma * core::f64::consts::SQRT_2))
}

fn poisson(mean: f64, rng: &mut Rng) -> u64 {
    if !(mean > 0.0) {
        return 0;
    }
    match Poisson::new(mean) {
        Ok(d) => {
            let x: f64 = d.sample(rng);
            x as u64
        }
        // Means this large only occur in runaway configurations.
        Err(_) => mean as u64,
    }
}

/// Yearly counts for `years` years since publication.
pub fn generate_trajectory(p: &RppParams, years: usize, rng: &mut Rng) -> Vec<u64> {
    let mut total = 0u64;
    (0..years)
        .map(|y| {
            let base = if p.reinforce {
                p.offset + total as f64
            } else {
                p.offset
            };
            let n = poisson(p.fitness * p.aging_mass(y) * base, rng);
            total += n;
            n
        })
        .collect()
}

/// Distribution of per-item parameters for a synthetic corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSpec {
    pub items: usize,
    /// Median of the log-normal fitness distribution.
    pub fitness_median: f64,
    /// Standard deviation of log fitness.
    pub fitness_log_sd: f64,
    pub mu_range: (f64, f64),
    pub sigma_range: (f64, f64),
    pub offset: f64,
    /// Observed years per item.
    pub years: usize,
    /// Publication years are drawn uniformly from this inclusive range.
    pub publication_years: (i32, i32),
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            items: 5000,
            fitness_median: 1.4,
            fitness_log_sd: 0.6,
            mu_range: (0.6, 1.6),
            sigma_range: (0.6, 1.1),
            offset: 5.0,
            years: 10,
            publication_years: (1990, 2005),
            seed: 42,
        }
    }
}

impl CorpusSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = self.items >= 1
            && self.years >= 1
            && self.fitness_median > 0.0
            && self.fitness_log_sd >= 0.0
            && self.mu_range.0 <= self.mu_range.1
            && self.sigma_range.0 > 0.0
            && self.sigma_range.0 <= self.sigma_range.1
            && self.offset > 0.0
            && self.publication_years.0 <= self.publication_years.1;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid corpus spec {self:?}")))
        }
    }

    /// Draws one item's parameters and publication year.
    pub fn draw_params(&self, rng: &mut Rng) -> Result<(RppParams, i32)> {
        let fitness = if self.fitness_log_sd > 0.0 {
            LogNormal::new(libm::log(self.fitness_median), self.fitness_log_sd)
                .map_err(|e| Error::InvalidConfig(format!("fitness distribution: {e}")))?
                .sample(rng)
        } else {
            self.fitness_median
        };
        let mu = rng.uniform(self.mu_range.0, self.mu_range.1);
        let sigma = rng.uniform(self.sigma_range.0, self.sigma_range.1);
        let (lo, hi) = self.publication_years;
        let year = lo + rng.below((hi - lo + 1) as usize) as i32;
        Ok((RppParams::new(fitness, mu, sigma, self.offset)?, year))
    }
}

/// A generated history and the parameters behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticItem {
    pub history: PopularityHistory,
    pub params: RppParams,
}

/// Generates `spec.items` items. Item `i` draws from its own stream of the
/// corpus seed, so items are independent of generation order.
pub fn generate_corpus(spec: &CorpusSpec) -> Result<Vec<SyntheticItem>> {
    spec.validate()?;
    let width = format!("{}", spec.items - 1).len();
    (0..spec.items)
        .map(|i| {
            let mut rng = Rng::stream(spec.seed, i as u64);
            let (params, year) = spec.draw_params(&mut rng)?;
            let yearly = generate_trajectory(&params, spec.years, &mut rng);
            Ok(SyntheticItem {
                history: PopularityHistory::new(format!("syn{i:0width$}"), year, yearly),
                params,
            })
        })
        .collect()
}
