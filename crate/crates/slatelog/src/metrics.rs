//! Distribution summaries used to compare collection strategies: skewness and
//! medians of view/click/CTR distributions, and cold-start latency curves.
//!
//! The headline diagnostic is skewness of the per-item view distribution: a
//! policy that funnels traffic to a few winners produces a heavy right tail,
//! while a collection policy that spreads exposure produces a flatter, less
//! skewed histogram.

use crate::ItemId;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    /// Skewness needs at least three observations.
    #[error("need at least 3 observations for skewness, got {0}")]
    TooFewObservations(usize),
    /// A constant sample has zero variance and no defined skewness.
    #[error("skewness undefined: sample variance is zero")]
    ZeroVariance,
    /// Median of an empty sample.
    #[error("median of an empty sample")]
    EmptySample,
    /// Cold-start window fraction must lie in (0, 1].
    #[error("window fraction {0} outside (0, 1]")]
    BadWindow(f64),
    /// Observations must be finite.
    #[error("non-finite observation at index {0}")]
    NonFinite(usize),
}

/// Fisher-Pearson moment coefficient of skewness, `g1 = m3 / m2^(3/2)`, with
/// central moments taken about the sample mean (biased, no small-sample
/// correction).
pub fn sample_skewness(values: &[f64]) -> Result<f64, MetricsError> {
    if values.len() < 3 {
        return Err(MetricsError::TooFewObservations(values.len()));
    }
    if let Some(ix) = values.iter().position(|v| !v.is_finite()) {
        return Err(MetricsError::NonFinite(ix));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let m2 = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let m3 = values.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n;
    if m2 <= 0.0 {
        return Err(MetricsError::ZeroVariance);
    }
    Ok(m3 / m2.powf(1.5))
}

/// Median as the lower of the two middle order statistics:
/// `sorted[(n - 1) / 2]`. For odd n this is the usual middle element; for
/// even n it is the lower middle, so the result is always an observed value.
pub fn median(values: &[f64]) -> Result<f64, MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::EmptySample);
    }
    if let Some(ix) = values.iter().position(|v| !v.is_finite()) {
        return Err(MetricsError::NonFinite(ix));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted[(sorted.len() - 1) / 2])
}

/// Per-item exposure and feedback tallies accumulated over a run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemTally {
    pub views: u64,
    pub clicks: u64,
}

/// Per-item empirical CTRs with a minimum-exposure filter.
///
/// Items with fewer than `min_views` views are excluded from the returned map
/// (a CTR over a handful of views is noise); the second return value counts
/// how many items the filter dropped.
pub fn ctr_table(
    tallies: &BTreeMap<ItemId, ItemTally>,
    min_views: u64,
) -> (BTreeMap<ItemId, f64>, usize) {
    let mut out = BTreeMap::new();
    let mut excluded = 0usize;
    for (&item, tally) in tallies {
        if tally.views < min_views.max(1) {
            excluded += 1;
        } else {
            out.insert(item, tally.clicks as f64 / tally.views as f64);
        }
    }
    (out, excluded)
}

/// Summary statistics of one per-item distribution (views, clicks, or CTR).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSummary {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub skewness: Option<f64>,
    pub min: f64,
    pub max: f64,
}

impl DistributionSummary {
    /// Summarize a sample. Skewness is `None` when the sample is too small or
    /// constant; everything else requires a nonempty sample.
    pub fn from_values(values: &[f64]) -> Result<Self, MetricsError> {
        if values.is_empty() {
            return Err(MetricsError::EmptySample);
        }
        if let Some(ix) = values.iter().position(|v| !v.is_finite()) {
            return Err(MetricsError::NonFinite(ix));
        }
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        Ok(Self {
            count: values.len(),
            mean,
            median: median(values)?,
            skewness: sample_skewness(values).ok(),
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

/// Cold-start exposure summary over items with known arrival rounds.
///
/// For each item, its first-exposure latency is `first_shown - arrival`.
/// `fraction_within(w)` reports the share of items first shown within
/// `w * horizon` rounds of arriving; items never shown count against the
/// fraction at every window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColdStartCurve {
    /// Latency of first exposure per item, `None` when never shown.
    latencies: BTreeMap<ItemId, Option<u64>>,
    horizon: u64,
}

impl ColdStartCurve {
    /// `arrivals` maps every item to its arrival round; `first_shown` maps
    /// the items that were ever shown to the round of their first exposure.
    /// Items missing from `first_shown` count as never shown. An item shown
    /// before it arrived would be an environment bug; debug builds assert.
    pub fn new(
        arrivals: &BTreeMap<ItemId, u64>,
        first_shown: &BTreeMap<ItemId, u64>,
        horizon: u64,
    ) -> Self {
        let latencies = arrivals
            .iter()
            .map(|(&item, &arrived)| {
                let lat = first_shown.get(&item).map(|&shown| {
                    debug_assert!(shown >= arrived, "{item} shown before arrival");
                    shown.saturating_sub(arrived)
                });
                (item, lat)
            })
            .collect();
        Self { latencies, horizon }
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn item_count(&self) -> usize {
        self.latencies.len()
    }

    pub fn never_shown(&self) -> usize {
        self.latencies.values().filter(|l| l.is_none()).count()
    }

    /// Fraction of items first shown within `window_frac * horizon` rounds of
    /// arrival. `window_frac` must lie in (0, 1]; never-shown items are in
    /// the denominator but never the numerator.
    pub fn fraction_within(&self, window_frac: f64) -> Result<f64, MetricsError> {
        if !window_frac.is_finite() || window_frac <= 0.0 || window_frac > 1.0 {
            return Err(MetricsError::BadWindow(window_frac));
        }
        if self.latencies.is_empty() {
            return Err(MetricsError::EmptySample);
        }
        let cutoff = window_frac * self.horizon as f64;
        let within = self
            .latencies
            .values()
            .filter(|l| matches!(l, Some(lat) if (*lat as f64) <= cutoff))
            .count();
        Ok(within as f64 / self.latencies.len() as f64)
    }

    /// Latencies of the items that were shown at least once.
    pub fn shown_latencies(&self) -> Vec<f64> {
        self.latencies
            .values()
            .filter_map(|l| l.map(|v| v as f64))
            .collect()
    }

    /// Summary of first-exposure latency over shown items only.
    pub fn latency_summary(&self) -> Option<DistributionSummary> {
        let lats = self.shown_latencies();
        DistributionSummary::from_values(&lats).ok()
    }
}

/// Everything reported about one strategy's run: view/click/CTR distribution
/// summaries plus the cold-start curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionReport {
    pub views: DistributionSummary,
    pub clicks: DistributionSummary,
    /// CTR over items passing the view filter; `None` when no item qualified.
    pub ctr: Option<DistributionSummary>,
    pub ctr_excluded_items: usize,
    pub cold_start: ColdStartCurve,
    /// Total clicks across all items (the run's cumulative reward).
    pub total_clicks: u64,
    pub total_views: u64,
}

impl DistributionReport {
    pub fn new(
        tallies: &BTreeMap<ItemId, ItemTally>,
        arrivals: &BTreeMap<ItemId, u64>,
        first_shown: &BTreeMap<ItemId, u64>,
        horizon: u64,
        min_views: u64,
    ) -> Result<Self, MetricsError> {
        if tallies.is_empty() {
            return Err(MetricsError::EmptySample);
        }
        let views: Vec<f64> = tallies.values().map(|t| t.views as f64).collect();
        let clicks: Vec<f64> = tallies.values().map(|t| t.clicks as f64).collect();
        let (ctrs, excluded) = ctr_table(tallies, min_views);
        let ctr_values: Vec<f64> = ctrs.values().copied().collect();
        Ok(Self {
            views: DistributionSummary::from_values(&views)?,
            clicks: DistributionSummary::from_values(&clicks)?,
            ctr: DistributionSummary::from_values(&ctr_values).ok(),
            ctr_excluded_items: excluded,
            cold_start: ColdStartCurve::new(arrivals, first_shown, horizon),
            total_clicks: tallies.values().map(|t| t.clicks).sum(),
            total_views: tallies.values().map(|t| t.views).sum(),
        })
    }
}
