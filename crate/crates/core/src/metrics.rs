//! Retrieval reliability metrics.
//!
//! For one query, the distances `D` of every record are sorted ascending and
//! differenced into gaps `G_n = D_{n+1} − D_n`. From these:
//!
//! | metric | definition |
//! |--------|------------|
//! | LGap   | `max(G_n)`, 0 without gaps |
//! | MinD   | `min(D)` |
//! | MaxD   | `max(D)` |
//! | Range  | `MaxD − MinD` |
//! | StdDev | population standard deviation of `D` |
//! | RLGap  | `100 · LGap / Range` (percent), 0 when `Range = 0` |
//!
//! Similarities `s = 1 − D` fall into three relevance bands, and a verdict
//! summarises whether the distribution looks like a trustworthy result:
//! some highly relevant records, some non-relevant ones, and a moderate
//! band without clusters. Low variance means the search failed.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const BUNDLED_TABLE3: &str = include_str!("../data/table3.csv");

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("distance series is empty")]
    EmptySeries,
    #[error("distance series contains a non-finite value")]
    NonFinite,
    #[error("invalid band thresholds low={low} high={high}")]
    InvalidThresholds { low: f64, high: f64 },
    #[error("table row {line}: {message}")]
    Table { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Sorted distances of every record to one query, with consecutive gaps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceSeries {
    query: String,
    values: Vec<f64>,
    gaps: Vec<f64>,
}

pub fn make_series(query: impl Into<String>, distances: &[f64]) -> Result<DistanceSeries, MetricsError> {
    if distances.is_empty() {
        return Err(MetricsError::EmptySeries);
    }
    if distances.iter().any(|d| !d.is_finite()) {
        return Err(MetricsError::NonFinite);
    }
    let mut values = distances.to_vec();
    values.sort_by(f64::total_cmp);
    let gaps = values.windows(2).map(|w| w[1] - w[0]).collect();
    Ok(DistanceSeries {
        query: query.into(),
        values,
        gaps,
    })
}

impl DistanceSeries {
    pub fn query(&self) -> &str {
        &self.query
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn gaps(&self) -> &[f64] {
        &self.gaps
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Similarities `1 − D`, descending.
    pub fn similarities(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().map(|d| 1.0 - d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawThresholds")]
pub struct BandThresholds {
    high: f64,
    low: f64,
}

#[derive(Deserialize)]
struct RawThresholds {
    high: f64,
    low: f64,
}

impl TryFrom<RawThresholds> for BandThresholds {
    type Error = MetricsError;
    fn try_from(raw: RawThresholds) -> Result<Self, Self::Error> {
        Self::new(raw.low, raw.high)
    }
}

impl BandThresholds {
    pub fn new(low: f64, high: f64) -> Result<Self, MetricsError> {
        if low >= -1.0 && high <= 1.0 && low < high {
            Ok(Self { high, low })
        } else {
            Err(MetricsError::InvalidThresholds { low, high })
        }
    }

    pub fn high(&self) -> f64 {
        self.high
    }

    pub fn low(&self) -> f64 {
        self.low
    }

    pub fn width(&self) -> f64 {
        self.high - self.low
    }
}

impl Default for BandThresholds {
    fn default() -> Self {
        Self { high: 0.9, low: 0.4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RelevanceBand {
    HighlyRelevant,
    ModeratelyRelevant,
    NonRelevant,
}

/// Strict inequalities: a score exactly on a threshold is moderate.
pub fn band(similarity: f64, thresholds: &BandThresholds) -> RelevanceBand {
    if similarity > thresholds.high {
        RelevanceBand::HighlyRelevant
    } else if similarity < thresholds.low {
        RelevanceBand::NonRelevant
    } else {
        RelevanceBand::ModeratelyRelevant
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerdictConfig {
    pub min_high: usize,
    pub min_low: usize,
    pub min_records: usize,
    pub variance_floor: f64,
    /// Largest allowed gap between neighbouring moderate scores, as a
    /// fraction of the moderate band width.
    pub cluster_gap_fraction: f64,
}

impl Default for VerdictConfig {
    fn default() -> Self {
        Self {
            min_high: 1,
            min_low: 1,
            min_records: 5,
            variance_floor: 0.01,
            cluster_gap_fraction: 0.15,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Reliable,
    Failed,
    InsufficientData,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Reliable => "Reliable",
            Verdict::Failed => "Failed",
            Verdict::InsufficientData => "InsufficientData",
        }
    }
}

/// Why a verdict came out [`Verdict::Failed`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    LowVariance,
    NoHighlyRelevant,
    NoNonRelevant,
    ModerateClusters,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assessment {
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<FailureReason>,
}

fn population_std(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Judges the series. Precedence: insufficient data, then low variance,
/// then the band rules.
pub fn verdict(series: &DistanceSeries, thresholds: &BandThresholds, cfg: &VerdictConfig) -> Assessment {
    let failed = |reason| Assessment {
        verdict: Verdict::Failed,
        reason: Some(reason),
    };
    let values = series.values();
    if values.len() < cfg.min_records.max(1) {
        return Assessment {
            verdict: Verdict::InsufficientData,
            reason: None,
        };
    }
    let range = values[values.len() - 1] - values[0];
    if range == 0.0 || population_std(values) < cfg.variance_floor {
        return failed(FailureReason::LowVariance);
    }

    let mut high = 0;
    let mut low = 0;
    let mut moderate = Vec::new();
    for s in series.similarities() {
        match band(s, thresholds) {
            RelevanceBand::HighlyRelevant => high += 1,
            RelevanceBand::NonRelevant => low += 1,
            RelevanceBand::ModeratelyRelevant => moderate.push(s),
        }
    }
    if high < cfg.min_high {
        return failed(FailureReason::NoHighlyRelevant);
    }
    if low < cfg.min_low {
        return failed(FailureReason::NoNonRelevant);
    }
    // similarities come out descending
    let max_gap = cfg.cluster_gap_fraction * thresholds.width();
    if moderate.windows(2).any(|w| w[0] - w[1] > max_gap) {
        return failed(FailureReason::ModerateClusters);
    }
    Assessment {
        verdict: Verdict::Reliable,
        reason: None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    #[serde(rename = "LGap")]
    pub lgap: f64,
    #[serde(rename = "MinD")]
    pub min_d: f64,
    #[serde(rename = "MaxD")]
    pub max_d: f64,
    #[serde(rename = "Range")]
    pub range: f64,
    #[serde(rename = "StdDev")]
    pub std_dev: f64,
    #[serde(rename = "RLGap")]
    pub rl_gap: f64,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reason: Option<FailureReason>,
}

/// All six metrics plus the verdict under the default [`VerdictConfig`].
pub fn compute_metrics(series: &DistanceSeries, thresholds: &BandThresholds) -> MetricsReport {
    compute_metrics_with(series, thresholds, &VerdictConfig::default())
}

pub fn compute_metrics_with(series: &DistanceSeries, thresholds: &BandThresholds, cfg: &VerdictConfig) -> MetricsReport {
    let values = series.values();
    let min_d = values[0];
    let max_d = values[values.len() - 1];
    let range = max_d - min_d;
    let lgap = series.gaps().iter().copied().fold(0.0, f64::max);
    let rl_gap = if range > 0.0 { 100.0 * lgap / range } else { 0.0 };
    let assessment = verdict(series, thresholds, cfg);
    MetricsReport {
        lgap,
        min_d,
        max_d,
        range,
        std_dev: population_std(values),
        rl_gap,
        verdict: assessment.verdict,
        reason: assessment.reason,
    }
}

/// Nearest-rank percentile of ascending `sorted`: the value at rank
/// `ceil(pct/100 · N)` (1-based), or the minimum for `pct = 0`.
pub fn nearest_rank(sorted: &[f64], pct: u32) -> f64 {
    let n = sorted.len();
    let rank = ((pct as usize * n).div_ceil(100)).clamp(1, n);
    sorted[rank - 1]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandCounts {
    pub high: usize,
    pub moderate: usize,
    pub low: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxSummary {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Data behind a distance-curve and box-plot view of one query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotDocument {
    pub curve: Vec<f64>,
    pub bands: BandCounts,
    #[serde(rename = "box")]
    pub box_summary: BoxSummary,
    pub metrics: MetricsReport,
    pub verdict: String,
}

pub fn export_plot_data(series: &DistanceSeries, report: &MetricsReport, thresholds: &BandThresholds) -> PlotDocument {
    let v = series.values();
    let mut bands = BandCounts {
        high: 0,
        moderate: 0,
        low: 0,
    };
    for s in series.similarities() {
        match band(s, thresholds) {
            RelevanceBand::HighlyRelevant => bands.high += 1,
            RelevanceBand::ModeratelyRelevant => bands.moderate += 1,
            RelevanceBand::NonRelevant => bands.low += 1,
        }
    }
    PlotDocument {
        curve: v.to_vec(),
        bands,
        box_summary: BoxSummary {
            min: v[0],
            q1: nearest_rank(v, 25),
            median: nearest_rank(v, 50),
            q3: nearest_rank(v, 75),
            max: v[v.len() - 1],
        },
        metrics: *report,
        verdict: report.verdict.as_str().to_string(),
    }
}

/// One published metrics row (scenario-prompt pair).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublishedRow {
    pub scenario_prompt: String,
    pub lgap: f64,
    pub mind: f64,
    pub maxd: f64,
    pub range: f64,
    pub stddev: f64,
    pub rlgap: f64,
}

pub fn read_published_rows(csv_text: &str) -> Result<Vec<PublishedRow>, MetricsError> {
    let mut reader = csv::Reader::from_reader(csv_text.as_bytes());
    reader
        .deserialize()
        .enumerate()
        .map(|(i, r)| {
            r.map_err(|e| MetricsError::Table {
                line: i + 2,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn load_published_rows(path: &Path) -> Result<Vec<PublishedRow>, MetricsError> {
    read_published_rows(&std::fs::read_to_string(path)?)
}

/// The 54 scenario-prompt rows shipped in `data/table3.csv`.
pub fn bundled_published_rows() -> Vec<PublishedRow> {
    read_published_rows(BUNDLED_TABLE3).expect("bundled table parses")
}

/// Published values are four-decimal roundings; these tolerances absorb it.
pub const RANGE_TOLERANCE: f64 = 5e-4;
pub const RLGAP_TOLERANCE_PP: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityCheck {
    pub scenario_prompt: String,
    pub range_error: f64,
    pub rlgap_error: f64,
    pub recomputed_rlgap: f64,
    pub passed: bool,
}

/// Checks `Range = MaxD − MinD` and `RLGap = 100·LGap/(MaxD − MinD)` on
/// each row.
pub fn check_identities(rows: &[PublishedRow]) -> Vec<IdentityCheck> {
    rows.iter()
        .map(|r| {
            let range = r.maxd - r.mind;
            let recomputed_rlgap = if range > 0.0 { 100.0 * r.lgap / range } else { 0.0 };
            let range_error = (range - r.range).abs();
            let rlgap_error = (recomputed_rlgap - r.rlgap).abs();
            IdentityCheck {
                scenario_prompt: r.scenario_prompt.clone(),
                range_error,
                rlgap_error,
                recomputed_rlgap,
                passed: range_error <= RANGE_TOLERANCE && rlgap_error <= RLGAP_TOLERANCE_PP,
            }
        })
        .collect()
}
