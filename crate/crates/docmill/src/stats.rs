//! Corpus statistics: per-dataset stage counts, token-length
//! distributions with long-context thresholds, and per-document token
//! entropy distributions.
//!
//! Every statistic is built on mergeable accumulators — pushing the
//! same values through any split/merge arrangement gives the same
//! result — so scans parallelize with a final reduce. Means and
//! threshold percentages are exact single-pass computations; medians
//! are exact up to [`EXACT_MEDIAN_LIMIT`] observations and switch to a
//! P² streaming estimate beyond that, with the method labeled in the
//! report.
//!
//! Reports serialize three ways: JSON for machines, an aligned text
//! table for terminals, and CSV of the histogram series for plotting.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::key::{KeyError, KeyPrefix, Stage};
use crate::quality::entropy;
use crate::shard::{read_shard, ShardError, DEFAULT_MIME_PREFERENCE};
use crate::store::{read_record, ObjectStore, StoreError};

/// Exact medians are kept up to this many observations; beyond it the
/// accumulator converts to a P² streaming estimate.
pub const EXACT_MEDIAN_LIMIT: usize = 10_000_000;

/// Long-context thresholds, in tokens (decimal, matching how the
/// figures are conventionally quoted: 8K = 8000).
pub const LENGTH_THRESHOLDS: [u64; 3] = [8_000, 32_000, 100_000];

/// Token-length histogram bins are powers of two over this exponent
/// range: bin `i` covers `[2^(4+i), 2^(5+i))`.
pub const LENGTH_BIN_MIN_EXP: u32 = 4;
pub const LENGTH_BIN_MAX_EXP: u32 = 24;
pub const LENGTH_BIN_COUNT: usize = (LENGTH_BIN_MAX_EXP - LENGTH_BIN_MIN_EXP) as usize;

/// Entropy histogram resolution: 0.1-bit bins over [0, 18) plus overflow.
pub const ENTROPY_BIN_WIDTH: f64 = 0.1;
pub const ENTROPY_BIN_COUNT: usize = 180;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("no data to aggregate")]
    NoData,
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Key(#[from] KeyError),
    #[error(transparent)]
    Shard(#[from] ShardError),
}

// ---------------------------------------------------------------------
// P² streaming quantile estimator (Jain & Chlamtac, 1985)
// ---------------------------------------------------------------------

/// Streaming quantile estimate in constant memory: five markers whose
/// heights track the target quantile and its neighborhood, adjusted
/// with parabolic interpolation as observations arrive.
#[derive(Debug, Clone)]
struct P2Quantile {
    /// Buffered observations until five have arrived.
    init: Vec<f64>,
    heights: [f64; 5],
    positions: [f64; 5],
    desired: [f64; 5],
    increments: [f64; 5],
    count: u64,
}

impl P2Quantile {
    fn new(p: f64) -> Self {
        P2Quantile {
            init: Vec::with_capacity(5),
            heights: [0.0; 5],
            positions: [1.0, 2.0, 3.0, 4.0, 5.0],
            desired: [1.0, 1.0 + 2.0 * p, 1.0 + 4.0 * p, 3.0 + 2.0 * p, 5.0],
            increments: [0.0, p / 2.0, p, (1.0 + p) / 2.0, 1.0],
            count: 0,
        }
    }

    fn push(&mut self, value: f64) {
        self.count += 1;
        if self.init.len() < 5 {
            self.init.push(value);
            if self.init.len() == 5 {
                self.init.sort_by(f64::total_cmp);
                for (h, v) in self.heights.iter_mut().zip(&self.init) {
                    *h = *v;
                }
            }
            return;
        }

        // Locate the cell and stretch the extreme markers if needed.
        let k = if value < self.heights[0] {
            self.heights[0] = value;
            0
        } else if value >= self.heights[4] {
            self.heights[4] = value.max(self.heights[4]);
            3
        } else {
            (0..4)
                .find(|&i| value < self.heights[i + 1])
                .expect("value bounded by extreme markers")
        };
        for i in (k + 1)..5 {
            self.positions[i] += 1.0;
        }
        for i in 0..5 {
            self.desired[i] += self.increments[i];
        }

        // Nudge the three interior markers toward their desired
        // positions, parabolic where possible, linear otherwise.
        for i in 1..4 {
            let d = self.desired[i] - self.positions[i];
            let right = self.positions[i + 1] - self.positions[i];
            let left = self.positions[i - 1] - self.positions[i];
            if (d >= 1.0 && right > 1.0) || (d <= -1.0 && left < -1.0) {
                let d = d.signum();
                let candidate = self.parabolic(i, d);
                self.heights[i] =
                    if self.heights[i - 1] < candidate && candidate < self.heights[i + 1] {
                        candidate
                    } else {
                        self.linear(i, d)
                    };
                self.positions[i] += d;
            }
        }
    }

    fn parabolic(&self, i: usize, d: f64) -> f64 {
        let q = &self.heights;
        let n = &self.positions;
        q[i] + d / (n[i + 1] - n[i - 1])
            * ((n[i] - n[i - 1] + d) * (q[i + 1] - q[i]) / (n[i + 1] - n[i])
                + (n[i + 1] - n[i] - d) * (q[i] - q[i - 1]) / (n[i] - n[i - 1]))
    }

    fn linear(&self, i: usize, d: f64) -> f64 {
        let j = if d > 0.0 { i + 1 } else { i - 1 };
        self.heights[i]
            + d * (self.heights[j] - self.heights[i]) / (self.positions[j] - self.positions[i])
    }

    fn estimate(&self) -> Option<f64> {
        if self.count == 0 {
            return None;
        }
        if self.init.len() < 5 && self.count <= 5 {
            let mut sorted = self.init.clone();
            sorted.sort_by(f64::total_cmp);
            return Some(middle(&sorted));
        }
        Some(self.heights[2])
    }

    /// Approximate state merge: marker heights are combined as
    /// count-weighted averages. Exact when either side is still
    /// buffering its first observations.
    fn merge(&mut self, other: &P2Quantile) {
        if other.count == 0 {
            return;
        }
        if other.init.len() < 5 || other.count <= 5 {
            for &v in &other.init {
                self.push(v);
            }
            return;
        }
        if self.init.len() < 5 {
            let pending = std::mem::take(&mut self.init);
            *self = other.clone();
            for v in pending {
                self.push(v);
            }
            return;
        }
        let w_self = self.count as f64;
        let w_other = other.count as f64;
        for i in 0..5 {
            self.heights[i] =
                (self.heights[i] * w_self + other.heights[i] * w_other) / (w_self + w_other);
            self.positions[i] += other.positions[i];
            self.desired[i] += other.desired[i];
        }
        self.count += other.count;
    }
}

fn middle(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Median bookkeeping shared by the accumulators: exact values until
/// the limit, then a labeled P² estimate.
#[derive(Debug, Clone)]
enum MedianTracker {
    Exact { values: Vec<f64>, limit: usize },
    Estimated(P2Quantile),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MedianMethod {
    Exact,
    P2Estimate,
}

impl MedianTracker {
    fn new(limit: usize) -> Self {
        MedianTracker::Exact {
            values: Vec::new(),
            limit,
        }
    }

    fn push(&mut self, value: f64) {
        match self {
            MedianTracker::Exact { values, limit } => {
                values.push(value);
                if values.len() > *limit {
                    self.spill();
                }
            }
            MedianTracker::Estimated(p2) => p2.push(value),
        }
    }

    fn spill(&mut self) {
        if let MedianTracker::Exact { values, .. } = self {
            let mut p2 = P2Quantile::new(0.5);
            for &v in values.iter() {
                p2.push(v);
            }
            *self = MedianTracker::Estimated(p2);
        }
    }

    fn merge(&mut self, other: MedianTracker) {
        match (&mut *self, other) {
            (
                MedianTracker::Exact { values, limit },
                MedianTracker::Exact {
                    values: other_values,
                    ..
                },
            ) => {
                values.extend(other_values);
                if values.len() > *limit {
                    self.spill();
                }
            }
            (MedianTracker::Exact { .. }, MedianTracker::Estimated(p2)) => {
                self.spill();
                if let MedianTracker::Estimated(own) = self {
                    own.merge(&p2);
                }
            }
            (MedianTracker::Estimated(own), MedianTracker::Exact { values, .. }) => {
                for v in values {
                    own.push(v);
                }
            }
            (MedianTracker::Estimated(own), MedianTracker::Estimated(p2)) => {
                own.merge(&p2);
            }
        }
    }

    fn median(&self) -> Option<f64> {
        match self {
            MedianTracker::Exact { values, .. } => {
                if values.is_empty() {
                    None
                } else {
                    let mut sorted = values.clone();
                    sorted.sort_by(f64::total_cmp);
                    Some(middle(&sorted))
                }
            }
            MedianTracker::Estimated(p2) => p2.estimate(),
        }
    }

    fn method(&self) -> MedianMethod {
        match self {
            MedianTracker::Exact { .. } => MedianMethod::Exact,
            MedianTracker::Estimated(_) => MedianMethod::P2Estimate,
        }
    }
}

// ---------------------------------------------------------------------
// Token-length statistics
// ---------------------------------------------------------------------

/// Power-of-two histogram of token lengths: `bins[i]` counts lengths in
/// `[2^(4+i), 2^(5+i))`, with explicit under/overflow buckets.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LengthHistogram {
    pub underflow: u64,
    pub bins: Vec<u64>,
    pub overflow: u64,
}

impl LengthHistogram {
    fn new() -> Self {
        LengthHistogram {
            underflow: 0,
            bins: vec![0; LENGTH_BIN_COUNT],
            overflow: 0,
        }
    }

    fn push(&mut self, tokens: u64) {
        if tokens < (1 << LENGTH_BIN_MIN_EXP) {
            self.underflow += 1;
        } else if tokens >= (1 << LENGTH_BIN_MAX_EXP) {
            self.overflow += 1;
        } else {
            let exp = 63 - tokens.leading_zeros(); // floor(log2)
            self.bins[(exp - LENGTH_BIN_MIN_EXP) as usize] += 1;
        }
    }

    fn merge(&mut self, other: &LengthHistogram) {
        self.underflow += other.underflow;
        self.overflow += other.overflow;
        for (a, b) in self.bins.iter_mut().zip(&other.bins) {
            *a += b;
        }
    }

    /// CSV of the histogram series: `tokens_ge,tokens_lt,rows`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("tokens_ge,tokens_lt,rows\n");
        out.push_str(&format!("0,{},{}\n", 1u64 << LENGTH_BIN_MIN_EXP, self.underflow));
        for (i, count) in self.bins.iter().enumerate() {
            let low = 1u64 << (LENGTH_BIN_MIN_EXP + i as u32);
            out.push_str(&format!("{low},{},{count}\n", low << 1));
        }
        out.push_str(&format!("{},,{}\n", 1u64 << LENGTH_BIN_MAX_EXP, self.overflow));
        out
    }
}

/// Streaming token-length aggregator; all parts merge associatively.
#[derive(Debug, Clone)]
pub struct LengthAccumulator {
    rows: u64,
    total_tokens: u128,
    at_least: [u64; 3],
    histogram: LengthHistogram,
    median: MedianTracker,
}

impl Default for LengthAccumulator {
    fn default() -> Self {
        Self::new()
    }
}

impl LengthAccumulator {
    pub fn new() -> Self {
        Self::with_exact_limit(EXACT_MEDIAN_LIMIT)
    }

    /// Lowers the exact-median cutoff (used to exercise the P² path
    /// without ten million observations).
    pub fn with_exact_limit(limit: usize) -> Self {
        LengthAccumulator {
            rows: 0,
            total_tokens: 0,
            at_least: [0; 3],
            histogram: LengthHistogram::new(),
            median: MedianTracker::new(limit),
        }
    }

    pub fn push(&mut self, tokens: u64) {
        self.rows += 1;
        self.total_tokens += u128::from(tokens);
        for (slot, threshold) in self.at_least.iter_mut().zip(LENGTH_THRESHOLDS) {
            if tokens >= threshold {
                *slot += 1;
            }
        }
        self.histogram.push(tokens);
        self.median.push(tokens as f64);
    }

    pub fn merge(&mut self, other: LengthAccumulator) {
        self.rows += other.rows;
        self.total_tokens += other.total_tokens;
        for (a, b) in self.at_least.iter_mut().zip(other.at_least) {
            *a += b;
        }
        self.histogram.merge(&other.histogram);
        self.median.merge(other.median);
    }

    pub fn rows(&self) -> u64 {
        self.rows
    }

    pub fn finish(&self) -> Result<LengthReport, StatsError> {
        if self.rows == 0 {
            return Err(StatsError::NoData);
        }
        let rows = self.rows as f64;
        let pct = |count: u64| count as f64 / rows * 100.0;
        Ok(LengthReport {
            stats: LengthStats {
                mean_tokens: self.total_tokens as f64 / rows,
                median_tokens: self.median.median().expect("rows > 0"),
                pct_ge_8k: pct(self.at_least[0]),
                pct_ge_32k: pct(self.at_least[1]),
                pct_ge_100k: pct(self.at_least[2]),
                median_method: self.median.method(),
            },
            rows: self.rows,
            histogram: self.histogram.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthStats {
    pub mean_tokens: f64,
    pub median_tokens: f64,
    pub pct_ge_8k: f64,
    pub pct_ge_32k: f64,
    pub pct_ge_100k: f64,
    pub median_method: MedianMethod,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthReport {
    pub stats: LengthStats,
    pub rows: u64,
    pub histogram: LengthHistogram,
}

impl LengthReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    /// Aligned text table; percentages to one decimal place.
    pub fn to_table(&self) -> String {
        let s = &self.stats;
        let method = match s.median_method {
            MedianMethod::Exact => "exact",
            MedianMethod::P2Estimate => "p2 estimate",
        };
        format!(
            "rows            {:>14}\n\
             mean tokens     {:>14.1}\n\
             median tokens   {:>14.1}  ({method})\n\
             >= 8k tokens    {:>13.1}%\n\
             >= 32k tokens   {:>13.1}%\n\
             >= 100k tokens  {:>13.1}%\n",
            self.rows, s.mean_tokens, s.median_tokens, s.pct_ge_8k, s.pct_ge_32k, s.pct_ge_100k,
        )
    }

    /// Plot-ready histogram series.
    pub fn to_csv(&self) -> String {
        self.histogram.to_csv()
    }
}

// ---------------------------------------------------------------------
// Entropy statistics
// ---------------------------------------------------------------------

/// 0.1-bit histogram over [0, 18) with an overflow bucket.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntropyHistogram {
    pub bins: Vec<u64>,
    pub overflow: u64,
}

impl EntropyHistogram {
    fn new() -> Self {
        EntropyHistogram {
            bins: vec![0; ENTROPY_BIN_COUNT],
            overflow: 0,
        }
    }

    fn push(&mut self, bits: f64) {
        let idx = (bits / ENTROPY_BIN_WIDTH).floor() as usize;
        if idx < ENTROPY_BIN_COUNT {
            self.bins[idx] += 1;
        } else {
            self.overflow += 1;
        }
    }

    fn merge(&mut self, other: &EntropyHistogram) {
        self.overflow += other.overflow;
        for (a, b) in self.bins.iter_mut().zip(&other.bins) {
            *a += b;
        }
    }

    /// CSV of the histogram series: `entropy_ge,entropy_lt,documents`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("entropy_ge,entropy_lt,documents\n");
        for (i, count) in self.bins.iter().enumerate() {
            let low = i as f64 * ENTROPY_BIN_WIDTH;
            out.push_str(&format!("{low:.1},{:.1},{count}\n", low + ENTROPY_BIN_WIDTH));
        }
        out.push_str(&format!(
            "{:.1},,{}\n",
            ENTROPY_BIN_COUNT as f64 * ENTROPY_BIN_WIDTH,
            self.overflow
        ));
        out
    }
}

/// Streaming per-document entropy aggregator; merges associatively.
#[derive(Debug, Clone)]
pub struct EntropyAccumulator {
    documents: u64,
    sum: f64,
    sum_squares: f64,
    histogram: EntropyHistogram,
    median: MedianTracker,
}

impl Default for EntropyAccumulator {
    fn default() -> Self {
        Self::new()
    }
}

impl EntropyAccumulator {
    pub fn new() -> Self {
        Self::with_exact_limit(EXACT_MEDIAN_LIMIT)
    }

    pub fn with_exact_limit(limit: usize) -> Self {
        EntropyAccumulator {
            documents: 0,
            sum: 0.0,
            sum_squares: 0.0,
            histogram: EntropyHistogram::new(),
            median: MedianTracker::new(limit),
        }
    }

    pub fn push(&mut self, bits: f64) {
        self.documents += 1;
        self.sum += bits;
        self.sum_squares += bits * bits;
        self.histogram.push(bits);
        self.median.push(bits);
    }

    pub fn merge(&mut self, other: EntropyAccumulator) {
        self.documents += other.documents;
        self.sum += other.sum;
        self.sum_squares += other.sum_squares;
        self.histogram.merge(&other.histogram);
        self.median.merge(other.median);
    }

    pub fn documents(&self) -> u64 {
        self.documents
    }

    pub fn finish(&self) -> Result<EntropyReport, StatsError> {
        if self.documents == 0 {
            return Err(StatsError::NoData);
        }
        let n = self.documents as f64;
        let mean = self.sum / n;
        // Population standard deviation; the variance is clamped so
        // rounding can't push it fractionally below zero.
        let variance = (self.sum_squares / n - mean * mean).max(0.0);
        Ok(EntropyReport {
            stats: EntropyStats {
                mean,
                median: self.median.median().expect("documents > 0"),
                std: variance.sqrt(),
                median_method: self.median.method(),
            },
            documents: self.documents,
            histogram: self.histogram.clone(),
        })
    }
}

/// Per-document token entropy in bits; `std` is the population
/// standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyStats {
    pub mean: f64,
    pub median: f64,
    pub std: f64,
    pub median_method: MedianMethod,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    pub stats: EntropyStats,
    pub documents: u64,
    pub histogram: EntropyHistogram,
}

impl EntropyReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    pub fn to_table(&self) -> String {
        let s = &self.stats;
        let method = match s.median_method {
            MedianMethod::Exact => "exact",
            MedianMethod::P2Estimate => "p2 estimate",
        };
        format!(
            "documents       {:>14}\n\
             mean bits       {:>14.2}\n\
             median bits     {:>14.2}  ({method})\n\
             std bits        {:>14.2}  (population)\n",
            self.documents, s.mean, s.median, s.std,
        )
    }

    pub fn to_csv(&self) -> String {
        self.histogram.to_csv()
    }
}

// ---------------------------------------------------------------------
// Stage counts
// ---------------------------------------------------------------------

/// Exact per-stage object counts plus a labeled token extrapolation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageCounts {
    /// Stage-1 keys under the dataset.
    pub documents: u64,
    /// Stage-2 keys under the dataset.
    pub representations: u64,
    /// Rows across all of the dataset's shard files.
    pub parquet_rows: u64,
    /// Tokens actually counted in shard rows (first representation of
    /// each row).
    pub measured_tokens: u64,
    /// `measured_tokens` scaled by `extrapolation_factor`.
    pub estimated_tokens: u64,
    /// Ratio of tokenizable records to tokenized rows; 1.0 when
    /// everything eligible has been tokenized.
    pub extrapolation_factor: f64,
}

impl StageCounts {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    pub fn to_table(&self) -> String {
        format!(
            "documents        {:>14}\n\
             representations  {:>14}\n\
             parquet rows     {:>14}\n\
             measured tokens  {:>14}\n\
             estimated tokens {:>14}  (factor {:.2})\n",
            self.documents,
            self.representations,
            self.parquet_rows,
            self.measured_tokens,
            self.estimated_tokens,
            self.extrapolation_factor,
        )
    }

    pub fn to_csv(&self) -> String {
        format!(
            "field,value\ndocuments,{}\nrepresentations,{}\nparquet_rows,{}\nmeasured_tokens,{}\nestimated_tokens,{}\nextrapolation_factor,{}\n",
            self.documents,
            self.representations,
            self.parquet_rows,
            self.measured_tokens,
            self.estimated_tokens,
            self.extrapolation_factor,
        )
    }
}

// ---------------------------------------------------------------------
// Store-level drivers
// ---------------------------------------------------------------------

/// Token-length statistics over every shard row carrying the given
/// MIME type.
pub fn length_stats(
    store: &dyn ObjectStore,
    dataset_id: &str,
    mime: &str,
) -> Result<LengthReport, StatsError> {
    let prefix = KeyPrefix::dataset(Stage::Parquet, dataset_id)?;
    let mut acc = LengthAccumulator::new();
    for key in store.list(&prefix)? {
        let key = key?;
        for row in read_shard(store, &key)? {
            if let Some((_, tokens)) = row.representations.iter().find(|(m, _)| m == mime) {
                acc.push(tokens.len() as u64);
            }
        }
    }
    acc.finish()
}

fn token_distribution_entropy(tokens: &[u32]) -> f64 {
    let mut counts: BTreeMap<u32, u64> = BTreeMap::new();
    for &t in tokens {
        *counts.entry(t).or_insert(0) += 1;
    }
    entropy(counts.values().copied())
}

/// Per-document token entropy statistics. Prefers tokens stored on
/// stage-2 entries; when no record carries any, falls back to the
/// tokenized shard rows (first representation per row).
pub fn entropy_stats(
    store: &dyn ObjectStore,
    dataset_id: &str,
) -> Result<EntropyReport, StatsError> {
    let mut acc = EntropyAccumulator::new();

    let prefix = KeyPrefix::dataset(Stage::Representations, dataset_id)?;
    for key in store.list(&prefix)? {
        let key = key?;
        let Ok(rec) = read_record(store, &key) else {
            continue;
        };
        if !rec.is_success() {
            continue;
        }
        let stored = DEFAULT_MIME_PREFERENCE
            .iter()
            .find_map(|mime| rec.entry(mime).and_then(|e| e.tokens()));
        if let Some(tokens) = stored {
            if !tokens.is_empty() {
                acc.push(token_distribution_entropy(tokens));
            }
        }
    }

    if acc.documents() == 0 {
        let prefix = KeyPrefix::dataset(Stage::Parquet, dataset_id)?;
        for key in store.list(&prefix)? {
            let key = key?;
            for row in read_shard(store, &key)? {
                if let Some((_, tokens)) = row.representations.first() {
                    acc.push(token_distribution_entropy(tokens));
                }
            }
        }
    }

    acc.finish()
}

/// Exact stage-by-stage counts for a dataset, with the token total
/// extrapolated when only part of the eligible corpus is tokenized.
pub fn stage_counts(store: &dyn ObjectStore, dataset_id: &str) -> Result<StageCounts, StatsError> {
    let mut documents = 0u64;
    for key in store.list(&KeyPrefix::dataset(Stage::Documents, dataset_id)?)? {
        key?;
        documents += 1;
    }

    let mut representations = 0u64;
    let mut eligible = 0u64;
    for key in store.list(&KeyPrefix::dataset(Stage::Representations, dataset_id)?)? {
        let key = key?;
        representations += 1;
        if let Ok(rec) = read_record(store, &key) {
            if rec.is_success()
                && DEFAULT_MIME_PREFERENCE
                    .iter()
                    .any(|mime| rec.entry(mime).is_some())
            {
                eligible += 1;
            }
        }
    }

    let mut parquet_rows = 0u64;
    let mut measured_tokens = 0u64;
    for key in store.list(&KeyPrefix::dataset(Stage::Parquet, dataset_id)?)? {
        let key = key?;
        for row in read_shard(store, &key)? {
            parquet_rows += 1;
            if let Some((_, tokens)) = row.representations.first() {
                measured_tokens += tokens.len() as u64;
            }
        }
    }

    let extrapolation_factor = if parquet_rows == 0 {
        1.0
    } else {
        eligible.max(parquet_rows) as f64 / parquet_rows as f64
    };
    let estimated_tokens = (measured_tokens as f64 * extrapolation_factor).round() as u64;

    Ok(StageCounts {
        documents,
        representations,
        parquet_rows,
        measured_tokens,
        estimated_tokens,
        extrapolation_factor,
    })
}
