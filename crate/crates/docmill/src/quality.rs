//! Corpus quality scoring.
//!
//! Two complementary scores decide whether a document looks like the
//! reference material it is supposed to resemble:
//!
//! 1. **Metric divergence** — a twelve-dimensional vector of surface
//!    statistics (whitespace and character-class ratios, line and
//!    paragraph shape, token diversity, entropies, repetition, artifact
//!    flags) is compared against a control profile's centers, each
//!    deviation normalized by that metric's dispersion, and the
//!    weighted mean taken. Zero means "at the control center".
//! 2. **Restricted L2 distance** — the document's unigram frequencies
//!    over the profile's restricted token set (high-frequency function
//!    and formatting tokens) are renormalized to unit mass and compared
//!    to the control frequencies by Euclidean distance. Documents that
//!    share no restricted tokens at all get the maximum distance √2.
//!
//! Control profiles are built from any operator-chosen reference corpus
//! (`build_profile`) with robust statistics — per-metric median and
//! median absolute deviation — and are serialized to a versioned JSON
//! file. Verdicts are pure threshold functions of the two scores.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::key::{KeyError, KeyPrefix, Stage};
use crate::shard::DEFAULT_MIME_PREFERENCE;
use crate::store::{read_record, ObjectStore, StoreError};
use crate::tokenizer::Tokenizer;

/// Number of scalar metrics in a [`MetricVector`].
pub const METRIC_COUNT: usize = 12;

/// Metric names, index-aligned with [`MetricVector::as_array`].
pub const METRIC_NAMES: [&str; METRIC_COUNT] = [
    "whitespace_ratio",
    "avg_line_length",
    "avg_paragraph_length",
    "alphanumeric_ratio",
    "capital_ratio",
    "punctuation_ratio",
    "non_ascii_ratio",
    "type_token_ratio",
    "token_entropy",
    "char_entropy",
    "repetition_rate",
    "artifact_flags",
];

/// Uniform default weights for [`divergence_score`].
pub const DEFAULT_WEIGHTS: [f64; METRIC_COUNT] = [1.0; METRIC_COUNT];

/// Distance assigned to documents with no restricted tokens, and the
/// upper bound for any pair of unit-mass vectors.
pub const MAX_L2_DISTANCE: f64 = std::f64::consts::SQRT_2;

/// Dispersions are floored here so a metric that never varies in the
/// control corpus still yields finite scores.
pub const DISPERSION_FLOOR: f64 = 1e-3;

/// Profile building keeps this many of the most frequent token ids as
/// the restricted set.
pub const RESTRICTED_TOKEN_COUNT: usize = 64;

/// Current profile file format version.
pub const PROFILE_VERSION: u32 = 1;

/// Lines longer than this (in characters) count as a formatting artifact.
const LONG_LINE_LIMIT: usize = 1000;

/// Runs of this many identical punctuation characters count as an artifact.
const PUNCT_RUN_LIMIT: usize = 5;

#[derive(Debug, Error)]
pub enum QualityError {
    #[error("quality scoring needs non-empty text and tokens")]
    EmptyInput,
    #[error("expected {expected} weights, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("invalid control profile: {0}")]
    InvalidProfile(String),
    #[error("profile file {path}: {detail}")]
    Io { path: String, detail: String },
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Key(#[from] KeyError),
}

/// Surface statistics of one document. All fields are dimensionless
/// except the two average lengths (characters) and the entropies (bits).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricVector {
    /// Whitespace characters over all characters.
    pub whitespace_ratio: f64,
    /// Mean characters per line (line terminators excluded).
    pub avg_line_length: f64,
    /// Mean characters per blank-line-delimited block, internal
    /// newlines included.
    pub avg_paragraph_length: f64,
    /// Alphanumeric characters over all characters.
    pub alphanumeric_ratio: f64,
    /// Uppercase characters over all characters.
    pub capital_ratio: f64,
    /// ASCII punctuation characters over all characters.
    pub punctuation_ratio: f64,
    /// Non-ASCII characters over all characters.
    pub non_ascii_ratio: f64,
    /// Distinct token ids over total tokens.
    pub type_token_ratio: f64,
    /// Shannon entropy of the unigram token distribution, in bits.
    pub token_entropy: f64,
    /// Shannon entropy of the character distribution, in bits.
    pub char_entropy: f64,
    /// Fraction of tokens inside runs of two or more identical tokens.
    pub repetition_rate: f64,
    /// Count of detected formatting-artifact categories (replacement
    /// characters, stray control characters, over-long lines,
    /// punctuation runs, markup residue).
    pub artifact_flags: f64,
}

impl MetricVector {
    /// The metrics in [`METRIC_NAMES`] order.
    pub fn as_array(&self) -> [f64; METRIC_COUNT] {
        [
            self.whitespace_ratio,
            self.avg_line_length,
            self.avg_paragraph_length,
            self.alphanumeric_ratio,
            self.capital_ratio,
            self.punctuation_ratio,
            self.non_ascii_ratio,
            self.type_token_ratio,
            self.token_entropy,
            self.char_entropy,
            self.repetition_rate,
            self.artifact_flags,
        ]
    }

    /// Inverse of [`as_array`](Self::as_array).
    pub fn from_array(values: [f64; METRIC_COUNT]) -> MetricVector {
        MetricVector {
            whitespace_ratio: values[0],
            avg_line_length: values[1],
            avg_paragraph_length: values[2],
            alphanumeric_ratio: values[3],
            capital_ratio: values[4],
            punctuation_ratio: values[5],
            non_ascii_ratio: values[6],
            type_token_ratio: values[7],
            token_entropy: values[8],
            char_entropy: values[9],
            repetition_rate: values[10],
            artifact_flags: values[11],
        }
    }
}

/// Computes the full metric vector for one document.
///
/// Pure function of its inputs; both must be non-empty. `tokens` should
/// come from the same tokenizer used for sharding so entropy figures
/// stay comparable across the pipeline.
pub fn compute_metrics(text: &str, tokens: &[u32]) -> Result<MetricVector, QualityError> {
    if text.is_empty() || tokens.is_empty() {
        return Err(QualityError::EmptyInput);
    }

    let mut total = 0u64;
    let mut whitespace = 0u64;
    let mut alphanumeric = 0u64;
    let mut capitals = 0u64;
    let mut punctuation = 0u64;
    let mut non_ascii = 0u64;
    // BTreeMap keeps summation order deterministic, so repeated calls
    // produce bit-identical entropies.
    let mut char_counts: BTreeMap<char, u64> = BTreeMap::new();
    for c in text.chars() {
        total += 1;
        if c.is_whitespace() {
            whitespace += 1;
        }
        if c.is_alphanumeric() {
            alphanumeric += 1;
        }
        if c.is_uppercase() {
            capitals += 1;
        }
        if c.is_ascii_punctuation() {
            punctuation += 1;
        }
        if !c.is_ascii() {
            non_ascii += 1;
        }
        *char_counts.entry(c).or_insert(0) += 1;
    }
    let total_f = total as f64;

    let lines: Vec<&str> = text.lines().collect();
    let avg_line_length = if lines.is_empty() {
        0.0
    } else {
        lines.iter().map(|l| l.chars().count()).sum::<usize>() as f64 / lines.len() as f64
    };

    // A paragraph is a run of non-blank lines; its length counts the
    // newlines joining them. Whitespace-only lines are blank.
    let mut paragraph_lengths: Vec<usize> = Vec::new();
    let mut open: Option<usize> = None;
    for line in &lines {
        if line.trim().is_empty() {
            if let Some(len) = open.take() {
                paragraph_lengths.push(len);
            }
        } else {
            let n = line.chars().count();
            open = Some(match open {
                Some(len) => len + 1 + n,
                None => n,
            });
        }
    }
    if let Some(len) = open {
        paragraph_lengths.push(len);
    }
    let avg_paragraph_length = if paragraph_lengths.is_empty() {
        0.0
    } else {
        paragraph_lengths.iter().sum::<usize>() as f64 / paragraph_lengths.len() as f64
    };

    let mut token_counts: BTreeMap<u32, u64> = BTreeMap::new();
    for &t in tokens {
        *token_counts.entry(t).or_insert(0) += 1;
    }
    let type_token_ratio = token_counts.len() as f64 / tokens.len() as f64;

    let mut repeated = 0usize;
    let mut i = 0;
    while i < tokens.len() {
        let mut j = i + 1;
        while j < tokens.len() && tokens[j] == tokens[i] {
            j += 1;
        }
        if j - i >= 2 {
            repeated += j - i;
        }
        i = j;
    }
    let repetition_rate = repeated as f64 / tokens.len() as f64;

    Ok(MetricVector {
        whitespace_ratio: whitespace as f64 / total_f,
        avg_line_length,
        avg_paragraph_length,
        alphanumeric_ratio: alphanumeric as f64 / total_f,
        capital_ratio: capitals as f64 / total_f,
        punctuation_ratio: punctuation as f64 / total_f,
        non_ascii_ratio: non_ascii as f64 / total_f,
        type_token_ratio,
        token_entropy: entropy(token_counts.values().copied()),
        char_entropy: entropy(char_counts.values().copied()),
        repetition_rate,
        artifact_flags: f64::from(count_artifacts(text, &lines)),
    })
}

/// Shannon entropy in bits of a count distribution.
pub(crate) fn entropy(counts: impl Iterator<Item = u64>) -> f64 {
    let counts: Vec<u64> = counts.filter(|&c| c > 0).collect();
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let total_f = total as f64;
    let h = -counts
        .iter()
        .map(|&c| {
            let p = c as f64 / total_f;
            p * p.log2()
        })
        .sum::<f64>();
    // A single-symbol distribution yields -0.0; normalize the sign and
    // clamp rounding drift below zero.
    h.max(0.0)
}

/// Counts formatting-artifact categories present in the text.
fn count_artifacts(text: &str, lines: &[&str]) -> u32 {
    let mut flags = 0;
    if text.contains('\u{FFFD}') {
        flags += 1;
    }
    if text
        .chars()
        .any(|c| c.is_control() && !matches!(c, '\t' | '\n' | '\r'))
    {
        flags += 1;
    }
    if lines.iter().any(|l| l.chars().count() > LONG_LINE_LIMIT) {
        flags += 1;
    }
    if has_punctuation_run(text) {
        flags += 1;
    }
    if text.contains("</") || text.contains("/>") {
        flags += 1;
    }
    flags
}

fn has_punctuation_run(text: &str) -> bool {
    let mut prev: Option<char> = None;
    let mut run = 0usize;
    for c in text.chars() {
        if c.is_ascii_punctuation() {
            if prev == Some(c) {
                run += 1;
            } else {
                prev = Some(c);
                run = 1;
            }
            if run >= PUNCT_RUN_LIMIT {
                return true;
            }
        } else {
            prev = None;
            run = 0;
        }
    }
    false
}

/// Statistical summary of a reference corpus, serialized as versioned
/// JSON. `centers`/`dispersions` are index-aligned with
/// [`METRIC_NAMES`]; `restricted_tokens` is strictly increasing and
/// `restricted_frequencies` is its unit-L1 control distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlProfile {
    pub version: u32,
    /// Name of the tokenizer the profile was built with; scores are
    /// only meaningful against the same tokenizer.
    pub tokenizer: String,
    pub centers: [f64; METRIC_COUNT],
    pub dispersions: [f64; METRIC_COUNT],
    pub restricted_tokens: Vec<u32>,
    pub restricted_frequencies: Vec<f64>,
}

impl ControlProfile {
    pub fn validate(&self) -> Result<(), QualityError> {
        let invalid = |detail: String| Err(QualityError::InvalidProfile(detail));
        if self.version != PROFILE_VERSION {
            return invalid(format!(
                "unsupported version {} (this build reads version {PROFILE_VERSION})",
                self.version
            ));
        }
        if let Some(i) = self.centers.iter().position(|c| !c.is_finite()) {
            return invalid(format!("center for {} is not finite", METRIC_NAMES[i]));
        }
        if let Some(i) = self
            .dispersions
            .iter()
            .position(|d| !d.is_finite() || *d <= 0.0)
        {
            return invalid(format!(
                "dispersion for {} must be positive and finite",
                METRIC_NAMES[i]
            ));
        }
        if self.restricted_tokens.windows(2).any(|w| w[0] >= w[1]) {
            return invalid("restricted token ids must be strictly increasing".into());
        }
        if self.restricted_frequencies.len() != self.restricted_tokens.len() {
            return invalid(format!(
                "{} restricted tokens but {} frequencies",
                self.restricted_tokens.len(),
                self.restricted_frequencies.len()
            ));
        }
        if self
            .restricted_frequencies
            .iter()
            .any(|f| !f.is_finite() || *f < 0.0)
        {
            return invalid("restricted frequencies must be non-negative and finite".into());
        }
        let sum: f64 = self.restricted_frequencies.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return invalid(format!("restricted frequencies sum to {sum}, expected 1"));
        }
        Ok(())
    }

    pub fn from_json(body: &str) -> Result<ControlProfile, QualityError> {
        let profile: ControlProfile = serde_json::from_str(body)
            .map_err(|e| QualityError::InvalidProfile(e.to_string()))?;
        profile.validate()?;
        Ok(profile)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("profile serialization cannot fail")
    }

    pub fn load(path: &Path) -> Result<ControlProfile, QualityError> {
        let body = std::fs::read_to_string(path).map_err(|e| QualityError::Io {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
        ControlProfile::from_json(&body)
    }

    pub fn save(&self, path: &Path) -> Result<(), QualityError> {
        self.validate()?;
        std::fs::write(path, self.to_json()).map_err(|e| QualityError::Io {
            path: path.display().to_string(),
            detail: e.to_string(),
        })
    }
}

/// Weighted mean of dispersion-normalized absolute deviations from the
/// control centers (a robust z-score). Zero exactly when the document
/// sits at the center of every positively-weighted metric.
pub fn divergence_score(
    m: &MetricVector,
    profile: &ControlProfile,
    weights: &[f64],
) -> Result<f64, QualityError> {
    if weights.len() != METRIC_COUNT {
        return Err(QualityError::DimensionMismatch {
            expected: METRIC_COUNT,
            got: weights.len(),
        });
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(QualityError::InvalidWeights(
            "weights must be finite and non-negative".into(),
        ));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(QualityError::InvalidWeights(
            "at least one weight must be positive".into(),
        ));
    }
    let values = m.as_array();
    let sum: f64 = values
        .iter()
        .zip(&profile.centers)
        .zip(&profile.dispersions)
        .zip(weights)
        .map(|(((v, c), d), w)| w * (v - c).abs() / d)
        .sum();
    Ok(sum / total)
}

/// The document's unigram frequencies over the profile's restricted
/// token set, renormalized to unit mass. `None` when the document
/// contains no restricted token at all.
pub fn restricted_frequencies(doc_tokens: &[u32], profile: &ControlProfile) -> Option<Vec<f64>> {
    let mut counts = vec![0u64; profile.restricted_tokens.len()];
    let mut total = 0u64;
    for &t in doc_tokens {
        if let Ok(pos) = profile.restricted_tokens.binary_search(&t) {
            counts[pos] += 1;
            total += 1;
        }
    }
    if total == 0 {
        return None;
    }
    Some(counts.iter().map(|&c| c as f64 / total as f64).collect())
}

/// Euclidean distance between the document's restricted frequency
/// vector and the control's. Documents sharing no restricted tokens
/// with the control set get the maximum distance √2.
pub fn l2_filter_distance(doc_tokens: &[u32], profile: &ControlProfile) -> f64 {
    match restricted_frequencies(doc_tokens, profile) {
        Some(doc) => doc
            .iter()
            .zip(&profile.restricted_frequencies)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt(),
        None => MAX_L2_DISTANCE,
    }
}

/// Score thresholds. A document passes when both scores are strictly
/// below the flag thresholds, is rejected when either score strictly
/// exceeds a reject threshold, and is flagged in between.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub flag_divergence: f64,
    pub reject_divergence: f64,
    pub flag_distance: f64,
    pub reject_distance: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            flag_divergence: 2.0,
            reject_divergence: 4.0,
            flag_distance: 0.5,
            reject_distance: 1.0,
        }
    }
}

impl Thresholds {
    /// Infinite thresholds: every finite score passes.
    pub fn unbounded() -> Self {
        Thresholds {
            flag_divergence: f64::INFINITY,
            reject_divergence: f64::INFINITY,
            flag_distance: f64::INFINITY,
            reject_distance: f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QualityVerdict {
    Pass,
    Flag,
    Reject,
}

impl std::fmt::Display for QualityVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            QualityVerdict::Pass => "pass",
            QualityVerdict::Flag => "flag",
            QualityVerdict::Reject => "reject",
        })
    }
}

/// Pure threshold function of the two scores.
pub fn verdict_for(divergence: f64, distance: f64, t: &Thresholds) -> QualityVerdict {
    if divergence > t.reject_divergence || distance > t.reject_distance {
        QualityVerdict::Reject
    } else if divergence < t.flag_divergence && distance < t.flag_distance {
        QualityVerdict::Pass
    } else {
        QualityVerdict::Flag
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub metrics: MetricVector,
    pub divergence_score: f64,
    pub l2_distance: f64,
    pub verdict: QualityVerdict,
}

/// Scores one document with uniform weights.
pub fn score_document(
    text: &str,
    tokens: &[u32],
    profile: &ControlProfile,
    thresholds: &Thresholds,
) -> Result<QualityReport, QualityError> {
    let metrics = compute_metrics(text, tokens)?;
    let divergence = divergence_score(&metrics, profile, &DEFAULT_WEIGHTS)?;
    let distance = l2_filter_distance(tokens, profile);
    Ok(QualityReport {
        metrics,
        divergence_score: divergence,
        l2_distance: distance,
        verdict: verdict_for(divergence, distance, thresholds),
    })
}

/// Aggregate verdict histogram.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictCounts {
    pub pass: u64,
    pub flag: u64,
    pub reject: u64,
}

impl VerdictCounts {
    pub fn record(&mut self, verdict: QualityVerdict) {
        match verdict {
            QualityVerdict::Pass => self.pass += 1,
            QualityVerdict::Flag => self.flag += 1,
            QualityVerdict::Reject => self.reject += 1,
        }
    }

    /// Associative, commutative merge of partial histograms.
    pub fn merge(&mut self, other: &VerdictCounts) {
        self.pass += other.pass;
        self.flag += other.flag;
        self.reject += other.reject;
    }

    pub fn total(&self) -> u64 {
        self.pass + self.flag + self.reject
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredDocument {
    /// The record's stage-2 storage key.
    pub identifier: String,
    pub report: QualityReport,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QualityOutcome {
    pub reports: Vec<ScoredDocument>,
    pub counts: VerdictCounts,
    /// Records that could not be scored: failures, unreadable entries,
    /// or no text representation.
    pub skipped: u64,
}

/// Picks the text a record is scored on: the first present entry in the
/// shard module's MIME preference order.
fn scoreable_text(rec: &crate::envelope::RepresentationRecord) -> Option<&str> {
    DEFAULT_MIME_PREFERENCE
        .iter()
        .find_map(|mime| rec.entry(mime))
        .map(|entry| entry.content())
}

/// Scores every successful record in a dataset. Per-document problems
/// never abort the walk — they count as `skipped`.
pub fn score_corpus(
    store: &dyn ObjectStore,
    dataset_id: &str,
    tok: &dyn Tokenizer,
    profile: &ControlProfile,
    thresholds: &Thresholds,
) -> Result<QualityOutcome, QualityError> {
    profile.validate()?;
    let prefix = KeyPrefix::dataset(Stage::Representations, dataset_id)?;
    let mut outcome = QualityOutcome::default();
    for key in store.list(&prefix)? {
        let Ok(key) = key else {
            outcome.skipped += 1;
            continue;
        };
        let Ok(rec) = read_record(store, &key) else {
            outcome.skipped += 1;
            continue;
        };
        if !rec.is_success() {
            outcome.skipped += 1;
            continue;
        }
        let Some(text) = scoreable_text(&rec) else {
            outcome.skipped += 1;
            continue;
        };
        let tokens = match tok.encode(text) {
            Ok(t) if !t.is_empty() => t,
            _ => {
                outcome.skipped += 1;
                continue;
            }
        };
        match score_document(text, &tokens, profile, thresholds) {
            Ok(report) => {
                outcome.counts.record(report.verdict);
                outcome.reports.push(ScoredDocument {
                    identifier: key.render(),
                    report,
                });
            }
            Err(_) => outcome.skipped += 1,
        }
    }
    Ok(outcome)
}

/// Builds a control profile from already-computed samples: per-metric
/// median and MAD (floored at [`DISPERSION_FLOOR`]), and the
/// [`RESTRICTED_TOKEN_COUNT`] most frequent token ids with their
/// control frequencies.
pub fn build_profile(
    samples: &[(MetricVector, Vec<u32>)],
    tokenizer_name: &str,
) -> Result<ControlProfile, QualityError> {
    if samples.is_empty() {
        return Err(QualityError::EmptyInput);
    }
    let mut centers = [0.0; METRIC_COUNT];
    let mut dispersions = [0.0; METRIC_COUNT];
    for i in 0..METRIC_COUNT {
        let mut values: Vec<f64> = samples.iter().map(|(m, _)| m.as_array()[i]).collect();
        let center = median(&mut values);
        let mut deviations: Vec<f64> = values.iter().map(|v| (v - center).abs()).collect();
        centers[i] = center;
        dispersions[i] = median(&mut deviations).max(DISPERSION_FLOOR);
    }

    let mut counts: BTreeMap<u32, u64> = BTreeMap::new();
    for (_, tokens) in samples {
        for &t in tokens {
            *counts.entry(t).or_insert(0) += 1;
        }
    }
    if counts.is_empty() {
        return Err(QualityError::EmptyInput);
    }
    // Most frequent first, token id breaking ties; the kept set is then
    // re-sorted by id for a canonical file layout.
    let mut by_count: Vec<(u32, u64)> = counts.into_iter().collect();
    by_count.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    by_count.truncate(RESTRICTED_TOKEN_COUNT);
    by_count.sort_by_key(|&(id, _)| id);
    let total: u64 = by_count.iter().map(|&(_, c)| c).sum();
    let restricted_tokens: Vec<u32> = by_count.iter().map(|&(id, _)| id).collect();
    let restricted_frequencies: Vec<f64> = by_count
        .iter()
        .map(|&(_, c)| c as f64 / total as f64)
        .collect();

    let profile = ControlProfile {
        version: PROFILE_VERSION,
        tokenizer: tokenizer_name.to_string(),
        centers,
        dispersions,
        restricted_tokens,
        restricted_frequencies,
    };
    profile.validate()?;
    Ok(profile)
}

/// Builds a control profile from every scoreable record in a dataset.
pub fn build_profile_from_store(
    store: &dyn ObjectStore,
    dataset_id: &str,
    tok: &dyn Tokenizer,
) -> Result<ControlProfile, QualityError> {
    let prefix = KeyPrefix::dataset(Stage::Representations, dataset_id)?;
    let mut samples = Vec::new();
    for key in store.list(&prefix)? {
        let Ok(key) = key else { continue };
        let Ok(rec) = read_record(store, &key) else {
            continue;
        };
        if !rec.is_success() {
            continue;
        }
        let Some(text) = scoreable_text(&rec) else {
            continue;
        };
        let Ok(tokens) = tok.encode(text) else {
            continue;
        };
        if tokens.is_empty() {
            continue;
        }
        let Ok(metrics) = compute_metrics(text, &tokens) else {
            continue;
        };
        samples.push((metrics, tokens));
    }
    build_profile(&samples, tok.name())
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}
