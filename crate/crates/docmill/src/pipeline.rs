//! End-to-end orchestration: configuration, stage drivers, run reports.
//!
//! [`run_pipeline`] executes the six stages in their canonical order —
//! ingest, license audit, extract, quality, tokenize, stats — against one
//! dataset in one store. Every stage is resumable: reruns skip documents
//! that already have envelopes, records that already exist, and shards
//! whose contents would be unchanged, so running the pipeline twice is
//! safe and the second run is a no-op.
//!
//! Failure severity is two-tiered. Per-document problems (an unreadable
//! file, a parser failure, a document the quality gate dislikes) are
//! *accounted* — they land in summaries and stage reports, never abort
//! the run. Infrastructure problems (broken store, invalid config, a
//! registry that excludes stored content) are *hard failures*: the run
//! stops with [`PipelineError`] naming the stage.
//!
//! Stage reports are written under `db/<dataset>/` in the same store the
//! data lives in, so a corpus carries its own audit trail.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::envelope::RepresentationRecord;
use crate::extract::{extract_document, ChainSet};
use crate::gate::{LicenseRegistry, LicenseTag, Origin, SourceMeta};
use crate::ingest::{ingest_path, IngestSummary};
use crate::key::{KeyPrefix, Stage, StorageKey};
use crate::quality::{
    build_profile_from_store, score_corpus, ControlProfile, QualityError, Thresholds,
    VerdictCounts,
};
use crate::shard::{
    read_shard_identifiers, shard_for, tokenize_record, write_shard, ShardError, ShardRow,
    DEFAULT_MIME_PREFERENCE,
};
use crate::stats::{entropy_stats, length_stats, stage_counts, StageCounts, StatsError};
use crate::store::{
    open_store, read_envelope, read_record, write_envelope, write_record,
    ObjectStore, StoreError,
};
use crate::tokenizer::{self, Tokenizer};

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

#[derive(Debug, Error)]
pub enum PipelineError {
    /// Configuration problem, naming the first offending key.
    #[error("config key {0:?} is missing or invalid")]
    ConfigInvalid(String),
    #[error("config file {path}: {detail}")]
    ConfigUnreadable { path: String, detail: String },
    /// A stage hit a problem it cannot account per-document.
    #[error("stage {stage}: {detail}")]
    Stage { stage: &'static str, detail: String },
}

/// Wraps any stage error with the stage's name.
fn stage_err(stage: &'static str, e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Stage {
        stage,
        detail: e.to_string(),
    }
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// Everything a pipeline run needs. Built from a TOML file, environment
/// variables, programmatic setters, or any layering of the three —
/// command-line flags beat environment variables beat the config file.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Store spec: a directory path or an HTTP base URL.
    pub store: String,
    pub dataset_id: String,
    /// Local directory to ingest. `None` skips the ingest stage.
    pub source: Option<PathBuf>,
    /// Declared license id for ingested sources.
    pub license: Option<String>,
    /// Operator's judgment that attribution obligations can be met.
    pub attribution_satisfiable: bool,
    pub origin: Origin,
    /// Tokenizer spec: `byte` or a path to a BPE `tokenizer.json`.
    pub tokenizer: String,
    /// Worker threads for extraction; 0 means one per logical CPU.
    pub workers: usize,
    /// Stage-3 shard count.
    pub shards: u32,
    /// Control profile file; `None` builds one from the corpus itself.
    pub profile: Option<PathBuf>,
    /// License registry file; `None` uses the built-in registry.
    pub registry: Option<PathBuf>,
}

impl PipelineConfig {
    /// A config with required fields set and everything else defaulted.
    pub fn new(store: impl Into<String>, dataset_id: impl Into<String>) -> Self {
        PipelineConfig {
            store: store.into(),
            dataset_id: dataset_id.into(),
            source: None,
            license: None,
            attribution_satisfiable: false,
            origin: Origin::Private,
            tokenizer: "byte".to_string(),
            workers: 0,
            shards: 4,
            profile: None,
            registry: None,
        }
    }

    /// Parses and validates a TOML config. The first offending key is
    /// named in the error, e.g. `ConfigInvalid("store.root")`.
    pub fn from_toml_str(text: &str) -> Result<Self, PipelineError> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| PipelineError::ConfigUnreadable {
                path: "<inline>".to_string(),
                detail: e.to_string(),
            })?;
        Self::from_table(&table)
    }

    /// Reads and validates a TOML config file.
    pub fn from_file(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::ConfigUnreadable {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
        let table: toml::Table =
            text.parse()
                .map_err(|e: toml::de::Error| PipelineError::ConfigUnreadable {
                    path: path.display().to_string(),
                    detail: e.to_string(),
                })?;
        Self::from_table(&table)
    }

    fn from_table(table: &toml::Table) -> Result<Self, PipelineError> {
        let invalid = |key: &str| PipelineError::ConfigInvalid(key.to_string());

        for key in table.keys() {
            if !matches!(key.as_str(), "store" | "dataset" | "pipeline") {
                return Err(invalid(key));
            }
        }

        let section = |name: &str| -> Result<Option<&toml::Table>, PipelineError> {
            match table.get(name) {
                None => Ok(None),
                Some(toml::Value::Table(t)) => Ok(Some(t)),
                Some(_) => Err(invalid(name)),
            }
        };
        let required_str = |t: &toml::Table, section: &str, key: &str| -> Result<String, PipelineError> {
            match t.get(key) {
                Some(toml::Value::String(s)) if !s.is_empty() => Ok(s.clone()),
                _ => Err(invalid(&format!("{section}.{key}"))),
            }
        };
        let optional_str = |t: &toml::Table, section: &str, key: &str| -> Result<Option<String>, PipelineError> {
            match t.get(key) {
                None => Ok(None),
                Some(toml::Value::String(s)) if !s.is_empty() => Ok(Some(s.clone())),
                Some(_) => Err(invalid(&format!("{section}.{key}"))),
            }
        };

        let store_table = section("store")?.ok_or_else(|| invalid("store.root"))?;
        for key in store_table.keys() {
            if key != "root" {
                return Err(invalid(&format!("store.{key}")));
            }
        }
        let store = required_str(store_table, "store", "root")?;

        let dataset_table = section("dataset")?.ok_or_else(|| invalid("dataset.id"))?;
        for key in dataset_table.keys() {
            if !matches!(
                key.as_str(),
                "id" | "source" | "license" | "origin" | "attribution_satisfiable"
            ) {
                return Err(invalid(&format!("dataset.{key}")));
            }
        }
        let dataset_id = required_str(dataset_table, "dataset", "id")?;
        if KeyPrefix::dataset(Stage::Documents, &dataset_id).is_err() {
            return Err(invalid("dataset.id"));
        }
        let source = optional_str(dataset_table, "dataset", "source")?.map(PathBuf::from);
        let license = optional_str(dataset_table, "dataset", "license")?;
        let origin = match optional_str(dataset_table, "dataset", "origin")?.as_deref() {
            None | Some("private") => Origin::Private,
            Some("us_federal_work") => Origin::UsFederalWork,
            Some("government_edict") => Origin::GovernmentEdict,
            Some(_) => return Err(invalid("dataset.origin")),
        };
        let attribution_satisfiable = match dataset_table.get("attribution_satisfiable") {
            None => false,
            Some(toml::Value::Boolean(b)) => *b,
            Some(_) => return Err(invalid("dataset.attribution_satisfiable")),
        };

        let mut config = PipelineConfig::new(store, dataset_id);
        config.source = source;
        config.license = license;
        config.origin = origin;
        config.attribution_satisfiable = attribution_satisfiable;

        if let Some(pipeline_table) = section("pipeline")? {
            for key in pipeline_table.keys() {
                if !matches!(
                    key.as_str(),
                    "tokenizer" | "workers" | "shards" | "profile" | "registry"
                ) {
                    return Err(invalid(&format!("pipeline.{key}")));
                }
            }
            if let Some(tok) = optional_str(pipeline_table, "pipeline", "tokenizer")? {
                config.tokenizer = tok;
            }
            match pipeline_table.get("workers") {
                None => {}
                Some(toml::Value::Integer(n)) if *n >= 0 => config.workers = *n as usize,
                Some(_) => return Err(invalid("pipeline.workers")),
            }
            match pipeline_table.get("shards") {
                None => {}
                Some(toml::Value::Integer(n)) if *n >= 1 && *n <= 65_536 => {
                    config.shards = *n as u32;
                }
                Some(_) => return Err(invalid("pipeline.shards")),
            }
            config.profile =
                optional_str(pipeline_table, "pipeline", "profile")?.map(PathBuf::from);
            config.registry =
                optional_str(pipeline_table, "pipeline", "registry")?.map(PathBuf::from);
        }

        Ok(config)
    }

    /// Applies environment overrides: `DOCMILL_STORE` and
    /// `DOCMILL_WORKERS`. Environment beats the config file; flags
    /// (applied by the caller after this) beat both.
    pub fn apply_env(&mut self) -> Result<(), PipelineError> {
        self.apply_env_pairs(std::env::vars())
    }

    /// [`PipelineConfig::apply_env`] over an explicit variable list.
    pub fn apply_env_pairs(
        &mut self,
        vars: impl Iterator<Item = (String, String)>,
    ) -> Result<(), PipelineError> {
        for (key, value) in vars {
            match key.as_str() {
                "DOCMILL_STORE" if !value.is_empty() => self.store = value,
                "DOCMILL_WORKERS" => {
                    self.workers = value
                        .parse()
                        .map_err(|_| PipelineError::ConfigInvalid("DOCMILL_WORKERS".into()))?;
                }
                _ => {}
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Stage summaries and the run report
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct AuditSummary {
    pub include_count: u64,
    pub exclude_count: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ExtractSummary {
    /// Documents extracted this run.
    pub processed: u64,
    /// Documents whose record already existed.
    pub skipped: u64,
    /// Container members promoted to documents this run.
    pub children_sealed: u64,
    /// Records written with `success = false`.
    pub failures_recorded: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct QualitySummary {
    pub pass: u64,
    pub flag: u64,
    pub reject: u64,
    pub skipped: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct TokenizeSummary {
    pub rows_written: u64,
    pub shards_written: u32,
    /// Shards left untouched because their contents would be identical.
    pub shards_skipped: u32,
    /// Records with nothing to tokenize (failures, no preferred type).
    pub records_skipped: u64,
}

/// Aggregate outcome of one pipeline run. Serialized to
/// `db/<dataset>/run_report.json`.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub dataset_id: String,
    /// `None` when no source directory was configured.
    pub ingest: Option<IngestSummary>,
    pub audit: AuditSummary,
    pub extract: ExtractSummary,
    pub quality: QualitySummary,
    pub tokenize: TokenizeSummary,
    pub stats: StageCounts,
}

fn db_key(dataset_id: &str, name: &str) -> Result<StorageKey, StoreError> {
    Ok(StorageKey::new(Stage::Db, dataset_id, name)?)
}

fn put_report<T: Serialize>(
    store: &dyn ObjectStore,
    dataset_id: &str,
    name: &str,
    report: &T,
) -> Result<(), StoreError> {
    let body = serde_json::to_vec_pretty(report).expect("reports serialize");
    store.put(&db_key(dataset_id, name)?, &body, true)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Stage drivers
// ---------------------------------------------------------------------------

/// License audit over stored envelopes. Hard-fails if any stored
/// document is no longer includable under the active registry — data
/// that fails its audit must not flow further down the pipeline.
pub fn audit_stage(
    store: &dyn ObjectStore,
    registry: &LicenseRegistry,
    dataset_id: &str,
    attribution_satisfiable: bool,
) -> Result<AuditSummary, PipelineError> {
    let report = registry
        .audit_corpus(store, dataset_id, attribution_satisfiable)
        .map_err(|e| stage_err("audit", e))?;
    put_report(store, dataset_id, "gate_audit.json", &report).map_err(|e| stage_err("audit", e))?;
    let summary = AuditSummary {
        include_count: report.include_count,
        exclude_count: report.exclude_count,
    };
    if report.exclude_count > 0 {
        let first = report
            .exclusions()
            .next()
            .map(|e| format!("{} ({})", e.key, e.decision.reason))
            .unwrap_or_default();
        return Err(PipelineError::Stage {
            stage: "audit",
            detail: format!(
                "{} stored document(s) fail the license audit, e.g. {first}",
                report.exclude_count
            ),
        });
    }
    Ok(summary)
}

/// Extracts every document that does not yet have a representation
/// record, sealing container members as new documents and extracting
/// them too. Parser failures are recorded, never raised.
pub fn extract_stage(
    store: &dyn ObjectStore,
    dataset_id: &str,
    chains: &ChainSet,
    workers: usize,
) -> Result<ExtractSummary, PipelineError> {
    fn fail(e: impl std::fmt::Display) -> PipelineError {
        stage_err("extract", e)
    }
    let prefix = KeyPrefix::dataset(Stage::Documents, dataset_id).map_err(fail)?;
    let mut worklist: Vec<StorageKey> = store
        .list(&prefix)
        .map_err(fail)?
        .collect::<Result<_, _>>()
        .map_err(fail)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(fail)?;

    let mut summary = ExtractSummary::default();
    while !worklist.is_empty() {
        type PerDoc = (ExtractSummary, Vec<StorageKey>);
        let results: Vec<Result<PerDoc, StoreError>> = pool.install(|| {
            use rayon::prelude::*;
            worklist
                .par_iter()
                .map(|doc_key| {
                    let mut local = ExtractSummary::default();
                    let mut next = Vec::new();
                    let target = doc_key.with_stage(Stage::Representations);
                    if store.exists(&target)? {
                        local.skipped += 1;
                        return Ok((local, next));
                    }
                    let env = read_envelope(store, doc_key)?;
                    let outcome = extract_document(&env, chains);
                    for child in outcome.children {
                        match write_envelope(store, &child.envelope, false) {
                            Ok(_) => {
                                local.children_sealed += 1;
                                next.push(child.envelope.storage_key());
                            }
                            // Sealed by an earlier run; extraction of it is
                            // decided by its own record's existence.
                            Err(StoreError::AlreadyExists(_)) => {
                                next.push(child.envelope.storage_key());
                            }
                            Err(e) => return Err(e),
                        }
                    }
                    if !outcome.record.is_success() {
                        local.failures_recorded += 1;
                    }
                    match write_record(store, &outcome.record, false) {
                        Ok(_) => local.processed += 1,
                        Err(StoreError::AlreadyExists(_)) => local.skipped += 1,
                        Err(e) => return Err(e),
                    }
                    Ok((local, next))
                })
                .collect()
        });

        let mut next_worklist = Vec::new();
        for result in results {
            let (local, next) = result.map_err(fail)?;
            summary.processed += local.processed;
            summary.skipped += local.skipped;
            summary.children_sealed += local.children_sealed;
            summary.failures_recorded += local.failures_recorded;
            next_worklist.extend(next);
        }
        worklist = next_worklist;
    }
    Ok(summary)
}

/// Scores every successful record against the control profile, writing
/// the full report and (when self-profiling) the profile itself under
/// `db/`. An empty corpus yields an empty summary, not an error.
pub fn quality_stage(
    store: &dyn ObjectStore,
    dataset_id: &str,
    tok: &dyn Tokenizer,
    profile_path: Option<&Path>,
) -> Result<QualitySummary, PipelineError> {
    fn fail(e: impl std::fmt::Display) -> PipelineError {
        stage_err("quality", e)
    }

    let profile: ControlProfile = if let Some(path) = profile_path {
        ControlProfile::load(path).map_err(fail)?
    } else {
        let key = db_key(dataset_id, "quality_profile.json").map_err(fail)?;
        match store.get(&key) {
            Ok(bytes) => {
                let text = String::from_utf8(bytes)
                    .map_err(|e| fail(format!("stored profile is not UTF-8: {e}")))?;
                ControlProfile::from_json(&text).map_err(fail)?
            }
            Err(StoreError::NotFound(_)) => {
                match build_profile_from_store(store, dataset_id, tok) {
                    Ok(profile) => {
                        store
                            .put(&key, profile.to_json().as_bytes(), true)
                            .map_err(fail)?;
                        profile
                    }
                    // Nothing to profile: an empty dataset scores nothing.
                    Err(QualityError::EmptyInput) => return Ok(QualitySummary::default()),
                    Err(e) => return Err(fail(e)),
                }
            }
            Err(e) => return Err(fail(e)),
        }
    };

    let outcome =
        score_corpus(store, dataset_id, tok, &profile, &Thresholds::default()).map_err(fail)?;
    put_report(store, dataset_id, "quality_report.json", &outcome).map_err(fail)?;
    let VerdictCounts { pass, flag, reject } = outcome.counts;
    Ok(QualitySummary {
        pass,
        flag,
        reject,
        skipped: outcome.skipped,
    })
}

/// Tokenizes every successful record into its stable shard. Shards whose
/// row count already matches are left untouched (records are immutable,
/// so an equal count means equal contents); anything else is rewritten
/// atomically.
pub fn tokenize_stage(
    store: &dyn ObjectStore,
    dataset_id: &str,
    tok: &dyn Tokenizer,
    shards: u32,
) -> Result<TokenizeSummary, PipelineError> {
    fn fail(e: impl std::fmt::Display) -> PipelineError {
        stage_err("tokenize", e)
    }
    if shards == 0 {
        return Err(PipelineError::ConfigInvalid("pipeline.shards".into()));
    }
    let prefix = KeyPrefix::dataset(Stage::Representations, dataset_id).map_err(fail)?;
    let mut buckets: BTreeMap<u32, Vec<ShardRow>> = BTreeMap::new();
    let mut summary = TokenizeSummary::default();

    let keys: Vec<StorageKey> = store
        .list(&prefix)
        .map_err(fail)?
        .collect::<Result<_, _>>()
        .map_err(fail)?;
    for key in keys {
        let rec: RepresentationRecord = read_record(store, &key).map_err(fail)?;
        if !rec.is_success() {
            summary.records_skipped += 1;
            continue;
        }
        let row = match tokenize_record(&rec, tok, &DEFAULT_MIME_PREFERENCE) {
            Ok(row) => row,
            Err(ShardError::NoUsableRepresentation { .. }) => {
                summary.records_skipped += 1;
                continue;
            }
            Err(e) => return Err(fail(e)),
        };
        let bucket = shard_for(&row.identifier, shards);
        buckets.entry(bucket).or_default().push(row);
    }

    for (bucket, rows) in buckets {
        let name = format!("shard-{bucket:04}-of-{shards:04}.parquet");
        let dest = StorageKey::new(Stage::Parquet, dataset_id, &name).map_err(fail)?;
        let unchanged = match read_shard_identifiers(store, &dest) {
            Ok(existing) => existing.len() == rows.len(),
            Err(_) => false,
        };
        if unchanged {
            summary.shards_skipped += 1;
            continue;
        }
        let receipt = write_shard(store, &rows, &dest).map_err(fail)?;
        summary.rows_written += receipt.rows_written;
        summary.shards_written += 1;
    }
    Ok(summary)
}

/// Corpus statistics: stage counts, per-type length distributions, and
/// token entropy, each written under `db/`.
pub fn stats_stage(
    store: &dyn ObjectStore,
    dataset_id: &str,
) -> Result<StageCounts, PipelineError> {
    fn fail(e: impl std::fmt::Display) -> PipelineError {
        stage_err("stats", e)
    }
    let counts = stage_counts(store, dataset_id).map_err(fail)?;
    put_report(store, dataset_id, "stage_counts.json", &counts).map_err(fail)?;

    let mut lengths = BTreeMap::new();
    for mime in DEFAULT_MIME_PREFERENCE {
        match length_stats(store, dataset_id, mime) {
            Ok(report) => {
                lengths.insert(mime.to_string(), report);
            }
            Err(StatsError::NoData) => {}
            Err(e) => return Err(fail(e)),
        }
    }
    put_report(store, dataset_id, "length_stats.json", &lengths).map_err(fail)?;

    match entropy_stats(store, dataset_id) {
        Ok(report) => put_report(store, dataset_id, "entropy_stats.json", &report)
            .map_err(fail)?,
        Err(StatsError::NoData) => {}
        Err(e) => return Err(fail(e)),
    }
    Ok(counts)
}

// ---------------------------------------------------------------------------
// The full run
// ---------------------------------------------------------------------------

/// Runs ingest → audit → extract → quality → tokenize → stats for one
/// dataset, writing stage reports and the final run report under `db/`.
/// Every stage is resumable; a completed corpus reruns as a no-op.
pub fn run_pipeline(config: &PipelineConfig) -> Result<RunReport, PipelineError> {
    if config.store.is_empty() {
        return Err(PipelineError::ConfigInvalid("store.root".into()));
    }
    if config.dataset_id.is_empty() {
        return Err(PipelineError::ConfigInvalid("dataset.id".into()));
    }
    let store = open_store(&config.store).map_err(|e| stage_err("store", e))?;
    let store = store.as_ref();

    let owned_registry: Option<LicenseRegistry> = match &config.registry {
        Some(path) => {
            let text =
                std::fs::read_to_string(path).map_err(|e| PipelineError::ConfigUnreadable {
                    path: path.display().to_string(),
                    detail: e.to_string(),
                })?;
            Some(LicenseRegistry::parse(&text).map_err(|e| stage_err("audit", e))?)
        }
        None => None,
    };
    let registry = owned_registry
        .as_ref()
        .unwrap_or_else(|| LicenseRegistry::builtin());

    let tok = tokenizer::load(&config.tokenizer)
        .map_err(|_| PipelineError::ConfigInvalid("pipeline.tokenizer".into()))?;

    let ingest = match &config.source {
        Some(root) => {
            let meta = SourceMeta {
                origin: config.origin,
                license: config.license.clone().map(|id| LicenseTag {
                    id,
                    attribution_satisfiable: config.attribution_satisfiable,
                }),
                ..SourceMeta::default()
            };
            let summary = ingest_path(store, registry, root, &config.dataset_id, &meta)
                .map_err(|e| stage_err("ingest", e))?;
            tracing::info!(
                stage = "ingest",
                sealed = summary.sealed,
                gated_out = summary.gated_out,
                failed = summary.failed,
                skipped = summary.skipped,
                "stage complete"
            );
            Some(summary)
        }
        None => None,
    };

    let audit = audit_stage(
        store,
        registry,
        &config.dataset_id,
        config.attribution_satisfiable,
    )?;
    tracing::info!(
        stage = "audit",
        include = audit.include_count,
        exclude = audit.exclude_count,
        "stage complete"
    );
    let extract = extract_stage(store, &config.dataset_id, ChainSet::builtin(), config.workers)?;
    tracing::info!(
        stage = "extract",
        processed = extract.processed,
        skipped = extract.skipped,
        children_sealed = extract.children_sealed,
        failures_recorded = extract.failures_recorded,
        "stage complete"
    );
    let quality = quality_stage(
        store,
        &config.dataset_id,
        tok.as_ref(),
        config.profile.as_deref(),
    )?;
    tracing::info!(
        stage = "quality",
        pass = quality.pass,
        flag = quality.flag,
        reject = quality.reject,
        skipped = quality.skipped,
        "stage complete"
    );
    let tokenize = tokenize_stage(store, &config.dataset_id, tok.as_ref(), config.shards)?;
    tracing::info!(
        stage = "tokenize",
        rows_written = tokenize.rows_written,
        shards_written = tokenize.shards_written,
        shards_skipped = tokenize.shards_skipped,
        records_skipped = tokenize.records_skipped,
        "stage complete"
    );
    let stats = stats_stage(store, &config.dataset_id)?;
    tracing::info!(
        stage = "stats",
        documents = stats.documents,
        representations = stats.representations,
        parquet_rows = stats.parquet_rows,
        "stage complete"
    );

    let report = RunReport {
        dataset_id: config.dataset_id.clone(),
        ingest,
        audit,
        extract,
        quality,
        tokenize,
        stats,
    };
    put_report(store, &config.dataset_id, "run_report.json", &report)
        .map_err(|e| stage_err("report", e))?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::provenance::verify_provenance;

    // -- config parsing -------------------------------------------------------

    const FULL_CONFIG: &str = r#"
        [store]
        root = "/data/store"

        [dataset]
        id = "corpus"
        source = "/data/raw"
        license = "CC0-1.0"
        origin = "private"
        attribution_satisfiable = true

        [pipeline]
        tokenizer = "byte"
        workers = 3
        shards = 2
    "#;

    #[test]
    fn full_config_parses() {
        let config = PipelineConfig::from_toml_str(FULL_CONFIG).unwrap();
        assert_eq!(config.store, "/data/store");
        assert_eq!(config.dataset_id, "corpus");
        assert_eq!(config.source.as_deref(), Some(Path::new("/data/raw")));
        assert_eq!(config.license.as_deref(), Some("CC0-1.0"));
        assert!(config.attribution_satisfiable);
        assert_eq!(config.workers, 3);
        assert_eq!(config.shards, 2);
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let config = PipelineConfig::from_toml_str(
            "[store]\nroot = \"/s\"\n[dataset]\nid = \"d\"\n",
        )
        .unwrap();
        assert_eq!(config.tokenizer, "byte");
        assert_eq!(config.workers, 0);
        assert_eq!(config.shards, 4);
        assert_eq!(config.origin, Origin::Private);
        assert!(config.source.is_none());
    }

    #[test]
    fn first_offending_key_is_named() {
        let cases: &[(&str, &str)] = &[
            ("[dataset]\nid = \"d\"\n", "store.root"),
            ("[store]\nroot = \"\"\n[dataset]\nid = \"d\"\n", "store.root"),
            ("[store]\nroot = \"/s\"\n", "dataset.id"),
            ("[store]\nroot = \"/s\"\n[dataset]\nid = \"a/b\"\n", "dataset.id"),
            (
                "[store]\nroot = \"/s\"\n[dataset]\nid = \"d\"\norigin = \"martian\"\n",
                "dataset.origin",
            ),
            (
                "[store]\nroot = \"/s\"\n[dataset]\nid = \"d\"\n[pipeline]\nworkers = \"many\"\n",
                "pipeline.workers",
            ),
            (
                "[store]\nroot = \"/s\"\n[dataset]\nid = \"d\"\n[pipeline]\nshards = 0\n",
                "pipeline.shards",
            ),
            (
                "[store]\nroot = \"/s\"\n[dataset]\nid = \"d\"\nlicence = \"x\"\n",
                "dataset.licence",
            ),
            ("[store]\nroot = \"/s\"\n[dataset]\nid = \"d\"\n[extra]\n", "extra"),
        ];
        for (text, expected) in cases {
            match PipelineConfig::from_toml_str(text) {
                Err(PipelineError::ConfigInvalid(key)) => {
                    assert_eq!(&key, expected, "config: {text}");
                }
                other => panic!("expected ConfigInvalid({expected}), got {other:?}"),
            }
        }
    }

    #[test]
    fn env_overrides_config_file() {
        let mut config = PipelineConfig::from_toml_str(FULL_CONFIG).unwrap();
        config
            .apply_env_pairs(
                vec![
                    ("DOCMILL_STORE".to_string(), "/env/store".to_string()),
                    ("DOCMILL_WORKERS".to_string(), "7".to_string()),
                    ("UNRELATED".to_string(), "x".to_string()),
                ]
                .into_iter(),
            )
            .unwrap();
        assert_eq!(config.store, "/env/store");
        assert_eq!(config.workers, 7);

        let err = config
            .apply_env_pairs(vec![("DOCMILL_WORKERS".to_string(), "lots".to_string())].into_iter())
            .unwrap_err();
        assert!(matches!(err, PipelineError::ConfigInvalid(k) if k == "DOCMILL_WORKERS"));
    }

    // -- the full run over the fixture corpus --------------------------------

    fn fixture_config(root: &Path) -> PipelineConfig {
        let source = root.join("src");
        fixtures::write_corpus(&source).unwrap();
        let mut config = PipelineConfig::new(
            root.join("store").display().to_string(),
            "fixture",
        );
        config.source = Some(source);
        config.license = Some("CC0-1.0".to_string());
        config.workers = 2;
        config.shards = 2;
        config
    }

    #[test]
    fn end_to_end_fixture_run_closes_provenance() {
        let dir = tempfile::tempdir().unwrap();
        let config = fixture_config(dir.path());
        let report = run_pipeline(&config).unwrap();

        // Fifty files on disk, five more from the archive.
        let ingest = report.ingest.unwrap();
        assert_eq!(ingest.sealed, 50);
        assert_eq!(ingest.failed, 0);
        assert_eq!(report.audit.include_count, 50);
        assert_eq!(report.audit.exclude_count, 0);
        assert_eq!(report.extract.children_sealed, 5);
        assert_eq!(report.extract.processed, 55);
        assert_eq!(report.extract.skipped, 0);
        assert_eq!(report.extract.failures_recorded, 0);

        // Every successful record is scored and becomes exactly one row.
        let scored = report.quality.pass + report.quality.flag + report.quality.reject;
        assert_eq!(scored, 55);
        assert!(
            report.quality.reject >= 1,
            "the garbled document must not pass: {:?}",
            report.quality
        );
        assert_eq!(report.tokenize.rows_written, 55);
        assert_eq!(report.stats.documents, 55);
        assert_eq!(report.stats.representations, 55);
        assert_eq!(report.stats.parquet_rows, 55);

        // The chain from rows back to documents is unbroken.
        let store = open_store(&config.store).unwrap();
        let provenance = verify_provenance(store.as_ref(), "fixture").unwrap();
        assert!(provenance.is_clean(), "{}", provenance.to_table());

        // Stage reports landed in the store.
        for name in [
            "gate_audit.json",
            "quality_profile.json",
            "quality_report.json",
            "stage_counts.json",
            "length_stats.json",
            "entropy_stats.json",
            "run_report.json",
        ] {
            let key = db_key("fixture", name).unwrap();
            assert!(store.exists(&key).unwrap(), "missing report {name}");
        }
    }

    #[test]
    fn rerun_is_a_no_op() {
        let dir = tempfile::tempdir().unwrap();
        let config = fixture_config(dir.path());
        run_pipeline(&config).unwrap();
        let second = run_pipeline(&config).unwrap();

        let ingest = second.ingest.unwrap();
        assert_eq!(ingest.sealed, 0);
        assert_eq!(ingest.skipped, 50);
        assert_eq!(second.extract.processed, 0);
        assert_eq!(second.extract.skipped, 55);
        assert_eq!(second.extract.children_sealed, 0);
        assert_eq!(second.tokenize.shards_written, 0);
        assert_eq!(second.tokenize.rows_written, 0);
        assert!(second.tokenize.shards_skipped >= 1);
        assert_eq!(second.stats.parquet_rows, 55);
    }

    #[test]
    fn missing_source_directory_names_the_stage() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = PipelineConfig::new(
            dir.path().join("store").display().to_string(),
            "fixture",
        );
        config.source = Some(dir.path().join("no-such-dir"));
        config.license = Some("CC0-1.0".to_string());
        let err = run_pipeline(&config).unwrap_err();
        assert!(
            matches!(err, PipelineError::Stage { stage: "ingest", .. }),
            "{err}"
        );
    }

    #[test]
    fn audit_hard_fails_when_registry_no_longer_includes_stored_content() {
        let dir = tempfile::tempdir().unwrap();
        let config = fixture_config(dir.path());
        run_pipeline(&config).unwrap();

        // A registry that knows CC0-1.0 but excludes it.
        let registry_text = {
            let builtin = std::fs::read_to_string(
                Path::new(env!("CARGO_MANIFEST_DIR")).join("data/license_registry.txt"),
            )
            .unwrap();
            builtin.replace(
                "CC0-1.0          | include(cc0_dedication)",
                "CC0-1.0          | exclude(non_commercial)",
            )
        };
        let registry_path = dir.path().join("registry.txt");
        std::fs::write(&registry_path, registry_text).unwrap();

        // Rerun against already-stored content under the stricter policy;
        // no source, so the failure must come from the audit itself.
        let mut config = config;
        config.source = None;
        config.registry = Some(registry_path);
        let err = run_pipeline(&config).unwrap_err();
        assert!(
            matches!(err, PipelineError::Stage { stage: "audit", .. }),
            "{err}"
        );
    }

    #[test]
    fn empty_dataset_runs_clean() {
        let dir = tempfile::tempdir().unwrap();
        let config = PipelineConfig::new(
            dir.path().join("store").display().to_string(),
            "empty",
        );
        let report = run_pipeline(&config).unwrap();
        assert!(report.ingest.is_none());
        assert_eq!(report.extract.processed, 0);
        assert_eq!(report.quality, QualitySummary::default());
        assert_eq!(report.tokenize.rows_written, 0);
        assert_eq!(report.stats.documents, 0);
    }
}
