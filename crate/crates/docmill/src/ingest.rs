//! Source connectors feeding the document stage.
//!
//! Two connectors are provided: [`ingest_path`] walks a local directory tree
//! and seals every regular file it finds, and [`fetch_url`] retrieves a
//! single document over HTTP(S) with retries and per-host pacing. Both
//! connectors share the same non-negotiable ordering: the license gate is
//! consulted **before** any bytes are read or written, so a refused source
//! leaves the store untouched.
//!
//! Directory ingestion is resumable. Envelopes are written without
//! overwrite, so a rerun over the same tree counts already-present
//! documents as `skipped` instead of rewriting them. Per-file problems —
//! an unreadable file, a malformed metadata sidecar, an empty file — are
//! counted in [`IngestSummary::failed`] and never abort the walk; only a
//! broken destination store stops the run early.
//!
//! A file may carry a JSON sidecar named `<file>.meta.json` that overrides
//! the invocation-level source metadata for that file alone (different
//! license, different origin). Sidecars fail closed twice over: a sidecar
//! that does not parse fails the file, and a sidecar whose metadata the
//! gate cannot prove includable gates the file out.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, OnceLock};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use walkdir::WalkDir;

use crate::envelope::{DocumentEnvelope, EnvelopeError};
use crate::extract::sniff_mime;
use crate::gate::{GateDecision, GateError, LicenseRegistry, LicenseTag, Origin, SourceMeta};
use crate::key::StorageKey;
use crate::store::{write_envelope, ObjectStore, StoreError};

// ---------------------------------------------------------------------------
// Constants
// ---------------------------------------------------------------------------

/// Filename suffix marking a per-file metadata sidecar.
pub const SIDECAR_SUFFIX: &str = ".meta.json";

/// Upper bound on a fetched response body. Matches the cap applied to
/// container members during extraction, so a fetched document is never
/// too large to process downstream.
pub const MAX_FETCH_BYTES: u64 = 256 * 1024 * 1024;

/// First retry delay; doubles per attempt up to [`BACKOFF_CAP`].
const BACKOFF_BASE: Duration = Duration::from_millis(100);
const BACKOFF_CAP: Duration = Duration::from_secs(5);

// ---------------------------------------------------------------------------
// Errors and summaries
// ---------------------------------------------------------------------------

#[derive(Debug, Error)]
pub enum IngestError {
    /// The gate could not prove the source includable; nothing was written.
    #[error("source refused by the license gate: {reason}")]
    GateRefused { reason: String },
    #[error(transparent)]
    Gate(#[from] GateError),
    #[error("ingest root {path}: {detail}")]
    RootUnreadable { path: String, detail: String },
    #[error("unsupported URL scheme in {0:?} (http and https only)")]
    UnsupportedScheme(String),
    #[error("fetching {url} failed: {detail}")]
    FetchFailed {
        url: String,
        /// Final HTTP status, when the failure was an HTTP response at all.
        status: Option<u16>,
        detail: String,
    },
    #[error(transparent)]
    Envelope(#[from] EnvelopeError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// Per-file accounting for one directory ingestion run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestSummary {
    /// Envelopes written this run.
    pub sealed: u64,
    /// Files the gate refused (sidecar metadata failed an inclusion test).
    pub gated_out: u64,
    /// Files that could not be read, parsed, or sealed.
    pub failed: u64,
    /// Files whose envelope already existed (reruns).
    pub skipped: u64,
}

impl IngestSummary {
    pub fn total(&self) -> u64 {
        self.sealed + self.gated_out + self.failed + self.skipped
    }
}

// ---------------------------------------------------------------------------
// Sidecar metadata
// ---------------------------------------------------------------------------

/// Per-file metadata overrides. Every field is optional; absent fields
/// keep the invocation-level value. Unknown fields are rejected so a
/// misspelled key cannot silently loosen the gate.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Sidecar {
    license: Option<String>,
    attribution_satisfiable: Option<bool>,
    origin: Option<String>,
    copyright_expired: Option<bool>,
    public_domain_dedication: Option<bool>,
    fdlp_member: Option<bool>,
}

impl Sidecar {
    /// Merges the overrides onto `base`, erroring on values that do not
    /// map onto source metadata (so they fail the file, not loosen it).
    fn apply(&self, base: &SourceMeta) -> Result<SourceMeta, String> {
        let mut meta = base.clone();
        if let Some(origin) = &self.origin {
            meta.origin = match origin.as_str() {
                "us_federal_work" => Origin::UsFederalWork,
                "government_edict" => Origin::GovernmentEdict,
                "private" => Origin::Private,
                other => return Err(format!("unknown origin {other:?}")),
            };
        }
        if let Some(v) = self.copyright_expired {
            meta.copyright_expired = v;
        }
        if let Some(v) = self.public_domain_dedication {
            meta.public_domain_dedication = v;
        }
        if let Some(v) = self.fdlp_member {
            meta.fdlp_member = v;
        }
        if let Some(id) = &self.license {
            // A sidecar license replaces the tag wholesale. Attribution is
            // never inherited across different licenses: unless the sidecar
            // attests it, it is false.
            meta.license = Some(LicenseTag {
                id: id.clone(),
                attribution_satisfiable: self.attribution_satisfiable.unwrap_or(false),
            });
        } else if let Some(attr) = self.attribution_satisfiable {
            if let Some(tag) = &mut meta.license {
                tag.attribution_satisfiable = attr;
            }
        }
        Ok(meta)
    }
}

/// The license string recorded on a sealed envelope: the declared license
/// id when there is one, otherwise the id of the legal basis the include
/// decision rests on. Basis ids round-trip through tag evaluation, so a
/// later audit of stored envelopes reaches the same verdict.
fn license_label(meta: &SourceMeta, decision: &GateDecision) -> String {
    if let Some(tag) = &meta.license {
        tag.id.clone()
    } else if let Some(basis) = &decision.basis {
        basis.kind.id().to_string()
    } else {
        // Unreachable for include decisions: verdict=include implies a basis.
        "unknown".to_string()
    }
}

// ---------------------------------------------------------------------------
// Directory ingestion
// ---------------------------------------------------------------------------

enum FileOutcome {
    Sealed,
    GatedOut,
    Failed,
    Skipped,
}

/// Walks `root` and seals every regular file under it into `store` as a
/// document envelope for `dataset_id`. The document id is the
/// `/`-joined path relative to `root`.
///
/// The gate evaluates `meta` before the walk starts; a refusal returns
/// [`IngestError::GateRefused`] with nothing written. Files carrying a
/// `.meta.json` sidecar are re-gated individually under the merged
/// metadata.
pub fn ingest_path(
    store: &dyn ObjectStore,
    registry: &LicenseRegistry,
    root: &Path,
    dataset_id: &str,
    meta: &SourceMeta,
) -> Result<IngestSummary, IngestError> {
    if !root.is_dir() {
        return Err(IngestError::RootUnreadable {
            path: root.display().to_string(),
            detail: "not a readable directory".to_string(),
        });
    }
    let decision = registry.evaluate(meta)?;
    if !decision.is_include() {
        return Err(IngestError::GateRefused {
            reason: decision.reason,
        });
    }

    let mut summary = IngestSummary::default();
    for entry in WalkDir::new(root).follow_links(true).sort_by_file_name() {
        let entry = match entry {
            Ok(entry) => entry,
            Err(e) => {
                tracing::warn!(error = %e, "unreadable directory entry");
                summary.failed += 1;
                continue;
            }
        };
        if !entry.file_type().is_file() {
            continue;
        }
        let path = entry.path();
        if path
            .file_name()
            .is_some_and(|n| n.to_string_lossy().ends_with(SIDECAR_SUFFIX))
        {
            continue;
        }
        match ingest_file(store, registry, root, path, dataset_id, meta, &decision)? {
            FileOutcome::Sealed => summary.sealed += 1,
            FileOutcome::GatedOut => summary.gated_out += 1,
            FileOutcome::Failed => summary.failed += 1,
            FileOutcome::Skipped => summary.skipped += 1,
        }
    }
    Ok(summary)
}

/// Seals one file. Source-side problems (unreadable file, bad sidecar,
/// file the gate refuses) resolve to a [`FileOutcome`]; only store
/// failures other than "already exists" propagate as errors, because they
/// mean the destination — not this file — is broken.
fn ingest_file(
    store: &dyn ObjectStore,
    registry: &LicenseRegistry,
    root: &Path,
    path: &Path,
    dataset_id: &str,
    base_meta: &SourceMeta,
    base_decision: &GateDecision,
) -> Result<FileOutcome, IngestError> {
    let sidecar = sidecar_path(path);
    let (meta, decision) = if sidecar.is_file() {
        let parsed: Sidecar = match std::fs::read_to_string(&sidecar)
            .map_err(|e| e.to_string())
            .and_then(|body| serde_json::from_str(&body).map_err(|e| e.to_string()))
        {
            Ok(parsed) => parsed,
            Err(detail) => {
                tracing::warn!(path = %sidecar.display(), detail, "bad metadata sidecar");
                return Ok(FileOutcome::Failed);
            }
        };
        let merged = match parsed.apply(base_meta) {
            Ok(merged) => merged,
            Err(detail) => {
                tracing::warn!(path = %sidecar.display(), detail, "bad metadata sidecar");
                return Ok(FileOutcome::Failed);
            }
        };
        match registry.evaluate(&merged) {
            Ok(decision) if decision.is_include() => (merged, decision),
            Ok(decision) => {
                tracing::info!(path = %path.display(), reason = decision.reason, "gated out");
                return Ok(FileOutcome::GatedOut);
            }
            // An unknown license is an exclusion, not an abort: the gate
            // fails closed per file.
            Err(GateError::UnknownLicense(id)) => {
                tracing::info!(path = %path.display(), license = id, "gated out (unknown license)");
                return Ok(FileOutcome::GatedOut);
            }
            Err(e) => return Err(e.into()),
        }
    } else {
        (base_meta.clone(), base_decision.clone())
    };

    let raw = match std::fs::read(path) {
        Ok(raw) => raw,
        Err(e) => {
            tracing::warn!(path = %path.display(), error = %e, "unreadable file");
            return Ok(FileOutcome::Failed);
        }
    };
    if raw.is_empty() {
        tracing::warn!(path = %path.display(), "empty file");
        return Ok(FileOutcome::Failed);
    }

    let id = relative_id(root, path);
    let format = sniff_mime(&raw, None, Some(&id));
    let source = format!("file://{}", path.display());
    let env = match DocumentEnvelope::seal(
        &raw,
        format.essence(),
        &source,
        &license_label(&meta, &decision),
        dataset_id,
        &id,
        BTreeMap::new(),
    ) {
        Ok(env) => env,
        Err(e) => {
            tracing::warn!(path = %path.display(), error = %e, "cannot seal file");
            return Ok(FileOutcome::Failed);
        }
    };
    match write_envelope(store, &env, false) {
        Ok(_) => Ok(FileOutcome::Sealed),
        Err(StoreError::AlreadyExists(_)) => Ok(FileOutcome::Skipped),
        Err(e) => Err(e.into()),
    }
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut os = path.as_os_str().to_os_string();
    os.push(SIDECAR_SUFFIX);
    PathBuf::from(os)
}

/// Document id for a file: its path relative to the ingest root, with
/// `/` separators regardless of platform.
fn relative_id(root: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

// ---------------------------------------------------------------------------
// HTTP fetching
// ---------------------------------------------------------------------------

/// Pacing and retry policy for [`fetch_url`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Politeness {
    /// Minimum spacing between requests to the same host.
    pub min_interval: Duration,
    /// Retries after the first attempt, for transient failures only.
    pub max_retries: u32,
}

impl Default for Politeness {
    fn default() -> Self {
        Politeness {
            min_interval: Duration::from_secs(1),
            max_retries: 3,
        }
    }
}

/// Last-granted request slot per authority (`host:port`), shared across
/// the process so concurrent fetchers observe one pacing budget.
fn pacing_slots() -> &'static Mutex<HashMap<String, Instant>> {
    static SLOTS: OnceLock<Mutex<HashMap<String, Instant>>> = OnceLock::new();
    SLOTS.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Reserves the next request slot for `authority` and sleeps until it
/// arrives. Reservation happens under the lock, the sleep outside it, so
/// concurrent callers queue up at `min_interval` spacing instead of
/// stampeding when the lock releases.
fn await_turn(authority: &str, min_interval: Duration) {
    let wait = {
        let mut slots = pacing_slots().lock().expect("pacing lock poisoned");
        let now = Instant::now();
        let slot = match slots.get(authority) {
            Some(&last) if last + min_interval > now => last + min_interval,
            _ => now,
        };
        slots.insert(authority.to_string(), slot);
        slot.checked_duration_since(now)
    };
    if let Some(wait) = wait {
        if !wait.is_zero() {
            std::thread::sleep(wait);
        }
    }
}

/// Splits a URL into scheme and authority, refusing anything that is not
/// plain HTTP(S).
fn split_url(url: &str) -> Result<(&str, &str), IngestError> {
    let (scheme, rest) = url
        .split_once("://")
        .ok_or_else(|| IngestError::UnsupportedScheme(url.to_string()))?;
    if !matches!(scheme, "http" | "https") {
        return Err(IngestError::UnsupportedScheme(url.to_string()));
    }
    let authority = rest.split('/').next().unwrap_or("");
    if authority.is_empty() {
        return Err(IngestError::FetchFailed {
            url: url.to_string(),
            status: None,
            detail: "URL has no host".to_string(),
        });
    }
    Ok((scheme, authority))
}

/// Document id for a fetched URL: scheme and fragment dropped, query
/// separators and characters a storage key cannot hold replaced with `_`,
/// and empty or dot path segments removed.
fn url_document_id(url: &str) -> String {
    let rest = url.split_once("://").map_or(url, |(_, rest)| rest);
    let rest = rest.split('#').next().unwrap_or(rest);
    let cleaned: String = rest
        .chars()
        .map(|c| match c {
            '?' | '&' | '=' | '\\' => '_',
            c if c.is_control() => '_',
            c => c,
        })
        .collect();
    let segments: Vec<&str> = cleaned
        .split('/')
        .filter(|s| !s.is_empty() && *s != "." && *s != "..")
        .collect();
    if segments.is_empty() {
        "root".to_string()
    } else {
        segments.join("/")
    }
}

struct FetchProblem {
    transient: bool,
    status: Option<u16>,
    detail: String,
}

/// One GET attempt. Transport errors and HTTP 408/429/5xx are transient;
/// other non-2xx statuses are final.
fn try_fetch(agent: &ureq::Agent, url: &str) -> Result<(Vec<u8>, Option<String>), FetchProblem> {
    let mut resp = agent.get(url).call().map_err(|e| FetchProblem {
        transient: true,
        status: None,
        detail: e.to_string(),
    })?;
    let status = resp.status().as_u16();
    if !(200..300).contains(&status) {
        return Err(FetchProblem {
            transient: matches!(status, 408 | 429 | 500..=599),
            status: Some(status),
            detail: format!("HTTP status {status}"),
        });
    }
    let content_type = resp
        .headers()
        .get("content-type")
        .and_then(|v| v.to_str().ok())
        .map(str::to_string);
    let body = resp
        .body_mut()
        .with_config()
        .limit(MAX_FETCH_BYTES)
        .read_to_vec()
        .map_err(|e| FetchProblem {
            transient: true,
            status: Some(status),
            detail: format!("reading body: {e}"),
        })?;
    Ok((body, content_type))
}

fn backoff_delay(attempt: u32) -> Duration {
    BACKOFF_CAP.min(BACKOFF_BASE * 2u32.saturating_pow(attempt.saturating_sub(1)))
}

/// Fetches one document over HTTP(S) and seals it into `store` under
/// `dataset_id`, returning the envelope's storage key.
///
/// The gate evaluates `meta` before any request goes out. Requests to the
/// same host are spaced at least `politeness.min_interval` apart
/// (process-wide), and transient failures — transport errors, HTTP 408,
/// 429, and 5xx — are retried up to `politeness.max_retries` times with
/// exponential backoff. A document that was already fetched is left in
/// place and its key returned.
pub fn fetch_url(
    store: &dyn ObjectStore,
    registry: &LicenseRegistry,
    url: &str,
    dataset_id: &str,
    meta: &SourceMeta,
    politeness: &Politeness,
) -> Result<StorageKey, IngestError> {
    let decision = registry.evaluate(meta)?;
    if !decision.is_include() {
        return Err(IngestError::GateRefused {
            reason: decision.reason,
        });
    }
    let (_, authority) = split_url(url)?;

    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_secs(30)))
        .http_status_as_error(false)
        .build()
        .into();

    let mut attempt: u32 = 0;
    let (body, content_type) = loop {
        await_turn(authority, politeness.min_interval);
        match try_fetch(&agent, url) {
            Ok(ok) => break ok,
            Err(problem) if problem.transient && attempt < politeness.max_retries => {
                attempt += 1;
                tracing::debug!(url, attempt, detail = problem.detail, "retrying fetch");
                std::thread::sleep(backoff_delay(attempt));
            }
            Err(problem) => {
                return Err(IngestError::FetchFailed {
                    url: url.to_string(),
                    status: problem.status,
                    detail: problem.detail,
                });
            }
        }
    };
    if body.is_empty() {
        return Err(IngestError::FetchFailed {
            url: url.to_string(),
            status: None,
            detail: "response body was empty".to_string(),
        });
    }

    let id = url_document_id(url);
    let format = sniff_mime(&body, content_type.as_deref(), Some(&id));
    let env = DocumentEnvelope::seal(
        &body,
        format.essence(),
        url,
        &license_label(meta, &decision),
        dataset_id,
        &id,
        BTreeMap::new(),
    )?;
    let key = env.storage_key();
    match write_envelope(store, &env, false) {
        // Already fetched on an earlier run: leave the stored envelope be.
        Ok(_) | Err(StoreError::AlreadyExists(_)) => Ok(key),
        Err(e) => Err(e.into()),
    }
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::key::{KeyPrefix, Stage};
    use crate::store::{read_envelope, MemoryStore};
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    fn cc0_meta() -> SourceMeta {
        SourceMeta {
            license: Some(LicenseTag {
                id: "CC0-1.0".to_string(),
                attribution_satisfiable: false,
            }),
            ..SourceMeta::default()
        }
    }

    fn nc_meta() -> SourceMeta {
        SourceMeta {
            license: Some(LicenseTag {
                id: "CC-BY-NC-4.0".to_string(),
                attribution_satisfiable: true,
            }),
            ..SourceMeta::default()
        }
    }

    fn document_keys(store: &MemoryStore, dataset: &str) -> Vec<String> {
        let prefix = KeyPrefix::dataset(Stage::Documents, dataset).unwrap();
        store
            .list(&prefix)
            .unwrap()
            .map(|k| k.unwrap().render())
            .collect()
    }

    // -- directory ingestion ------------------------------------------------

    #[test]
    fn seals_every_regular_file_under_the_root() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.txt"), "alpha document").unwrap();
        std::fs::create_dir(dir.path().join("sub")).unwrap();
        std::fs::write(dir.path().join("sub/b.html"), "<html><body>hi</body></html>").unwrap();
        std::fs::write(dir.path().join("sub/c.md"), "# heading\n\nbody").unwrap();

        let store = MemoryStore::new();
        let summary = ingest_path(
            &store,
            LicenseRegistry::builtin(),
            dir.path(),
            "corpus",
            &cc0_meta(),
        )
        .unwrap();

        assert_eq!(
            summary,
            IngestSummary {
                sealed: 3,
                ..IngestSummary::default()
            }
        );
        let keys = document_keys(&store, "corpus");
        assert_eq!(
            keys,
            vec![
                "documents/corpus/a.txt.json",
                "documents/corpus/sub/b.html.json",
                "documents/corpus/sub/c.md.json",
            ]
        );

        let key = StorageKey::document("corpus", "sub/b.html").unwrap();
        let env = read_envelope(&store, &key).unwrap();
        assert_eq!(env.format(), "text/html");
        assert_eq!(env.license(), "CC0-1.0");
        assert_eq!(env.id(), "sub/b.html");
        assert!(env.source().starts_with("file://"));
        assert_eq!(env.open().unwrap(), b"<html><body>hi</body></html>");
    }

    #[test]
    fn refused_source_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.txt"), "text").unwrap();

        let store = MemoryStore::new();
        let err = ingest_path(
            &store,
            LicenseRegistry::builtin(),
            dir.path(),
            "corpus",
            &nc_meta(),
        )
        .unwrap_err();

        assert!(matches!(err, IngestError::GateRefused { .. }), "{err}");
        assert!(document_keys(&store, "corpus").is_empty());
    }

    #[test]
    fn missing_root_is_reported() {
        let store = MemoryStore::new();
        let err = ingest_path(
            &store,
            LicenseRegistry::builtin(),
            Path::new("/nonexistent/ingest/root"),
            "corpus",
            &cc0_meta(),
        )
        .unwrap_err();
        assert!(matches!(err, IngestError::RootUnreadable { .. }), "{err}");
    }

    #[cfg(unix)]
    #[test]
    fn broken_entries_are_counted_not_fatal() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("good.txt"), "fine").unwrap();
        std::os::unix::fs::symlink(dir.path().join("gone"), dir.path().join("dangling")).unwrap();

        let store = MemoryStore::new();
        let summary = ingest_path(
            &store,
            LicenseRegistry::builtin(),
            dir.path(),
            "corpus",
            &cc0_meta(),
        )
        .unwrap();

        assert_eq!(summary.sealed, 1);
        assert_eq!(summary.failed, 1);
        assert_eq!(document_keys(&store, "corpus").len(), 1);
    }

    #[test]
    fn empty_files_are_counted_failed() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("empty.txt"), "").unwrap();
        std::fs::write(dir.path().join("full.txt"), "content").unwrap();

        let store = MemoryStore::new();
        let summary = ingest_path(
            &store,
            LicenseRegistry::builtin(),
            dir.path(),
            "corpus",
            &cc0_meta(),
        )
        .unwrap();
        assert_eq!(summary.sealed, 1);
        assert_eq!(summary.failed, 1);
    }

    #[test]
    fn rerun_skips_existing_documents() {
        let dir = tempfile::tempdir().unwrap();
        for name in ["a.txt", "b.txt", "c.txt"] {
            std::fs::write(dir.path().join(name), name).unwrap();
        }

        let store = MemoryStore::new();
        let registry = LicenseRegistry::builtin();
        let first = ingest_path(&store, registry, dir.path(), "corpus", &cc0_meta()).unwrap();
        assert_eq!(first.sealed, 3);

        let second = ingest_path(&store, registry, dir.path(), "corpus", &cc0_meta()).unwrap();
        assert_eq!(
            second,
            IngestSummary {
                skipped: 3,
                ..IngestSummary::default()
            }
        );
        assert_eq!(document_keys(&store, "corpus").len(), 3);
    }

    // -- sidecars ------------------------------------------------------------

    #[test]
    fn sidecar_overrides_gate_one_file() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("open.txt"), "open text").unwrap();
        std::fs::write(dir.path().join("closed.txt"), "restricted text").unwrap();
        std::fs::write(
            dir.path().join("closed.txt.meta.json"),
            r#"{"license": "CC-BY-NC-4.0"}"#,
        )
        .unwrap();

        let store = MemoryStore::new();
        let summary = ingest_path(
            &store,
            LicenseRegistry::builtin(),
            dir.path(),
            "corpus",
            &cc0_meta(),
        )
        .unwrap();

        assert_eq!(summary.sealed, 1);
        assert_eq!(summary.gated_out, 1);
        assert_eq!(document_keys(&store, "corpus"), vec!["documents/corpus/open.txt.json"]);
    }

    #[test]
    fn sidecar_can_change_license_label() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("doc.txt"), "attributed text").unwrap();
        std::fs::write(
            dir.path().join("doc.txt.meta.json"),
            r#"{"license": "CC-BY-4.0", "attribution_satisfiable": true}"#,
        )
        .unwrap();

        let store = MemoryStore::new();
        let summary = ingest_path(
            &store,
            LicenseRegistry::builtin(),
            dir.path(),
            "corpus",
            &cc0_meta(),
        )
        .unwrap();
        assert_eq!(summary.sealed, 1);

        let key = StorageKey::document("corpus", "doc.txt").unwrap();
        let env = read_envelope(&store, &key).unwrap();
        assert_eq!(env.license(), "CC-BY-4.0");
    }

    #[test]
    fn attribution_only_license_needs_sidecar_attestation() {
        // Same license, no attestation: the gate must fail closed.
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("doc.txt"), "attributed text").unwrap();
        std::fs::write(
            dir.path().join("doc.txt.meta.json"),
            r#"{"license": "CC-BY-4.0"}"#,
        )
        .unwrap();

        let store = MemoryStore::new();
        let summary = ingest_path(
            &store,
            LicenseRegistry::builtin(),
            dir.path(),
            "corpus",
            &cc0_meta(),
        )
        .unwrap();
        assert_eq!(summary.gated_out, 1);
        assert_eq!(summary.sealed, 0);
    }

    #[test]
    fn unknown_sidecar_license_fails_closed() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("doc.txt"), "text").unwrap();
        std::fs::write(
            dir.path().join("doc.txt.meta.json"),
            r#"{"license": "Made-Up-License-9.9"}"#,
        )
        .unwrap();

        let store = MemoryStore::new();
        let summary = ingest_path(
            &store,
            LicenseRegistry::builtin(),
            dir.path(),
            "corpus",
            &cc0_meta(),
        )
        .unwrap();
        assert_eq!(summary.gated_out, 1);
        assert!(document_keys(&store, "corpus").is_empty());
    }

    #[test]
    fn malformed_sidecar_fails_the_file() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("doc.txt"), "text").unwrap();
        std::fs::write(dir.path().join("doc.txt.meta.json"), "{not json").unwrap();
        std::fs::write(dir.path().join("other.txt"), "text").unwrap();

        let store = MemoryStore::new();
        let summary = ingest_path(
            &store,
            LicenseRegistry::builtin(),
            dir.path(),
            "corpus",
            &cc0_meta(),
        )
        .unwrap();
        assert_eq!(summary.failed, 1);
        assert_eq!(summary.sealed, 1);
    }

    #[test]
    fn sidecar_with_unknown_field_fails_the_file() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("doc.txt"), "text").unwrap();
        std::fs::write(
            dir.path().join("doc.txt.meta.json"),
            r#"{"licence": "CC0-1.0"}"#,
        )
        .unwrap();

        let store = MemoryStore::new();
        let summary = ingest_path(
            &store,
            LicenseRegistry::builtin(),
            dir.path(),
            "corpus",
            &cc0_meta(),
        )
        .unwrap();
        assert_eq!(summary.failed, 1);
        assert_eq!(summary.sealed, 0);
    }

    #[test]
    fn sidecar_origin_grants_inclusion_without_license() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("report.txt"), "agency report").unwrap();
        std::fs::write(
            dir.path().join("report.txt.meta.json"),
            r#"{"origin": "us_federal_work", "license": null}"#,
        )
        .unwrap();

        let store = MemoryStore::new();
        let summary = ingest_path(
            &store,
            LicenseRegistry::builtin(),
            dir.path(),
            "corpus",
            &cc0_meta(),
        )
        .unwrap();
        assert_eq!(summary.sealed, 1);

        // Base CC0 tag is still present in merged metadata, so the label
        // stays the declared license even though test 1 won.
        let key = StorageKey::document("corpus", "report.txt").unwrap();
        let env = read_envelope(&store, &key).unwrap();
        assert_eq!(env.license(), "CC0-1.0");
    }

    #[test]
    fn basis_id_labels_envelopes_without_declared_license() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("act.txt"), "public law text").unwrap();

        let meta = SourceMeta {
            origin: Origin::UsFederalWork,
            ..SourceMeta::default()
        };
        let store = MemoryStore::new();
        let registry = LicenseRegistry::builtin();
        let summary = ingest_path(&store, registry, dir.path(), "corpus", &meta).unwrap();
        assert_eq!(summary.sealed, 1);

        let key = StorageKey::document("corpus", "act.txt").unwrap();
        let env = read_envelope(&store, &key).unwrap();
        assert_eq!(env.license(), "usc17_105");
        // The recorded label must round-trip through a later audit.
        let audit = registry.evaluate_tag(env.license(), false).unwrap();
        assert!(audit.is_include());
    }

    // -- URL ids and schemes --------------------------------------------------

    #[test]
    fn url_ids_are_storage_safe() {
        assert_eq!(
            url_document_id("https://example.com/a/b.html?x=1&y=2"),
            "example.com/a/b.html_x_1_y_2"
        );
        assert_eq!(
            url_document_id("http://example.com/docs/#section"),
            "example.com/docs"
        );
        assert_eq!(url_document_id("https://example.com"), "example.com");
        assert_eq!(
            url_document_id("https://example.com/../../etc/passwd"),
            "example.com/etc/passwd"
        );
        // Every generated id must form a valid document key.
        for url in [
            "https://example.com/a/b.html?x=1&y=2",
            "https://example.com",
            "https://example.com/./hidden/../x",
        ] {
            StorageKey::document("ds", &url_document_id(url)).unwrap();
        }
    }

    #[test]
    fn non_http_schemes_are_rejected() {
        let store = MemoryStore::new();
        for url in ["ftp://example.com/file", "file:///etc/passwd", "not a url"] {
            let err = fetch_url(
                &store,
                LicenseRegistry::builtin(),
                url,
                "corpus",
                &cc0_meta(),
                &Politeness::default(),
            )
            .unwrap_err();
            assert!(matches!(err, IngestError::UnsupportedScheme(_)), "{url}: {err}");
        }
    }

    #[test]
    fn backoff_doubles_and_caps() {
        assert_eq!(backoff_delay(1), Duration::from_millis(100));
        assert_eq!(backoff_delay(2), Duration::from_millis(200));
        assert_eq!(backoff_delay(3), Duration::from_millis(400));
        assert_eq!(backoff_delay(30), Duration::from_secs(5));
    }

    // -- live fetch tests over a local server ---------------------------------

    /// Serves the queued responses in order on an ephemeral port, counting
    /// requests. The thread exits once the queue is drained.
    fn spawn_server(
        responses: Vec<(u16, Option<&'static str>, Vec<u8>)>,
    ) -> (String, Arc<AtomicUsize>) {
        let server = tiny_http::Server::http("127.0.0.1:0").expect("bind test server");
        let port = server.server_addr().to_ip().expect("tcp listener").port();
        let hits = Arc::new(AtomicUsize::new(0));
        let counter = Arc::clone(&hits);
        std::thread::spawn(move || {
            for (status, content_type, body) in responses {
                let request = match server.recv() {
                    Ok(request) => request,
                    Err(_) => return,
                };
                counter.fetch_add(1, Ordering::SeqCst);
                let mut response = tiny_http::Response::from_data(body).with_status_code(status);
                if let Some(ct) = content_type {
                    response = response.with_header(
                        tiny_http::Header::from_bytes(&b"Content-Type"[..], ct.as_bytes())
                            .expect("valid header"),
                    );
                }
                let _ = request.respond(response);
            }
        });
        (format!("http://127.0.0.1:{port}"), hits)
    }

    fn quick() -> Politeness {
        Politeness {
            min_interval: Duration::from_millis(1),
            max_retries: 3,
        }
    }

    #[test]
    fn fetch_seals_document_with_sniffed_format() {
        let body = b"<html><head><title>t</title></head><body>doc</body></html>".to_vec();
        let (base, hits) = spawn_server(vec![(200, Some("text/html; charset=utf-8"), body.clone())]);
        let url = format!("{base}/filings/annual.html");

        let store = MemoryStore::new();
        let key = fetch_url(
            &store,
            LicenseRegistry::builtin(),
            &url,
            "corpus",
            &cc0_meta(),
            &quick(),
        )
        .unwrap();

        assert_eq!(hits.load(Ordering::SeqCst), 1);
        let env = read_envelope(&store, &key).unwrap();
        assert_eq!(env.format(), "text/html");
        assert_eq!(env.source(), url);
        assert_eq!(env.license(), "CC0-1.0");
        assert_eq!(env.open().unwrap(), body);
        assert!(key.render().ends_with("/filings/annual.html.json"));
    }

    #[test]
    fn transient_statuses_are_retried_until_success() {
        let (base, hits) = spawn_server(vec![
            (503, None, b"busy".to_vec()),
            (503, None, b"busy".to_vec()),
            (200, Some("text/plain"), b"finally here".to_vec()),
        ]);
        let url = format!("{base}/doc.txt");

        let store = MemoryStore::new();
        let key = fetch_url(
            &store,
            LicenseRegistry::builtin(),
            &url,
            "corpus",
            &cc0_meta(),
            &quick(),
        )
        .unwrap();

        assert_eq!(hits.load(Ordering::SeqCst), 3);
        let env = read_envelope(&store, &key).unwrap();
        assert_eq!(env.open().unwrap(), b"finally here");
    }

    #[test]
    fn missing_documents_fail_without_retry() {
        // A second queued response would satisfy a bogus retry and flip
        // the result to Ok, so this asserts both the error and the count.
        let (base, hits) = spawn_server(vec![
            (404, None, b"no such thing".to_vec()),
            (200, Some("text/plain"), b"should never be returned".to_vec()),
        ]);
        let url = format!("{base}/gone.txt");

        let store = MemoryStore::new();
        let err = fetch_url(
            &store,
            LicenseRegistry::builtin(),
            &url,
            "corpus",
            &cc0_meta(),
            &quick(),
        )
        .unwrap_err();

        match err {
            IngestError::FetchFailed { status, .. } => assert_eq!(status, Some(404)),
            other => panic!("expected FetchFailed, got {other}"),
        }
        assert_eq!(hits.load(Ordering::SeqCst), 1);
        assert!(document_keys(&store, "corpus").is_empty());
    }

    #[test]
    fn retries_exhaust_into_failure() {
        let (base, hits) = spawn_server(vec![
            (500, None, vec![b'x']),
            (500, None, vec![b'x']),
            (500, None, vec![b'x']),
        ]);
        let url = format!("{base}/flaky.txt");

        let store = MemoryStore::new();
        let politeness = Politeness {
            min_interval: Duration::from_millis(1),
            max_retries: 2,
        };
        let err = fetch_url(
            &store,
            LicenseRegistry::builtin(),
            &url,
            "corpus",
            &cc0_meta(),
            &politeness,
        )
        .unwrap_err();

        match err {
            IngestError::FetchFailed { status, .. } => assert_eq!(status, Some(500)),
            other => panic!("expected FetchFailed, got {other}"),
        }
        assert_eq!(hits.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn gate_refusal_precedes_any_request() {
        let (base, hits) = spawn_server(vec![(200, None, b"never served".to_vec())]);
        let url = format!("{base}/doc.txt");

        let store = MemoryStore::new();
        let err = fetch_url(
            &store,
            LicenseRegistry::builtin(),
            &url,
            "corpus",
            &nc_meta(),
            &quick(),
        )
        .unwrap_err();

        assert!(matches!(err, IngestError::GateRefused { .. }), "{err}");
        assert_eq!(hits.load(Ordering::SeqCst), 0);
        assert!(document_keys(&store, "corpus").is_empty());
    }

    #[test]
    fn same_host_requests_are_paced() {
        let (base, hits) = spawn_server(vec![
            (200, Some("text/plain"), b"one".to_vec()),
            (200, Some("text/plain"), b"two".to_vec()),
        ]);
        let politeness = Politeness {
            min_interval: Duration::from_millis(250),
            max_retries: 0,
        };

        let store = MemoryStore::new();
        let started = Instant::now();
        for path in ["a.txt", "b.txt"] {
            fetch_url(
                &store,
                LicenseRegistry::builtin(),
                &format!("{base}/{path}"),
                "corpus",
                &cc0_meta(),
                &politeness,
            )
            .unwrap();
        }

        assert_eq!(hits.load(Ordering::SeqCst), 2);
        assert!(
            started.elapsed() >= Duration::from_millis(250),
            "second request was not paced: {:?}",
            started.elapsed()
        );
    }
}
