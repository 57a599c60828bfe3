//! Cross-stage link verification.
//!
//! Every derived object in the store names where it came from: a
//! representation record's identifier is the storage key of its stage-1
//! document, and every shard row's identifier is the storage key of its
//! stage-2 record. [`verify_provenance`] walks those links backward for
//! one dataset and reports every break it finds instead of stopping at
//! the first, so a report reads as a repair worklist.
//!
//! Orphans in the forward direction — a document no record mentions, a
//! record no shard row carries — are not breaks. They are the normal
//! state of a corpus mid-pipeline (not yet extracted, gated out by
//! quality, or simply not tokenized yet). What must never happen is the
//! reverse: derived data whose source cannot be produced on demand.

use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

use crate::key::{KeyError, KeyPrefix, Stage, StorageKey};
use crate::shard::{read_shard_identifiers, ShardError};
use crate::store::{read_record, record_key, ObjectStore, StoreError};

#[derive(Debug, Error)]
pub enum ProvenanceError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Key(#[from] KeyError),
    #[error(transparent)]
    Shard(#[from] ShardError),
}

/// How a link is broken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BreakKind {
    /// A record points at a stage-1 document that is absent.
    DocumentMissing,
    /// A shard row points at a stage-2 record that is absent.
    RecordMissing,
    /// A record is stored under a key that disagrees with its identifier.
    KeyMismatch,
    /// The holder exists but cannot be decoded, so its links are unknowable.
    Unreadable,
}

impl std::fmt::Display for BreakKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BreakKind::DocumentMissing => "document missing",
            BreakKind::RecordMissing => "record missing",
            BreakKind::KeyMismatch => "key mismatch",
            BreakKind::Unreadable => "unreadable",
        })
    }
}

/// One broken link: the object holding the dangling reference and the
/// key it points at (for unreadable holders, the holder itself).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BrokenLink {
    pub kind: BreakKind,
    pub holder: String,
    pub target: String,
}

/// Outcome of verifying one dataset's provenance chain.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ProvenanceReport {
    /// Stage-1 documents present.
    pub documents: u64,
    /// Stage-2 records whose links were checked.
    pub records_checked: u64,
    /// Stage-3 rows whose links were checked.
    pub rows_checked: u64,
    pub broken: Vec<BrokenLink>,
}

impl ProvenanceReport {
    pub fn is_clean(&self) -> bool {
        self.broken.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{:<22} {}\n", "documents", self.documents));
        out.push_str(&format!("{:<22} {}\n", "records checked", self.records_checked));
        out.push_str(&format!("{:<22} {}\n", "rows checked", self.rows_checked));
        out.push_str(&format!("{:<22} {}\n", "broken links", self.broken.len()));
        for link in &self.broken {
            out.push_str(&format!("  [{}] {} -> {}\n", link.kind, link.holder, link.target));
        }
        out
    }
}

/// Verifies that every stage-2 record in `dataset_id` traces to a stored
/// stage-1 document and every stage-3 shard row traces to a stored
/// stage-2 record. Individual breaks — including objects too corrupt to
/// decode — are collected into the report; only a failing store aborts.
pub fn verify_provenance(
    store: &dyn ObjectStore,
    dataset_id: &str,
) -> Result<ProvenanceReport, ProvenanceError> {
    let mut report = ProvenanceReport::default();

    let doc_prefix = KeyPrefix::dataset(Stage::Documents, dataset_id)?;
    let mut documents: BTreeSet<String> = BTreeSet::new();
    for key in store.list(&doc_prefix)? {
        documents.insert(key?.render());
    }
    report.documents = documents.len() as u64;

    let rec_prefix = KeyPrefix::dataset(Stage::Representations, dataset_id)?;
    let record_keys: Vec<StorageKey> = store.list(&rec_prefix)?.collect::<Result<_, _>>()?;
    let mut records: BTreeSet<String> = BTreeSet::new();
    for key in &record_keys {
        records.insert(key.render());
    }
    for key in &record_keys {
        let holder = key.render();
        let rec = match read_record(store, key) {
            Ok(rec) => rec,
            Err(StoreError::BadRecord { .. }) => {
                report.broken.push(BrokenLink {
                    kind: BreakKind::Unreadable,
                    holder: holder.clone(),
                    target: holder,
                });
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        report.records_checked += 1;
        match record_key(&rec) {
            Ok(implied) if implied.render() != holder => {
                report.broken.push(BrokenLink {
                    kind: BreakKind::KeyMismatch,
                    holder: holder.clone(),
                    target: implied.render(),
                });
            }
            Ok(_) => {}
            Err(_) => {
                report.broken.push(BrokenLink {
                    kind: BreakKind::Unreadable,
                    holder: holder.clone(),
                    target: holder.clone(),
                });
                continue;
            }
        }
        let target = StorageKey::parse(rec.identifier())?
            .with_stage(Stage::Documents)
            .render();
        if !documents.contains(&target) {
            report.broken.push(BrokenLink {
                kind: BreakKind::DocumentMissing,
                holder,
                target,
            });
        }
    }

    let shard_prefix = KeyPrefix::dataset(Stage::Parquet, dataset_id)?;
    let shard_keys: Vec<StorageKey> = store.list(&shard_prefix)?.collect::<Result<_, _>>()?;
    for key in shard_keys {
        let holder = key.render();
        let identifiers = match read_shard_identifiers(store, &key) {
            Ok(identifiers) => identifiers,
            Err(ShardError::Store(e)) => return Err(e.into()),
            Err(_) => {
                report.broken.push(BrokenLink {
                    kind: BreakKind::Unreadable,
                    holder: holder.clone(),
                    target: holder,
                });
                continue;
            }
        };
        for identifier in identifiers {
            report.rows_checked += 1;
            if !records.contains(&identifier) {
                report.broken.push(BrokenLink {
                    kind: BreakKind::RecordMissing,
                    holder: holder.clone(),
                    target: identifier,
                });
            }
        }
    }

    Ok(report)
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
