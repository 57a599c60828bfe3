//! Stage-prefixed object store with pluggable backends.
//!
//! Every pipeline artifact lives under a rendered [`StorageKey`], so a store
//! is just a durable map from key strings to byte bodies:
//!
//! - [`FsStore`] — a local directory tree mirroring the key layout
//! - [`MemoryStore`] — in-process, for tests and dry runs
//! - [`HttpStore`] — a generic HTTP blob endpoint (see module docs there)
//!
//! Guarantees common to all backends:
//!
//! - `put` is atomic: readers never observe a partial body.
//! - `put` with `overwrite=false` never mutates an existing object; the
//!   collision is reported as [`StoreError::AlreadyExists`]. Re-acquiring a
//!   document with changed content therefore fails loudly instead of
//!   silently rewriting history.
//! - `list` enumerates every key under a prefix exactly once, in
//!   lexicographic byte order of the rendered key, so reports and reruns
//!   are deterministic.

mod fs;
mod http;
mod memory;

pub use fs::FsStore;
pub use http::HttpStore;
pub use memory::MemoryStore;

use thiserror::Error;

use crate::envelope::{DocumentEnvelope, EnvelopeError, RepresentationRecord};
use crate::key::{KeyError, KeyPrefix, Stage, StorageKey};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("object already exists: {0}")]
    AlreadyExists(String),
    #[error("object not found: {0}")]
    NotFound(String),
    #[error("refusing to store an empty body at {0}")]
    EmptyBody(String),
    #[error("invalid key: {0}")]
    Key(#[from] KeyError),
    #[error("backend unavailable: {detail} (retryable: {retryable})")]
    BackendUnavailable { detail: String, retryable: bool },
    #[error("record at {key} is invalid: {source}")]
    BadRecord {
        key: String,
        #[source]
        source: EnvelopeError,
    },
}

impl StoreError {
    /// True when retrying the same call may succeed (network hiccups,
    /// 5xx responses); false for definitive failures.
    pub fn is_retryable(&self) -> bool {
        matches!(
            self,
            StoreError::BackendUnavailable {
                retryable: true,
                ..
            }
        )
    }
}

/// Proof of a completed write.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PutReceipt {
    pub key: StorageKey,
    pub byte_count: u64,
}

/// Iterator over keys, in lexicographic order of their rendered form.
pub type KeyIter<'a> = Box<dyn Iterator<Item = Result<StorageKey, StoreError>> + 'a>;

/// A durable map from storage keys to byte bodies.
///
/// Implementations must be safe to share across threads: concurrent puts to
/// distinct keys proceed independently, concurrent puts to the same key
/// serialize in some order, and reads may or may not observe in-flight
/// writes but never partial ones.
pub trait ObjectStore: Send + Sync {
    fn put(&self, key: &StorageKey, body: &[u8], overwrite: bool) -> Result<PutReceipt, StoreError>;

    fn get(&self, key: &StorageKey) -> Result<Vec<u8>, StoreError>;

    fn exists(&self, key: &StorageKey) -> Result<bool, StoreError>;

    fn list<'a>(&'a self, prefix: &KeyPrefix) -> Result<KeyIter<'a>, StoreError>;

    fn delete(&self, key: &StorageKey) -> Result<(), StoreError>;
}

/// Opens a store from a CLI/config spec: HTTP endpoints by URL, anything
/// else as a local directory root.
pub fn open_store(spec: &str) -> Result<Box<dyn ObjectStore>, StoreError> {
    if spec.starts_with("http://") || spec.starts_with("https://") {
        Ok(Box::new(HttpStore::new(spec)))
    } else if spec.is_empty() {
        Err(StoreError::BackendUnavailable {
            detail: "empty store location".into(),
            retryable: false,
        })
    } else {
        Ok(Box::new(FsStore::new(spec)))
    }
}

/// Reads and parses a stage-1 record.
pub fn read_envelope(
    store: &dyn ObjectStore,
    key: &StorageKey,
) -> Result<DocumentEnvelope, StoreError> {
    let body = store.get(key)?;
    DocumentEnvelope::from_json(&body).map_err(|source| StoreError::BadRecord {
        key: key.render(),
        source,
    })
}

/// Reads and parses a stage-2 record.
pub fn read_record(
    store: &dyn ObjectStore,
    key: &StorageKey,
) -> Result<RepresentationRecord, StoreError> {
    let body = store.get(key)?;
    RepresentationRecord::from_json(&body).map_err(|source| StoreError::BadRecord {
        key: key.render(),
        source,
    })
}

/// Serializes and stores a stage-1 record under its own key.
pub fn write_envelope(
    store: &dyn ObjectStore,
    env: &DocumentEnvelope,
    overwrite: bool,
) -> Result<PutReceipt, StoreError> {
    store.put(&env.storage_key(), &env.to_canonical_json(), overwrite)
}

/// Serializes and stores a stage-2 record under the representations key
/// mirroring its stage-1 identifier.
pub fn write_record(
    store: &dyn ObjectStore,
    rec: &RepresentationRecord,
    overwrite: bool,
) -> Result<PutReceipt, StoreError> {
    let key = record_key(rec)?;
    store.put(&key, &rec.to_canonical_json(), overwrite)
}

/// The stage-2 key a record is stored under: its identifier with the stage
/// swapped, path unchanged.
pub fn record_key(rec: &RepresentationRecord) -> Result<StorageKey, StoreError> {
    Ok(StorageKey::parse(rec.identifier())?.with_stage(Stage::Representations))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;
    use std::collections::BTreeSet;

    use crate::envelope::RepresentationEntry;

    fn key(stage: Stage, ds: &str, path: &str) -> StorageKey {
        StorageKey::new(stage, ds, path).unwrap()
    }

    /// Contract suite run against every backend.
    pub(super) fn exercise_store(store: &dyn ObjectStore) {
        let k = key(Stage::Documents, "fdlp", "gpo16926/PDF.pdf");
        assert!(!store.exists(&k).unwrap());
        assert!(matches!(store.get(&k), Err(StoreError::NotFound(_))));

        let receipt = store.put(&k, b"body-1", false).unwrap();
        assert_eq!(receipt.byte_count, 6);
        assert_eq!(store.get(&k).unwrap(), b"body-1");
        assert!(store.exists(&k).unwrap());

        // overwrite=false must not mutate.
        match store.put(&k, b"body-2", false) {
            Err(StoreError::AlreadyExists(rendered)) => {
                assert_eq!(rendered, k.render());
            }
            other => panic!("expected AlreadyExists, got {other:?}"),
        }
        assert_eq!(store.get(&k).unwrap(), b"body-1");

        // overwrite=true replaces.
        store.put(&k, b"body-2", true).unwrap();
        assert_eq!(store.get(&k).unwrap(), b"body-2");

        assert!(matches!(
            store.put(&k, b"", true),
            Err(StoreError::EmptyBody(_))
        ));

        // Listing: exactly the stored keys, sorted, no duplicates.
        let others = [
            key(Stage::Documents, "fdlp", "a.txt"),
            key(Stage::Documents, "fdlp", "z/deep/file.txt"),
            key(Stage::Documents, "other", "a.txt"),
            key(Stage::Representations, "fdlp", "gpo16926/PDF.pdf"),
            key(Stage::Parquet, "fdlp", "shard-00000.parquet"),
        ];
        for k in &others {
            store.put(k, b"x", false).unwrap();
        }
        let listed: Vec<String> = store
            .list(&KeyPrefix::dataset(Stage::Documents, "fdlp").unwrap())
            .unwrap()
            .map(|r| r.unwrap().render())
            .collect();
        assert_eq!(
            listed,
            vec![
                "documents/fdlp/a.txt.json",
                "documents/fdlp/gpo16926/PDF.pdf.json",
                "documents/fdlp/z/deep/file.txt.json",
            ]
        );
        let all_docs: Vec<String> = store
            .list(&KeyPrefix::stage(Stage::Documents))
            .unwrap()
            .map(|r| r.unwrap().render())
            .collect();
        assert_eq!(all_docs.len(), 4);
        let mut sorted = all_docs.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(all_docs, sorted, "listing must be sorted and duplicate-free");

        // Partial-path prefixes match rendered-string prefixes.
        let under = KeyPrefix::under(Stage::Documents, "fdlp", "gpo").unwrap();
        let matched: Vec<String> = store
            .list(&under)
            .unwrap()
            .map(|r| r.unwrap().render())
            .collect();
        assert_eq!(matched, vec!["documents/fdlp/gpo16926/PDF.pdf.json"]);

        // Empty prefix space lists nothing.
        assert_eq!(
            store
                .list(&KeyPrefix::dataset(Stage::Db, "nothing").unwrap())
                .unwrap()
                .count(),
            0
        );

        // delete removes; deleting a missing key reports NotFound.
        store.delete(&k).unwrap();
        assert!(!store.exists(&k).unwrap());
        assert!(matches!(store.delete(&k), Err(StoreError::NotFound(_))));
    }

    /// Fuzzed enumeration against a set oracle.
    pub(super) fn exercise_fuzzed_listing(store: &dyn ObjectStore, n: usize) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
        let mut oracle: BTreeSet<String> = BTreeSet::new();
        let mut inserted = 0usize;
        while inserted < n {
            let depth = rng.gen_range(1..=3);
            let path: Vec<String> = (0..depth)
                .map(|_| {
                    let len = rng.gen_range(1..=8);
                    (0..len)
                        .map(|_| char::from(rng.gen_range(b'a'..=b'z')))
                        .collect()
                })
                .collect();
            let k = key(Stage::Documents, "fuzz", &path.join("/"));
            if oracle.insert(k.render()) {
                store.put(&k, b"x", false).unwrap();
                inserted += 1;
            }
        }
        let listed: Vec<String> = store
            .list(&KeyPrefix::dataset(Stage::Documents, "fuzz").unwrap())
            .unwrap()
            .map(|r| r.unwrap().render())
            .collect();
        assert_eq!(listed.len(), oracle.len());
        assert!(listed.iter().map(String::as_str).eq(oracle.iter().map(String::as_str)));
    }

    #[test]
    fn memory_store_contract() {
        exercise_store(&MemoryStore::new());
    }

    #[test]
    fn fs_store_contract() {
        let dir = tempfile::tempdir().unwrap();
        exercise_store(&FsStore::new(dir.path()));
    }

    #[test]
    fn fs_store_fuzzed_listing_matches_oracle() {
        let dir = tempfile::tempdir().unwrap();
        exercise_fuzzed_listing(&FsStore::new(dir.path()), 10_000);
    }

    #[test]
    fn memory_store_fuzzed_listing_matches_oracle() {
        exercise_fuzzed_listing(&MemoryStore::new(), 2_000);
    }

    #[test]
    fn record_helpers_round_trip() {
        let store = MemoryStore::new();
        let env = DocumentEnvelope::seal(
            b"hello",
            "text/plain",
            "local",
            "usc17_105",
            "ds",
            "a.txt",
            BTreeMap::new(),
        )
        .unwrap();
        write_envelope(&store, &env, false).unwrap();
        assert_eq!(read_envelope(&store, &env.storage_key()).unwrap(), env);

        let rec = RepresentationRecord::success(
            "local",
            &env.storage_key(),
            vec![RepresentationEntry::new("text/plain", "hello".into()).unwrap()],
            None,
        )
        .unwrap();
        let receipt = write_record(&store, &rec, false).unwrap();
        assert_eq!(receipt.key.render(), "representations/ds/a.txt.json");
        assert_eq!(read_record(&store, &receipt.key).unwrap(), rec);
    }

    #[test]
    fn bad_record_bytes_surface_key_and_cause() {
        let store = MemoryStore::new();
        let k = key(Stage::Documents, "ds", "junk");
        store.put(&k, b"{\"not\": \"an envelope\"}", false).unwrap();
        match read_envelope(&store, &k) {
            Err(StoreError::BadRecord { key, .. }) => assert_eq!(key, k.render()),
            other => panic!("expected BadRecord, got {other:?}"),
        }
    }

    #[test]
    fn open_store_picks_backend_by_spec() {
        let dir = tempfile::tempdir().unwrap();
        let spec = dir.path().to_str().unwrap();
        assert!(open_store(spec).is_ok());
        assert!(open_store("http://127.0.0.1:1/base").is_ok());
        assert!(open_store("").is_err());
    }
}
