//! Provenance-preserving document processing.
//!
//! docmill turns heterogeneous source documents into tokenized training
//! shards through three durable stages, each addressed by a structured
//! [`key::StorageKey`] in one [`store::ObjectStore`]:
//!
//! 1. **Documents** — raw bytes sealed into a [`DocumentEnvelope`]
//!    ([`envelope`]): compressed, digest-addressed, and wrapped with the
//!    source URL, declared format, and license label. Envelopes are
//!    immutable; everything downstream can be rebuilt from them.
//! 2. **Representations** — a [`RepresentationRecord`] per document
//!    ([`extract`]): parsed text in one or more MIME types, or a recorded
//!    failure. Container members (ZIP entries) become documents of their
//!    own, so extraction is closed over stage 1.
//! 3. **Parquet** — tokenized rows grouped into content-addressed shards
//!    ([`shard`]), each row naming the record it came from.
//!
//! Three gates sit across the flow. The license gate ([`gate`]) decides
//! inclusion *before* any bytes are fetched or sealed, and can re-audit a
//! stored corpus when policy changes. The quality gate ([`quality`])
//! scores extracted text against a control profile and reports
//! pass/flag/reject verdicts without deleting anything. Provenance
//! verification ([`provenance`]) walks the links backwards — shard row to
//! record to document — and reports every break.
//!
//! [`ingest`] feeds stage 1 from local directories or polite HTTP
//! fetches; [`stats`] summarizes a corpus; [`pipeline`] runs all six
//! stages (ingest, audit, extract, quality, tokenize, stats) as one
//! resumable, parallel job; [`fixtures`] generates the deterministic
//! corpus the test suites exercise all of this against.

pub mod envelope;
pub mod extract;
pub mod fixtures;
pub mod gate;
pub mod ingest;
pub mod key;
pub mod mime;
pub mod pipeline;
pub mod provenance;
pub mod quality;
pub mod shard;
pub mod stats;
pub mod store;
pub mod tokenizer;

pub use envelope::{DocumentEnvelope, RepresentationEntry, RepresentationRecord};
pub use gate::{GateDecision, LicenseRegistry, SourceMeta, Verdict};
pub use key::{KeyPrefix, Stage, StorageKey};
pub use store::{ObjectStore, PutReceipt};
pub use tokenizer::Tokenizer;
