//! Stage 1 and stage 2 record types and their canonical JSON codec.
//!
//! A [`DocumentEnvelope`] seals original source bytes: the payload is
//! zlib-compressed and base64-encoded, and a blake2b-512 digest plus the
//! original byte count make corruption detectable at every later stage. A
//! [`RepresentationRecord`] carries extraction output: one entry per target
//! MIME type, a success flag, error detail, and the storage key of the
//! envelope it came from.
//!
//! Serialization is canonical so records can be compared byte-for-byte:
//! UTF-8 JSON, no insignificant whitespace, top-level fields in fixed order,
//! and map keys (representation MIME types, `extra` metadata) sorted.
//!
//! Parsing is strict about required fields — the error names the first
//! missing or mistyped one — but tolerant of additions: unknown envelope
//! fields fold into `extra`, unknown record fields are ignored with a
//! warning.

use std::collections::BTreeMap;
use std::io::Write;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use blake2::{Blake2b512, Digest};
use flate2::write::ZlibEncoder;
use flate2::Compression;
use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

use crate::key::{KeyError, Stage, StorageKey};
use crate::mime::{MimeError, MimeType};

#[derive(Debug, Error)]
pub enum EnvelopeError {
    #[error("document content is empty")]
    EmptyContent,
    #[error("invalid MIME type: {0}")]
    InvalidMime(#[from] MimeError),
    #[error("invalid identifier: {0}")]
    InvalidKey(#[from] KeyError),
    #[error("{0} must not be empty")]
    EmptyField(&'static str),
    #[error("content integrity check failed: {detail}")]
    DigestMismatch { detail: String },
    #[error("content decode failed: {0}")]
    DecodeFailure(String),
    #[error("schema violation at {field:?}: {detail}")]
    SchemaViolation { field: String, detail: String },
    #[error("record is not a JSON object: {0}")]
    Malformed(String),
}

impl EnvelopeError {
    fn schema(field: impl Into<String>, detail: impl Into<String>) -> Self {
        EnvelopeError::SchemaViolation {
            field: field.into(),
            detail: detail.into(),
        }
    }

    /// The offending field for schema violations, used in tests and reports.
    pub fn violated_field(&self) -> Option<&str> {
        match self {
            EnvelopeError::SchemaViolation { field, .. } => Some(field),
            _ => None,
        }
    }
}

/// Stage 1 record: one sealed source document.
///
/// Field order below is the wire order. All fields are immutable after
/// construction; the only constructors are [`DocumentEnvelope::seal`] and
/// [`DocumentEnvelope::from_json`], both of which validate.
#[derive(Debug, Clone, PartialEq)]
pub struct DocumentEnvelope {
    content: String,
    format: String,
    source: String,
    license: String,
    blake2b: String,
    id: String,
    dataset_id: String,
    size: u64,
    extra: BTreeMap<String, Value>,
}

impl DocumentEnvelope {
    /// Seals raw source bytes into an envelope.
    ///
    /// The payload is compressed (zlib, default level) and base64-encoded;
    /// `blake2b` and `size` are computed from the original bytes. `format`
    /// is normalized (lowercased, parameters stripped). `id` and
    /// `dataset_id` must form a valid storage key.
    #[allow(clippy::too_many_arguments)]
    pub fn seal(
        raw: &[u8],
        format: &str,
        source: &str,
        license: &str,
        dataset_id: &str,
        id: &str,
        extra: BTreeMap<String, Value>,
    ) -> Result<DocumentEnvelope, EnvelopeError> {
        if raw.is_empty() {
            return Err(EnvelopeError::EmptyContent);
        }
        let format = MimeType::parse(format)?.essence().to_string();
        if source.is_empty() {
            return Err(EnvelopeError::EmptyField("source"));
        }
        if license.is_empty() {
            return Err(EnvelopeError::EmptyField("license"));
        }
        // Validates both id components before anything is computed.
        StorageKey::document(dataset_id, id)?;

        let mut encoder = ZlibEncoder::new(Vec::new(), Compression::default());
        encoder
            .write_all(raw)
            .and_then(|_| encoder.finish())
            .map(|compressed| DocumentEnvelope {
                content: BASE64.encode(compressed),
                format,
                source: source.to_string(),
                license: license.to_string(),
                blake2b: hex::encode(Blake2b512::digest(raw)),
                id: id.to_string(),
                dataset_id: dataset_id.to_string(),
                size: raw.len() as u64,
                extra,
            })
            .map_err(|e| EnvelopeError::DecodeFailure(format!("compression failed: {e}")))
    }

    /// Decodes, decompresses, and verifies the sealed payload.
    ///
    /// Returns the original bytes only if the stream terminates cleanly and
    /// both the digest and the declared size match what was decompressed.
    /// Output is capped just past `size`, and the buffer grows in small
    /// steps, so a corrupt or hostile envelope cannot balloon memory.
    pub fn open(&self) -> Result<Vec<u8>, EnvelopeError> {
        let compressed = BASE64
            .decode(&self.content)
            .map_err(|e| EnvelopeError::DecodeFailure(format!("base64: {e}")))?;

        let mut decomp = flate2::Decompress::new(true);
        let mut raw: Vec<u8> = Vec::new();
        let mut finished = false;
        loop {
            if raw.len() == raw.capacity() {
                if raw.len() as u64 > self.size {
                    break; // already past the declared size; the check below reports it
                }
                let room = (self.size - raw.len() as u64).saturating_add(1);
                raw.reserve(room.min(64 * 1024) as usize);
            }
            let before = (decomp.total_in(), raw.len());
            let status = decomp
                .decompress_vec(
                    &compressed[decomp.total_in() as usize..],
                    &mut raw,
                    flate2::FlushDecompress::None,
                )
                .map_err(|e| EnvelopeError::DecodeFailure(format!("zlib: {e}")))?;
            match status {
                flate2::Status::StreamEnd => {
                    finished = true;
                    break;
                }
                _ => {
                    let input_done = decomp.total_in() as usize == compressed.len();
                    if input_done && raw.len() < raw.capacity() {
                        return Err(EnvelopeError::DecodeFailure(
                            "zlib stream truncated".into(),
                        ));
                    }
                    if before == (decomp.total_in(), raw.len()) && raw.len() < raw.capacity() {
                        return Err(EnvelopeError::DecodeFailure(
                            "zlib decoder stalled".into(),
                        ));
                    }
                }
            }
        }
        if raw.len() as u64 != self.size {
            return Err(EnvelopeError::DigestMismatch {
                detail: format!(
                    "declared size {} but decompressed {}{} bytes",
                    self.size,
                    raw.len(),
                    if finished { "" } else { " or more" }
                ),
            });
        }
        let actual = hex::encode(Blake2b512::digest(&raw));
        if actual != self.blake2b {
            return Err(EnvelopeError::DigestMismatch {
                detail: format!("stored digest {}… != computed {}…", &self.blake2b[..12], &actual[..12]),
            });
        }
        Ok(raw)
    }

    /// The stage-1 storage key this envelope lives under.
    pub fn storage_key(&self) -> StorageKey {
        StorageKey::document(&self.dataset_id, &self.id)
            .expect("envelope ids are validated at construction")
    }

    /// Canonical JSON bytes: fixed field order, compact, sorted maps.
    pub fn to_canonical_json(&self) -> Vec<u8> {
        #[derive(Serialize)]
        struct Wire<'a> {
            content: &'a str,
            format: &'a str,
            source: &'a str,
            license: &'a str,
            blake2b: &'a str,
            id: &'a str,
            dataset_id: &'a str,
            size: u64,
            extra: &'a BTreeMap<String, Value>,
        }
        serde_json::to_vec(&Wire {
            content: &self.content,
            format: &self.format,
            source: &self.source,
            license: &self.license,
            blake2b: &self.blake2b,
            id: &self.id,
            dataset_id: &self.dataset_id,
            size: self.size,
            extra: &self.extra,
        })
        .expect("envelope serialization cannot fail")
    }

    /// Parses and validates canonical (or hand-written) envelope JSON.
    ///
    /// Required fields are checked in wire order and the first missing or
    /// mistyped one is reported. Unknown top-level fields are preserved
    /// under `extra` (existing `extra` entries win on collision).
    pub fn from_json(bytes: &[u8]) -> Result<DocumentEnvelope, EnvelopeError> {
        let value: Value = serde_json::from_slice(bytes)
            .map_err(|e| EnvelopeError::Malformed(e.to_string()))?;
        let Value::Object(map) = value else {
            return Err(EnvelopeError::Malformed("expected a JSON object".into()));
        };

        let content = require_str(&map, "content")?;
        if content.is_empty() {
            return Err(EnvelopeError::schema("content", "must not be empty"));
        }
        let format = require_str(&map, "format")?;
        if let Err(e) = MimeType::parse(&format) {
            return Err(EnvelopeError::schema("format", e.to_string()));
        }
        let source = require_str(&map, "source")?;
        if source.is_empty() {
            return Err(EnvelopeError::schema("source", "must not be empty"));
        }
        let license = require_str(&map, "license")?;
        if license.is_empty() {
            return Err(EnvelopeError::schema("license", "must not be empty"));
        }
        let blake2b = require_str(&map, "blake2b")?;
        if blake2b.len() != 128
            || !blake2b.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'))
        {
            return Err(EnvelopeError::schema(
                "blake2b",
                "must be 128 lowercase hex characters",
            ));
        }
        let id = require_str(&map, "id")?;
        let dataset_id = require_str(&map, "dataset_id")?;
        if let Err(e) = StorageKey::document(&dataset_id, &id) {
            // Blame the id if it is invalid on its own; dataset_id otherwise.
            let field = if StorageKey::document("probe", &id).is_err() {
                "id"
            } else {
                "dataset_id"
            };
            return Err(EnvelopeError::schema(field, e.to_string()));
        }
        let size = match map.get("size") {
            Some(v) => v
                .as_u64()
                .ok_or_else(|| EnvelopeError::schema("size", "must be a non-negative integer"))?,
            None => return Err(EnvelopeError::schema("size", "missing")),
        };
        let mut extra = match map.get("extra") {
            Some(Value::Object(m)) => m.iter().map(|(k, v)| (k.clone(), v.clone())).collect(),
            Some(_) => return Err(EnvelopeError::schema("extra", "must be an object")),
            None => return Err(EnvelopeError::schema("extra", "missing")),
        };

        fold_unknown_fields(&map, ENVELOPE_FIELDS, &mut extra);

        Ok(DocumentEnvelope {
            content,
            format,
            source,
            license,
            blake2b,
            id,
            dataset_id,
            size,
            extra,
        })
    }

    pub fn format(&self) -> &str {
        &self.format
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn license(&self) -> &str {
        &self.license
    }

    pub fn blake2b(&self) -> &str {
        &self.blake2b
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dataset_id(&self) -> &str {
        &self.dataset_id
    }

    /// Original (uncompressed) size in bytes.
    pub fn size(&self) -> u64 {
        self.size
    }

    /// Free-form acquisition metadata. Values are plain JSON.
    pub fn extra(&self) -> &BTreeMap<String, Value> {
        &self.extra
    }
}

const ENVELOPE_FIELDS: &[&str] = &[
    "content",
    "format",
    "source",
    "license",
    "blake2b",
    "id",
    "dataset_id",
    "size",
    "extra",
];

/// One extracted representation of a document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RepresentationEntry {
    content: String,
    tokens: Option<Vec<u32>>,
    mime_type: String,
}

impl RepresentationEntry {
    pub fn new(mime_type: &str, content: String) -> Result<Self, EnvelopeError> {
        let mime_type = MimeType::parse(mime_type)?.essence().to_string();
        Ok(RepresentationEntry {
            content,
            tokens: None,
            mime_type,
        })
    }

    pub fn with_tokens(mut self, tokens: Vec<u32>) -> Self {
        self.tokens = Some(tokens);
        self
    }

    /// The extracted text (decoded; base64 only on the wire).
    pub fn content(&self) -> &str {
        &self.content
    }

    pub fn tokens(&self) -> Option<&[u32]> {
        self.tokens.as_deref()
    }

    pub fn mime_type(&self) -> &str {
        &self.mime_type
    }
}

/// Stage 2 record: extraction output for one document.
#[derive(Debug, Clone, PartialEq)]
pub struct RepresentationRecord {
    source: String,
    identifier: String,
    representations: BTreeMap<String, RepresentationEntry>,
    success: bool,
    error: Option<String>,
}

impl RepresentationRecord {
    /// A successful record. `entries` must be non-empty; each is keyed by
    /// its own MIME type. `note` records partial-failure detail (some
    /// parser in the chain failed while another succeeded).
    pub fn success(
        source: &str,
        identifier: &StorageKey,
        entries: Vec<RepresentationEntry>,
        note: Option<String>,
    ) -> Result<Self, EnvelopeError> {
        if entries.is_empty() {
            return Err(EnvelopeError::schema(
                "representations",
                "a successful record needs at least one representation",
            ));
        }
        let mut map = BTreeMap::new();
        for entry in entries {
            let mime = entry.mime_type.clone();
            if map.insert(mime.clone(), entry).is_some() {
                return Err(EnvelopeError::schema(
                    "representations",
                    format!("duplicate representation for {mime}"),
                ));
            }
        }
        Ok(RepresentationRecord {
            source: source.to_string(),
            identifier: validate_identifier(identifier)?,
            representations: map,
            success: true,
            error: note,
        })
    }

    /// A failed record: no representations, error detail required.
    pub fn failure(
        source: &str,
        identifier: &StorageKey,
        error: String,
    ) -> Result<Self, EnvelopeError> {
        if error.is_empty() {
            return Err(EnvelopeError::schema(
                "error",
                "a failed record needs an error message",
            ));
        }
        Ok(RepresentationRecord {
            source: source.to_string(),
            identifier: validate_identifier(identifier)?,
            representations: BTreeMap::new(),
            success: false,
            error: Some(error),
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Rendered stage-1 storage key of the document this came from.
    pub fn identifier(&self) -> &str {
        &self.identifier
    }

    pub fn representations(&self) -> &BTreeMap<String, RepresentationEntry> {
        &self.representations
    }

    pub fn entry(&self, mime: &str) -> Option<&RepresentationEntry> {
        self.representations.get(mime)
    }

    pub fn is_success(&self) -> bool {
        self.success
    }

    pub fn error(&self) -> Option<&str> {
        self.error.as_deref()
    }

    /// Attaches token ids to an existing entry. Returns false if no entry
    /// holds that MIME type. Callers are responsible for the
    /// detokenize(tokens) == content guarantee.
    pub fn set_tokens(&mut self, mime: &str, tokens: Vec<u32>) -> bool {
        match self.representations.get_mut(mime) {
            Some(entry) => {
                entry.tokens = Some(tokens);
                true
            }
            None => false,
        }
    }

    /// Canonical JSON bytes; entry text is base64-encoded on the wire.
    pub fn to_canonical_json(&self) -> Vec<u8> {
        #[derive(Serialize)]
        struct EntryWire<'a> {
            content: String,
            tokens: &'a Option<Vec<u32>>,
            mime_type: &'a str,
        }
        #[derive(Serialize)]
        struct Wire<'a> {
            source: &'a str,
            identifier: &'a str,
            representations: BTreeMap<&'a str, EntryWire<'a>>,
            success: bool,
            error: &'a Option<String>,
        }
        serde_json::to_vec(&Wire {
            source: &self.source,
            identifier: &self.identifier,
            representations: self
                .representations
                .iter()
                .map(|(k, e)| {
                    (
                        k.as_str(),
                        EntryWire {
                            content: BASE64.encode(e.content.as_bytes()),
                            tokens: &e.tokens,
                            mime_type: &e.mime_type,
                        },
                    )
                })
                .collect(),
            success: self.success,
            error: &self.error,
        })
        .expect("record serialization cannot fail")
    }

    /// Parses and validates record JSON. Unknown top-level fields are
    /// ignored with a warning.
    pub fn from_json(bytes: &[u8]) -> Result<RepresentationRecord, EnvelopeError> {
        let value: Value = serde_json::from_slice(bytes)
            .map_err(|e| EnvelopeError::Malformed(e.to_string()))?;
        let Value::Object(map) = value else {
            return Err(EnvelopeError::Malformed("expected a JSON object".into()));
        };

        let source = require_str(&map, "source")?;
        let identifier = require_str(&map, "identifier")?;
        match StorageKey::parse(&identifier) {
            Ok(key) if key.stage() == Stage::Documents => {}
            Ok(key) => {
                return Err(EnvelopeError::schema(
                    "identifier",
                    format!("must reference the documents stage, got {}", key.stage()),
                ))
            }
            Err(e) => return Err(EnvelopeError::schema("identifier", e.to_string())),
        }

        let mut representations = BTreeMap::new();
        match map.get("representations") {
            Some(Value::Object(reps)) => {
                for (mime, entry) in reps {
                    representations.insert(mime.clone(), parse_entry(mime, entry)?);
                }
            }
            Some(_) => {
                return Err(EnvelopeError::schema(
                    "representations",
                    "must be an object",
                ))
            }
            None => return Err(EnvelopeError::schema("representations", "missing")),
        }

        let success = match map.get("success") {
            Some(Value::Bool(b)) => *b,
            Some(_) => return Err(EnvelopeError::schema("success", "must be a boolean")),
            None => return Err(EnvelopeError::schema("success", "missing")),
        };
        let error = match map.get("error") {
            Some(Value::Null) => None,
            Some(Value::String(s)) => Some(s.clone()),
            Some(_) => return Err(EnvelopeError::schema("error", "must be a string or null")),
            None => return Err(EnvelopeError::schema("error", "missing")),
        };

        if success && representations.is_empty() {
            return Err(EnvelopeError::schema(
                "representations",
                "a successful record needs at least one representation",
            ));
        }
        if !success && error.is_none() {
            return Err(EnvelopeError::schema(
                "error",
                "a failed record needs an error message",
            ));
        }

        for key in map.keys() {
            if !RECORD_FIELDS.contains(&key.as_str()) {
                tracing::warn!(field = %key, "ignoring unknown representation record field");
            }
        }

        Ok(RepresentationRecord {
            source,
            identifier,
            representations,
            success,
            error,
        })
    }
}

const RECORD_FIELDS: &[&str] = &["source", "identifier", "representations", "success", "error"];

fn validate_identifier(key: &StorageKey) -> Result<String, EnvelopeError> {
    if key.stage() != Stage::Documents {
        return Err(EnvelopeError::schema(
            "identifier",
            format!("must reference the documents stage, got {}", key.stage()),
        ));
    }
    Ok(key.render())
}

fn parse_entry(mime: &str, value: &Value) -> Result<RepresentationEntry, EnvelopeError> {
    let field = format!("representations.{mime}");
    let Value::Object(map) = value else {
        return Err(EnvelopeError::schema(field, "must be an object"));
    };
    if MimeType::parse(mime).is_err() {
        return Err(EnvelopeError::schema(field, "key is not a MIME type"));
    }
    let encoded = match map.get("content") {
        Some(Value::String(s)) => s,
        _ => return Err(EnvelopeError::schema(format!("{field}.content"), "missing or not a string")),
    };
    let content = BASE64
        .decode(encoded)
        .ok()
        .and_then(|b| String::from_utf8(b).ok())
        .ok_or_else(|| {
            EnvelopeError::schema(format!("{field}.content"), "not base64-encoded UTF-8 text")
        })?;
    let tokens = match map.get("tokens") {
        None | Some(Value::Null) => None,
        Some(Value::Array(items)) => {
            let mut ids = Vec::with_capacity(items.len());
            for item in items {
                let id = item.as_u64().filter(|&v| v <= u64::from(u32::MAX)).ok_or_else(|| {
                    EnvelopeError::schema(
                        format!("{field}.tokens"),
                        "token ids must be unsigned 32-bit integers",
                    )
                })?;
                ids.push(id as u32);
            }
            Some(ids)
        }
        Some(_) => {
            return Err(EnvelopeError::schema(
                format!("{field}.tokens"),
                "must be an array or null",
            ))
        }
    };
    let mime_type = match map.get("mime_type") {
        Some(Value::String(s)) => s.clone(),
        _ => {
            return Err(EnvelopeError::schema(
                format!("{field}.mime_type"),
                "missing or not a string",
            ))
        }
    };
    if mime_type != mime {
        return Err(EnvelopeError::schema(
            format!("{field}.mime_type"),
            format!("entry says {mime_type:?} but is stored under {mime:?}"),
        ));
    }
    Ok(RepresentationEntry {
        content,
        tokens,
        mime_type,
    })
}

fn require_str(
    map: &serde_json::Map<String, Value>,
    field: &'static str,
) -> Result<String, EnvelopeError> {
    match map.get(field) {
        Some(Value::String(s)) => Ok(s.clone()),
        Some(_) => Err(EnvelopeError::schema(field, "must be a string")),
        None => Err(EnvelopeError::schema(field, "missing")),
    }
}

fn fold_unknown_fields(
    map: &serde_json::Map<String, Value>,
    known: &[&str],
    extra: &mut BTreeMap<String, Value>,
) {
    for (key, value) in map {
        if !known.contains(&key.as_str()) && !extra.contains_key(key) {
            tracing::warn!(field = %key, "preserving unknown envelope field under extra");
            extra.insert(key.clone(), value.clone());
        }
    }
}
