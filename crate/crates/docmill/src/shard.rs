//! Stage 2 → Stage 3: tokenized training shards.
//!
//! Successful representation records are tokenized according to a MIME
//! preference list and written to Parquet files with the two-column
//! schema `identifier: string`, `representations: map<string,
//! list<uint32>>`. The identifier is the record's own stage-2 storage
//! key, so every shard row can be walked back to the record (and from
//! there to the sealed document) it came from.
//!
//! Rows are assigned to shards by a stable hash of the identifier, so a
//! rerun over the same corpus produces the same shard membership. Writes
//! go through the object store, whose put is temp-and-rename atomic — a
//! crashed run never leaves a partial shard behind.

use std::sync::Arc;

use arrow_array::builder::{ListBuilder, MapBuilder, MapFieldNames, StringBuilder, UInt32Builder};
use arrow_array::cast::AsArray;
use arrow_array::types::UInt32Type;
use arrow_array::RecordBatch;
use arrow_schema::{DataType, Field, Fields, Schema};
use parquet::arrow::arrow_reader::ParquetRecordBatchReaderBuilder;
use parquet::arrow::{ArrowWriter, ProjectionMask};
use parquet::basic::Compression;
use parquet::file::properties::WriterProperties;
use thiserror::Error;

use crate::envelope::RepresentationRecord;
use crate::key::{KeyError, StorageKey};
use crate::store::{record_key, ObjectStore, StoreError};
use crate::tokenizer::Tokenizer;

/// Default representation preference: Markdown carries the structure, so
/// it outranks plain text whenever both exist.
pub const DEFAULT_MIME_PREFERENCE: [&str; 2] = ["text/markdown", "text/plain"];

/// Shard files aim for roughly this many bytes of token data; used to
/// pick a shard count for a corpus.
pub const TARGET_SHARD_BYTES: u64 = 256 * 1024 * 1024;

/// Row groups close after roughly this many tokens, keeping any single
/// group comfortably loadable.
pub const ROW_GROUP_TOKEN_BUDGET: u64 = 64 * 1024 * 1024;

#[derive(Debug, Error)]
pub enum ShardError {
    #[error("record {identifier} has no usable representation")]
    NoUsableRepresentation { identifier: String },
    #[error("tokenizer failed on {identifier} ({mime}): {detail}")]
    TokenizerFailure {
        identifier: String,
        mime: String,
        detail: String,
    },
    #[error("a shard needs at least one row")]
    EmptyShard,
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Key(#[from] KeyError),
    #[error("columnar encoding: {0}")]
    Columnar(String),
}

fn columnar(e: impl std::fmt::Display) -> ShardError {
    ShardError::Columnar(e.to_string())
}

/// One logical shard row. Representation order is the preference order
/// it was selected under, preserved through write and read.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShardRow {
    /// The source record's stage-2 storage key.
    pub identifier: String,
    /// MIME type → token ids, every list non-empty.
    pub representations: Vec<(String, Vec<u32>)>,
}

/// Tokenizes every preferred representation of a successful record.
///
/// Selected MIME types keep the order of `mime_preference`. Failed
/// records and records holding none of the preferred types are
/// `NoUsableRepresentation`; an encode error is `TokenizerFailure`, and
/// the caller decides whether to skip the row or stop.
pub fn tokenize_record(
    rec: &RepresentationRecord,
    tok: &dyn Tokenizer,
    mime_preference: &[&str],
) -> Result<ShardRow, ShardError> {
    let identifier = record_key(rec)?.render();
    if !rec.is_success() {
        return Err(ShardError::NoUsableRepresentation { identifier });
    }
    let mut representations = Vec::new();
    for &mime in mime_preference {
        let Some(entry) = rec.entry(mime) else {
            continue;
        };
        let tokens =
            tok.encode(entry.content())
                .map_err(|e| ShardError::TokenizerFailure {
                    identifier: identifier.clone(),
                    mime: mime.to_string(),
                    detail: e.to_string(),
                })?;
        if tokens.is_empty() {
            continue;
        }
        representations.push((mime.to_string(), tokens));
    }
    if representations.is_empty() {
        return Err(ShardError::NoUsableRepresentation { identifier });
    }
    Ok(ShardRow {
        identifier,
        representations,
    })
}

/// Stable shard assignment: FNV-1a over the identifier, mod `shards`.
/// Identical inputs land in identical shards on every run and platform.
pub fn shard_for(identifier: &str, shards: u32) -> u32 {
    assert!(shards > 0, "shard count must be positive");
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in identifier.as_bytes() {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    (hash % u64::from(shards)) as u32
}

/// The Stage 3 file schema. `shard_schema_consistency` pins this to what
/// the array builders actually produce.
pub fn shard_schema() -> Schema {
    let key = Field::new("key", DataType::Utf8, false);
    let item = Field::new("item", DataType::UInt32, false);
    let value = Field::new("value", DataType::List(Arc::new(item)), true);
    let entries = Field::new(
        "key_value",
        DataType::Struct(Fields::from(vec![key, value])),
        false,
    );
    Schema::new(vec![
        Field::new("identifier", DataType::Utf8, false),
        Field::new(
            "representations",
            DataType::Map(Arc::new(entries), false),
            false,
        ),
    ])
}

/// Serializes rows to one Parquet file at `dest` (atomically, via the
/// store's temp-and-rename put; an existing shard is replaced). Row
/// groups close on the token budget.
pub fn write_shard(
    store: &dyn ObjectStore,
    rows: &[ShardRow],
    dest: &StorageKey,
) -> Result<ShardReceipt, ShardError> {
    if rows.is_empty() {
        return Err(ShardError::EmptyShard);
    }
    let schema = Arc::new(shard_schema());
    let props = WriterProperties::builder()
        .set_compression(Compression::SNAPPY)
        .build();
    let mut buf = Vec::new();
    let mut writer =
        ArrowWriter::try_new(&mut buf, schema.clone(), Some(props)).map_err(columnar)?;
    let mut start = 0;
    while start < rows.len() {
        let mut end = start;
        let mut tokens: u64 = 0;
        while end < rows.len() && (end == start || tokens < ROW_GROUP_TOKEN_BUDGET) {
            tokens += rows[end]
                .representations
                .iter()
                .map(|(_, t)| t.len() as u64)
                .sum::<u64>();
            end += 1;
        }
        let batch = rows_to_batch(&schema, &rows[start..end])?;
        writer.write(&batch).map_err(columnar)?;
        writer.flush().map_err(columnar)?;
        start = end;
    }
    writer.close().map_err(columnar)?;
    let bytes = buf.len() as u64;
    store.put(dest, &buf, true)?;
    Ok(ShardReceipt {
        rows_written: rows.len() as u64,
        bytes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShardReceipt {
    pub rows_written: u64,
    pub bytes: u64,
}

fn rows_to_batch(schema: &Arc<Schema>, rows: &[ShardRow]) -> Result<RecordBatch, ShardError> {
    let mut identifiers = StringBuilder::new();
    let names = MapFieldNames {
        entry: "key_value".to_string(),
        key: "key".to_string(),
        value: "value".to_string(),
    };
    let tokens_builder = ListBuilder::new(UInt32Builder::new())
        .with_field(Field::new("item", DataType::UInt32, false));
    let mut maps = MapBuilder::new(Some(names), StringBuilder::new(), tokens_builder);
    for row in rows {
        identifiers.append_value(&row.identifier);
        for (mime, tokens) in &row.representations {
            maps.keys().append_value(mime);
            maps.values().values().append_slice(tokens);
            maps.values().append(true);
        }
        maps.append(true).map_err(columnar)?;
    }
    RecordBatch::try_new(
        schema.clone(),
        vec![Arc::new(identifiers.finish()), Arc::new(maps.finish())],
    )
    .map_err(columnar)
}

/// Reads a whole shard back into logical rows, in file order.
pub fn read_shard(store: &dyn ObjectStore, key: &StorageKey) -> Result<Vec<ShardRow>, ShardError> {
    let bytes = store.get(key)?;
    decode_shard(bytes::Bytes::from(bytes))
}

fn decode_shard(bytes: bytes::Bytes) -> Result<Vec<ShardRow>, ShardError> {
    let reader = ParquetRecordBatchReaderBuilder::try_new(bytes)
        .map_err(columnar)?
        .build()
        .map_err(columnar)?;
    let mut rows = Vec::new();
    for batch in reader {
        let batch = batch.map_err(columnar)?;
        let identifiers = batch.column(0).as_string::<i32>();
        let maps = batch.column(1).as_map();
        let keys = maps.keys().as_string::<i32>();
        let values = maps.values().as_list::<i32>();
        for i in 0..batch.num_rows() {
            let start = maps.value_offsets()[i] as usize;
            let end = maps.value_offsets()[i + 1] as usize;
            let mut representations = Vec::with_capacity(end - start);
            for j in start..end {
                let mime = keys.value(j).to_string();
                let tokens = values
                    .value(j)
                    .as_primitive::<UInt32Type>()
                    .values()
                    .to_vec();
                representations.push((mime, tokens));
            }
            rows.push(ShardRow {
                identifier: identifiers.value(i).to_string(),
                representations,
            });
        }
    }
    Ok(rows)
}

/// Reads only the identifier column — all a provenance walk needs.
pub fn read_shard_identifiers(
    store: &dyn ObjectStore,
    key: &StorageKey,
) -> Result<Vec<String>, ShardError> {
    let bytes = store.get(key)?;
    let builder =
        ParquetRecordBatchReaderBuilder::try_new(bytes::Bytes::from(bytes)).map_err(columnar)?;
    // Root column 0 is `identifier`; see shard_schema().
    let mask = ProjectionMask::roots(builder.parquet_schema(), [0]);
    let reader = builder.with_projection(mask).build().map_err(columnar)?;
    let mut identifiers = Vec::new();
    for batch in reader {
        let batch = batch.map_err(columnar)?;
        let column = batch.column(0).as_string::<i32>();
        identifiers.extend((0..batch.num_rows()).map(|i| column.value(i).to_string()));
    }
    Ok(identifiers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envelope::RepresentationEntry;
    use crate::key::Stage;
    use crate::store::MemoryStore;
    use crate::tokenizer::ByteTokenizer;

    fn record(id: &str, entries: &[(&str, &str)]) -> RepresentationRecord {
        let key = StorageKey::document("ds", id).unwrap();
        let entries = entries
            .iter()
            .map(|(mime, content)| RepresentationEntry::new(mime, content.to_string()).unwrap())
            .collect();
        RepresentationRecord::success("test", &key, entries, None).unwrap()
    }

    fn shard_key(name: &str) -> StorageKey {
        StorageKey::new(Stage::Parquet, "ds", name).unwrap()
    }

    // -------------------------------------------------------------
    // tokenize_record
    // -------------------------------------------------------------

    #[test]
    fn tokens_decode_back_to_the_source_text() {
        let rec = record("a.md", &[("text/markdown", "## Title")]);
        let tok = ByteTokenizer::new();
        let row = tokenize_record(&rec, &tok, &DEFAULT_MIME_PREFERENCE).unwrap();
        assert_eq!(row.identifier, "representations/ds/a.md.json");
        assert_eq!(row.representations.len(), 1);
        let (mime, tokens) = &row.representations[0];
        assert_eq!(mime, "text/markdown");
        assert_eq!(tok.decode(tokens).unwrap(), "## Title");
        assert!(tokens.iter().all(|&t| t < tok.vocab_size()));
    }

    #[test]
    fn preference_order_decides_row_order() {
        let rec = record(
            "b.html",
            &[("text/plain", "plain body"), ("text/markdown", "# md body")],
        );
        let tok = ByteTokenizer::new();
        let row = tokenize_record(&rec, &tok, &DEFAULT_MIME_PREFERENCE).unwrap();
        let mimes: Vec<&str> = row
            .representations
            .iter()
            .map(|(m, _)| m.as_str())
            .collect();
        assert_eq!(mimes, ["text/markdown", "text/plain"]);

        // Flip the preference, the row flips with it.
        let row = tokenize_record(&rec, &tok, &["text/plain", "text/markdown"]).unwrap();
        assert_eq!(row.representations[0].0, "text/plain");
    }

    #[test]
    fn failed_records_have_no_usable_representation() {
        let key = StorageKey::document("ds", "broken.bin").unwrap();
        let rec =
            RepresentationRecord::failure("test", &key, "parser exploded".into()).unwrap();
        let err = tokenize_record(&rec, &ByteTokenizer::new(), &DEFAULT_MIME_PREFERENCE)
            .unwrap_err();
        assert!(matches!(
            err,
            ShardError::NoUsableRepresentation { ref identifier }
                if identifier == "representations/ds/broken.bin.json"
        ));
    }

    #[test]
    fn records_without_preferred_types_are_unusable() {
        let rec = record("x.json", &[("application/json", "{}")]);
        let err = tokenize_record(&rec, &ByteTokenizer::new(), &DEFAULT_MIME_PREFERENCE)
            .unwrap_err();
        assert!(matches!(err, ShardError::NoUsableRepresentation { .. }));
    }

    #[test]
    fn encode_errors_surface_as_tokenizer_failure() {
        // A vocabulary with a single symbol cannot encode anything else.
        let json = r#"{"model": {"type": "BPE", "vocab": {"a": 0}, "merges": []}}"#;
        let tok = crate::tokenizer::BpeTokenizer::from_json(json, "tiny".into()).unwrap();
        let rec = record("c.txt", &[("text/plain", "bbb")]);
        let err = tokenize_record(&rec, &tok, &DEFAULT_MIME_PREFERENCE).unwrap_err();
        match err {
            ShardError::TokenizerFailure { mime, detail, .. } => {
                assert_eq!(mime, "text/plain");
                assert!(!detail.is_empty());
            }
            other => panic!("expected TokenizerFailure, got {other:?}"),
        }
    }

    // -------------------------------------------------------------
    // shard assignment
    // -------------------------------------------------------------

    #[test]
    fn shard_assignment_is_frozen() {
        // FNV-1a 64 reference values, computed independently.
        assert_eq!(shard_for("representations/ds/a.txt.json", 8), 3);
        assert_eq!(shard_for("representations/ds/b.txt.json", 8), 0);
        assert_eq!(shard_for("", 8), 5);
        assert_eq!(shard_for("anything", 1), 0);
    }

    #[test]
    fn shard_assignment_spreads_and_repeats() {
        let mut counts = vec![0u32; 8];
        for i in 0..10_000 {
            let id = format!("representations/ds/doc-{i}.json");
            let s = shard_for(&id, 8);
            assert_eq!(s, shard_for(&id, 8));
            counts[s as usize] += 1;
        }
        assert!(
            counts.iter().all(|&c| c > 800),
            "lopsided distribution: {counts:?}"
        );
    }

    // -------------------------------------------------------------
    // write / read
    // -------------------------------------------------------------

    #[test]
    fn shard_schema_consistency() {
        // The hand-written schema must equal what the builders emit,
        // field names and nullability included.
        let rows = vec![ShardRow {
            identifier: "representations/ds/a.json".into(),
            representations: vec![("text/plain".into(), vec![1, 2, 3])],
        }];
        let schema = Arc::new(shard_schema());
        let batch = rows_to_batch(&schema, &rows).unwrap();
        assert_eq!(batch.schema().as_ref(), &shard_schema());
    }

    #[test]
    fn single_row_round_trips_with_exact_schema() {
        let store = MemoryStore::new();
        let rows = vec![ShardRow {
            identifier: "representations/ds/a.md.json".into(),
            representations: vec![("text/markdown".into(), vec![7, 8, 9])],
        }];
        let dest = shard_key("shard-00000.parquet");
        let receipt = write_shard(&store, &rows, &dest).unwrap();
        assert_eq!(receipt.rows_written, 1);
        assert!(receipt.bytes > 0);

        let back = read_shard(&store, &dest).unwrap();
        assert_eq!(back, rows);
        assert_eq!(
            read_shard_identifiers(&store, &dest).unwrap(),
            vec!["representations/ds/a.md.json"]
        );
    }

    #[test]
    fn multi_representation_rows_keep_map_order() {
        let store = MemoryStore::new();
        let rows = vec![
            ShardRow {
                identifier: "representations/ds/a.html.json".into(),
                representations: vec![
                    ("text/markdown".into(), vec![1]),
                    ("text/plain".into(), vec![2, 3]),
                ],
            },
            ShardRow {
                identifier: "representations/ds/b.txt.json".into(),
                representations: vec![("text/plain".into(), vec![u32::MAX, 0])],
            },
        ];
        let dest = shard_key("shard-00001.parquet");
        write_shard(&store, &rows, &dest).unwrap();
        let back = read_shard(&store, &dest).unwrap();
        assert_eq!(back, rows);
    }

    #[test]
    fn empty_shards_are_refused() {
        let store = MemoryStore::new();
        let err = write_shard(&store, &[], &shard_key("never.parquet")).unwrap_err();
        assert!(matches!(err, ShardError::EmptyShard));
    }

    #[test]
    fn rewriting_a_shard_replaces_it() {
        let store = MemoryStore::new();
        let dest = shard_key("shard-00002.parquet");
        let first = vec![ShardRow {
            identifier: "representations/ds/old.json".into(),
            representations: vec![("text/plain".into(), vec![1])],
        }];
        let second = vec![ShardRow {
            identifier: "representations/ds/new.json".into(),
            representations: vec![("text/plain".into(), vec![2])],
        }];
        write_shard(&store, &first, &dest).unwrap();
        write_shard(&store, &second, &dest).unwrap();
        assert_eq!(read_shard(&store, &dest).unwrap(), second);
    }

    #[test]
    fn hundred_thousand_rows_round_trip() {
        let store = MemoryStore::new();
        let rows: Vec<ShardRow> = (0..100_000)
            .map(|i| ShardRow {
                identifier: format!("representations/ds/doc-{i:06}.json"),
                representations: vec![(
                    "text/plain".into(),
                    vec![i as u32, (i + 1) as u32, (i % 97) as u32],
                )],
            })
            .collect();
        let dest = shard_key("shard-big.parquet");
        let receipt = write_shard(&store, &rows, &dest).unwrap();
        assert_eq!(receipt.rows_written, 100_000);

        let back = read_shard(&store, &dest).unwrap();
        assert_eq!(back.len(), rows.len());
        assert_eq!(back, rows);
    }

    #[test]
    fn token_values_cover_the_full_u32_domain() {
        let store = MemoryStore::new();
        let rows = vec![ShardRow {
            identifier: "representations/ds/edge.json".into(),
            representations: vec![("text/plain".into(), vec![0, 1, u32::MAX - 1, u32::MAX])],
        }];
        let dest = shard_key("shard-edge.parquet");
        write_shard(&store, &rows, &dest).unwrap();
        assert_eq!(read_shard(&store, &dest).unwrap(), rows);
    }
}
