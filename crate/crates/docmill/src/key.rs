//! Storage key grammar shared by every pipeline stage.
//!
//! Keys render as `<stage>/<dataset>/<path>`, where stage is one of the five
//! fixed prefixes below. Document and representation keys additionally carry
//! a `.json` suffix, added at render time and required at parse time:
//!
//! ```text
//! documents/fdlp/gpo16926/PDF.pdf.json
//! representations/fdlp/gpo16926/PDF.pdf.json
//! parquet/fdlp/shard-00000.parquet
//! ```
//!
//! The stage-1 and stage-2 keys for a document differ only in their prefix,
//! which is what lets provenance verification walk backwards cheaply.

use std::fmt;

use thiserror::Error;

/// The five storage areas, in pipeline order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    /// Stage 1: sealed source documents.
    Documents,
    /// Stage 2: extraction output.
    Representations,
    /// Stage 3: tokenized training shards.
    Parquet,
    /// Unprocessed payloads parked before sealing.
    Raw,
    /// Derived reports and indexes.
    Db,
}

impl Stage {
    pub const ALL: [Stage; 5] = [
        Stage::Documents,
        Stage::Representations,
        Stage::Parquet,
        Stage::Raw,
        Stage::Db,
    ];

    pub fn prefix(self) -> &'static str {
        match self {
            Stage::Documents => "documents",
            Stage::Representations => "representations",
            Stage::Parquet => "parquet",
            Stage::Raw => "raw",
            Stage::Db => "db",
        }
    }

    pub fn from_prefix(s: &str) -> Option<Stage> {
        Stage::ALL.into_iter().find(|st| st.prefix() == s)
    }

    /// Document and representation keys carry a `.json` suffix.
    fn json_suffix(self) -> bool {
        matches!(self, Stage::Documents | Stage::Representations)
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.prefix())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum KeyError {
    #[error("unknown stage prefix {0:?}")]
    UnknownStage(String),
    #[error("empty {0}")]
    Empty(&'static str),
    #[error("{0} segment {1:?} is not allowed")]
    BadSegment(&'static str, String),
    #[error("{0} contains a disallowed character {1:?}")]
    BadChar(&'static str, char),
    #[error("key {0:?} is missing its .json suffix")]
    MissingSuffix(String),
    #[error("key {0:?} has too few components")]
    Truncated(String),
}

/// A fully-qualified object key: stage, dataset, and a path within it.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StorageKey {
    stage: Stage,
    dataset_id: String,
    path: String,
}

impl StorageKey {
    /// Builds a key from parts, validating each.
    ///
    /// `path` is `/`-separated; every segment must be non-empty, must not be
    /// `.` or `..`, and must not contain backslashes or control characters.
    /// The same rules apply to `dataset_id`, which is a single segment.
    pub fn new(stage: Stage, dataset_id: &str, path: &str) -> Result<Self, KeyError> {
        validate_segment("dataset id", dataset_id)?;
        validate_path("document id", path)?;
        Ok(StorageKey {
            stage,
            dataset_id: dataset_id.to_string(),
            path: path.to_string(),
        })
    }

    /// The stage-1 key for a document id.
    pub fn document(dataset_id: &str, doc_id: &str) -> Result<Self, KeyError> {
        Self::new(Stage::Documents, dataset_id, doc_id)
    }

    /// The stage-2 key for a document id.
    pub fn representation(dataset_id: &str, doc_id: &str) -> Result<Self, KeyError> {
        Self::new(Stage::Representations, dataset_id, doc_id)
    }

    pub fn stage(&self) -> Stage {
        self.stage
    }

    pub fn dataset_id(&self) -> &str {
        &self.dataset_id
    }

    /// The path below `<stage>/<dataset>/`, without any `.json` suffix.
    pub fn path(&self) -> &str {
        &self.path
    }

    /// The same document's key in another stage.
    pub fn with_stage(&self, stage: Stage) -> StorageKey {
        StorageKey {
            stage,
            dataset_id: self.dataset_id.clone(),
            path: self.path.clone(),
        }
    }

    /// Renders the full key string, appending `.json` for record stages.
    pub fn render(&self) -> String {
        if self.stage.json_suffix() {
            format!("{}/{}/{}.json", self.stage, self.dataset_id, self.path)
        } else {
            format!("{}/{}/{}", self.stage, self.dataset_id, self.path)
        }
    }

    /// Parses a rendered key back into its parts.
    pub fn parse(rendered: &str) -> Result<Self, KeyError> {
        let mut parts = rendered.splitn(3, '/');
        let stage_str = parts.next().unwrap_or("");
        let stage = Stage::from_prefix(stage_str)
            .ok_or_else(|| KeyError::UnknownStage(stage_str.to_string()))?;
        let dataset = parts
            .next()
            .ok_or_else(|| KeyError::Truncated(rendered.to_string()))?;
        let rest = parts
            .next()
            .ok_or_else(|| KeyError::Truncated(rendered.to_string()))?;
        let path = if stage.json_suffix() {
            rest.strip_suffix(".json")
                .ok_or_else(|| KeyError::MissingSuffix(rendered.to_string()))?
        } else {
            rest
        };
        StorageKey::new(stage, dataset, path)
    }
}

impl fmt::Display for StorageKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// A prefix over rendered key strings, used by `ObjectStore::list`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyPrefix {
    rendered: String,
}

impl KeyPrefix {
    /// Everything in one stage: `documents/`.
    pub fn stage(stage: Stage) -> KeyPrefix {
        KeyPrefix {
            rendered: format!("{}/", stage.prefix()),
        }
    }

    /// One dataset within a stage: `documents/fdlp/`.
    pub fn dataset(stage: Stage, dataset_id: &str) -> Result<KeyPrefix, KeyError> {
        validate_segment("dataset id", dataset_id)?;
        Ok(KeyPrefix {
            rendered: format!("{}/{}/", stage.prefix(), dataset_id),
        })
    }

    /// An arbitrary sub-path: `documents/fdlp/gpo`.
    ///
    /// The trailing component may be a partial segment, so it is validated
    /// only for disallowed characters, not for structure.
    pub fn under(stage: Stage, dataset_id: &str, partial: &str) -> Result<KeyPrefix, KeyError> {
        validate_segment("dataset id", dataset_id)?;
        if let Some(c) = partial
            .chars()
            .find(|&c| c == '\\' || c.is_control())
        {
            return Err(KeyError::BadChar("prefix", c));
        }
        Ok(KeyPrefix {
            rendered: format!("{}/{}/{}", stage.prefix(), dataset_id, partial),
        })
    }

    pub fn as_str(&self) -> &str {
        &self.rendered
    }

    pub fn matches(&self, key: &StorageKey) -> bool {
        key.render().starts_with(&self.rendered)
    }
}

impl fmt::Display for KeyPrefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.rendered)
    }
}

fn validate_segment(what: &'static str, seg: &str) -> Result<(), KeyError> {
    if seg.is_empty() {
        return Err(KeyError::Empty(what));
    }
    if seg == "." || seg == ".." {
        return Err(KeyError::BadSegment(what, seg.to_string()));
    }
    if let Some(c) = seg
        .chars()
        .find(|&c| c == '/' || c == '\\' || c.is_control())
    {
        return Err(KeyError::BadChar(what, c));
    }
    Ok(())
}

fn validate_path(what: &'static str, path: &str) -> Result<(), KeyError> {
    if path.is_empty() {
        return Err(KeyError::Empty(what));
    }
    for seg in path.split('/') {
        if seg.is_empty() {
            return Err(KeyError::BadSegment(what, String::new()));
        }
        if seg == "." || seg == ".." {
            return Err(KeyError::BadSegment(what, seg.to_string()));
        }
        if let Some(c) = seg.chars().find(|&c| c == '\\' || c.is_control()) {
            return Err(KeyError::BadChar(what, c));
        }
    }
    Ok(())
}
