//! Stage 1 → Stage 2: turning sealed documents into text representations.
//!
//! Every envelope is routed through a parser chain chosen by its sniffed
//! content type. Chains are configuration (`data/parser_chains.conf`),
//! not code: each names the parser steps to try in order and the
//! representation types to produce, Markdown first where structure is
//! worth keeping. Extraction never throws — success and failure are both
//! encoded in the resulting record, and total failure carries the last
//! parser's message.
//!
//! Container documents (ZIP archives) expand into child documents: each
//! member becomes its own sealed envelope carrying `parent_identifier`
//! and `member_path` provenance, while the parent's record keeps a
//! manifest of what came out of it.

pub mod container;
pub mod encoding;
pub mod html;
pub mod pdf;
pub mod sniff;

use std::collections::BTreeMap;
use std::fmt;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::str::FromStr;
use std::sync::OnceLock;

use serde_json::Value;
use thiserror::Error;

pub use container::{MAX_CONTAINER_DEPTH, MAX_MEMBER_BYTES};
pub use html::{html_to_markdown, html_to_text};
pub use sniff::sniff_mime;

use crate::envelope::{DocumentEnvelope, RepresentationEntry, RepresentationRecord};
use crate::mime::{well_known, MimeGlob, MimeType};

/// Child-envelope `extra` key: the parent document's storage key.
pub const PARENT_IDENTIFIER_KEY: &str = "parent_identifier";
/// Child-envelope `extra` key: the member's archive-relative path.
pub const MEMBER_PATH_KEY: &str = "member_path";
/// Child-envelope `extra` key: how many containers enclose the document.
pub const CONTAINER_DEPTH_KEY: &str = "container_depth";

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("parser chain config line {line}: {detail}")]
    ChainsInvalid { line: usize, detail: String },
}

// ---------------------------------------------------------------------
// Parser identifiers
// ---------------------------------------------------------------------

/// The parsers a chain may name. Each is reentrant: no shared state, so
/// documents can be processed on any number of threads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParserId {
    /// Structure-preserving HTML conversion.
    Html,
    /// Encoding-detected text decode (UTF-8, UTF-16 via BOM, Latin-1).
    Text,
    /// Text decode where the bytes already are the target type.
    Verbatim,
    /// UTF-8 only; refuses anything that does not validate.
    StrictText,
    /// PDF text-layer extraction.
    Pdf,
    /// ZIP expansion into child documents.
    Zip,
}

impl ParserId {
    /// Whether this parser can produce the given representation type.
    fn supports(self, target: &MimeType) -> bool {
        match self {
            ParserId::Html => {
                target.essence() == well_known::TEXT_MARKDOWN
                    || target.essence() == well_known::TEXT_PLAIN
            }
            ParserId::Verbatim => target.top_level() == "text",
            ParserId::Text | ParserId::StrictText | ParserId::Pdf | ParserId::Zip => {
                target.essence() == well_known::TEXT_PLAIN
            }
        }
    }
}

impl FromStr for ParserId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "html" => ParserId::Html,
            "text" => ParserId::Text,
            "verbatim" => ParserId::Verbatim,
            "strict-text" => ParserId::StrictText,
            "pdf" => ParserId::Pdf,
            "zip" => ParserId::Zip,
            other => return Err(format!("unknown parser {other:?}")),
        })
    }
}

impl fmt::Display for ParserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ParserId::Html => "html",
            ParserId::Text => "text",
            ParserId::Verbatim => "verbatim",
            ParserId::StrictText => "strict-text",
            ParserId::Pdf => "pdf",
            ParserId::Zip => "zip",
        })
    }
}

// ---------------------------------------------------------------------
// Chains
// ---------------------------------------------------------------------

/// One routing rule: content types matching the glob run these steps to
/// produce these representation types.
#[derive(Debug, Clone)]
pub struct ParserChain {
    pub mime_pattern: MimeGlob,
    pub steps: Vec<ParserId>,
    pub target_mimes: Vec<MimeType>,
}

/// The full routing table, first match wins.
#[derive(Debug)]
pub struct ChainSet {
    version: u32,
    chains: Vec<ParserChain>,
}

impl ChainSet {
    /// The chains compiled into the binary from `data/parser_chains.conf`.
    pub fn builtin() -> &'static ChainSet {
        static BUILTIN: OnceLock<ChainSet> = OnceLock::new();
        BUILTIN.get_or_init(|| {
            ChainSet::parse(include_str!("../../data/parser_chains.conf"))
                .expect("bundled parser chains parse")
        })
    }

    pub fn version(&self) -> u32 {
        self.version
    }

    /// First chain whose glob matches the type.
    pub fn chain_for(&self, mime: &MimeType) -> Option<&ParserChain> {
        self.chains.iter().find(|c| c.mime_pattern.matches(mime))
    }

    /// Parses chain config text, reporting the first offending line.
    pub fn parse(text: &str) -> Result<ChainSet, ExtractError> {
        let invalid = |line: usize, detail: String| ExtractError::ChainsInvalid { line, detail };

        let mut version: Option<u32> = None;
        let mut chains: Vec<ParserChain> = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if version.is_none() {
                let v = line
                    .strip_prefix("version")
                    .and_then(|rest| rest.trim().parse::<u32>().ok())
                    .ok_or_else(|| {
                        invalid(line_no, format!("expected `version <n>`, got {line:?}"))
                    })?;
                version = Some(v);
                continue;
            }
            let fields: Vec<&str> = line.split('|').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(invalid(
                    line_no,
                    format!(
                        "expected `<mime glob> | <steps> | <targets>`, got {} field(s)",
                        fields.len()
                    ),
                ));
            }
            let mime_pattern = MimeGlob::parse(fields[0])
                .map_err(|e| invalid(line_no, format!("bad mime glob: {e}")))?;
            let steps = fields[1]
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(ParserId::from_str)
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| invalid(line_no, e))?;
            if steps.is_empty() {
                return Err(invalid(line_no, "a chain needs at least one step".into()));
            }
            let mut target_mimes = Vec::new();
            for t in fields[2].split(',').map(str::trim).filter(|s| !s.is_empty()) {
                let mime = MimeType::parse(t)
                    .map_err(|e| invalid(line_no, format!("bad target type {t:?}: {e}")))?;
                if target_mimes.iter().any(|m: &MimeType| m.essence() == mime.essence()) {
                    return Err(invalid(line_no, format!("duplicate target type {t:?}")));
                }
                target_mimes.push(mime);
            }
            if target_mimes.is_empty() {
                return Err(invalid(line_no, "a chain needs at least one target type".into()));
            }
            chains.push(ParserChain {
                mime_pattern,
                steps,
                target_mimes,
            });
        }
        let version =
            version.ok_or_else(|| invalid(0, "chain config must start with `version <n>`".into()))?;
        if chains.is_empty() {
            return Err(invalid(0, "chain config defines no chains".into()));
        }
        let octet = MimeType::parse(well_known::OCTET_STREAM).expect("constant type is valid");
        if !chains.iter().any(|c| c.mime_pattern.matches(&octet)) {
            return Err(invalid(
                0,
                "no chain matches application/octet-stream; unroutable content would have \
                 nowhere to record its failure"
                    .into(),
            ));
        }
        Ok(ChainSet { version, chains })
    }
}

// ---------------------------------------------------------------------
// Extraction
// ---------------------------------------------------------------------

/// A container member promoted to a document of its own.
#[derive(Debug)]
pub struct ChildDocument {
    /// Archive-relative path of the member within its parent.
    pub member_path: String,
    pub envelope: DocumentEnvelope,
}

/// Everything one envelope extracts to: its own record, plus child
/// documents when the envelope held a container.
#[derive(Debug)]
pub struct ExtractionOutcome {
    pub record: RepresentationRecord,
    pub children: Vec<ChildDocument>,
}

/// Runs the matching parser chain over one sealed document.
///
/// Never fails: parser errors, undecodable content, and depth-limited
/// containers all come back as a `success = false` record whose error is
/// the last attempted parser's message. Extraction is deterministic —
/// the same envelope always yields the same outcome.
pub fn extract_document(env: &DocumentEnvelope, chains: &ChainSet) -> ExtractionOutcome {
    let identifier = env.storage_key();
    let failure = |msg: String| ExtractionOutcome {
        record: RepresentationRecord::failure(env.source(), &identifier, msg)
            .expect("failure records accept any non-empty message"),
        children: Vec::new(),
    };

    let raw = match env.open() {
        Ok(raw) => raw,
        Err(e) => return failure(format!("cannot open sealed content: {e}")),
    };
    let mime = sniff_mime(&raw, Some(env.format()), Some(env.id()));
    let Some(chain) = chains.chain_for(&mime) else {
        return failure(format!("no parser chain matches {mime}"));
    };
    let depth = container_depth(env);

    let mut entries: Vec<RepresentationEntry> = Vec::new();
    let mut children: Vec<ChildDocument> = Vec::new();
    let mut last_error: Option<String> = None;

    for target in &chain.target_mimes {
        for step in &chain.steps {
            if !step.supports(target) {
                continue;
            }
            match run_parser(*step, &raw, target, env, depth) {
                Ok(ParserOutput::Text(content)) => {
                    if content.trim().is_empty() {
                        last_error = Some(format!("{step}: produced no text"));
                        continue;
                    }
                    let entry = RepresentationEntry::new(target.essence(), content)
                        .expect("non-empty text makes a valid entry");
                    entries.push(entry);
                    break;
                }
                Ok(ParserOutput::Container(expanded)) => {
                    let (manifest, kids) = adopt_members(env, &identifier, depth, expanded);
                    children = kids;
                    let entry = RepresentationEntry::new(target.essence(), manifest)
                        .expect("manifests are never empty");
                    entries.push(entry);
                    break;
                }
                Err(msg) => {
                    last_error = Some(format!("{step}: {msg}"));
                }
            }
        }
    }

    if entries.is_empty() {
        let msg = last_error
            .unwrap_or_else(|| "no parser step supports any target type".to_string());
        return failure(msg);
    }
    let record = RepresentationRecord::success(env.source(), &identifier, entries, last_error)
        .expect("entries are non-empty and uniquely keyed");
    ExtractionOutcome { record, children }
}

enum ParserOutput {
    Text(String),
    Container(container::ExpandedArchive),
}

fn run_parser(
    step: ParserId,
    raw: &[u8],
    target: &MimeType,
    env: &DocumentEnvelope,
    depth: u32,
) -> Result<ParserOutput, String> {
    let markdown_target = target.essence() == well_known::TEXT_MARKDOWN;
    let run = || -> Result<ParserOutput, String> {
        match step {
            ParserId::Html => {
                let decoded = encoding::decode_text(raw)?;
                let text = if markdown_target {
                    html_to_markdown(&decoded.text)
                } else {
                    html_to_text(&decoded.text)
                };
                Ok(ParserOutput::Text(text))
            }
            ParserId::Text | ParserId::Verbatim => {
                Ok(ParserOutput::Text(encoding::decode_text(raw)?.text))
            }
            ParserId::StrictText => match std::str::from_utf8(raw) {
                Ok(text) => Ok(ParserOutput::Text(text.to_string())),
                Err(_) => Err("content is not valid UTF-8 text".into()),
            },
            ParserId::Pdf => Ok(ParserOutput::Text(pdf::extract_pdf_text(raw)?)),
            ParserId::Zip => Ok(ParserOutput::Container(container::expand_zip(raw, depth)?)),
        }
    };
    // A parser bug must not take the whole pipeline down with it; a panic
    // becomes this document's failure message.
    catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|panic| {
        let detail = panic
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| panic.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "unknown panic".to_string());
        let _ = env;
        Err(format!("parser aborted: {detail}"))
    })
}

/// Seals archive members as child documents and writes the parent's
/// manifest. Members that cannot be sealed are demoted to skip notes.
fn adopt_members(
    env: &DocumentEnvelope,
    identifier: &crate::key::StorageKey,
    depth: u32,
    expanded: container::ExpandedArchive,
) -> (String, Vec<ChildDocument>) {
    let mut children = Vec::new();
    let mut skipped = expanded.skipped;
    for member in expanded.members {
        let child_id = format!("{}/{}", env.id(), member.path);
        let child_mime = sniff_mime(&member.bytes, None, Some(&member.path));
        let mut extra = BTreeMap::new();
        extra.insert(
            PARENT_IDENTIFIER_KEY.to_string(),
            Value::String(identifier.render()),
        );
        extra.insert(
            MEMBER_PATH_KEY.to_string(),
            Value::String(member.path.clone()),
        );
        extra.insert(CONTAINER_DEPTH_KEY.to_string(), Value::from(depth + 1));
        match DocumentEnvelope::seal(
            &member.bytes,
            child_mime.essence(),
            env.source(),
            env.license(),
            env.dataset_id(),
            &child_id,
            extra,
        ) {
            Ok(envelope) => children.push(ChildDocument {
                member_path: member.path,
                envelope,
            }),
            Err(e) => skipped.push((member.path, format!("cannot seal member: {e}"))),
        }
    }
    let mut manifest = format!("container expanded: {} member(s)\n", children.len());
    for child in &children {
        manifest.push_str("member: ");
        manifest.push_str(&child.member_path);
        manifest.push('\n');
    }
    for (path, reason) in &skipped {
        manifest.push_str(&format!("skipped: {path} ({reason})\n"));
    }
    (manifest, children)
}

/// How many containers enclose this document (0 for top-level sources).
pub fn container_depth(env: &DocumentEnvelope) -> u32 {
    env.extra()
        .get(CONTAINER_DEPTH_KEY)
        .and_then(|v| {
            v.as_u64()
                .or_else(|| v.as_str().and_then(|s| s.parse().ok()))
        })
        .map(|d| d.min(u64::from(u32::MAX)) as u32)
        .unwrap_or(0)
}
