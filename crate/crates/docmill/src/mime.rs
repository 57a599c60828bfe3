//! MIME type validation and glob matching.
//!
//! Representation maps and parser chains are keyed by MIME type, so we keep
//! validation in one place. A type is stored lowercased with parameters
//! stripped: `Text/HTML; charset=utf-8` normalizes to `text/html`.
//!
//! Globs come in three shapes: exact (`text/html`), subtype wildcard
//! (`text/*` or `application/vnd.openxml*`), and match-all (`*/*`).

use std::fmt;

use thiserror::Error;

/// Common types the pipeline produces or routes on.
pub mod well_known {
    pub const TEXT_PLAIN: &str = "text/plain";
    pub const TEXT_HTML: &str = "text/html";
    pub const TEXT_MARKDOWN: &str = "text/markdown";
    pub const APPLICATION_PDF: &str = "application/pdf";
    pub const APPLICATION_ZIP: &str = "application/zip";
    pub const APPLICATION_GZIP: &str = "application/gzip";
    pub const APPLICATION_JSON: &str = "application/json";
    pub const APPLICATION_XML: &str = "application/xml";
    pub const OCTET_STREAM: &str = "application/octet-stream";
    pub const DOCX: &str = "application/vnd.openxmlformats-officedocument.wordprocessingml.document";
    pub const XLSX: &str = "application/vnd.openxmlformats-officedocument.spreadsheetml.sheet";
    pub const PPTX: &str = "application/vnd.openxmlformats-officedocument.presentationml.presentation";
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MimeError {
    #[error("empty MIME type")]
    Empty,
    #[error("MIME type {0:?} is missing a '/' separator")]
    MissingSlash(String),
    #[error("MIME type {0:?} contains an invalid character {1:?}")]
    InvalidChar(String, char),
}

/// A validated `type/subtype` pair, lowercased, parameters stripped.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MimeType {
    essence: String,
    slash: usize,
}

impl MimeType {
    /// Parses and normalizes a MIME type string.
    ///
    /// Accepts optional `;`-separated parameters and surrounding whitespace,
    /// both of which are dropped. Rejects empty components, a missing slash,
    /// and characters outside the token alphabet.
    pub fn parse(raw: &str) -> Result<Self, MimeError> {
        let essence = raw.split(';').next().unwrap_or("").trim();
        if essence.is_empty() {
            return Err(MimeError::Empty);
        }
        let lowered = essence.to_ascii_lowercase();
        let slash = lowered
            .find('/')
            .ok_or_else(|| MimeError::MissingSlash(raw.to_string()))?;
        let (top, sub) = (&lowered[..slash], &lowered[slash + 1..]);
        if top.is_empty() || sub.is_empty() {
            return Err(MimeError::MissingSlash(raw.to_string()));
        }
        for part in [top, sub] {
            if let Some(c) = part.chars().find(|&c| !is_token_char(c)) {
                return Err(MimeError::InvalidChar(raw.to_string(), c));
            }
        }
        Ok(MimeType {
            essence: lowered,
            slash,
        })
    }

    /// The normalized `type/subtype` string.
    pub fn essence(&self) -> &str {
        &self.essence
    }

    pub fn top_level(&self) -> &str {
        &self.essence[..self.slash]
    }

    pub fn subtype(&self) -> &str {
        &self.essence[self.slash + 1..]
    }
}

impl fmt::Display for MimeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.essence)
    }
}

/// True if `raw` parses as a MIME type.
pub fn is_valid(raw: &str) -> bool {
    MimeType::parse(raw).is_ok()
}

// RFC 2045 token characters, the subset that may appear in type and subtype.
fn is_token_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '!' | '#' | '$' | '&' | '^' | '_' | '.' | '+' | '-')
}

/// A MIME glob: `*/*`, `text/*`, `application/vnd.openxml*`, or an exact type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MimeGlob {
    top: Segment,
    sub: Segment,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Any,
    Prefix(String),
    Exact(String),
}

impl Segment {
    fn parse(raw: &str, original: &str) -> Result<Self, MimeError> {
        if raw == "*" {
            return Ok(Segment::Any);
        }
        let (body, prefix) = match raw.strip_suffix('*') {
            Some(b) => (b, true),
            None => (raw, false),
        };
        if body.is_empty() || raw.is_empty() {
            return Err(MimeError::MissingSlash(original.to_string()));
        }
        if let Some(c) = body.chars().find(|&c| !is_token_char(c)) {
            return Err(MimeError::InvalidChar(original.to_string(), c));
        }
        let body = body.to_ascii_lowercase();
        Ok(if prefix {
            Segment::Prefix(body)
        } else {
            Segment::Exact(body)
        })
    }

    fn matches(&self, part: &str) -> bool {
        match self {
            Segment::Any => true,
            Segment::Prefix(p) => part.starts_with(p.as_str()),
            Segment::Exact(e) => part == e,
        }
    }
}

impl MimeGlob {
    pub fn parse(raw: &str) -> Result<Self, MimeError> {
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            return Err(MimeError::Empty);
        }
        let slash = trimmed
            .find('/')
            .ok_or_else(|| MimeError::MissingSlash(raw.to_string()))?;
        Ok(MimeGlob {
            top: Segment::parse(&trimmed[..slash], raw)?,
            sub: Segment::parse(&trimmed[slash + 1..], raw)?,
        })
    }

    pub fn matches(&self, mime: &MimeType) -> bool {
        self.top.matches(mime.top_level()) && self.sub.matches(mime.subtype())
    }

    /// Convenience for callers holding a raw string; invalid strings never match.
    pub fn matches_str(&self, mime: &str) -> bool {
        MimeType::parse(mime).map_or(false, |m| self.matches(&m))
    }
}

/// Maps a filename extension to a MIME type, if we know one.
pub fn from_extension(ext: &str) -> Option<&'static str> {
    use well_known::*;
    Some(match ext.to_ascii_lowercase().as_str() {
        "txt" | "text" | "log" => TEXT_PLAIN,
        "html" | "htm" | "xhtml" => TEXT_HTML,
        "md" | "markdown" => TEXT_MARKDOWN,
        "pdf" => APPLICATION_PDF,
        "zip" => APPLICATION_ZIP,
        "gz" | "gzip" => APPLICATION_GZIP,
        "json" => APPLICATION_JSON,
        "xml" => APPLICATION_XML,
        "docx" => DOCX,
        "xlsx" => XLSX,
        "pptx" => PPTX,
        "csv" => "text/csv",
        "png" => "image/png",
        "jpg" | "jpeg" => "image/jpeg",
        "gif" => "image/gif",
        _ => return None,
    })
}
