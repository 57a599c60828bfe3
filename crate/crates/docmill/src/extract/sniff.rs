//! Content-type detection: magic bytes beat the declared type, the
//! declared type beats the filename extension, and
//! `application/octet-stream` is the answer of last resort.

use std::io::Cursor;

use crate::extract::encoding::looks_textual;
use crate::mime::{self, well_known, MimeType};

/// Detects the MIME type of raw content.
///
/// `declared` is whatever the source claimed (HTTP header, sidecar
/// metadata); `filename` contributes only its extension. A declared
/// `application/octet-stream` carries no information and is ignored so a
/// usable extension can still speak.
pub fn sniff_mime(raw: &[u8], declared: Option<&str>, filename: Option<&str>) -> MimeType {
    debug_assert!(!raw.is_empty(), "sniffing empty content");
    if let Some(magic) = sniff_magic(raw, filename) {
        return MimeType::parse(magic).expect("magic table holds valid types");
    }
    if let Some(declared) = declared {
        if let Ok(mime) = MimeType::parse(declared) {
            if mime.essence() != well_known::OCTET_STREAM {
                return mime;
            }
        }
    }
    if let Some(ext) = filename.and_then(extension) {
        if let Some(known) = mime::from_extension(ext) {
            return MimeType::parse(known).expect("extension table holds valid types");
        }
    }
    let fallback = if looks_textual(raw) {
        well_known::TEXT_PLAIN
    } else {
        well_known::OCTET_STREAM
    };
    MimeType::parse(fallback).expect("fallback types are valid")
}

fn extension(filename: &str) -> Option<&str> {
    let base = filename.rsplit(['/', '\\']).next().unwrap_or(filename);
    match base.rsplit_once('.') {
        Some((stem, ext)) if !stem.is_empty() && !ext.is_empty() => Some(ext),
        _ => None,
    }
}

fn sniff_magic(raw: &[u8], filename: Option<&str>) -> Option<&'static str> {
    match raw {
        [b'%', b'P', b'D', b'F', b'-', ..] => Some(well_known::APPLICATION_PDF),
        [0x50, 0x4B, 0x03 | 0x05 | 0x07, ..] => Some(classify_zip(raw, filename)),
        [0x1F, 0x8B, ..] => Some(well_known::APPLICATION_GZIP),
        [0x89, b'P', b'N', b'G', 0x0D, 0x0A, 0x1A, 0x0A, ..] => Some("image/png"),
        [0xFF, 0xD8, 0xFF, ..] => Some("image/jpeg"),
        [b'G', b'I', b'F', b'8', ..] => Some("image/gif"),
        _ => sniff_markup(raw),
    }
}

/// A ZIP signature covers plain archives and the OOXML family; member
/// names tell them apart. Damaged archives fall back to the extension's
/// claim within the family, then to plain zip.
fn classify_zip(raw: &[u8], filename: Option<&str>) -> &'static str {
    if let Ok(archive) = zip::ZipArchive::new(Cursor::new(raw)) {
        let names: Vec<&str> = archive.file_names().collect();
        if names.iter().any(|n| *n == "[Content_Types].xml") {
            if names.iter().any(|n| n.starts_with("word/")) {
                return well_known::DOCX;
            }
            if names.iter().any(|n| n.starts_with("xl/")) {
                return well_known::XLSX;
            }
            if names.iter().any(|n| n.starts_with("ppt/")) {
                return well_known::PPTX;
            }
        }
        return well_known::APPLICATION_ZIP;
    }
    match filename.and_then(extension).map(str::to_ascii_lowercase) {
        Some(ext) if ext == "docx" => well_known::DOCX,
        Some(ext) if ext == "xlsx" => well_known::XLSX,
        Some(ext) if ext == "pptx" => well_known::PPTX,
        _ => well_known::APPLICATION_ZIP,
    }
}

/// HTML and XML declare themselves in their first non-whitespace bytes.
fn sniff_markup(raw: &[u8]) -> Option<&'static str> {
    let head = raw.strip_prefix(&[0xEF, 0xBB, 0xBF]).unwrap_or(raw);
    let start = head.iter().position(|b| !b.is_ascii_whitespace())?;
    let head = &head[start..head.len().min(start + 256)];
    let lowered = head.to_ascii_lowercase();
    if lowered.starts_with(b"<!doctype html") || lowered.starts_with(b"<html") {
        return Some(well_known::TEXT_HTML);
    }
    if lowered.starts_with(b"<?xml") {
        return Some(well_known::APPLICATION_XML);
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn zip_of(members: &[(&str, &[u8])]) -> Vec<u8> {
        let mut writer = zip::ZipWriter::new(Cursor::new(Vec::new()));
        let options = zip::write::SimpleFileOptions::default();
        for (name, bytes) in members {
            writer.start_file(*name, options).unwrap();
            writer.write_all(bytes).unwrap();
        }
        writer.finish().unwrap().into_inner()
    }

    #[test]
    fn magic_bytes_beat_the_declared_type() {
        let mime = sniff_mime(b"%PDF-1.7 rest of file", Some("text/plain"), Some("a.txt"));
        assert_eq!(mime.essence(), well_known::APPLICATION_PDF);
    }

    #[test]
    fn declared_type_beats_the_extension() {
        let mime = sniff_mime(b"just words", Some("text/html"), Some("notes.md"));
        assert_eq!(mime.essence(), well_known::TEXT_HTML);
    }

    #[test]
    fn extension_speaks_when_nothing_else_does() {
        let mime = sniff_mime(b"# Title", None, Some("dir/notes.md"));
        assert_eq!(mime.essence(), well_known::TEXT_MARKDOWN);
        // Declared octet-stream is treated as "no declaration".
        let mime = sniff_mime(b"# Title", Some("application/octet-stream"), Some("notes.md"));
        assert_eq!(mime.essence(), well_known::TEXT_MARKDOWN);
    }

    #[test]
    fn ascii_prose_without_hints_is_plain_text() {
        let mime = sniff_mime(b"Plain old prose, nothing else.", None, None);
        assert_eq!(mime.essence(), well_known::TEXT_PLAIN);
    }

    #[test]
    fn binary_without_hints_is_octet_stream() {
        let raw: Vec<u8> = (0..=255u8).cycle().take(512).collect();
        let mime = sniff_mime(&raw, None, None);
        assert_eq!(mime.essence(), well_known::OCTET_STREAM);
    }

    #[test]
    fn ooxml_members_refine_the_zip_signature() {
        let docx = zip_of(&[
            ("[Content_Types].xml", b"<Types/>".as_slice()),
            ("word/document.xml", b"<w:document/>".as_slice()),
        ]);
        let mime = sniff_mime(&docx, None, Some("a.docx"));
        assert_eq!(mime.essence(), well_known::DOCX);

        let plain = zip_of(&[("readme.txt", b"hi".as_slice())]);
        let mime = sniff_mime(&plain, None, Some("a.docx"));
        assert_eq!(mime.essence(), well_known::APPLICATION_ZIP);
    }

    #[test]
    fn truncated_zip_falls_back_to_the_extension_family() {
        let mime = sniff_mime(&[0x50, 0x4B, 0x03, 0x04, 0x00], None, Some("broken.xlsx"));
        assert_eq!(mime.essence(), well_known::XLSX);
        let mime = sniff_mime(&[0x50, 0x4B, 0x03, 0x04, 0x00], None, None);
        assert_eq!(mime.essence(), well_known::APPLICATION_ZIP);
    }

    #[test]
    fn markup_announces_itself() {
        let mime = sniff_mime(b"  <!DOCTYPE HTML><html></html>", None, None);
        assert_eq!(mime.essence(), well_known::TEXT_HTML);
        let mime = sniff_mime(b"<HTML><body/></HTML>", Some("text/plain"), None);
        assert_eq!(mime.essence(), well_known::TEXT_HTML);
        let mime = sniff_mime(b"<?xml version=\"1.0\"?><root/>", None, None);
        assert_eq!(mime.essence(), well_known::APPLICATION_XML);
    }

    #[test]
    fn invalid_declared_types_are_skipped() {
        let mime = sniff_mime(b"hello", Some("not a mime"), Some("x.json"));
        assert_eq!(mime.essence(), well_known::APPLICATION_JSON);
    }
}
