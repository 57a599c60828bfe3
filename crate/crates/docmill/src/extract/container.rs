//! Archive expansion: one container document becomes many member
//! documents.
//!
//! Expansion is bounded on three axes — nesting depth (an archive three
//! levels deep refuses to open further), per-member decompressed size,
//! and declared-size honesty (a member that inflates past its declaration
//! is dropped) — so a hostile archive cannot exhaust memory.

use std::collections::BTreeSet;
use std::io::{Cursor, Read};

/// How many levels of container-in-container are expanded. The top-level
/// document sits at depth 0; an archive at this depth fails instead of
/// expanding.
pub const MAX_CONTAINER_DEPTH: u32 = 3;

/// Decompressed-size cap per member.
pub const MAX_MEMBER_BYTES: u64 = 256 * 1024 * 1024;

/// One extracted member: archive-relative path plus raw bytes.
#[derive(Debug)]
pub struct ArchiveMember {
    pub path: String,
    pub bytes: Vec<u8>,
}

#[derive(Debug)]
pub struct ExpandedArchive {
    pub members: Vec<ArchiveMember>,
    /// (path, reason) for members that were present but not extracted.
    pub skipped: Vec<(String, String)>,
}

/// Opens a ZIP archive and pulls out every regular member.
///
/// `depth` is how many containers already enclose this one. Member paths
/// are unique in the result: the first occurrence of a duplicated name
/// wins. Directory entries are not members and are ignored outright.
pub fn expand_zip(raw: &[u8], depth: u32) -> Result<ExpandedArchive, String> {
    if depth >= MAX_CONTAINER_DEPTH {
        return Err(format!(
            "container nesting depth {depth} reached the limit of {MAX_CONTAINER_DEPTH}; \
             not expanding further"
        ));
    }
    let mut archive =
        zip::ZipArchive::new(Cursor::new(raw)).map_err(|e| format!("zip parse failure: {e}"))?;
    let mut members = Vec::new();
    let mut skipped = Vec::new();
    let mut seen = BTreeSet::new();
    for index in 0..archive.len() {
        let member = match archive.by_index(index) {
            Ok(m) => m,
            Err(e) => {
                skipped.push((format!("#{index}"), format!("unreadable member: {e}")));
                continue;
            }
        };
        if member.is_dir() {
            continue;
        }
        let raw_name = member.name().to_string();
        // enclosed_name refuses absolute paths and `..` traversal; the
        // component walk then strips `.` segments so equivalent spellings
        // of one path collide here instead of downstream.
        let path = match member.enclosed_name().map(normalize_path) {
            Some(p) if !p.is_empty() => p,
            _ => {
                skipped.push((raw_name, "unsafe member path".into()));
                continue;
            }
        };
        if !seen.insert(path.clone()) {
            skipped.push((path, "duplicate member path".into()));
            continue;
        }
        if member.size() > MAX_MEMBER_BYTES {
            skipped.push((
                path,
                format!("member exceeds {MAX_MEMBER_BYTES} byte cap"),
            ));
            continue;
        }
        let mut bytes = Vec::with_capacity(member.size().min(1 << 20) as usize);
        match member.take(MAX_MEMBER_BYTES + 1).read_to_end(&mut bytes) {
            Ok(_) if bytes.len() as u64 > MAX_MEMBER_BYTES => {
                skipped.push((
                    path,
                    format!("member inflates past the {MAX_MEMBER_BYTES} byte cap"),
                ));
            }
            Ok(0) => {
                skipped.push((path, "empty member".into()));
            }
            Ok(_) => members.push(ArchiveMember { path, bytes }),
            Err(e) => {
                skipped.push((path, format!("decompression failure: {e}")));
            }
        }
    }
    Ok(ExpandedArchive { members, skipped })
}

fn normalize_path(p: std::path::PathBuf) -> String {
    let segments: Vec<String> = p
        .components()
        .filter_map(|c| match c {
            std::path::Component::Normal(os) => Some(os.to_string_lossy().replace('\\', "/")),
            _ => None,
        })
        .collect();
    segments.join("/")
}

#[cfg(test)]
pub(crate) mod zip_fixture {
    use std::io::{Cursor, Write};

    /// Builds an in-memory ZIP with the given (name, bytes) members.
    pub fn zip_of(members: &[(&str, &[u8])]) -> Vec<u8> {
        let mut writer = zip::ZipWriter::new(Cursor::new(Vec::new()));
        let options = zip::write::SimpleFileOptions::default();
        for (name, bytes) in members {
            writer.start_file(*name, options).unwrap();
            writer.write_all(bytes).unwrap();
        }
        writer.finish().unwrap().into_inner()
    }
}
