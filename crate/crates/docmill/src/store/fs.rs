//! Local-directory backend: keys map one-to-one onto relative paths.
//!
//! `documents/fdlp/gpo16926/PDF.pdf.json` is literally the file
//! `<root>/documents/fdlp/gpo16926/PDF.pdf.json`, so a store root can be
//! inspected with ordinary shell tools and synced with ordinary copy tools.
//!
//! Writes land in a hidden temporary file in the destination directory and
//! are committed with `rename` (overwrite) or `hard_link` (no-overwrite,
//! which the filesystem makes atomic-exclusive). Readers therefore never
//! see partial bodies, and two racing no-overwrite writers cannot both win.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use crate::key::{KeyPrefix, StorageKey};

use super::{KeyIter, ObjectStore, PutReceipt, StoreError};

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);
const TMP_PREFIX: &str = ".tmp-";

pub struct FsStore {
    root: PathBuf,
}

impl FsStore {
    /// Opens a store rooted at `root`. The directory is created lazily on
    /// first write, so opening a read-only location for listing is fine.
    pub fn new(root: impl Into<PathBuf>) -> Self {
        FsStore { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn path_for(&self, key: &StorageKey) -> PathBuf {
        // Rendered keys are validated /-separated relative paths; joining
        // cannot escape the root.
        self.root.join(key.render())
    }
}

fn io_error(op: &str, path: &Path, e: io::Error) -> StoreError {
    StoreError::BackendUnavailable {
        detail: format!("{op} {}: {e}", path.display()),
        retryable: false,
    }
}

impl ObjectStore for FsStore {
    fn put(&self, key: &StorageKey, body: &[u8], overwrite: bool) -> Result<PutReceipt, StoreError> {
        if body.is_empty() {
            return Err(StoreError::EmptyBody(key.render()));
        }
        let path = self.path_for(key);
        let parent = path.parent().expect("rendered keys always have a parent");
        fs::create_dir_all(parent).map_err(|e| io_error("mkdir", parent, e))?;

        let tmp = parent.join(format!(
            "{TMP_PREFIX}{}-{}",
            std::process::id(),
            TMP_COUNTER.fetch_add(1, Ordering::Relaxed)
        ));
        let mut file = fs::File::create(&tmp).map_err(|e| io_error("create", &tmp, e))?;
        if let Err(e) = file.write_all(body).and_then(|_| file.flush()) {
            let _ = fs::remove_file(&tmp);
            return Err(io_error("write", &tmp, e));
        }
        drop(file);

        let committed = if overwrite {
            fs::rename(&tmp, &path).map_err(|e| io_error("rename", &path, e))
        } else {
            match fs::hard_link(&tmp, &path) {
                Ok(()) => Ok(()),
                Err(e) if e.kind() == io::ErrorKind::AlreadyExists => {
                    let _ = fs::remove_file(&tmp);
                    return Err(StoreError::AlreadyExists(key.render()));
                }
                Err(e) => Err(io_error("link", &path, e)),
            }
        };
        let _ = fs::remove_file(&tmp);
        committed?;

        Ok(PutReceipt {
            key: key.clone(),
            byte_count: body.len() as u64,
        })
    }

    fn get(&self, key: &StorageKey) -> Result<Vec<u8>, StoreError> {
        let path = self.path_for(key);
        match fs::read(&path) {
            Ok(body) => Ok(body),
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                Err(StoreError::NotFound(key.render()))
            }
            Err(e) => Err(io_error("read", &path, e)),
        }
    }

    fn exists(&self, key: &StorageKey) -> Result<bool, StoreError> {
        let path = self.path_for(key);
        path.try_exists().map_err(|e| io_error("stat", &path, e))
    }

    fn list<'a>(&'a self, prefix: &KeyPrefix) -> Result<KeyIter<'a>, StoreError> {
        // Walk the deepest directory that covers the prefix, then filter by
        // the rendered string so partial-segment prefixes work too.
        let prefix_str = prefix.as_str().to_string();
        let dir_part = match prefix_str.rfind('/') {
            Some(pos) => &prefix_str[..pos],
            None => "",
        };
        let walk_root = self.root.join(dir_part);
        if !walk_root.is_dir() {
            return Ok(Box::new(std::iter::empty()));
        }

        let mut rendered: Vec<String> = Vec::new();
        for entry in walkdir::WalkDir::new(&walk_root).follow_links(false) {
            let entry = entry.map_err(|e| StoreError::BackendUnavailable {
                detail: format!("walk {}: {e}", walk_root.display()),
                retryable: false,
            })?;
            if !entry.file_type().is_file() {
                continue;
            }
            if entry
                .file_name()
                .to_str()
                .map_or(true, |n| n.starts_with(TMP_PREFIX))
            {
                continue;
            }
            let rel = entry
                .path()
                .strip_prefix(&self.root)
                .expect("walk stays under root");
            let Some(rel) = rel.to_str() else { continue };
            if rel.starts_with(&prefix_str) {
                rendered.push(rel.to_string());
            }
        }
        // Directory traversal order is not rendered-string order (`.` sorts
        // before `/`), so sort explicitly.
        rendered.sort_unstable();
        Ok(Box::new(rendered.into_iter().map(|r| {
            StorageKey::parse(&r).map_err(StoreError::from)
        })))
    }

    fn delete(&self, key: &StorageKey) -> Result<(), StoreError> {
        let path = self.path_for(key);
        match fs::remove_file(&path) {
            Ok(()) => Ok(()),
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                Err(StoreError::NotFound(key.render()))
            }
            Err(e) => Err(io_error("remove", &path, e)),
        }
    }
}
