//! In-process backend for tests, dry runs, and fixtures.

use std::collections::BTreeMap;
use std::ops::Bound;
use std::sync::Mutex;

use crate::key::{KeyPrefix, StorageKey};

use super::{KeyIter, ObjectStore, PutReceipt, StoreError};

#[derive(Default)]
pub struct MemoryStore {
    objects: Mutex<BTreeMap<String, Vec<u8>>>,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of stored objects, for test assertions.
    pub fn len(&self) -> usize {
        self.objects.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl ObjectStore for MemoryStore {
    fn put(&self, key: &StorageKey, body: &[u8], overwrite: bool) -> Result<PutReceipt, StoreError> {
        if body.is_empty() {
            return Err(StoreError::EmptyBody(key.render()));
        }
        let rendered = key.render();
        let mut objects = self.objects.lock().unwrap();
        if !overwrite && objects.contains_key(&rendered) {
            return Err(StoreError::AlreadyExists(rendered));
        }
        objects.insert(rendered, body.to_vec());
        Ok(PutReceipt {
            key: key.clone(),
            byte_count: body.len() as u64,
        })
    }

    fn get(&self, key: &StorageKey) -> Result<Vec<u8>, StoreError> {
        self.objects
            .lock()
            .unwrap()
            .get(&key.render())
            .cloned()
            .ok_or_else(|| StoreError::NotFound(key.render()))
    }

    fn exists(&self, key: &StorageKey) -> Result<bool, StoreError> {
        Ok(self.objects.lock().unwrap().contains_key(&key.render()))
    }

    fn list<'a>(&'a self, prefix: &KeyPrefix) -> Result<KeyIter<'a>, StoreError> {
        // Snapshot the matching range under the lock; the map is ordered,
        // so the range is already in rendered-key order.
        let objects = self.objects.lock().unwrap();
        let start = prefix.as_str().to_string();
        let rendered: Vec<String> = objects
            .range::<String, _>((Bound::Included(&start), Bound::Unbounded))
            .map(|(k, _)| k.clone())
            .take_while(|k| k.starts_with(prefix.as_str()))
            .collect();
        Ok(Box::new(rendered.into_iter().map(|r| {
            StorageKey::parse(&r).map_err(StoreError::from)
        })))
    }

    fn delete(&self, key: &StorageKey) -> Result<(), StoreError> {
        match self.objects.lock().unwrap().remove(&key.render()) {
            Some(_) => Ok(()),
            None => Err(StoreError::NotFound(key.render())),
        }
    }
}
