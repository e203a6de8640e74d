use std::collections::BTreeMap;
use std::sync::{Arc, RwLock};

use super::{Digest, digest};

/// In-process content-addressed store: the key of every blob is its digest.
/// Reads run concurrently; writes are serialized by the lock.
#[derive(Debug, Default)]
pub struct BlobStore {
    blobs: RwLock<BTreeMap<Digest, Arc<[u8]>>>,
}

impl BlobStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn put(&self, content: &[u8]) -> Digest {
        let key = digest(content);
        self.blobs
            .write()
            .expect("blob store lock poisoned")
            .entry(key)
            .or_insert_with(|| Arc::from(content));
        key
    }

    pub fn get(&self, key: &Digest) -> Option<Arc<[u8]>> {
        self.blobs.read().expect("blob store lock poisoned").get(key).cloned()
    }

    pub fn contains(&self, key: &Digest) -> bool {
        self.blobs.read().expect("blob store lock poisoned").contains_key(key)
    }

    pub fn len(&self) -> usize {
        self.blobs.read().expect("blob store lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
