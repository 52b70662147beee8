//! On-disk chunk-embedding cache. Entries are keyed by (embedder id,
//! chunk content hash), so a cache file is only reused when both match.
//!
//! Binary layout, little-endian throughout:
//!
//! ```text
//! magic           8 bytes   "TCRQEMB1"
//! embedder_id     u32 len + bytes
//! dimension       u32
//! count           u32
//! entry * count:
//!   chunk_id      u32 len + bytes
//!   content_hash  32 bytes (SHA-256 of chunk text)
//!   vector        dimension * f64
//! ```

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::gateway::EmbeddingVector;

const MAGIC: &[u8; 8] = b"TCRQEMB1";

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("embedding cache is corrupt: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn content_hash(text: &str) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    hasher.finalize().into()
}

/// In-memory view of one embedder's cached chunk vectors.
#[derive(Debug, Clone)]
pub struct EmbeddingCache {
    embedder_id: String,
    dim: usize,
    entries: BTreeMap<String, ([u8; 32], EmbeddingVector)>,
    dirty: bool,
}

impl EmbeddingCache {
    pub fn new(embedder_id: impl Into<String>, dim: usize) -> Self {
        Self {
            embedder_id: embedder_id.into(),
            dim,
            entries: BTreeMap::new(),
            dirty: false,
        }
    }

    /// Load a cache file. A file written for a different embedder or
    /// dimension yields an empty cache; vectors for stale chunk text are
    /// dropped on lookup via the content hash.
    pub fn load(path: &Path, embedder_id: &str, dim: usize) -> Result<Self, CacheError> {
        let mut cache = Self::new(embedder_id, dim);
        let mut file = match std::fs::File::open(path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(cache),
            Err(e) => return Err(e.into()),
        };
        let mut data = Vec::new();
        file.read_to_end(&mut data)?;
        let mut cursor = 0usize;

        let take = |cursor: &mut usize, n: usize| -> Result<&[u8], CacheError> {
            let end = *cursor + n;
            if end > data.len() {
                return Err(CacheError::Corrupt("unexpected end of file".into()));
            }
            let slice = &data[*cursor..end];
            *cursor = end;
            Ok(slice)
        };
        let take_u32 = |cursor: &mut usize| -> Result<u32, CacheError> {
            Ok(u32::from_le_bytes(take(cursor, 4)?.try_into().unwrap()))
        };

        if take(&mut cursor, 8)? != MAGIC {
            return Err(CacheError::Corrupt("bad magic".into()));
        }
        let id_len = take_u32(&mut cursor)? as usize;
        let file_id = String::from_utf8(take(&mut cursor, id_len)?.to_vec())
            .map_err(|_| CacheError::Corrupt("embedder id not UTF-8".into()))?;
        let file_dim = take_u32(&mut cursor)? as usize;
        let count = take_u32(&mut cursor)? as usize;
        if file_id != embedder_id || file_dim != dim {
            log::warn!(
                "embedding cache {path:?} is for {file_id}/d{file_dim}, ignoring"
            );
            return Ok(cache);
        }
        for _ in 0..count {
            let key_len = take_u32(&mut cursor)? as usize;
            let chunk_id = String::from_utf8(take(&mut cursor, key_len)?.to_vec())
                .map_err(|_| CacheError::Corrupt("chunk id not UTF-8".into()))?;
            let hash: [u8; 32] = take(&mut cursor, 32)?.try_into().unwrap();
            let mut values = Vec::with_capacity(dim);
            for _ in 0..dim {
                values.push(f64::from_le_bytes(take(&mut cursor, 8)?.try_into().unwrap()));
            }
            cache
                .entries
                .insert(chunk_id, (hash, EmbeddingVector::new(values)));
        }
        Ok(cache)
    }

    pub fn get(&self, chunk_id: &str, text: &str) -> Option<&EmbeddingVector> {
        let (hash, vector) = self.entries.get(chunk_id)?;
        (*hash == content_hash(text)).then_some(vector)
    }

    pub fn put(&mut self, chunk_id: &str, text: &str, vector: EmbeddingVector) {
        debug_assert_eq!(vector.dim(), self.dim);
        self.entries
            .insert(chunk_id.to_string(), (content_hash(text), vector));
        self.dirty = true;
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_dirty(&self) -> bool {
        self.dirty
    }

    pub fn save(&self, path: &Path) -> Result<(), CacheError> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.embedder_id.len() as u32).to_le_bytes());
        out.extend_from_slice(self.embedder_id.as_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        for (chunk_id, (hash, vector)) in &self.entries {
            out.extend_from_slice(&(chunk_id.len() as u32).to_le_bytes());
            out.extend_from_slice(chunk_id.as_bytes());
            out.extend_from_slice(hash);
            for v in vector.values() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let mut file = std::fs::File::create(path)?;
        file.write_all(&out)?;
        Ok(())
    }
}
