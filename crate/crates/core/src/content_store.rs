//! Deduplicating content-addressed blob store.
//!
//! Blobs are named by the SHA-256 of their bytes. The on-disk layout is
//! `<root>/blobs/<first two hex chars>/<full hex>`; writes go to a temp file
//! in the same directory and are renamed into place.

use std::collections::hash_map::Entry;
use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::crypto::{hash_content, Digest};

pub const ADDRESS_PREFIX: &str = "cas1-";

/// Content address of a stored blob, rendered as `cas1-<64 hex>`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IpfsHash(Digest);

impl IpfsHash {
    pub fn of(blob: &[u8]) -> Self {
        IpfsHash(hash_content(blob))
    }

    pub fn from_digest(digest: Digest) -> Self {
        IpfsHash(digest)
    }

    pub fn digest(&self) -> &Digest {
        &self.0
    }
}

impl fmt::Display for IpfsHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{ADDRESS_PREFIX}{}", self.0)
    }
}

impl fmt::Debug for IpfsHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "IpfsHash({self})")
    }
}

impl FromStr for IpfsHash {
    type Err = StoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let hex = s
            .strip_prefix(ADDRESS_PREFIX)
            .ok_or_else(|| StoreError::InvalidAddress(s.to_owned()))?;
        Digest::from_hex(hex)
            .map(IpfsHash)
            .map_err(|_| StoreError::InvalidAddress(s.to_owned()))
    }
}

impl Serialize for IpfsHash {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for IpfsHash {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreStats {
    pub blob_count: u64,
    pub total_bytes: u64,
    pub dedup_hits: u64,
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("blob {0} not found")]
    NotFound(IpfsHash),
    #[error("blob {0} failed its integrity check")]
    IntegrityMismatch(IpfsHash),
    #[error("invalid content address {0:?}")]
    InvalidAddress(String),
    #[error("store I/O error: {0}")]
    Io(#[from] io::Error),
}

enum Backend {
    Memory(RwLock<HashMap<IpfsHash, Arc<[u8]>>>),
    Disk { blobs: PathBuf },
}

pub struct ContentStore {
    backend: Backend,
    // Held for the whole of a put so check-then-write is linearizable per address.
    stats: Mutex<StoreStats>,
    tmp_counter: AtomicU64,
}

impl fmt::Debug for ContentStore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mode = match &self.backend {
            Backend::Memory(_) => "memory".to_owned(),
            Backend::Disk { blobs } => blobs.display().to_string(),
        };
        f.debug_struct("ContentStore")
            .field("backend", &mode)
            .field("stats", &self.stats())
            .finish()
    }
}

impl ContentStore {
    pub fn in_memory() -> Self {
        ContentStore {
            backend: Backend::Memory(RwLock::new(HashMap::new())),
            stats: Mutex::new(StoreStats::default()),
            tmp_counter: AtomicU64::new(0),
        }
    }

    /// Opens (creating if needed) a store rooted at `root`. Blob counters are
    /// rebuilt from the directory; `dedup_hits` counts from zero per session.
    pub fn open(root: impl AsRef<Path>) -> Result<Self, StoreError> {
        let blobs = root.as_ref().join("blobs");
        fs::create_dir_all(&blobs)?;
        let mut stats = StoreStats::default();
        for shard in fs::read_dir(&blobs)? {
            let shard = shard?;
            if !shard.file_type()?.is_dir() {
                continue;
            }
            for entry in fs::read_dir(shard.path())? {
                let entry = entry?;
                if entry.file_name().to_string_lossy().starts_with('.') {
                    continue;
                }
                stats.blob_count += 1;
                stats.total_bytes += entry.metadata()?.len();
            }
        }
        Ok(ContentStore {
            backend: Backend::Disk { blobs },
            stats: Mutex::new(stats),
            tmp_counter: AtomicU64::new(0),
        })
    }

    /// Path of the persisted blob for `h`; `None` for the in-memory backend.
    pub fn blob_path(&self, h: &IpfsHash) -> Option<PathBuf> {
        match &self.backend {
            Backend::Memory(_) => None,
            Backend::Disk { blobs } => Some(disk_path(blobs, h)),
        }
    }

    pub fn put(&self, blob: &[u8]) -> Result<IpfsHash, StoreError> {
        let h = IpfsHash::of(blob);
        let mut stats = self.stats.lock().unwrap_or_else(|e| e.into_inner());
        let fresh = match &self.backend {
            Backend::Memory(map) => {
                let mut map = map.write().unwrap_or_else(|e| e.into_inner());
                match map.entry(h) {
                    Entry::Occupied(_) => false,
                    Entry::Vacant(slot) => {
                        slot.insert(Arc::from(blob));
                        true
                    }
                }
            }
            Backend::Disk { blobs } => {
                let path = disk_path(blobs, &h);
                if path.exists() {
                    false
                } else {
                    self.write_atomic(&path, blob)?;
                    true
                }
            }
        };
        if fresh {
            stats.blob_count += 1;
            stats.total_bytes += blob.len() as u64;
        } else {
            stats.dedup_hits += 1;
        }
        Ok(h)
    }

    fn write_atomic(&self, path: &Path, blob: &[u8]) -> Result<(), StoreError> {
        let dir = path.parent().expect("blob paths have a shard directory");
        fs::create_dir_all(dir)?;
        let tmp = dir.join(format!(
            ".tmp-{}-{}",
            std::process::id(),
            self.tmp_counter.fetch_add(1, Ordering::Relaxed)
        ));
        let result = (|| {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(blob)?;
            f.sync_all()?;
            fs::rename(&tmp, path)
        })();
        if result.is_err() {
            let _ = fs::remove_file(&tmp);
        }
        Ok(result?)
    }

    /// Returns the stored bytes after checking they still hash to `h`.
    pub fn get(&self, h: &IpfsHash) -> Result<Vec<u8>, StoreError> {
        let bytes = match &self.backend {
            Backend::Memory(map) => map
                .read()
                .unwrap_or_else(|e| e.into_inner())
                .get(h)
                .map(|b| b.to_vec())
                .ok_or(StoreError::NotFound(*h))?,
            Backend::Disk { blobs } => match fs::read(disk_path(blobs, h)) {
                Ok(bytes) => bytes,
                Err(e) if e.kind() == io::ErrorKind::NotFound => {
                    return Err(StoreError::NotFound(*h))
                }
                Err(e) => return Err(e.into()),
            },
        };
        if hash_content(&bytes) != h.0 {
            return Err(StoreError::IntegrityMismatch(*h));
        }
        Ok(bytes)
    }

    pub fn has(&self, h: &IpfsHash) -> bool {
        match &self.backend {
            Backend::Memory(map) => map
                .read()
                .unwrap_or_else(|e| e.into_inner())
                .contains_key(h),
            Backend::Disk { blobs } => disk_path(blobs, h).is_file(),
        }
    }

    pub fn stats(&self) -> StoreStats {
        *self.stats.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// All stored addresses, in no particular order.
    pub fn addresses(&self) -> Result<Vec<IpfsHash>, StoreError> {
        match &self.backend {
            Backend::Memory(map) => Ok(map
                .read()
                .unwrap_or_else(|e| e.into_inner())
                .keys()
                .copied()
                .collect()),
            Backend::Disk { blobs } => {
                let mut out = Vec::new();
                for shard in fs::read_dir(blobs)? {
                    let shard = shard?;
                    if !shard.file_type()?.is_dir() {
                        continue;
                    }
                    for entry in fs::read_dir(shard.path())? {
                        let name = entry?.file_name();
                        if let Ok(d) = Digest::from_hex(&name.to_string_lossy()) {
                            out.push(IpfsHash(d));
                        }
                    }
                }
                Ok(out)
            }
        }
    }

    /// Removes every blob not in `keep`. Returns the number removed.
    pub fn gc(&self, keep: &HashSet<IpfsHash>) -> Result<usize, StoreError> {
        let mut stats = self.stats.lock().unwrap_or_else(|e| e.into_inner());
        let mut removed = 0;
        for h in self.addresses()? {
            if keep.contains(&h) {
                continue;
            }
            let len = match &self.backend {
                Backend::Memory(map) => map
                    .write()
                    .unwrap_or_else(|e| e.into_inner())
                    .remove(&h)
                    .map(|b| b.len() as u64),
                Backend::Disk { blobs } => {
                    let path = disk_path(blobs, &h);
                    let len = fs::metadata(&path)?.len();
                    fs::remove_file(&path)?;
                    Some(len)
                }
            };
            if let Some(len) = len {
                stats.blob_count -= 1;
                stats.total_bytes = stats.total_bytes.saturating_sub(len);
                removed += 1;
            }
        }
        Ok(removed)
    }
}

fn disk_path(blobs: &Path, h: &IpfsHash) -> PathBuf {
    let hex = h.0.to_hex();
    blobs.join(&hex[..2]).join(hex)
}
