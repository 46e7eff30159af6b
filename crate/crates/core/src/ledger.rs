//! Single-writer, append-only hash chain of upload records.
//!
//! One transaction per block. `block_hash = H(index_be ‖ prev_hash ‖ tx)` and
//! block 0 links to the all-zero digest. Persisted as `<root>/chain.log`, a
//! sequence of `u32be length ‖ block` records where a block is
//! `u64be index ‖ prev_hash ‖ u32be tx_len ‖ tx ‖ block_hash`.

use std::collections::HashMap;
use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::{Mutex, RwLock};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::content_store::IpfsHash;
use crate::crypto::{hash_parts, Digest, DIGEST_LEN};

pub const TRANS_ID_PREFIX: &str = "tx-";
pub const CHAIN_FILE: &str = "chain.log";

#[derive(Debug, Error)]
pub enum LedgerError {
    #[error("malformed transaction record: {0}")]
    Malformed(&'static str),
    #[error("transaction {0} not found")]
    NotFound(TransId),
    #[error("invalid transaction id {0:?}")]
    InvalidId(String),
    #[error("ledger is corrupt; refusing to append")]
    Corrupt,
    #[error("ledger I/O error: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransactionRecord {
    pub group_id: String,
    pub user_id: String,
    pub file_hash: Digest,
    pub ipfs_hash: IpfsHash,
    pub key_version: u64,
}

fn put_field(out: &mut Vec<u8>, field: &[u8]) {
    out.extend_from_slice(&(field.len() as u32).to_be_bytes());
    out.extend_from_slice(field);
}

/// Cursor over a byte slice for the fixed big-endian encodings used here.
struct Reader<'a>(&'a [u8]);

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        if self.0.len() < n {
            return None;
        }
        let (head, tail) = self.0.split_at(n);
        self.0 = tail;
        Some(head)
    }

    fn u32(&mut self) -> Option<u32> {
        self.take(4)
            .map(|b| u32::from_be_bytes(b.try_into().unwrap()))
    }

    fn u64(&mut self) -> Option<u64> {
        self.take(8)
            .map(|b| u64::from_be_bytes(b.try_into().unwrap()))
    }

    fn digest(&mut self) -> Option<Digest> {
        self.take(DIGEST_LEN)
            .map(|b| Digest::new(b.try_into().unwrap()))
    }

    fn field(&mut self) -> Option<&'a [u8]> {
        let len = self.u32()? as usize;
        self.take(len)
    }

    fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TransactionRecord {
    pub fn validate(&self) -> Result<(), LedgerError> {
        if self.group_id.is_empty() {
            return Err(LedgerError::Malformed("empty group_id"));
        }
        if self.user_id.is_empty() {
            return Err(LedgerError::Malformed("empty user_id"));
        }
        if self.key_version == 0 {
            return Err(LedgerError::Malformed("key_version must be at least 1"));
        }
        Ok(())
    }

    /// Canonical bytes: length-prefixed `group_id`, `user_id`, `file_hash`,
    /// `ipfs_hash` digest, then `key_version` as a bare u64be.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(
            4 * 4 + self.group_id.len() + self.user_id.len() + 2 * DIGEST_LEN + 8,
        );
        put_field(&mut out, self.group_id.as_bytes());
        put_field(&mut out, self.user_id.as_bytes());
        put_field(&mut out, self.file_hash.as_bytes());
        put_field(&mut out, self.ipfs_hash.digest().as_bytes());
        out.extend_from_slice(&self.key_version.to_be_bytes());
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, LedgerError> {
        const TRUNCATED: LedgerError = LedgerError::Malformed("truncated record");
        let mut r = Reader(bytes);
        let text = |b: &[u8]| {
            String::from_utf8(b.to_vec()).map_err(|_| LedgerError::Malformed("non-UTF-8 id"))
        };
        let group_id = text(r.field().ok_or(TRUNCATED)?)?;
        let user_id = text(r.field().ok_or(TRUNCATED)?)?;
        let digest = |b: Option<&[u8]>| -> Result<Digest, LedgerError> {
            let b = b.ok_or(TRUNCATED)?;
            let arr: [u8; DIGEST_LEN] = b
                .try_into()
                .map_err(|_| LedgerError::Malformed("digest length"))?;
            Ok(Digest::new(arr))
        };
        let file_hash = digest(r.field())?;
        let ipfs_hash = IpfsHash::from_digest(digest(r.field())?);
        let key_version = r.u64().ok_or(TRUNCATED)?;
        if !r.is_empty() {
            return Err(LedgerError::Malformed("trailing bytes"));
        }
        let record = TransactionRecord {
            group_id,
            user_id,
            file_hash,
            ipfs_hash,
            key_version,
        };
        record.validate()?;
        Ok(record)
    }
}

/// Ledger handle for one record: `H(index_be ‖ canonical tx)`, rendered `tx-<hex>`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TransId(Digest);

impl TransId {
    pub fn compute(index: u64, tx: &[u8]) -> Self {
        TransId(hash_parts(&[&index.to_be_bytes(), tx]))
    }

    pub fn digest(&self) -> &Digest {
        &self.0
    }
}

impl fmt::Display for TransId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{TRANS_ID_PREFIX}{}", self.0)
    }
}

impl fmt::Debug for TransId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TransId({self})")
    }
}

impl FromStr for TransId {
    type Err = LedgerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.strip_prefix(TRANS_ID_PREFIX)
            .and_then(|hex| Digest::from_hex(hex).ok())
            .map(TransId)
            .ok_or_else(|| LedgerError::InvalidId(s.to_owned()))
    }
}

impl Serialize for TransId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TransId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub index: u64,
    pub prev_hash: Digest,
    pub tx: Vec<u8>,
    pub block_hash: Digest,
}

impl Block {
    pub fn compute_hash(index: u64, prev_hash: &Digest, tx: &[u8]) -> Digest {
        hash_parts(&[&index.to_be_bytes(), prev_hash.as_bytes(), tx])
    }

    fn new(index: u64, prev_hash: Digest, tx: Vec<u8>) -> Self {
        let block_hash = Self::compute_hash(index, &prev_hash, &tx);
        Block {
            index,
            prev_hash,
            tx,
            block_hash,
        }
    }

    pub fn trans_id(&self) -> TransId {
        TransId::compute(self.index, &self.tx)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 2 * DIGEST_LEN + 4 + self.tx.len());
        out.extend_from_slice(&self.index.to_be_bytes());
        out.extend_from_slice(self.prev_hash.as_bytes());
        put_field(&mut out, &self.tx);
        out.extend_from_slice(self.block_hash.as_bytes());
        out
    }

    pub fn decode(bytes: &[u8]) -> Option<Self> {
        let mut r = Reader(bytes);
        let index = r.u64()?;
        let prev_hash = r.digest()?;
        let tx = r.field()?.to_vec();
        let block_hash = r.digest()?;
        r.is_empty().then_some(Block {
            index,
            prev_hash,
            tx,
            block_hash,
        })
    }
}

/// Splits a `chain.log` image into blocks. Stops at the first framing error
/// and reports whether the whole input was consumed.
fn parse_log(bytes: &[u8]) -> (Vec<Block>, bool) {
    let mut r = Reader(bytes);
    let mut blocks = Vec::new();
    while !r.is_empty() {
        let Some(raw) = r.field() else {
            return (blocks, false);
        };
        match Block::decode(raw) {
            Some(b) => blocks.push(b),
            None => return (blocks, false),
        }
    }
    (blocks, true)
}

/// Checks the hash links of `blocks` from genesis.
pub fn verify_blocks(blocks: &[Block]) -> bool {
    let mut prev = Digest::ZERO;
    for (i, b) in blocks.iter().enumerate() {
        if b.index != i as u64
            || b.prev_hash != prev
            || Block::compute_hash(b.index, &b.prev_hash, &b.tx) != b.block_hash
            || TransactionRecord::decode(&b.tx).is_err()
        {
            return false;
        }
        prev = b.block_hash;
    }
    true
}

/// Verifies a complete `chain.log` image.
pub fn verify_log_bytes(bytes: &[u8]) -> bool {
    let (blocks, complete) = parse_log(bytes);
    complete && verify_blocks(&blocks)
}

#[derive(Default)]
struct Chain {
    blocks: Vec<Block>,
    by_id: HashMap<TransId, usize>,
    corrupt: bool,
}

pub struct Ledger {
    chain: RwLock<Chain>,
    path: Option<PathBuf>,
    // Appends are serialized through this lock.
    writer: Mutex<Option<File>>,
}

impl fmt::Debug for Ledger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Ledger")
            .field("path", &self.path)
            .field("height", &self.height())
            .finish()
    }
}

impl Ledger {
    pub fn in_memory() -> Self {
        Ledger {
            chain: RwLock::new(Chain::default()),
            path: None,
            writer: Mutex::new(None),
        }
    }

    /// Opens `<root>/chain.log`. A damaged log still opens so it can be
    /// inspected and verified, but further appends are refused.
    pub fn open(root: impl AsRef<Path>) -> Result<Self, LedgerError> {
        fs::create_dir_all(root.as_ref())?;
        let path = root.as_ref().join(CHAIN_FILE);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(e.into()),
        };
        let (blocks, complete) = parse_log(&bytes);
        let corrupt = !complete || !verify_blocks(&blocks);
        let by_id = blocks
            .iter()
            .enumerate()
            .map(|(i, b)| (b.trans_id(), i))
            .collect();
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(Ledger {
            chain: RwLock::new(Chain {
                blocks,
                by_id,
                corrupt,
            }),
            path: Some(path),
            writer: Mutex::new(Some(file)),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn submit(&self, tx: &TransactionRecord) -> Result<TransId, LedgerError> {
        tx.validate()?;
        let mut writer = self.writer.lock().unwrap_or_else(|e| e.into_inner());
        let (index, prev) = {
            let chain = self.chain.read().unwrap_or_else(|e| e.into_inner());
            if chain.corrupt {
                return Err(LedgerError::Corrupt);
            }
            let prev = chain.blocks.last().map_or(Digest::ZERO, |b| b.block_hash);
            (chain.blocks.len() as u64, prev)
        };
        let block = Block::new(index, prev, tx.encode());
        if let Some(file) = writer.as_mut() {
            let encoded = block.encode();
            let mut record = Vec::with_capacity(4 + encoded.len());
            put_field(&mut record, &encoded);
            file.write_all(&record)?;
            file.sync_data()?;
        }
        let id = block.trans_id();
        let mut chain = self.chain.write().unwrap_or_else(|e| e.into_inner());
        let index = chain.blocks.len();
        chain.by_id.insert(id, index);
        chain.blocks.push(block);
        Ok(id)
    }

    pub fn get_transaction(&self, id: &TransId) -> Result<TransactionRecord, LedgerError> {
        let chain = self.chain.read().unwrap_or_else(|e| e.into_inner());
        let idx = *chain.by_id.get(id).ok_or(LedgerError::NotFound(*id))?;
        TransactionRecord::decode(&chain.blocks[idx].tx)
    }

    /// Recomputes every link. For a persisted ledger this re-reads the log
    /// from disk, so on-disk tampering is caught even after a clean open.
    pub fn verify_chain(&self) -> bool {
        let chain = self.chain.read().unwrap_or_else(|e| e.into_inner());
        let Some(path) = &self.path else {
            return verify_blocks(&chain.blocks);
        };
        let Ok(bytes) = fs::read(path) else {
            return false;
        };
        let (disk, complete) = parse_log(&bytes);
        complete
            && disk.len() >= chain.blocks.len()
            && disk.iter().zip(&chain.blocks).all(|(d, m)| d == m)
            && verify_blocks(&disk)
    }

    pub fn height(&self) -> u64 {
        self.chain
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .blocks
            .len() as u64
    }

    pub fn blocks(&self) -> Vec<Block> {
        self.chain
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .blocks
            .clone()
    }

    /// `(trans_id, record)` for every decodable block, in chain order.
    pub fn entries(&self) -> Vec<(TransId, TransactionRecord)> {
        let chain = self.chain.read().unwrap_or_else(|e| e.into_inner());
        chain
            .blocks
            .iter()
            .filter_map(|b| Some((b.trans_id(), TransactionRecord::decode(&b.tx).ok()?)))
            .collect()
    }
}
