//! The trusted proxy: group registration and membership, the per-group key
//! mapping table, and the upload, download and revocation flows against the
//! content store and ledger.
//!
//! Mutations on one group are serialized by that group's lock; different
//! groups proceed independently. Every operation validates its inputs before
//! touching the store or ledger, so a rejected call has no side effects.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard, RwLock};

use rand::rngs::OsRng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::content_store::{ContentStore, IpfsHash, StoreError};
use crate::crypto::{
    self, decrypt_file, encrypt_file_with, generate_group_key_with, hash_content, hash_parts,
    unwrap_key, verify, wrap_key_with, Ciphertext, CryptoError, Digest, EncryptionPublicKey,
    GroupKey, SecureRng, Signature, SigningPublicKey, WrappedKey,
};
use crate::ledger::{Ledger, LedgerError, TransId, TransactionRecord};
use crate::messages;

pub const STATE_FILE: &str = "proxy.state";
pub const GROUP_ID_PREFIX: &str = "grp-";
const STATE_FORMAT: &str = "groupvault-proxy-state";
const STATE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ProxyError {
    #[error("unknown group {0}")]
    UnknownGroup(String),
    #[error("user {user_id} is not a member of group {group_id}")]
    NotMember { group_id: String, user_id: String },
    #[error("signature verification failed")]
    BadSignature,
    #[error("request is not signed by the group owner")]
    NotOwner,
    #[error("no pending join request from {0}")]
    UnknownCandidate(String),
    #[error("unknown user {0}")]
    UnknownUser(String),
    #[error("user {0} is already a member")]
    DuplicateMember(String),
    #[error("user {0} already has a pending join request")]
    DuplicatePending(String),
    #[error("the group owner cannot be revoked")]
    CannotRevokeOwner,
    #[error("{0} is not in this group's file index")]
    NotInIndex(IpfsHash),
    #[error("{requested} was superseded by re-encryption; current address is {current}")]
    Superseded {
        requested: IpfsHash,
        current: IpfsHash,
    },
    #[error("user id must be non-empty")]
    EmptyUserId,
    #[error("stored file does not match its recorded hash")]
    FileHashMismatch,
    #[error(transparent)]
    Crypto(#[from] CryptoError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error("proxy state file: {0}")]
    State(String),
    #[error("proxy state I/O error: {0}")]
    Io(#[from] io::Error),
}

impl ProxyError {
    /// Stable machine-readable error code.
    pub fn code(&self) -> &'static str {
        match self {
            ProxyError::UnknownGroup(_) => "unknown_group",
            ProxyError::NotMember { .. } => "not_member",
            ProxyError::BadSignature => "bad_signature",
            ProxyError::NotOwner => "not_owner",
            ProxyError::UnknownCandidate(_) => "unknown_candidate",
            ProxyError::UnknownUser(_) => "unknown_user",
            ProxyError::DuplicateMember(_) => "duplicate_member",
            ProxyError::DuplicatePending(_) => "duplicate_pending",
            ProxyError::CannotRevokeOwner => "cannot_revoke_owner",
            ProxyError::NotInIndex(_) => "not_in_index",
            ProxyError::Superseded { .. } => "superseded",
            ProxyError::EmptyUserId => "empty_user_id",
            ProxyError::FileHashMismatch => "file_hash_mismatch",
            ProxyError::Crypto(_) => "crypto",
            ProxyError::Store(StoreError::IntegrityMismatch(_)) => "integrity_mismatch",
            ProxyError::Store(StoreError::NotFound(_)) => "blob_not_found",
            ProxyError::Store(_) => "store",
            ProxyError::Ledger(_) => "ledger",
            ProxyError::State(_) => "state",
            ProxyError::Io(_) => "io",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemberEntry {
    pub user_id: String,
    pub sig_public: SigningPublicKey,
    pub enc_public: EncryptionPublicKey,
    pub joined_at: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JoinRequest {
    pub user_id: String,
    pub sig_public: SigningPublicKey,
    pub enc_public: EncryptionPublicKey,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileIndexEntry {
    pub file_hash: Digest,
    pub current_ipfs_hash: IpfsHash,
    pub latest_trans_id: TransId,
    pub uploader: String,
}

/// One row of the mapping table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupState {
    pub group_id: String,
    pub owner: String,
    #[serde(with = "group_key_serde")]
    current_key: GroupKey,
    pub members: BTreeMap<String, MemberEntry>,
    pub pending: BTreeMap<String, JoinRequest>,
    pub files: Vec<FileIndexEntry>,
    /// Addresses replaced by re-encryption, mapped to their current address.
    pub superseded: BTreeMap<IpfsHash, IpfsHash>,
    next_member_seq: u64,
}

impl GroupState {
    pub fn key_version(&self) -> u64 {
        self.current_key.version()
    }

    fn member(&self, user_id: &str) -> Result<&MemberEntry, ProxyError> {
        self.members
            .get(user_id)
            .ok_or_else(|| ProxyError::NotMember {
                group_id: self.group_id.clone(),
                user_id: user_id.to_owned(),
            })
    }

    fn authenticate_member(
        &self,
        user_id: &str,
        message: &[u8],
        signature: &Signature,
    ) -> Result<&MemberEntry, ProxyError> {
        let member = self.member(user_id)?;
        if !verify(&member.sig_public, message, signature) {
            return Err(ProxyError::BadSignature);
        }
        Ok(member)
    }

    fn authenticate_owner(&self, message: &[u8], signature: &Signature) -> Result<(), ProxyError> {
        let owner = self
            .members
            .get(&self.owner)
            .expect("owner is always a member");
        if !verify(&owner.sig_public, message, signature) {
            return Err(ProxyError::NotOwner);
        }
        Ok(())
    }
}

mod group_key_serde {
    use super::*;
    use serde::{Deserializer, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Repr {
        version: u64,
        material: String,
    }

    pub fn serialize<S: Serializer>(key: &GroupKey, s: S) -> Result<S::Ok, S::Error> {
        Repr {
            version: key.version(),
            material: hex::encode(key.key_material()),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<GroupKey, D::Error> {
        use serde::de::Error;
        let repr = Repr::deserialize(d)?;
        let zeroizing = zeroize::Zeroizing::new(repr.material);
        let mut material = zeroize::Zeroizing::new([0u8; crypto::GROUP_KEY_LEN]);
        hex::decode_to_slice(zeroizing.as_str(), material.as_mut()).map_err(D::Error::custom)?;
        GroupKey::from_parts(*material, repr.version).map_err(D::Error::custom)
    }
}

/// The proxy's complete policy store, as persisted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MappingTable {
    format: String,
    version: u32,
    pub registrations: u64,
    pub groups: BTreeMap<String, GroupState>,
}

impl Default for MappingTable {
    fn default() -> Self {
        MappingTable {
            format: STATE_FORMAT.to_owned(),
            version: STATE_VERSION,
            registrations: 0,
            groups: BTreeMap::new(),
        }
    }
}

impl MappingTable {
    pub fn to_bytes(&self) -> Vec<u8> {
        serde_json::to_vec_pretty(self).expect("mapping table serializes")
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ProxyError> {
        let table: MappingTable =
            serde_json::from_slice(bytes).map_err(|e| ProxyError::State(e.to_string()))?;
        if table.format != STATE_FORMAT || table.version != STATE_VERSION {
            return Err(ProxyError::State(format!(
                "unsupported state format {} v{}",
                table.format, table.version
            )));
        }
        Ok(table)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UploadReceipt {
    pub trans_id: TransId,
    pub ipfs_hash: IpfsHash,
    pub file_hash: Digest,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JoinAck {
    pub group_id: String,
    pub user_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DownloadResponse {
    pub ciphertext: Ciphertext,
    pub wrapped_key: WrappedKey,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevocationReport {
    pub group_id: String,
    pub revoked_user: String,
    pub new_key_version: u64,
    pub reencrypted_files: usize,
    pub wrapped_keys_issued: usize,
    pub new_trans_ids: Vec<TransId>,
    pub wrapped_keys: Vec<WrappedKey>,
}

/// Read-only view of one group, without key material.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub group_id: String,
    pub owner: String,
    pub key_version: u64,
    pub members: Vec<String>,
    pub pending: Vec<String>,
    pub file_count: usize,
}

pub struct Proxy {
    store: Arc<ContentStore>,
    ledger: Arc<Ledger>,
    groups: RwLock<BTreeMap<String, Arc<Mutex<GroupState>>>>,
    // Last committed table; the state file always mirrors it.
    committed: Mutex<MappingTable>,
    state_path: Option<PathBuf>,
    rng: Mutex<Box<dyn SecureRng>>,
}

impl std::fmt::Debug for Proxy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Proxy")
            .field("state_path", &self.state_path)
            .field("store", &self.store)
            .field("ledger", &self.ledger)
            .finish_non_exhaustive()
    }
}

fn lock<T: ?Sized>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

impl Proxy {
    pub fn new(store: Arc<ContentStore>, ledger: Arc<Ledger>) -> Self {
        Proxy {
            store,
            ledger,
            groups: RwLock::new(BTreeMap::new()),
            committed: Mutex::new(MappingTable::default()),
            state_path: None,
            rng: Mutex::new(Box::new(OsRng)),
        }
    }

    pub fn in_memory() -> Self {
        Self::new(
            Arc::new(ContentStore::in_memory()),
            Arc::new(Ledger::in_memory()),
        )
    }

    /// Opens the proxy, store and ledger under one state directory.
    pub fn open(root: impl AsRef<Path>) -> Result<Self, ProxyError> {
        let root = root.as_ref();
        fs::create_dir_all(root)?;
        let store = Arc::new(ContentStore::open(root)?);
        let ledger = Arc::new(Ledger::open(root)?);
        let state_path = root.join(STATE_FILE);
        let table = match fs::read(&state_path) {
            Ok(bytes) => MappingTable::from_bytes(&bytes)?,
            Err(e) if e.kind() == io::ErrorKind::NotFound => MappingTable::default(),
            Err(e) => return Err(e.into()),
        };
        let groups = table
            .groups
            .iter()
            .map(|(id, g)| (id.clone(), Arc::new(Mutex::new(g.clone()))))
            .collect();
        Ok(Proxy {
            store,
            ledger,
            groups: RwLock::new(groups),
            committed: Mutex::new(table),
            state_path: Some(state_path),
            rng: Mutex::new(Box::new(OsRng)),
        })
    }

    /// Replaces the RNG used for group keys, nonces and wraps.
    pub fn with_rng(self, rng: impl SecureRng + 'static) -> Self {
        *lock(&self.rng) = Box::new(rng);
        self
    }

    pub fn store(&self) -> &Arc<ContentStore> {
        &self.store
    }

    pub fn ledger(&self) -> &Arc<Ledger> {
        &self.ledger
    }

    /// Serialized mapping table, byte-identical to the persisted state file.
    pub fn state_bytes(&self) -> Vec<u8> {
        lock(&self.committed).to_bytes()
    }

    pub fn group_ids(&self) -> Vec<String> {
        self.groups
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .keys()
            .cloned()
            .collect()
    }

    pub fn group_summary(&self, group_id: &str) -> Result<GroupSummary, ProxyError> {
        let group = self.group(group_id)?;
        let g = lock(&group);
        Ok(GroupSummary {
            group_id: g.group_id.clone(),
            owner: g.owner.clone(),
            key_version: g.key_version(),
            members: g.members.keys().cloned().collect(),
            pending: g.pending.keys().cloned().collect(),
            file_count: g.files.len(),
        })
    }

    fn group(&self, group_id: &str) -> Result<Arc<Mutex<GroupState>>, ProxyError> {
        self.groups
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .get(group_id)
            .cloned()
            .ok_or_else(|| ProxyError::UnknownGroup(group_id.to_owned()))
    }

    fn write_state(&self, table: &MappingTable) -> Result<(), ProxyError> {
        let Some(path) = &self.state_path else {
            return Ok(());
        };
        let tmp = path.with_extension("state.tmp");
        let mut opts = fs::OpenOptions::new();
        opts.write(true).create(true).truncate(true);
        #[cfg(unix)]
        {
            use std::os::unix::fs::OpenOptionsExt;
            opts.mode(0o600);
        }
        let mut f = opts.open(&tmp)?;
        f.write_all(&table.to_bytes())?;
        f.sync_all()?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    /// Commits one group's new state: persist first, then publish in memory.
    fn commit(&self, live: &mut GroupState, next: GroupState) -> Result<(), ProxyError> {
        let mut committed = lock(&self.committed);
        let mut table = committed.clone();
        table.groups.insert(next.group_id.clone(), next.clone());
        self.write_state(&table)?;
        *committed = table;
        *live = next;
        Ok(())
    }

    pub fn register_owner(
        &self,
        user_id: &str,
        sig_public: SigningPublicKey,
        enc_public: EncryptionPublicKey,
    ) -> Result<String, ProxyError> {
        if user_id.is_empty() {
            return Err(ProxyError::EmptyUserId);
        }
        let key = generate_group_key_with(&mut *lock(&self.rng), 1)?;

        let mut groups = self.groups.write().unwrap_or_else(|e| e.into_inner());
        let mut committed = lock(&self.committed);
        let seq = committed.registrations;
        let group_id = format!(
            "{GROUP_ID_PREFIX}{}",
            hash_parts(&[user_id.as_bytes(), &[0], &seq.to_be_bytes()])
        );
        let state = GroupState {
            group_id: group_id.clone(),
            owner: user_id.to_owned(),
            current_key: key,
            members: BTreeMap::from([(
                user_id.to_owned(),
                MemberEntry {
                    user_id: user_id.to_owned(),
                    sig_public,
                    enc_public,
                    joined_at: 0,
                },
            )]),
            pending: BTreeMap::new(),
            files: Vec::new(),
            superseded: BTreeMap::new(),
            next_member_seq: 1,
        };
        let mut table = committed.clone();
        table.registrations = seq + 1;
        table.groups.insert(group_id.clone(), state.clone());
        self.write_state(&table)?;
        *committed = table;
        groups.insert(group_id.clone(), Arc::new(Mutex::new(state)));
        Ok(group_id)
    }

    pub fn upload(
        &self,
        group_id: &str,
        user_id: &str,
        file: &[u8],
        signature: &Signature,
    ) -> Result<UploadReceipt, ProxyError> {
        let group = self.group(group_id)?;
        let mut g = lock(&group);
        let file_hash = hash_content(file);
        g.authenticate_member(user_id, &messages::upload(&file_hash), signature)?;

        // Identical content already indexed: re-put the existing ciphertext so
        // the address dedups instead of minting a fresh nonce.
        let existing = g.files.iter().position(|f| f.file_hash == file_hash);
        let ipfs_hash = match existing {
            Some(i) => {
                let blob = self.store.get(&g.files[i].current_ipfs_hash)?;
                self.store.put(&blob)?
            }
            None => {
                let ct = encrypt_file_with(&mut *lock(&self.rng), &g.current_key, file)?;
                self.store.put(&ct.to_bytes())?
            }
        };
        let trans_id = self.ledger.submit(&TransactionRecord {
            group_id: group_id.to_owned(),
            user_id: user_id.to_owned(),
            file_hash,
            ipfs_hash,
            key_version: g.key_version(),
        })?;

        let mut next = g.clone();
        let entry = FileIndexEntry {
            file_hash,
            current_ipfs_hash: ipfs_hash,
            latest_trans_id: trans_id,
            uploader: user_id.to_owned(),
        };
        match existing {
            Some(i) => next.files[i] = entry,
            None => next.files.push(entry),
        }
        self.commit(&mut g, next)?;
        Ok(UploadReceipt {
            trans_id,
            ipfs_hash,
            file_hash,
        })
    }

    pub fn request_join(
        &self,
        group_id: &str,
        user_id: &str,
        sig_public: SigningPublicKey,
        enc_public: EncryptionPublicKey,
    ) -> Result<JoinAck, ProxyError> {
        if user_id.is_empty() {
            return Err(ProxyError::EmptyUserId);
        }
        let group = self.group(group_id)?;
        let mut g = lock(&group);
        if g.members.contains_key(user_id) {
            return Err(ProxyError::DuplicateMember(user_id.to_owned()));
        }
        if g.pending.contains_key(user_id) {
            return Err(ProxyError::DuplicatePending(user_id.to_owned()));
        }
        let mut next = g.clone();
        next.pending.insert(
            user_id.to_owned(),
            JoinRequest {
                user_id: user_id.to_owned(),
                sig_public,
                enc_public,
            },
        );
        self.commit(&mut g, next)?;
        Ok(JoinAck {
            group_id: group_id.to_owned(),
            user_id: user_id.to_owned(),
        })
    }

    pub fn approve_join(
        &self,
        group_id: &str,
        candidate: &str,
        owner_signature: &Signature,
    ) -> Result<MemberEntry, ProxyError> {
        let group = self.group(group_id)?;
        let mut g = lock(&group);
        g.authenticate_owner(
            &messages::join_approval(group_id, candidate),
            owner_signature,
        )?;
        if g.members.contains_key(candidate) {
            return Err(ProxyError::DuplicateMember(candidate.to_owned()));
        }
        let mut next = g.clone();
        let request = next
            .pending
            .remove(candidate)
            .ok_or_else(|| ProxyError::UnknownCandidate(candidate.to_owned()))?;
        let entry = MemberEntry {
            user_id: request.user_id,
            sig_public: request.sig_public,
            enc_public: request.enc_public,
            joined_at: next.next_member_seq,
        };
        next.next_member_seq += 1;
        next.members.insert(candidate.to_owned(), entry.clone());
        self.commit(&mut g, next)?;
        Ok(entry)
    }

    pub fn download(
        &self,
        group_id: &str,
        user_id: &str,
        ipfs_hash: &IpfsHash,
        signature: &Signature,
    ) -> Result<DownloadResponse, ProxyError> {
        let group = self.group(group_id)?;
        let g = lock(&group);
        let member = g.authenticate_member(
            user_id,
            &messages::download(group_id, user_id, ipfs_hash),
            signature,
        )?;
        if !g.files.iter().any(|f| &f.current_ipfs_hash == ipfs_hash) {
            return Err(match g.superseded.get(ipfs_hash) {
                Some(current) => ProxyError::Superseded {
                    requested: *ipfs_hash,
                    current: *current,
                },
                None => ProxyError::NotInIndex(*ipfs_hash),
            });
        }
        let ciphertext = Ciphertext::from_bytes(&self.store.get(ipfs_hash)?)?;
        let wrapped_key = wrap_key_with(
            &mut *lock(&self.rng),
            &member.enc_public,
            &g.current_key,
            group_id,
            user_id,
        )?;
        Ok(DownloadResponse {
            ciphertext,
            wrapped_key,
        })
    }

    pub fn list_group_files(
        &self,
        group_id: &str,
        user_id: &str,
        signature: &Signature,
    ) -> Result<Vec<FileIndexEntry>, ProxyError> {
        let group = self.group(group_id)?;
        let g = lock(&group);
        g.authenticate_member(user_id, &messages::list_files(group_id, user_id), signature)?;
        Ok(g.files.clone())
    }

    /// Removes a member, rotates the group key and re-encrypts every indexed
    /// file. All-or-nothing with respect to the mapping table.
    pub fn revoke(
        &self,
        group_id: &str,
        revoked_user: &str,
        owner_signature: &Signature,
    ) -> Result<RevocationReport, ProxyError> {
        let group = self.group(group_id)?;
        let mut g = lock(&group);
        g.authenticate_owner(&messages::revoke(group_id, revoked_user), owner_signature)?;
        if revoked_user == g.owner {
            return Err(ProxyError::CannotRevokeOwner);
        }
        if !g.members.contains_key(revoked_user) {
            return Err(ProxyError::UnknownUser(revoked_user.to_owned()));
        }

        let mut next = g.clone();
        next.members.remove(revoked_user);
        let new_key = generate_group_key_with(&mut *lock(&self.rng), g.key_version() + 1)?;

        // Re-encrypt everything before touching the store or the ledger.
        let mut reencrypted = Vec::with_capacity(g.files.len());
        for entry in &g.files {
            let old = Ciphertext::from_bytes(&self.store.get(&entry.current_ipfs_hash)?)?;
            let plaintext = zeroize::Zeroizing::new(decrypt_file(&g.current_key, &old)?);
            if hash_content(&plaintext) != entry.file_hash {
                return Err(ProxyError::FileHashMismatch);
            }
            let ct = encrypt_file_with(&mut *lock(&self.rng), &new_key, &plaintext)?;
            reencrypted.push(ct.to_bytes());
        }
        let new_blobs = reencrypted
            .iter()
            .map(|ct| self.store.put(ct))
            .collect::<Result<Vec<_>, _>>()?;

        let mut new_trans_ids = Vec::with_capacity(new_blobs.len());
        for (entry, new_hash) in next.files.iter_mut().zip(&new_blobs) {
            let trans_id = self.ledger.submit(&TransactionRecord {
                group_id: group_id.to_owned(),
                user_id: entry.uploader.clone(),
                file_hash: entry.file_hash,
                ipfs_hash: *new_hash,
                key_version: new_key.version(),
            })?;
            let old_hash = entry.current_ipfs_hash;
            for target in next.superseded.values_mut() {
                if *target == old_hash {
                    *target = *new_hash;
                }
            }
            next.superseded.insert(old_hash, *new_hash);
            entry.current_ipfs_hash = *new_hash;
            entry.latest_trans_id = trans_id;
            new_trans_ids.push(trans_id);
        }

        let wrapped_keys = {
            let mut rng = lock(&self.rng);
            next.members
                .values()
                .map(|m| wrap_key_with(&mut *rng, &m.enc_public, &new_key, group_id, &m.user_id))
                .collect::<Result<Vec<_>, _>>()?
        };
        next.current_key = new_key;
        let report = RevocationReport {
            group_id: group_id.to_owned(),
            revoked_user: revoked_user.to_owned(),
            new_key_version: next.key_version(),
            reencrypted_files: new_blobs.len(),
            wrapped_keys_issued: wrapped_keys.len(),
            new_trans_ids,
            wrapped_keys,
        };
        self.commit(&mut g, next)?;
        Ok(report)
    }

    /// Removes blobs not referenced by any group's current file index.
    pub fn gc(&self) -> Result<usize, ProxyError> {
        let groups: Vec<_> = self
            .groups
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .values()
            .cloned()
            .collect();
        let guards: Vec<_> = groups.iter().map(|g| lock(g)).collect();
        let keep: HashSet<IpfsHash> = guards
            .iter()
            .flat_map(|g| g.files.iter().map(|f| f.current_ipfs_hash))
            .collect();
        Ok(self.store.gc(&keep)?)
    }
}

/// Client-side inverse of a download: unwrap, decrypt.
pub fn open_download(
    recipient: &crypto::EncryptionPrivateKey,
    response: &DownloadResponse,
) -> Result<(Vec<u8>, u64), CryptoError> {
    let key = unwrap_key(recipient, &response.wrapped_key)?;
    Ok((decrypt_file(&key, &response.ciphertext)?, key.version()))
}
