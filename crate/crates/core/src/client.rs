//! Member-side library: identities, the keystore file, and the upload and
//! download flows including integrity verification against the ledger.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use rand::rngs::OsRng;
use rand::{CryptoRng, RngCore};
use thiserror::Error;
use zeroize::Zeroizing;

use crate::content_store::IpfsHash;
use crate::crypto::{
    self, decrypt_file, generate_encryption_keypair_with, generate_signing_keypair_with,
    hash_content, unwrap_key, CryptoError, Digest, EncryptionKeypair, EncryptionPrivateKey,
    Signature, SigningKeypair, SigningPrivateKey,
};
use crate::ledger::{Ledger, LedgerError, TransId};
use crate::messages;
use crate::proxy::{FileIndexEntry, JoinAck, MemberEntry, Proxy, ProxyError, RevocationReport};

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("user id must be non-empty")]
    EmptyUserId,
    #[error("user id {0:?} cannot be used as a keystore name")]
    UnsafeUserId(String),
    #[error("identity file {0} already exists")]
    IdentityExists(PathBuf),
    #[error("no identity for {user_id} in {dir}")]
    IdentityMissing { user_id: String, dir: PathBuf },
    #[error("keystore file: {0}")]
    Keystore(String),
    #[error("transaction {trans_id} belongs to group {actual}, not {requested}")]
    GroupMismatch {
        trans_id: TransId,
        requested: String,
        actual: String,
    },
    #[error(transparent)]
    Proxy(#[from] ProxyError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
    #[error("keystore I/O error: {0}")]
    Io(#[from] io::Error),
}

/// A user's id and both keypairs. Private halves stay on the client.
#[derive(Debug, Clone)]
pub struct Identity {
    pub user_id: String,
    pub signing: SigningKeypair,
    pub encryption: EncryptionKeypair,
}

pub fn create_identity(user_id: &str) -> Result<Identity, ClientError> {
    Identity::create_with(&mut OsRng, user_id)
}

const KEYSTORE_FIELDS: [&str; 5] = [
    "user_id",
    "sig_public",
    "sig_private",
    "enc_public",
    "enc_private",
];

impl Identity {
    pub fn create_with(
        rng: &mut (impl RngCore + CryptoRng),
        user_id: &str,
    ) -> Result<Self, ClientError> {
        if user_id.is_empty() {
            return Err(ClientError::EmptyUserId);
        }
        Ok(Identity {
            user_id: user_id.to_owned(),
            signing: generate_signing_keypair_with(rng)?,
            encryption: generate_encryption_keypair_with(rng)?,
        })
    }

    pub fn sign_upload(&self, file: &[u8]) -> Signature {
        self.sign(&messages::upload(&hash_content(file)))
    }

    pub fn sign_download(&self, group_id: &str, ipfs_hash: &IpfsHash) -> Signature {
        self.sign(&messages::download(group_id, &self.user_id, ipfs_hash))
    }

    pub fn sign_list_files(&self, group_id: &str) -> Signature {
        self.sign(&messages::list_files(group_id, &self.user_id))
    }

    pub fn sign_join_approval(&self, group_id: &str, candidate: &str) -> Signature {
        self.sign(&messages::join_approval(group_id, candidate))
    }

    pub fn sign_revoke(&self, group_id: &str, revoked: &str) -> Signature {
        self.sign(&messages::revoke(group_id, revoked))
    }

    fn sign(&self, message: &[u8]) -> Signature {
        crypto::sign(&self.signing.private, message)
    }

    pub fn keystore_path(dir: &Path, user_id: &str) -> Result<PathBuf, ClientError> {
        let safe = !user_id.is_empty()
            && !user_id.starts_with('.')
            && user_id
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-' | '@'));
        if !safe {
            return Err(ClientError::UnsafeUserId(user_id.to_owned()));
        }
        Ok(dir.join(format!("identity-{user_id}.keys")))
    }

    /// Line-oriented `field=hexvalue` encoding.
    pub fn to_keystore_string(&self) -> Zeroizing<String> {
        let values = [
            Zeroizing::new(hex::encode(self.user_id.as_bytes())),
            Zeroizing::new(self.signing.public.to_hex()),
            Zeroizing::new(hex::encode(self.signing.private.to_bytes().as_ref())),
            Zeroizing::new(self.encryption.public.to_hex()),
            Zeroizing::new(hex::encode(self.encryption.private.to_bytes().as_ref())),
        ];
        let mut out = Zeroizing::new(String::new());
        for (field, value) in KEYSTORE_FIELDS.iter().zip(&values) {
            let _ = writeln!(out, "{field}={}", value.as_str());
        }
        out
    }

    pub fn from_keystore_str(text: &str) -> Result<Self, ClientError> {
        let mut values: [Option<&str>; 5] = [None; 5];
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let (field, value) = line
                .split_once('=')
                .ok_or_else(|| ClientError::Keystore(format!("malformed line {line:?}")))?;
            let slot = KEYSTORE_FIELDS
                .iter()
                .position(|f| *f == field)
                .ok_or_else(|| ClientError::Keystore(format!("unknown field {field:?}")))?;
            if values[slot].replace(value).is_some() {
                return Err(ClientError::Keystore(format!("duplicate field {field:?}")));
            }
        }
        let get = |i: usize| {
            values[i].ok_or_else(|| {
                ClientError::Keystore(format!("missing field {:?}", KEYSTORE_FIELDS[i]))
            })
        };
        let secret32 = |s: &str| -> Result<Zeroizing<[u8; 32]>, ClientError> {
            let mut out = Zeroizing::new([0u8; 32]);
            hex::decode_to_slice(s, out.as_mut())
                .map_err(|_| ClientError::Keystore("bad private key hex".into()))?;
            Ok(out)
        };

        let user_id = String::from_utf8(
            hex::decode(get(0)?).map_err(|_| ClientError::Keystore("bad user_id hex".into()))?,
        )
        .map_err(|_| ClientError::Keystore("user_id is not UTF-8".into()))?;
        let signing =
            SigningKeypair::from_private(SigningPrivateKey::from_bytes(*secret32(get(2)?)?));
        let encryption =
            EncryptionKeypair::from_private(EncryptionPrivateKey::from_bytes(*secret32(get(4)?)?));
        if signing.public.to_hex() != get(1)? || encryption.public.to_hex() != get(3)? {
            return Err(ClientError::Keystore(
                "public key does not match private key".into(),
            ));
        }
        if user_id.is_empty() {
            return Err(ClientError::EmptyUserId);
        }
        Ok(Identity {
            user_id,
            signing,
            encryption,
        })
    }

    /// Writes `<dir>/identity-<user_id>.keys`, refusing to overwrite unless `force`.
    pub fn save(&self, dir: &Path, force: bool) -> Result<PathBuf, ClientError> {
        let path = Self::keystore_path(dir, &self.user_id)?;
        fs::create_dir_all(dir)?;
        let mut opts = fs::OpenOptions::new();
        opts.write(true);
        if force {
            opts.create(true).truncate(true);
        } else {
            opts.create_new(true);
        }
        #[cfg(unix)]
        {
            use std::os::unix::fs::OpenOptionsExt;
            opts.mode(0o600);
        }
        let mut f = match opts.open(&path) {
            Ok(f) => f,
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => {
                return Err(ClientError::IdentityExists(path))
            }
            Err(e) => return Err(e.into()),
        };
        f.write_all(self.to_keystore_string().as_bytes())?;
        f.sync_all()?;
        Ok(path)
    }

    pub fn load(dir: &Path, user_id: &str) -> Result<Self, ClientError> {
        let path = Self::keystore_path(dir, user_id)?;
        let text = match fs::read_to_string(&path) {
            Ok(t) => Zeroizing::new(t),
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                return Err(ClientError::IdentityMissing {
                    user_id: user_id.to_owned(),
                    dir: dir.to_owned(),
                })
            }
            Err(e) => return Err(e.into()),
        };
        let identity = Self::from_keystore_str(&text)?;
        if identity.user_id != user_id {
            return Err(ClientError::Keystore(format!(
                "{} holds identity {:?}",
                path.display(),
                identity.user_id
            )));
        }
        Ok(identity)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DownloadResult {
    pub plaintext: Vec<u8>,
    pub file_hash_local: Digest,
    pub file_hash_ledger: Digest,
    pub verified: bool,
    pub key_version: u64,
    /// Address the ciphertext was actually fetched from.
    pub ipfs_hash: IpfsHash,
}

/// Drives the member protocols against an in-process proxy. Ledger reads go
/// straight to the public ledger, not through the proxy.
#[derive(Debug, Clone, Copy)]
pub struct Client<'a> {
    proxy: &'a Proxy,
    ledger: &'a Ledger,
}

impl<'a> Client<'a> {
    pub fn new(proxy: &'a Proxy) -> Self {
        Client {
            proxy,
            ledger: proxy.ledger(),
        }
    }

    pub fn create_group(&self, owner: &Identity) -> Result<String, ClientError> {
        Ok(self.proxy.register_owner(
            &owner.user_id,
            owner.signing.public,
            owner.encryption.public,
        )?)
    }

    pub fn request_join(&self, who: &Identity, group_id: &str) -> Result<JoinAck, ClientError> {
        Ok(self.proxy.request_join(
            group_id,
            &who.user_id,
            who.signing.public,
            who.encryption.public,
        )?)
    }

    pub fn approve_join(
        &self,
        owner: &Identity,
        group_id: &str,
        candidate: &str,
    ) -> Result<MemberEntry, ClientError> {
        let sig = owner.sign_join_approval(group_id, candidate);
        Ok(self.proxy.approve_join(group_id, candidate, &sig)?)
    }

    pub fn revoke(
        &self,
        owner: &Identity,
        group_id: &str,
        user_id: &str,
    ) -> Result<RevocationReport, ClientError> {
        let sig = owner.sign_revoke(group_id, user_id);
        Ok(self.proxy.revoke(group_id, user_id, &sig)?)
    }

    pub fn list_files(
        &self,
        who: &Identity,
        group_id: &str,
    ) -> Result<Vec<FileIndexEntry>, ClientError> {
        let sig = who.sign_list_files(group_id);
        Ok(self.proxy.list_group_files(group_id, &who.user_id, &sig)?)
    }

    pub fn upload_file(
        &self,
        who: &Identity,
        group_id: &str,
        file: &[u8],
    ) -> Result<TransId, ClientError> {
        let sig = who.sign_upload(file);
        Ok(self
            .proxy
            .upload(group_id, &who.user_id, file, &sig)?
            .trans_id)
    }

    /// Fetches and decrypts the file behind `trans_id`, then compares its hash
    /// with the ledger record. A mismatch is reported via `verified`, not as
    /// an error. If the ciphertext was re-encrypted since the record was
    /// written, the file index is refreshed and the request retried once.
    pub fn download_file(
        &self,
        who: &Identity,
        group_id: &str,
        trans_id: &TransId,
    ) -> Result<DownloadResult, ClientError> {
        let record = self.ledger.get_transaction(trans_id)?;
        if record.group_id != group_id {
            return Err(ClientError::GroupMismatch {
                trans_id: *trans_id,
                requested: group_id.to_owned(),
                actual: record.group_id,
            });
        }

        let fetch = |h: &IpfsHash| {
            self.proxy
                .download(group_id, &who.user_id, h, &who.sign_download(group_id, h))
        };
        let mut ipfs_hash = record.ipfs_hash;
        let response = match fetch(&ipfs_hash) {
            Err(err @ ProxyError::Superseded { .. }) => {
                let refreshed = self
                    .list_files(who, group_id)?
                    .into_iter()
                    .find(|f| f.file_hash == record.file_hash);
                match refreshed {
                    Some(entry) => {
                        ipfs_hash = entry.current_ipfs_hash;
                        fetch(&ipfs_hash)?
                    }
                    None => return Err(err.into()),
                }
            }
            other => other?,
        };

        let key = unwrap_key(&who.encryption.private, &response.wrapped_key)?;
        let plaintext = decrypt_file(&key, &response.ciphertext)?;
        let file_hash_local = hash_content(&plaintext);
        Ok(DownloadResult {
            plaintext,
            file_hash_local,
            file_hash_ledger: record.file_hash,
            verified: file_hash_local == record.file_hash,
            key_version: key.version(),
            ipfs_hash,
        })
    }

    pub fn verify_file(&self, file: &[u8], trans_id: &TransId) -> Result<bool, ClientError> {
        verify_file(self.ledger, file, trans_id)
    }
}

/// True iff `file` hashes to the `file_hash` recorded under `trans_id`.
pub fn verify_file(ledger: &Ledger, file: &[u8], trans_id: &TransId) -> Result<bool, ClientError> {
    Ok(hash_content(file) == ledger.get_transaction(trans_id)?.file_hash)
}
