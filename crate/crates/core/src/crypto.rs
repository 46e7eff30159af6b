//! Cryptographic primitives shared by every component.
//!
//! - SHA-256 for file hashes, content addresses and chain links.
//! - Ed25519 for request signatures.
//! - AES-256-GCM for file encryption under a group key.
//! - X25519 + HKDF-SHA256 + AES-256-GCM for wrapping a group key to one member.
//!
//! Every function that consumes randomness has a `_with` variant taking an
//! explicit RNG so tests can run deterministically.

use std::fmt;
use std::str::FromStr;

use aes_gcm::aead::{AeadInPlace, KeyInit};
use aes_gcm::{Aes256Gcm, Nonce, Tag};
use hkdf::Hkdf;
use rand::rngs::OsRng;
use rand::CryptoRng;
use rand::RngCore;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest as _, Sha256};
use thiserror::Error;
use zeroize::Zeroizing;

pub const DIGEST_LEN: usize = 32;
pub const GROUP_KEY_LEN: usize = 32;
pub const NONCE_LEN: usize = 12;
pub const TAG_LEN: usize = 16;
pub const SIGNATURE_LEN: usize = 64;
pub const PUBLIC_KEY_LEN: usize = 32;

const WRAP_INFO: &[u8] = b"groupvault/key-wrap/v1";
/// ephemeral public key, nonce, wrapped key material, tag
const WRAPPED_BLOB_LEN: usize = PUBLIC_KEY_LEN + NONCE_LEN + GROUP_KEY_LEN + TAG_LEN;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CryptoError {
    #[error("random number generator failure: {0}")]
    Rng(String),
    #[error("malformed key: {0}")]
    MalformedKey(&'static str),
    #[error("malformed ciphertext: {0}")]
    MalformedCiphertext(&'static str),
    #[error("authenticated decryption failed")]
    Decrypt,
    #[error("key unwrap failed")]
    Unwrap,
    #[error("invalid hex encoding for {what}")]
    InvalidHex { what: &'static str },
    #[error("group key version must be at least 1")]
    InvalidVersion,
}

/// Object-safe bundle of the RNG bounds, for components that hold an RNG.
pub trait SecureRng: RngCore + CryptoRng + Send {}

impl<T: RngCore + CryptoRng + Send> SecureRng for T {}

fn fill(rng: &mut (impl RngCore + CryptoRng), buf: &mut [u8]) -> Result<(), CryptoError> {
    rng.try_fill_bytes(buf)
        .map_err(|e| CryptoError::Rng(e.to_string()))
}

fn decode_fixed<const N: usize>(s: &str, what: &'static str) -> Result<[u8; N], CryptoError> {
    if s.len() != N * 2 || s.bytes().any(|b| b.is_ascii_uppercase()) {
        return Err(CryptoError::InvalidHex { what });
    }
    let mut out = [0u8; N];
    hex::decode_to_slice(s, &mut out).map_err(|_| CryptoError::InvalidHex { what })?;
    Ok(out)
}

/// Fixed-size byte newtypes rendered as lowercase hex everywhere.
macro_rules! hex_newtype {
    ($name:ident, $len:expr, $what:literal) => {
        impl $name {
            pub fn as_bytes(&self) -> &[u8; $len] {
                &self.0
            }

            pub fn to_hex(&self) -> String {
                hex::encode(self.0)
            }

            pub fn from_hex(s: &str) -> Result<Self, CryptoError> {
                Self::from_bytes(decode_fixed::<$len>(s, $what)?)
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.to_hex())
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}({})", stringify!($name), self.to_hex())
            }
        }

        impl FromStr for $name {
            type Err = CryptoError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                Self::from_hex(s)
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                serializer.serialize_str(&self.to_hex())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                let s = String::deserialize(deserializer)?;
                Self::from_hex(&s).map_err(serde::de::Error::custom)
            }
        }
    };
}

// ---------------------------------------------------------------------------
// Digests
// ---------------------------------------------------------------------------

/// A 32-byte SHA-256 digest.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Digest([u8; DIGEST_LEN]);

impl Digest {
    pub const ZERO: Digest = Digest([0u8; DIGEST_LEN]);

    pub fn from_bytes(bytes: [u8; DIGEST_LEN]) -> Result<Self, CryptoError> {
        Ok(Digest(bytes))
    }

    pub const fn new(bytes: [u8; DIGEST_LEN]) -> Self {
        Digest(bytes)
    }
}

hex_newtype!(Digest, DIGEST_LEN, "digest");

pub fn hash_content(data: &[u8]) -> Digest {
    Digest(Sha256::digest(data).into())
}

/// Digest of the concatenation of `parts`.
pub fn hash_parts(parts: &[&[u8]]) -> Digest {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update(part);
    }
    Digest(hasher.finalize().into())
}

// ---------------------------------------------------------------------------
// Signatures
// ---------------------------------------------------------------------------

/// Ed25519 verification key. Construction rejects encodings that are not a
/// valid curve point.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct SigningPublicKey([u8; PUBLIC_KEY_LEN]);

impl SigningPublicKey {
    pub fn from_bytes(bytes: [u8; PUBLIC_KEY_LEN]) -> Result<Self, CryptoError> {
        ed25519_dalek::VerifyingKey::from_bytes(&bytes)
            .map_err(|_| CryptoError::MalformedKey("signing public key is not a curve point"))?;
        Ok(SigningPublicKey(bytes))
    }
}

hex_newtype!(SigningPublicKey, PUBLIC_KEY_LEN, "signing public key");

#[derive(Clone, Copy, PartialEq, Eq)]
pub struct Signature([u8; SIGNATURE_LEN]);

impl Signature {
    pub fn from_bytes(bytes: [u8; SIGNATURE_LEN]) -> Result<Self, CryptoError> {
        Ok(Signature(bytes))
    }
}

hex_newtype!(Signature, SIGNATURE_LEN, "signature");

/// Ed25519 signing key; zeroized on drop.
#[derive(Clone)]
pub struct SigningPrivateKey(ed25519_dalek::SigningKey);

impl SigningPrivateKey {
    pub fn from_bytes(bytes: [u8; 32]) -> Self {
        SigningPrivateKey(ed25519_dalek::SigningKey::from_bytes(&bytes))
    }

    pub fn to_bytes(&self) -> Zeroizing<[u8; 32]> {
        Zeroizing::new(self.0.to_bytes())
    }

    pub fn public_key(&self) -> SigningPublicKey {
        SigningPublicKey(self.0.verifying_key().to_bytes())
    }
}

impl fmt::Debug for SigningPrivateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SigningPrivateKey(..)")
    }
}

#[derive(Debug, Clone)]
pub struct SigningKeypair {
    pub public: SigningPublicKey,
    pub private: SigningPrivateKey,
}

impl SigningKeypair {
    pub fn from_private(private: SigningPrivateKey) -> Self {
        SigningKeypair {
            public: private.public_key(),
            private,
        }
    }
}

pub fn generate_signing_keypair() -> Result<SigningKeypair, CryptoError> {
    generate_signing_keypair_with(&mut OsRng)
}

pub fn generate_signing_keypair_with(
    rng: &mut (impl RngCore + CryptoRng),
) -> Result<SigningKeypair, CryptoError> {
    let mut seed = Zeroizing::new([0u8; 32]);
    fill(rng, seed.as_mut())?;
    Ok(SigningKeypair::from_private(SigningPrivateKey::from_bytes(
        *seed,
    )))
}

pub fn sign(private: &SigningPrivateKey, message: &[u8]) -> Signature {
    use ed25519_dalek::Signer;
    Signature(private.0.sign(message).to_bytes())
}

/// Strict Ed25519 verification. Every failure, including a malformed key or
/// signature, is reported as `false`.
pub fn verify(public: &SigningPublicKey, message: &[u8], signature: &Signature) -> bool {
    let Ok(key) = ed25519_dalek::VerifyingKey::from_bytes(&public.0) else {
        return false;
    };
    let sig = ed25519_dalek::Signature::from_bytes(&signature.0);
    key.verify_strict(message, &sig).is_ok()
}

// ---------------------------------------------------------------------------
// Key wrapping keypairs
// ---------------------------------------------------------------------------

/// X25519 public key that group keys are wrapped to.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct EncryptionPublicKey([u8; PUBLIC_KEY_LEN]);

impl EncryptionPublicKey {
    /// Rejects low-order points, which would make every wrap to them trivially
    /// decryptable.
    pub fn from_bytes(bytes: [u8; PUBLIC_KEY_LEN]) -> Result<Self, CryptoError> {
        let probe = x25519_dalek::StaticSecret::from([0x42u8; 32]);
        if !probe
            .diffie_hellman(&x25519_dalek::PublicKey::from(bytes))
            .was_contributory()
        {
            return Err(CryptoError::MalformedKey(
                "encryption public key is a low-order point",
            ));
        }
        Ok(EncryptionPublicKey(bytes))
    }
}

hex_newtype!(EncryptionPublicKey, PUBLIC_KEY_LEN, "encryption public key");

#[derive(Clone)]
pub struct EncryptionPrivateKey(x25519_dalek::StaticSecret);

impl EncryptionPrivateKey {
    pub fn from_bytes(bytes: [u8; 32]) -> Self {
        EncryptionPrivateKey(x25519_dalek::StaticSecret::from(bytes))
    }

    pub fn to_bytes(&self) -> Zeroizing<[u8; 32]> {
        Zeroizing::new(self.0.to_bytes())
    }

    pub fn public_key(&self) -> EncryptionPublicKey {
        EncryptionPublicKey(x25519_dalek::PublicKey::from(&self.0).to_bytes())
    }
}

impl fmt::Debug for EncryptionPrivateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("EncryptionPrivateKey(..)")
    }
}

#[derive(Debug, Clone)]
pub struct EncryptionKeypair {
    pub public: EncryptionPublicKey,
    pub private: EncryptionPrivateKey,
}

impl EncryptionKeypair {
    pub fn from_private(private: EncryptionPrivateKey) -> Self {
        EncryptionKeypair {
            public: private.public_key(),
            private,
        }
    }
}

pub fn generate_encryption_keypair() -> Result<EncryptionKeypair, CryptoError> {
    generate_encryption_keypair_with(&mut OsRng)
}

pub fn generate_encryption_keypair_with(
    rng: &mut (impl RngCore + CryptoRng),
) -> Result<EncryptionKeypair, CryptoError> {
    let mut secret = Zeroizing::new([0u8; 32]);
    fill(rng, secret.as_mut())?;
    Ok(EncryptionKeypair::from_private(
        EncryptionPrivateKey::from_bytes(*secret),
    ))
}

// ---------------------------------------------------------------------------
// Group keys and file encryption
// ---------------------------------------------------------------------------

/// Versioned symmetric key shared by all members of one group.
#[derive(Clone, PartialEq, Eq)]
pub struct GroupKey {
    material: Zeroizing<[u8; GROUP_KEY_LEN]>,
    version: u64,
}

impl GroupKey {
    pub fn from_parts(material: [u8; GROUP_KEY_LEN], version: u64) -> Result<Self, CryptoError> {
        if version == 0 {
            return Err(CryptoError::InvalidVersion);
        }
        Ok(GroupKey {
            material: Zeroizing::new(material),
            version,
        })
    }

    pub fn key_material(&self) -> &[u8; GROUP_KEY_LEN] {
        &self.material
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    fn cipher(&self) -> Aes256Gcm {
        Aes256Gcm::new_from_slice(self.material.as_ref()).expect("32-byte AES-256 key")
    }
}

impl fmt::Debug for GroupKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GroupKey")
            .field("version", &self.version)
            .finish_non_exhaustive()
    }
}

pub fn generate_group_key(version: u64) -> Result<GroupKey, CryptoError> {
    generate_group_key_with(&mut OsRng, version)
}

pub fn generate_group_key_with(
    rng: &mut (impl RngCore + CryptoRng),
    version: u64,
) -> Result<GroupKey, CryptoError> {
    if version == 0 {
        return Err(CryptoError::InvalidVersion);
    }
    let mut material = Zeroizing::new([0u8; GROUP_KEY_LEN]);
    fill(rng, material.as_mut())?;
    Ok(GroupKey { material, version })
}

/// AES-256-GCM ciphertext with detached tag.
#[derive(Clone, PartialEq, Eq)]
pub struct Ciphertext {
    pub nonce: [u8; NONCE_LEN],
    pub body: Vec<u8>,
    pub tag: [u8; TAG_LEN],
}

impl fmt::Debug for Ciphertext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Ciphertext")
            .field("nonce", &hex::encode(self.nonce))
            .field("body_len", &self.body.len())
            .field("tag", &hex::encode(self.tag))
            .finish()
    }
}

impl Ciphertext {
    /// Length-prefixed encoding: `u32be len ‖ nonce ‖ u32be len ‖ body ‖ u32be len ‖ tag`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + NONCE_LEN + self.body.len() + TAG_LEN);
        for field in [&self.nonce[..], &self.body[..], &self.tag[..]] {
            out.extend_from_slice(&(field.len() as u32).to_be_bytes());
            out.extend_from_slice(field);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        let mut rest = bytes;
        let mut next = || -> Result<&[u8], CryptoError> {
            if rest.len() < 4 {
                return Err(CryptoError::MalformedCiphertext("truncated length prefix"));
            }
            let (len, tail) = rest.split_at(4);
            let len = u32::from_be_bytes(len.try_into().unwrap()) as usize;
            if tail.len() < len {
                return Err(CryptoError::MalformedCiphertext("truncated field"));
            }
            let (field, tail) = tail.split_at(len);
            rest = tail;
            Ok(field)
        };
        let nonce: [u8; NONCE_LEN] = next()?
            .try_into()
            .map_err(|_| CryptoError::MalformedCiphertext("nonce length"))?;
        let body = next()?.to_vec();
        let tag: [u8; TAG_LEN] = next()?
            .try_into()
            .map_err(|_| CryptoError::MalformedCiphertext("tag length"))?;
        if !rest.is_empty() {
            return Err(CryptoError::MalformedCiphertext("trailing bytes"));
        }
        Ok(Ciphertext { nonce, body, tag })
    }
}

pub fn encrypt_file(key: &GroupKey, plaintext: &[u8]) -> Result<Ciphertext, CryptoError> {
    encrypt_file_with(&mut OsRng, key, plaintext)
}

pub fn encrypt_file_with(
    rng: &mut (impl RngCore + CryptoRng),
    key: &GroupKey,
    plaintext: &[u8],
) -> Result<Ciphertext, CryptoError> {
    let mut nonce = [0u8; NONCE_LEN];
    fill(rng, &mut nonce)?;
    let mut body = plaintext.to_vec();
    let tag = key
        .cipher()
        .encrypt_in_place_detached(Nonce::from_slice(&nonce), b"", &mut body)
        .map_err(|_| CryptoError::MalformedCiphertext("plaintext too long"))?;
    Ok(Ciphertext {
        nonce,
        body,
        tag: tag.into(),
    })
}

pub fn decrypt_file(key: &GroupKey, ct: &Ciphertext) -> Result<Vec<u8>, CryptoError> {
    let mut body = ct.body.clone();
    key.cipher()
        .decrypt_in_place_detached(
            Nonce::from_slice(&ct.nonce),
            b"",
            &mut body,
            Tag::from_slice(&ct.tag),
        )
        .map_err(|_| CryptoError::Decrypt)?;
    Ok(body)
}

// ---------------------------------------------------------------------------
// Key wrapping
// ---------------------------------------------------------------------------

/// A group key encrypted to one member's encryption public key.
///
/// `recipient`, `group_id` and `key_version` travel in the clear and are bound
/// into the wrap as associated data.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WrappedKey {
    pub recipient: String,
    pub group_id: String,
    pub key_version: u64,
    #[serde(with = "hex::serde")]
    pub blob: Vec<u8>,
}

impl fmt::Debug for WrappedKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WrappedKey")
            .field("recipient", &self.recipient)
            .field("group_id", &self.group_id)
            .field("key_version", &self.key_version)
            .field("blob", &hex::encode(&self.blob))
            .finish()
    }
}

fn wrap_aad(group_id: &str, user_id: &str, version: u64) -> Vec<u8> {
    let mut aad = Vec::with_capacity(group_id.len() + user_id.len() + 10);
    aad.extend_from_slice(group_id.as_bytes());
    aad.push(0);
    aad.extend_from_slice(user_id.as_bytes());
    aad.push(0);
    aad.extend_from_slice(&version.to_be_bytes());
    aad
}

fn wrap_cipher(
    shared: &x25519_dalek::SharedSecret,
    ephemeral: &[u8; PUBLIC_KEY_LEN],
    recipient: &[u8; PUBLIC_KEY_LEN],
) -> Aes256Gcm {
    let mut salt = [0u8; 2 * PUBLIC_KEY_LEN];
    salt[..PUBLIC_KEY_LEN].copy_from_slice(ephemeral);
    salt[PUBLIC_KEY_LEN..].copy_from_slice(recipient);
    let hk = Hkdf::<Sha256>::new(Some(&salt), shared.as_bytes());
    let mut kek = Zeroizing::new([0u8; 32]);
    hk.expand(WRAP_INFO, kek.as_mut())
        .expect("32 bytes is a valid HKDF-SHA256 output length");
    Aes256Gcm::new_from_slice(kek.as_ref()).expect("32-byte AES-256 key")
}

pub fn wrap_key(
    recipient_public: &EncryptionPublicKey,
    key: &GroupKey,
    group_id: &str,
    user_id: &str,
) -> Result<WrappedKey, CryptoError> {
    wrap_key_with(&mut OsRng, recipient_public, key, group_id, user_id)
}

/// Ephemeral-static X25519 wrap. Blob layout: `ephemeral_pub ‖ nonce ‖ enc(key) ‖ tag`.
pub fn wrap_key_with(
    rng: &mut (impl RngCore + CryptoRng),
    recipient_public: &EncryptionPublicKey,
    key: &GroupKey,
    group_id: &str,
    user_id: &str,
) -> Result<WrappedKey, CryptoError> {
    let mut eph_bytes = Zeroizing::new([0u8; 32]);
    fill(rng, eph_bytes.as_mut())?;
    let ephemeral = x25519_dalek::StaticSecret::from(*eph_bytes);
    let ephemeral_public = x25519_dalek::PublicKey::from(&ephemeral).to_bytes();
    let shared = ephemeral.diffie_hellman(&x25519_dalek::PublicKey::from(recipient_public.0));
    if !shared.was_contributory() {
        return Err(CryptoError::MalformedKey(
            "encryption public key is a low-order point",
        ));
    }

    let mut nonce = [0u8; NONCE_LEN];
    fill(rng, &mut nonce)?;
    let mut wrapped = key.key_material().to_vec();
    let tag = wrap_cipher(&shared, &ephemeral_public, &recipient_public.0)
        .encrypt_in_place_detached(
            Nonce::from_slice(&nonce),
            &wrap_aad(group_id, user_id, key.version),
            &mut wrapped,
        )
        .map_err(|_| CryptoError::Unwrap)?;

    let mut blob = Vec::with_capacity(WRAPPED_BLOB_LEN);
    blob.extend_from_slice(&ephemeral_public);
    blob.extend_from_slice(&nonce);
    blob.extend_from_slice(&wrapped);
    blob.extend_from_slice(&tag);
    Ok(WrappedKey {
        recipient: user_id.to_owned(),
        group_id: group_id.to_owned(),
        key_version: key.version,
        blob,
    })
}

pub fn unwrap_key(
    recipient_private: &EncryptionPrivateKey,
    wk: &WrappedKey,
) -> Result<GroupKey, CryptoError> {
    if wk.blob.len() != WRAPPED_BLOB_LEN || wk.key_version == 0 {
        return Err(CryptoError::Unwrap);
    }
    let (ephemeral_public, rest) = wk.blob.split_at(PUBLIC_KEY_LEN);
    let (nonce, rest) = rest.split_at(NONCE_LEN);
    let (wrapped, tag) = rest.split_at(GROUP_KEY_LEN);
    let ephemeral_public: [u8; PUBLIC_KEY_LEN] = ephemeral_public.try_into().unwrap();

    let shared = recipient_private
        .0
        .diffie_hellman(&x25519_dalek::PublicKey::from(ephemeral_public));
    if !shared.was_contributory() {
        return Err(CryptoError::Unwrap);
    }
    let recipient_public = recipient_private.public_key();

    let mut material = Zeroizing::new([0u8; GROUP_KEY_LEN]);
    material.copy_from_slice(wrapped);
    wrap_cipher(&shared, &ephemeral_public, &recipient_public.0)
        .decrypt_in_place_detached(
            Nonce::from_slice(nonce),
            &wrap_aad(&wk.group_id, &wk.recipient, wk.key_version),
            material.as_mut(),
            Tag::from_slice(tag),
        )
        .map_err(|_| CryptoError::Unwrap)?;
    Ok(GroupKey {
        material,
        version: wk.key_version,
    })
}

#[cfg(test)]
#[path = "../tests/support/sha256_oracle.rs"]
mod sha256_oracle;
