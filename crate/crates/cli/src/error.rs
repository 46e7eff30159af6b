use std::fmt;
use std::io;

use groupvault_core::crypto::CryptoError;
use groupvault_core::{ClientError, LedgerError, ProxyError, StoreError};

/// Process exit status for each failure class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Usage = 2,
    Authorization = 3,
    Integrity = 4,
    Io = 5,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ExitKind,
    pub code: &'static str,
    pub message: String,
}

impl CliError {
    pub fn new(kind: ExitKind, code: &'static str, message: impl Into<String>) -> Self {
        CliError {
            kind,
            code,
            message: message.into(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new(ExitKind::Usage, "usage", message)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

fn crypto_kind(e: &CryptoError) -> ExitKind {
    match e {
        CryptoError::Decrypt | CryptoError::Unwrap | CryptoError::MalformedCiphertext(_) => {
            ExitKind::Integrity
        }
        CryptoError::Rng(_) => ExitKind::Io,
        _ => ExitKind::Usage,
    }
}

fn store_kind(e: &StoreError) -> ExitKind {
    match e {
        StoreError::NotFound(_) | StoreError::IntegrityMismatch(_) => ExitKind::Integrity,
        StoreError::InvalidAddress(_) => ExitKind::Usage,
        StoreError::Io(_) => ExitKind::Io,
    }
}

fn ledger_kind(e: &LedgerError) -> ExitKind {
    match e {
        LedgerError::NotFound(_) | LedgerError::InvalidId(_) | LedgerError::Malformed(_) => {
            ExitKind::Usage
        }
        LedgerError::Corrupt => ExitKind::Integrity,
        LedgerError::Io(_) => ExitKind::Io,
    }
}

impl From<ProxyError> for CliError {
    fn from(e: ProxyError) -> Self {
        let kind = match &e {
            ProxyError::UnknownGroup(_)
            | ProxyError::NotMember { .. }
            | ProxyError::BadSignature
            | ProxyError::NotOwner
            | ProxyError::UnknownCandidate(_)
            | ProxyError::UnknownUser(_)
            | ProxyError::DuplicateMember(_)
            | ProxyError::DuplicatePending(_)
            | ProxyError::CannotRevokeOwner
            | ProxyError::NotInIndex(_)
            | ProxyError::Superseded { .. } => ExitKind::Authorization,
            ProxyError::EmptyUserId => ExitKind::Usage,
            ProxyError::FileHashMismatch => ExitKind::Integrity,
            ProxyError::Crypto(c) => crypto_kind(c),
            ProxyError::Store(s) => store_kind(s),
            ProxyError::Ledger(l) => ledger_kind(l),
            ProxyError::State(_) | ProxyError::Io(_) => ExitKind::Io,
        };
        CliError::new(kind, e.code(), e.to_string())
    }
}

impl From<ClientError> for CliError {
    fn from(e: ClientError) -> Self {
        let e = match e {
            ClientError::Proxy(p) => return p.into(),
            other => other,
        };
        let (kind, code) = match &e {
            ClientError::Proxy(_) => unreachable!("handled above"),
            ClientError::EmptyUserId | ClientError::UnsafeUserId(_) => {
                (ExitKind::Usage, "invalid_user_id")
            }
            ClientError::IdentityExists(_) => (ExitKind::Usage, "identity_exists"),
            ClientError::IdentityMissing { .. } => (ExitKind::Usage, "identity_missing"),
            ClientError::Keystore(_) => (ExitKind::Io, "keystore"),
            ClientError::GroupMismatch { .. } => (ExitKind::Authorization, "group_mismatch"),
            ClientError::Ledger(l) => (ledger_kind(l), "ledger"),
            ClientError::Crypto(c) => (crypto_kind(c), "crypto"),
            ClientError::Io(_) => (ExitKind::Io, "io"),
        };
        CliError::new(kind, code, e.to_string())
    }
}

impl From<LedgerError> for CliError {
    fn from(e: LedgerError) -> Self {
        CliError::new(ledger_kind(&e), "ledger", e.to_string())
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::new(ExitKind::Io, "io", e.to_string())
    }
}
