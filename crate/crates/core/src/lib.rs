//! Secure group file sharing over an untrusted content-addressed store and an
//! append-only hash-chained ledger.
//!
//! A trusted [`Proxy`] owns each group's symmetric key and member list. Files
//! are encrypted by the proxy before they reach the [`ContentStore`], upload
//! records go to the [`Ledger`], and members receive the group key wrapped to
//! their own public key when they download. Revoking a member rotates the key
//! and re-encrypts every file in the group.

pub mod api;
pub mod client;
pub mod content_store;
pub mod crypto;
pub mod ledger;
pub mod messages;
pub mod proxy;

pub use client::{Client, ClientError, DownloadResult, Identity};
pub use content_store::{ContentStore, IpfsHash, StoreError, StoreStats};
pub use crypto::{CryptoError, Digest, GroupKey, WrappedKey};
pub use ledger::{Block, Ledger, LedgerError, TransId, TransactionRecord};
pub use proxy::{
    DownloadResponse, FileIndexEntry, GroupSummary, MappingTable, MemberEntry, Proxy, ProxyError,
    RevocationReport, UploadReceipt,
};
