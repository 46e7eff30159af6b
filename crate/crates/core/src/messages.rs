//! Canonical byte strings that members and owners sign.
//!
//! Each message is a one-byte domain tag followed by a SHA-256 digest, so a
//! signature made for one request kind never verifies as another.

use crate::content_store::IpfsHash;
use crate::crypto::{hash_parts, Digest};

pub const UPLOAD_TAG: u8 = 0x01;
pub const JOIN_APPROVAL_TAG: u8 = 0x02;
pub const DOWNLOAD_TAG: u8 = 0x03;
pub const REVOKE_TAG: u8 = 0x04;
pub const LIST_FILES_TAG: u8 = 0x05;

fn tagged(tag: u8, digest: Digest) -> Vec<u8> {
    let mut out = Vec::with_capacity(33);
    out.push(tag);
    out.extend_from_slice(digest.as_bytes());
    out
}

/// `0x01 ‖ file_hash`
pub fn upload(file_hash: &Digest) -> Vec<u8> {
    tagged(UPLOAD_TAG, *file_hash)
}

/// `0x02 ‖ H(group_id ‖ 0x00 ‖ candidate_user_id)`
pub fn join_approval(group_id: &str, candidate: &str) -> Vec<u8> {
    tagged(
        JOIN_APPROVAL_TAG,
        hash_parts(&[group_id.as_bytes(), &[0], candidate.as_bytes()]),
    )
}

/// `0x03 ‖ H(group_id ‖ 0x00 ‖ user_id ‖ 0x00 ‖ ipfs_hash string)`
pub fn download(group_id: &str, user_id: &str, ipfs_hash: &IpfsHash) -> Vec<u8> {
    let address = ipfs_hash.to_string();
    tagged(
        DOWNLOAD_TAG,
        hash_parts(&[
            group_id.as_bytes(),
            &[0],
            user_id.as_bytes(),
            &[0],
            address.as_bytes(),
        ]),
    )
}

/// `0x04 ‖ H(group_id ‖ 0x00 ‖ revoked_user_id)`
pub fn revoke(group_id: &str, revoked: &str) -> Vec<u8> {
    tagged(
        REVOKE_TAG,
        hash_parts(&[group_id.as_bytes(), &[0], revoked.as_bytes()]),
    )
}

/// `0x05 ‖ H(group_id ‖ 0x00 ‖ user_id)`
pub fn list_files(group_id: &str, user_id: &str) -> Vec<u8> {
    tagged(
        LIST_FILES_TAG,
        hash_parts(&[group_id.as_bytes(), &[0], user_id.as_bytes()]),
    )
}
