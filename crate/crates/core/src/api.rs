//! Request/response surface of the proxy, one operation per request kind.
//!
//! Requests and responses are JSON objects. Keys, signatures, digests and
//! byte payloads are lowercase hex; addresses and transaction ids use their
//! `cas1-`/`tx-` string forms. [`handle_line`] serves one request per line,
//! which is what `groupvault serve` speaks over stdin/stdout.
//!
//! ```text
//! {"op":"register_owner","user_id":"alice","sig_public":"…","enc_public":"…"}
//! {"status":"ok","result":{"op":"register_owner","group_id":"grp-…"}}
//! ```

use serde::{Deserialize, Serialize};

use crate::content_store::IpfsHash;
use crate::crypto::{Ciphertext, EncryptionPublicKey, Signature, SigningPublicKey, WrappedKey};
use crate::ledger::{TransId, TransactionRecord};
use crate::proxy::{
    FileIndexEntry, GroupSummary, MemberEntry, Proxy, ProxyError, RevocationReport, UploadReceipt,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum Request {
    RegisterOwner {
        user_id: String,
        sig_public: SigningPublicKey,
        enc_public: EncryptionPublicKey,
    },
    Upload {
        group_id: String,
        user_id: String,
        #[serde(with = "hex::serde")]
        file: Vec<u8>,
        signature: Signature,
    },
    RequestJoin {
        group_id: String,
        user_id: String,
        sig_public: SigningPublicKey,
        enc_public: EncryptionPublicKey,
    },
    ApproveJoin {
        group_id: String,
        candidate_user_id: String,
        owner_signature: Signature,
    },
    Download {
        group_id: String,
        user_id: String,
        ipfs_hash: IpfsHash,
        signature: Signature,
    },
    Revoke {
        group_id: String,
        revoked_user_id: String,
        owner_signature: Signature,
    },
    ListGroupFiles {
        group_id: String,
        user_id: String,
        signature: Signature,
    },
    GroupSummary {
        group_id: String,
    },
    GetTransaction {
        trans_id: TransId,
    },
    VerifyChain {},
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum ResponseBody {
    RegisterOwner {
        group_id: String,
    },
    Upload(UploadReceipt),
    RequestJoin {
        group_id: String,
        user_id: String,
        status: String,
    },
    ApproveJoin {
        group_id: String,
        member: MemberEntry,
    },
    Download {
        /// Length-prefixed ciphertext encoding, hex.
        #[serde(with = "hex::serde")]
        ciphertext: Vec<u8>,
        wrapped_key: WrappedKey,
    },
    Revoke(RevocationReport),
    ListGroupFiles {
        files: Vec<FileIndexEntry>,
    },
    GroupSummary(GroupSummary),
    GetTransaction {
        trans_id: TransId,
        record: TransactionRecord,
    },
    VerifyChain {
        valid: bool,
        height: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Response {
    Ok {
        result: ResponseBody,
    },
    Error {
        code: String,
        message: String,
        /// Set for `superseded`: the address to retry with.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        current_ipfs_hash: Option<IpfsHash>,
    },
}

impl Response {
    fn error(err: &ProxyError) -> Self {
        Response::Error {
            code: err.code().to_owned(),
            message: err.to_string(),
            current_ipfs_hash: match err {
                ProxyError::Superseded { current, .. } => Some(*current),
                _ => None,
            },
        }
    }
}

pub fn handle(proxy: &Proxy, request: Request) -> Response {
    match dispatch(proxy, request) {
        Ok(result) => Response::Ok { result },
        Err(err) => Response::error(&err),
    }
}

fn dispatch(proxy: &Proxy, request: Request) -> Result<ResponseBody, ProxyError> {
    Ok(match request {
        Request::RegisterOwner {
            user_id,
            sig_public,
            enc_public,
        } => ResponseBody::RegisterOwner {
            group_id: proxy.register_owner(&user_id, sig_public, enc_public)?,
        },
        Request::Upload {
            group_id,
            user_id,
            file,
            signature,
        } => ResponseBody::Upload(proxy.upload(&group_id, &user_id, &file, &signature)?),
        Request::RequestJoin {
            group_id,
            user_id,
            sig_public,
            enc_public,
        } => {
            let ack = proxy.request_join(&group_id, &user_id, sig_public, enc_public)?;
            ResponseBody::RequestJoin {
                group_id: ack.group_id,
                user_id: ack.user_id,
                status: "pending".to_owned(),
            }
        }
        Request::ApproveJoin {
            group_id,
            candidate_user_id,
            owner_signature,
        } => {
            let member = proxy.approve_join(&group_id, &candidate_user_id, &owner_signature)?;
            ResponseBody::ApproveJoin { group_id, member }
        }
        Request::Download {
            group_id,
            user_id,
            ipfs_hash,
            signature,
        } => {
            let resp = proxy.download(&group_id, &user_id, &ipfs_hash, &signature)?;
            ResponseBody::Download {
                ciphertext: resp.ciphertext.to_bytes(),
                wrapped_key: resp.wrapped_key,
            }
        }
        Request::Revoke {
            group_id,
            revoked_user_id,
            owner_signature,
        } => ResponseBody::Revoke(proxy.revoke(&group_id, &revoked_user_id, &owner_signature)?),
        Request::ListGroupFiles {
            group_id,
            user_id,
            signature,
        } => ResponseBody::ListGroupFiles {
            files: proxy.list_group_files(&group_id, &user_id, &signature)?,
        },
        Request::GroupSummary { group_id } => {
            ResponseBody::GroupSummary(proxy.group_summary(&group_id)?)
        }
        Request::GetTransaction { trans_id } => ResponseBody::GetTransaction {
            record: proxy.ledger().get_transaction(&trans_id)?,
            trans_id,
        },
        Request::VerifyChain {} => ResponseBody::VerifyChain {
            valid: proxy.ledger().verify_chain(),
            height: proxy.ledger().height(),
        },
    })
}

/// Parses one JSON request and returns one JSON response (no trailing newline).
pub fn handle_line(proxy: &Proxy, line: &str) -> String {
    let response = match serde_json::from_str::<Request>(line) {
        Ok(req) => handle(proxy, req),
        Err(e) => Response::Error {
            code: "bad_request".to_owned(),
            message: e.to_string(),
            current_ipfs_hash: None,
        },
    };
    serde_json::to_string(&response).expect("responses serialize")
}

/// Decodes the `ciphertext` field of a download response.
pub fn decode_ciphertext(bytes: &[u8]) -> Result<Ciphertext, crate::crypto::CryptoError> {
    Ciphertext::from_bytes(bytes)
}
