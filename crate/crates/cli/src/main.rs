//! `groupvault`: run the whole group file-sharing protocol from the shell.
//!
//! The proxy, content store and ledger run in-process over one state
//! directory; identities live in a separate keystore directory.

mod error;

use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use groupvault_core::client::create_identity;
use groupvault_core::{api, Client, Identity, Ledger, Proxy, TransId, TransactionRecord};

use crate::error::{CliError, ExitKind};

const LOCK_FILE: &str = ".lock";

#[derive(Debug, Parser)]
#[command(name = "groupvault", version, about = "Encrypted group file sharing")]
struct Cli {
    /// Directory holding proxy state, blobs and the ledger.
    #[arg(long, global = true, env = "GROUPVAULT_STATE")]
    state_root: Option<PathBuf>,

    /// Directory holding identity key files.
    #[arg(long, global = true, env = "GROUPVAULT_KEYSTORE")]
    keystore: Option<PathBuf>,

    /// Emit one JSON object per line instead of human-readable text.
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a signing and an encryption keypair for a user.
    Keygen {
        user_id: String,
        /// Overwrite an existing identity file.
        #[arg(long)]
        force: bool,
    },
    /// Register USER_ID as the owner of a new group.
    CreateGroup { user_id: String },
    /// Ask to join a group; the owner must approve.
    Join { user_id: String, group_id: String },
    /// Approve a pending join request (signed by the owner).
    Approve {
        owner_id: String,
        group_id: String,
        candidate_id: String,
    },
    /// Encrypt and upload a file to a group.
    Upload {
        user_id: String,
        group_id: String,
        path: PathBuf,
    },
    /// Download, decrypt and verify a file by transaction id.
    Download {
        user_id: String,
        group_id: String,
        trans_id: String,
        out_path: PathBuf,
    },
    /// Remove a member, rotate the group key and re-encrypt every file.
    Revoke {
        owner_id: String,
        group_id: String,
        user_id: String,
    },
    /// Check a local file against the hash recorded in the ledger.
    Verify { path: PathBuf, trans_id: String },
    /// List a group's current file index (member only).
    List { user_id: String, group_id: String },
    /// Show a group's owner, members and key version.
    Group { group_id: String },
    /// Inspect the ledger.
    Ledger {
        #[command(subcommand)]
        action: LedgerAction,
    },
    /// Delete blobs no longer referenced by any group.
    Gc,
    /// Serve proxy requests as JSON lines on stdin/stdout.
    Serve,
}

#[derive(Debug, Subcommand)]
enum LedgerAction {
    /// Print every record in chain order.
    Show,
    /// Recompute all hash links.
    Verify,
}

/// One command's successful result.
struct Report {
    fields: Value,
    human: String,
    /// Nonzero exit status that still carries a result (e.g. integrity verdicts).
    status: Option<ExitKind>,
}

impl Report {
    fn ok(fields: Value, human: impl Into<String>) -> Self {
        Report {
            fields,
            human: human.into(),
            status: None,
        }
    }
}

struct Context {
    state_root: PathBuf,
    keystore: PathBuf,
}

fn home_dir() -> PathBuf {
    std::env::var_os("HOME")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."))
        .join(".groupvault")
}

impl Context {
    fn identity(&self, user_id: &str) -> Result<Identity, CliError> {
        Ok(Identity::load(&self.keystore, user_id)?)
    }

    fn open_proxy(&self) -> Result<(StateLock, Proxy), CliError> {
        let lock = StateLock::acquire(&self.state_root)?;
        Ok((lock, Proxy::open(&self.state_root)?))
    }

    fn open_ledger(&self) -> Result<Ledger, CliError> {
        Ok(Ledger::open(&self.state_root)?)
    }
}

/// Exclusive lock on a state directory for the lifetime of one invocation.
struct StateLock(PathBuf);

impl StateLock {
    fn acquire(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root)?;
        let path = root.join(LOCK_FILE);
        match fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
        {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(StateLock(path))
            }
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => Err(CliError::new(
                ExitKind::Io,
                "locked",
                format!(
                    "state directory is in use (remove {} if no other groupvault is running)",
                    path.display()
                ),
            )),
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for StateLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

fn parse_trans_id(s: &str) -> Result<TransId, CliError> {
    s.parse()
        .map_err(|_| CliError::usage(format!("invalid transaction id {s:?}")))
}

fn read_input(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| {
        CliError::new(
            ExitKind::Io,
            "io",
            format!("cannot read {}: {e}", path.display()),
        )
    })
}

fn record_json(id: &TransId, rec: &TransactionRecord) -> Value {
    json!({
        "trans_id": id.to_string(),
        "group_id": rec.group_id,
        "user_id": rec.user_id,
        "file_hash": rec.file_hash.to_hex(),
        "ipfs_hash": rec.ipfs_hash.to_string(),
        "key_version": rec.key_version,
    })
}

fn run(ctx: &Context, command: Command) -> Result<Report, CliError> {
    match command {
        Command::Keygen { user_id, force } => {
            if user_id.is_empty() {
                return Err(CliError::usage("user id must be non-empty"));
            }
            let id = create_identity(&user_id)?;
            let path = id.save(&ctx.keystore, force)?;
            Ok(Report::ok(
                json!({
                    "user_id": user_id,
                    "sig_public": id.signing.public.to_hex(),
                    "enc_public": id.encryption.public.to_hex(),
                    "keystore_file": path.display().to_string(),
                }),
                format!(
                    "identity {user_id} written to {}\nsig_public {}\nenc_public {}",
                    path.display(),
                    id.signing.public,
                    id.encryption.public
                ),
            ))
        }
        Command::CreateGroup { user_id } => {
            let id = ctx.identity(&user_id)?;
            let (_lock, proxy) = ctx.open_proxy()?;
            let group_id = Client::new(&proxy).create_group(&id)?;
            Ok(Report::ok(
                json!({ "group_id": group_id, "owner": user_id }),
                group_id,
            ))
        }
        Command::Join { user_id, group_id } => {
            let id = ctx.identity(&user_id)?;
            let (_lock, proxy) = ctx.open_proxy()?;
            Client::new(&proxy).request_join(&id, &group_id)?;
            Ok(Report::ok(
                json!({ "group_id": group_id, "user_id": user_id, "status": "pending" }),
                format!("join request from {user_id} pending owner approval"),
            ))
        }
        Command::Approve {
            owner_id,
            group_id,
            candidate_id,
        } => {
            let owner = ctx.identity(&owner_id)?;
            let (_lock, proxy) = ctx.open_proxy()?;
            let entry = Client::new(&proxy).approve_join(&owner, &group_id, &candidate_id)?;
            Ok(Report::ok(
                json!({
                    "group_id": group_id,
                    "user_id": entry.user_id,
                    "status": "member",
                    "joined_at": entry.joined_at,
                }),
                format!("{} is now a member of {group_id}", entry.user_id),
            ))
        }
        Command::Upload {
            user_id,
            group_id,
            path,
        } => {
            let id = ctx.identity(&user_id)?;
            let file = read_input(&path)?;
            let (_lock, proxy) = ctx.open_proxy()?;
            let receipt = proxy.upload(&group_id, &user_id, &file, &id.sign_upload(&file))?;
            Ok(Report::ok(
                json!({
                    "trans_id": receipt.trans_id.to_string(),
                    "ipfs_hash": receipt.ipfs_hash.to_string(),
                    "file_hash": receipt.file_hash.to_hex(),
                }),
                format!(
                    "trans_id  {}\nipfs_hash {}\nfile_hash {}",
                    receipt.trans_id, receipt.ipfs_hash, receipt.file_hash
                ),
            ))
        }
        Command::Download {
            user_id,
            group_id,
            trans_id,
            out_path,
        } => {
            let trans_id = parse_trans_id(&trans_id)?;
            let id = ctx.identity(&user_id)?;
            let (_lock, proxy) = ctx.open_proxy()?;
            let result = Client::new(&proxy).download_file(&id, &group_id, &trans_id)?;
            fs::write(&out_path, &result.plaintext)?;
            let verdict = if result.verified {
                "VERIFIED"
            } else {
                "MISMATCH"
            };
            Ok(Report {
                fields: json!({
                    "trans_id": trans_id.to_string(),
                    "out_path": out_path.display().to_string(),
                    "bytes": result.plaintext.len(),
                    "verified": result.verified,
                    "file_hash_local": result.file_hash_local.to_hex(),
                    "file_hash_ledger": result.file_hash_ledger.to_hex(),
                    "key_version": result.key_version,
                    "ipfs_hash": result.ipfs_hash.to_string(),
                }),
                human: format!(
                    "{verdict} {} ({} bytes, key version {})",
                    out_path.display(),
                    result.plaintext.len(),
                    result.key_version
                ),
                status: (!result.verified).then_some(ExitKind::Integrity),
            })
        }
        Command::Revoke {
            owner_id,
            group_id,
            user_id,
        } => {
            let owner = ctx.identity(&owner_id)?;
            let (_lock, proxy) = ctx.open_proxy()?;
            let report = Client::new(&proxy).revoke(&owner, &group_id, &user_id)?;
            let ids: Vec<String> = report.new_trans_ids.iter().map(|t| t.to_string()).collect();
            let mut human = format!(
                "revoked {} from {}\nnew key version     {}\nre-encrypted files  {}\nwrapped keys issued {}",
                report.revoked_user,
                report.group_id,
                report.new_key_version,
                report.reencrypted_files,
                report.wrapped_keys_issued
            );
            for id in &ids {
                human.push_str(&format!("\nnew trans_id {id}"));
            }
            Ok(Report::ok(
                json!({
                    "group_id": report.group_id,
                    "revoked_user": report.revoked_user,
                    "new_key_version": report.new_key_version,
                    "reencrypted_files": report.reencrypted_files,
                    "wrapped_keys_issued": report.wrapped_keys_issued,
                    "new_trans_ids": ids,
                }),
                human,
            ))
        }
        Command::Verify { path, trans_id } => {
            let trans_id = parse_trans_id(&trans_id)?;
            let file = read_input(&path)?;
            let ledger = ctx.open_ledger()?;
            let ok = groupvault_core::client::verify_file(&ledger, &file, &trans_id)?;
            Ok(Report::ok(
                json!({ "trans_id": trans_id.to_string(), "valid": ok }),
                ok.to_string(),
            ))
        }
        Command::List { user_id, group_id } => {
            let id = ctx.identity(&user_id)?;
            let (_lock, proxy) = ctx.open_proxy()?;
            let files = Client::new(&proxy).list_files(&id, &group_id)?;
            let human = files
                .iter()
                .map(|f| {
                    format!(
                        "{} {} {} {}",
                        f.latest_trans_id, f.current_ipfs_hash, f.file_hash, f.uploader
                    )
                })
                .collect::<Vec<_>>()
                .join("\n");
            Ok(Report::ok(
                json!({ "group_id": group_id, "files": files }),
                human,
            ))
        }
        Command::Group { group_id } => {
            let (_lock, proxy) = ctx.open_proxy()?;
            let s = proxy.group_summary(&group_id)?;
            Ok(Report::ok(
                serde_json::to_value(&s).expect("summary serializes"),
                format!(
                    "group       {}\nowner       {}\nkey version {}\nmembers     {}\npending     {}\nfiles       {}",
                    s.group_id,
                    s.owner,
                    s.key_version,
                    s.members.join(", "),
                    s.pending.join(", "),
                    s.file_count
                ),
            ))
        }
        Command::Ledger { action } => {
            let ledger = ctx.open_ledger()?;
            match action {
                LedgerAction::Show => {
                    let entries = ledger.entries();
                    let blocks: Vec<Value> = entries
                        .iter()
                        .map(|(id, rec)| record_json(id, rec))
                        .collect();
                    let human = entries
                        .iter()
                        .enumerate()
                        .map(|(i, (id, r))| {
                            format!(
                                "#{i} {id} group={} user={} file_hash={} ipfs_hash={} key_version={}",
                                r.group_id, r.user_id, r.file_hash, r.ipfs_hash, r.key_version
                            )
                        })
                        .collect::<Vec<_>>()
                        .join("\n");
                    Ok(Report::ok(
                        json!({ "height": ledger.height(), "records": blocks }),
                        human,
                    ))
                }
                LedgerAction::Verify => {
                    let valid = ledger.verify_chain();
                    Ok(Report {
                        fields: json!({ "valid": valid, "height": ledger.height() }),
                        human: if valid {
                            format!("OK ({} blocks)", ledger.height())
                        } else {
                            "FAIL".to_owned()
                        },
                        status: (!valid).then_some(ExitKind::Integrity),
                    })
                }
            }
        }
        Command::Gc => {
            let (_lock, proxy) = ctx.open_proxy()?;
            let removed = proxy.gc()?;
            Ok(Report::ok(
                json!({ "removed": removed }),
                format!("removed {removed} unreferenced blobs"),
            ))
        }
        Command::Serve => {
            let (_lock, proxy) = ctx.open_proxy()?;
            let stdin = io::stdin();
            let mut stdout = io::stdout().lock();
            let mut served = 0u64;
            for line in stdin.lock().lines() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                writeln!(stdout, "{}", api::handle_line(&proxy, &line))?;
                stdout.flush()?;
                served += 1;
            }
            Ok(Report {
                fields: json!({ "served": served }),
                human: String::new(),
                status: None,
            })
        }
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Keygen { .. } => "keygen",
        Command::CreateGroup { .. } => "create-group",
        Command::Join { .. } => "join",
        Command::Approve { .. } => "approve",
        Command::Upload { .. } => "upload",
        Command::Download { .. } => "download",
        Command::Revoke { .. } => "revoke",
        Command::Verify { .. } => "verify",
        Command::List { .. } => "list",
        Command::Group { .. } => "group",
        Command::Ledger { .. } => "ledger",
        Command::Gc => "gc",
        Command::Serve => "serve",
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ctx = Context {
        state_root: cli
            .state_root
            .clone()
            .unwrap_or_else(|| home_dir().join("state")),
        keystore: cli.keystore.clone().unwrap_or_else(home_dir),
    };
    let name = command_name(&cli.command);
    let serve = matches!(cli.command, Command::Serve);

    match run(&ctx, cli.command) {
        Ok(report) => {
            if cli.json && !serve {
                let mut obj = json!({ "command": name, "ok": report.status.is_none() });
                if let (Value::Object(o), Value::Object(f)) = (&mut obj, report.fields) {
                    o.extend(f);
                }
                println!("{obj}");
            } else if !report.human.is_empty() {
                println!("{}", report.human);
            }
            match report.status {
                None => ExitCode::SUCCESS,
                Some(kind) => ExitCode::from(kind as u8),
            }
        }
        Err(err) => {
            if cli.json {
                println!(
                    "{}",
                    json!({ "command": name, "ok": false, "error": err.code, "message": err.message })
                );
            } else {
                eprintln!("groupvault {name}: {err}");
            }
            ExitCode::from(err.kind as u8)
        }
    }
}
