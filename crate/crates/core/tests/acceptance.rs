//! End-to-end acceptance checks. Runs as a plain binary (`harness = false`)
//! and prints one PASS/FAIL line per criterion; exits nonzero on any FAIL.

#[path = "support/sha256_oracle.rs"]
mod sha256_oracle;

use std::collections::BTreeMap;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use groupvault_core::crypto::{
    decrypt_file, encrypt_file_with, generate_encryption_keypair_with, generate_group_key_with,
    generate_signing_keypair_with, sign, unwrap_key, verify, wrap_key_with, Ciphertext,
};
use groupvault_core::{
    Client, ContentStore, Identity, IpfsHash, Ledger, Proxy, ProxyError, StoreStats, TransId,
    TransactionRecord,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);
type RejectCase<'a> = (
    &'static str,
    &'static str,
    Box<dyn Fn() -> Result<(), ProxyError> + 'a>,
);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

fn identity(r: &mut ChaCha20Rng, name: &str) -> Identity {
    Identity::create_with(r, name).unwrap()
}

fn random_bytes(r: &mut ChaCha20Rng, len: usize) -> Vec<u8> {
    let mut v = vec![0u8; len];
    r.fill_bytes(&mut v);
    v
}

/// Owner plus `others` joined members; returns the group id.
fn form_group(client: &Client<'_>, owner: &Identity, others: &[&Identity]) -> String {
    let gid = client.create_group(owner).unwrap();
    for m in others {
        client.request_join(m, &gid).unwrap();
        client.approve_join(owner, &gid, &m.user_id).unwrap();
    }
    gid
}

fn proxy_code(err: &groupvault_core::ClientError) -> String {
    match err {
        groupvault_core::ClientError::Proxy(p) => p.code().to_owned(),
        other => format!("client:{other}"),
    }
}

// ---------------------------------------------------------------------------

fn round_trip() -> Outcome {
    const FILES: usize = 50;
    const MAX: usize = 1 << 20;
    let start = Instant::now();
    let mut r = rng(1);
    let proxy = Proxy::in_memory().with_rng(rng(101));
    let client = Client::new(&proxy);
    let users: Vec<Identity> = ["ann", "ben", "cat", "dan"]
        .iter()
        .map(|n| identity(&mut r, n))
        .collect();
    let others: Vec<&Identity> = users[1..].iter().collect();
    let gid = form_group(&client, &users[0], &others);

    let mut downloads = 0usize;
    for i in 0..FILES {
        let len = match i {
            0 => 0,
            1 => MAX,
            _ => r.gen_range(0..=MAX),
        };
        // Distinct leading bytes keep every file unique even at tiny sizes.
        let mut data = random_bytes(&mut r, len);
        if len >= 1 {
            data[0] = i as u8;
        }
        let uploader = &users[i % users.len()];
        let tid = client.upload_file(uploader, &gid, &data).unwrap();
        for u in users.iter().filter(|u| u.user_id != uploader.user_id) {
            let got = client.download_file(u, &gid, &tid).unwrap();
            ensure!(got.verified, "file {i} not verified for {}", u.user_id);
            ensure!(got.plaintext == data, "file {i} differs for {}", u.user_id);
            downloads += 1;
        }
    }
    let elapsed = start.elapsed();
    ensure!(
        elapsed < Duration::from_secs(30),
        "took {elapsed:?}, limit 30 s"
    );
    Ok(format!(
        "{FILES} files, {downloads} verified downloads in {:.2} s",
        elapsed.as_secs_f64()
    ))
}

// ---------------------------------------------------------------------------

const PEOPLE: [&str; 5] = ["alice", "bob", "carol", "charlie", "dave"];

struct Scenario {
    people: Vec<Identity>,
    groups: [String; 2],
    files: [TransId; 2],
}

/// Group 1 = {alice, bob, carol}, group 2 = {charlie, bob}; dave is in neither.
fn build_scenario(proxy: &Proxy) -> Scenario {
    let mut r = rng(2);
    let people: Vec<Identity> = PEOPLE.iter().map(|n| identity(&mut r, n)).collect();
    let [alice, bob, carol, charlie, _dave] = &people[..] else {
        unreachable!()
    };
    let client = Client::new(proxy);
    let g1 = form_group(&client, alice, &[bob, carol]);
    let g2 = form_group(&client, charlie, &[bob]);
    let f1 = client
        .upload_file(alice, &g1, b"group one minutes")
        .unwrap();
    let f2 = client
        .upload_file(charlie, &g2, b"group two minutes")
        .unwrap();
    Scenario {
        people,
        groups: [g1, g2],
        files: [f1, f2],
    }
}

/// (user, group index) -> (download outcome, list outcome).
type Matrix = BTreeMap<(String, usize), (String, String)>;

fn access_matrix(proxy: &Proxy, s: &Scenario) -> Matrix {
    let client = Client::new(proxy);
    let mut m = Matrix::new();
    for u in &s.people {
        for g in 0..2 {
            let down = match client.download_file(u, &s.groups[g], &s.files[g]) {
                Ok(d) if d.verified => "ok".to_owned(),
                Ok(_) => "unverified".to_owned(),
                Err(e) => proxy_code(&e),
            };
            let list = match client.list_files(u, &s.groups[g]) {
                Ok(files) if files.len() == 1 => "ok".to_owned(),
                Ok(files) => format!("{} files", files.len()),
                Err(e) => proxy_code(&e),
            };
            m.insert((u.user_id.clone(), g), (down, list));
        }
    }
    m
}

fn expected_matrix() -> Matrix {
    let member = |u: &str, g: usize| {
        matches!(
            (u, g),
            ("alice" | "bob" | "carol", 0) | ("bob" | "charlie", 1)
        )
    };
    let mut m = Matrix::new();
    for u in PEOPLE {
        for g in 0..2 {
            let v = if member(u, g) { "ok" } else { "not_member" };
            m.insert((u.to_owned(), g), (v.to_owned(), v.to_owned()));
        }
    }
    m
}

fn check_matrix(actual: &Matrix) -> Result<(), String> {
    let expected = expected_matrix();
    for (k, want) in &expected {
        let got = &actual[k];
        ensure!(
            got == want,
            "{} on group {}: got {got:?}, want {want:?}",
            k.0,
            k.1 + 1
        );
    }
    let dual: Vec<_> = PEOPLE
        .iter()
        .filter(|u| (0..2).all(|g| actual[&(u.to_string(), g)].0 == "ok"))
        .collect();
    ensure!(
        dual == [&"bob"],
        "users with access to both groups: {dual:?}"
    );
    Ok(())
}

fn group_isolation() -> Outcome {
    let proxy = Proxy::in_memory();
    let s = build_scenario(&proxy);
    let m = access_matrix(&proxy, &s);
    check_matrix(&m)?;
    Ok(format!(
        "{} cells match (5 users x 2 groups, download + list)",
        m.len()
    ))
}

// ---------------------------------------------------------------------------

fn revocation() -> Outcome {
    let mut summary = Vec::new();
    for n in [2usize, 5, 100] {
        let mut r = rng(3 + n as u64);
        let proxy = Proxy::in_memory().with_rng(rng(300 + n as u64));
        let client = Client::new(&proxy);
        let users: Vec<Identity> = (0..n).map(|i| identity(&mut r, &format!("m{i}"))).collect();
        let others: Vec<&Identity> = users[1..].iter().collect();
        let gid = form_group(&client, &users[0], &others);

        let mut files = Vec::new();
        let mut old_ids = Vec::new();
        for f in 0..10 {
            let len = 1 + r.gen_range(0..8192);
            let data = random_bytes(&mut r, len);
            old_ids.push(client.upload_file(&users[f % n], &gid, &data).unwrap());
            files.push(data);
        }
        let before = proxy.group_summary(&gid).unwrap().key_version;
        let height = proxy.ledger().height();
        let revoked = &users[n - 1];
        let report = client.revoke(&users[0], &gid, &revoked.user_id).unwrap();

        ensure!(
            report.wrapped_keys_issued == n - 1,
            "n={n}: wrapped_keys_issued {} != {}",
            report.wrapped_keys_issued,
            n - 1
        );
        ensure!(
            report.wrapped_keys.len() == n - 1,
            "n={n}: wrapped key list length"
        );
        ensure!(
            report.reencrypted_files == 10,
            "n={n}: reencrypted_files {}",
            report.reencrypted_files
        );
        ensure!(
            report.new_trans_ids.len() == 10,
            "n={n}: {} new ids",
            report.new_trans_ids.len()
        );
        let distinct: std::collections::HashSet<_> = report.new_trans_ids.iter().collect();
        ensure!(distinct.len() == 10, "n={n}: new ids not distinct");
        ensure!(
            old_ids.iter().all(|t| !distinct.contains(t)),
            "n={n}: new ids overlap old ids"
        );
        ensure!(
            report.new_key_version == before + 1,
            "n={n}: key version {} -> {}",
            before,
            report.new_key_version
        );
        ensure!(
            proxy.ledger().height() == height + 10,
            "n={n}: ledger grew by {}",
            proxy.ledger().height() - height
        );

        for wk in &report.wrapped_keys {
            let holder = users.iter().find(|u| u.user_id == wk.recipient).unwrap();
            ensure!(
                holder.user_id != revoked.user_id,
                "n={n}: key wrapped for revoked user"
            );
            let key = unwrap_key(&holder.encryption.private, wk)
                .map_err(|e| format!("n={n}: unwrap for {}: {e}", holder.user_id))?;
            ensure!(
                key.version() == report.new_key_version,
                "n={n}: wrapped key version"
            );
        }

        for (tid, data) in report
            .new_trans_ids
            .iter()
            .chain(&old_ids)
            .zip(files.iter().cycle())
        {
            match client.download_file(revoked, &gid, tid) {
                Err(e) if proxy_code(&e) == "not_member" => {}
                other => {
                    return Err(format!(
                        "n={n}: revoked download gave {:?}",
                        other.map(|d| d.verified)
                    ))
                }
            }
            for u in &users[..n - 1] {
                let got = client
                    .download_file(u, &gid, tid)
                    .map_err(|e| format!("n={n}: {} download {tid}: {e}", u.user_id))?;
                ensure!(
                    got.verified && &got.plaintext == data,
                    "n={n}: {} got wrong bytes",
                    u.user_id
                );
                ensure!(
                    got.key_version == report.new_key_version,
                    "n={n}: stale key used"
                );
            }
        }
        summary.push(format!("n={n}: {} wrapped", report.wrapped_keys_issued));
    }
    Ok(summary.join(", "))
}

// ---------------------------------------------------------------------------

fn tamper_evidence() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let ledger = Ledger::open(dir.path()).unwrap();
    for i in 0..3u8 {
        ledger
            .submit(&TransactionRecord {
                group_id: "grp-t".to_owned(),
                user_id: format!("u{i}"),
                file_hash: groupvault_core::crypto::hash_content(&[i]),
                ipfs_hash: IpfsHash::of(&[i, i]),
                key_version: 1,
            })
            .unwrap();
    }
    ensure!(ledger.verify_chain(), "untouched chain failed verification");
    let path = ledger.path().unwrap().to_owned();
    let original = fs::read(&path).unwrap();
    ensure!(
        Ledger::open(dir.path()).unwrap().verify_chain(),
        "untouched chain failed after reopen"
    );

    let mut flips = 0usize;
    for pos in 0..original.len() {
        for mask in [0x01u8, 0xff] {
            let mut bytes = original.clone();
            bytes[pos] ^= mask;
            fs::write(&path, &bytes).unwrap();
            ensure!(
                !ledger.verify_chain(),
                "open ledger missed flip {mask:#04x} at byte {pos}"
            );
            let reopened =
                Ledger::open(dir.path()).map_err(|e| format!("reopen after flip at {pos}: {e}"))?;
            ensure!(
                !reopened.verify_chain(),
                "reopened ledger missed flip {mask:#04x} at byte {pos}"
            );
            flips += 1;
        }
    }
    fs::write(&path, &original).unwrap();
    ensure!(ledger.verify_chain(), "restored chain failed verification");
    ensure!(
        Ledger::open(dir.path()).unwrap().verify_chain(),
        "restored chain failed after reopen"
    );
    Ok(format!(
        "all {flips} mutations of {} bytes detected",
        original.len()
    ))
}

// ---------------------------------------------------------------------------

fn content_addressing() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let store = ContentStore::open(dir.path()).unwrap();
    let mut r = rng(5);
    let blobs: Vec<Vec<u8>> = (0..1000)
        .map(|_| {
            let len = r.gen_range(16..4096);
            random_bytes(&mut r, len)
        })
        .collect();
    let unique: std::collections::HashSet<&Vec<u8>> = blobs.iter().collect();
    ensure!(unique.len() == 1000, "generator produced duplicate blobs");

    for b in &blobs {
        let h = store.put(b).map_err(|e| e.to_string())?;
        let oracle = sha256_oracle::sha256(b);
        ensure!(h.digest().as_bytes() == &oracle, "digest mismatch for {h}");
        ensure!(
            h.to_string() == format!("cas1-{}", sha256_oracle::sha256_hex(b)),
            "address rendering mismatch for {h}"
        );
        ensure!(
            store.get(&h).map_err(|e| e.to_string())? == *b,
            "read-back mismatch"
        );
    }
    let first = store.stats();
    for b in &blobs {
        store.put(b).map_err(|e| e.to_string())?;
    }
    let second = store.stats();
    ensure!(
        second.blob_count == first.blob_count,
        "blob_count changed by {}",
        second.blob_count - first.blob_count
    );
    ensure!(
        second.total_bytes == first.total_bytes,
        "total_bytes changed"
    );
    ensure!(
        second.dedup_hits == first.dedup_hits + 1000,
        "dedup_hits changed by {}",
        second.dedup_hits - first.dedup_hits
    );
    Ok(format!(
        "1000 digests match oracle; re-put: blob_count +0, dedup_hits +{}",
        second.dedup_hits - first.dedup_hits
    ))
}

// ---------------------------------------------------------------------------

fn crypto_soundness() -> Outcome {
    let mut r = rng(6);
    let key = generate_group_key_with(&mut r, 1).unwrap();

    for len in [0usize, 1, 15, 16, 17, 4096, 100_000] {
        let pt = random_bytes(&mut r, len);
        let ct = encrypt_file_with(&mut r, &key, &pt).unwrap();
        let back = Ciphertext::from_bytes(&ct.to_bytes()).unwrap();
        ensure!(
            decrypt_file(&key, &back).unwrap() == pt,
            "round trip failed at {len} bytes"
        );
    }
    let other_key = generate_group_key_with(&mut r, 1).unwrap();
    let pt = random_bytes(&mut r, 512);
    let ct = encrypt_file_with(&mut r, &key, &pt).unwrap();
    ensure!(
        decrypt_file(&other_key, &ct).is_err(),
        "wrong group key decrypted"
    );

    let wire = ct.to_bytes();
    let mut flips = 0usize;
    for pos in 0..wire.len() {
        let mut bytes = wire.clone();
        bytes[pos] ^= 1 << (pos % 8);
        let accepted = Ciphertext::from_bytes(&bytes)
            .ok()
            .and_then(|c| decrypt_file(&key, &c).ok());
        ensure!(accepted.is_none(), "tampered byte {pos} accepted");
        flips += 1;
    }
    ensure!(flips >= 100, "only {flips} flips tried");

    let signer = generate_signing_keypair_with(&mut r).unwrap();
    let stranger = generate_signing_keypair_with(&mut r).unwrap();
    let msg = b"\x01 upload this".to_vec();
    let sig = sign(&signer.private, &msg);
    ensure!(verify(&signer.public, &msg, &sig), "right key rejected");
    ensure!(!verify(&stranger.public, &msg, &sig), "wrong key accepted");
    for pos in 0..msg.len() {
        let mut m = msg.clone();
        m[pos] ^= 0x80;
        ensure!(
            !verify(&signer.public, &m, &sig),
            "modified message byte {pos} accepted"
        );
    }
    let sig_bytes = *sig.as_bytes();
    for pos in 0..sig_bytes.len() {
        let mut b = sig_bytes;
        b[pos] ^= 0x01;
        if let Ok(bad) = groupvault_core::crypto::Signature::from_bytes(b) {
            ensure!(
                !verify(&signer.public, &msg, &bad),
                "modified signature byte {pos} accepted"
            );
        }
    }

    let bob = generate_encryption_keypair_with(&mut r).unwrap();
    let eve = generate_encryption_keypair_with(&mut r).unwrap();
    let gk = generate_group_key_with(&mut r, 7).unwrap();
    let wk = wrap_key_with(&mut r, &bob.public, &gk, "grp-x", "bob").unwrap();
    let got = unwrap_key(&bob.private, &wk).unwrap();
    ensure!(
        got.key_material() == gk.key_material() && got.version() == 7,
        "unwrap returned a different key"
    );
    ensure!(
        unwrap_key(&eve.private, &wk).is_err(),
        "wrong private key unwrapped"
    );
    let mut relabeled = wk.clone();
    relabeled.recipient = "eve".to_owned();
    ensure!(
        unwrap_key(&bob.private, &relabeled).is_err(),
        "relabeled recipient unwrapped"
    );
    let mut downgraded = wk.clone();
    downgraded.key_version = 6;
    ensure!(
        unwrap_key(&bob.private, &downgraded).is_err(),
        "altered version unwrapped"
    );
    for pos in 0..wk.blob.len() {
        let mut t = wk.clone();
        t.blob[pos] ^= 0x02;
        ensure!(
            unwrap_key(&bob.private, &t).is_err(),
            "tampered wrap byte {pos} accepted"
        );
    }
    Ok(format!(
        "{flips} ciphertext flips rejected; signature and wrap matrices hold"
    ))
}

// ---------------------------------------------------------------------------

#[derive(Debug, PartialEq)]
struct Snapshot {
    height: u64,
    stats: StoreStats,
    state: Vec<u8>,
    state_file: Vec<u8>,
}

fn snapshot(proxy: &Proxy, root: &Path) -> Snapshot {
    Snapshot {
        height: proxy.ledger().height(),
        stats: proxy.store().stats(),
        state: proxy.state_bytes(),
        state_file: fs::read(root.join("proxy.state")).unwrap(),
    }
}

fn rejection_atomicity() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let proxy = Proxy::open(root).unwrap();
    let s = build_scenario(&proxy);
    let [alice, bob, _, charlie, dave] = &s.people[..] else {
        unreachable!()
    };
    let client = Client::new(&proxy);
    let g1 = s.groups[0].as_str();
    let g2 = s.groups[1].as_str();
    client
        .upload_file(bob, g1, b"second file in group one")
        .unwrap();
    client.request_join(dave, g2).unwrap();

    let file = b"rejected payload".to_vec();
    let g1_files = client.list_files(alice, g1).unwrap();
    let current = g1_files[0].current_ipfs_hash;
    let foreign = client.list_files(charlie, g2).unwrap()[0].current_ipfs_hash;

    // Revocations that fail midway: the last file's blob goes missing or rots.
    let last = g1_files.last().unwrap().current_ipfs_hash;
    let last_path = proxy.store().blob_path(&last).unwrap();
    let last_bytes = fs::read(&last_path).unwrap();

    let mut cases: Vec<RejectCase<'_>> = vec![
        (
            "upload unknown group",
            "unknown_group",
            Box::new(|| {
                proxy
                    .upload("grp-none", "alice", &file, &alice.sign_upload(&file))
                    .map(drop)
            }),
        ),
        (
            "upload non-member",
            "not_member",
            Box::new(|| {
                proxy
                    .upload(g1, "dave", &file, &dave.sign_upload(&file))
                    .map(drop)
            }),
        ),
        (
            "upload pending member",
            "not_member",
            Box::new(|| {
                proxy
                    .upload(g2, "dave", &file, &dave.sign_upload(&file))
                    .map(drop)
            }),
        ),
        (
            "upload forged signature",
            "bad_signature",
            Box::new(|| {
                proxy
                    .upload(g1, "alice", &file, &bob.sign_upload(&file))
                    .map(drop)
            }),
        ),
        (
            "upload signature over other file",
            "bad_signature",
            Box::new(|| {
                proxy
                    .upload(g1, "alice", &file, &alice.sign_upload(b"x"))
                    .map(drop)
            }),
        ),
        (
            "download non-member",
            "not_member",
            Box::new(|| {
                proxy
                    .download(
                        g1,
                        "charlie",
                        &current,
                        &charlie.sign_download(g1, &current),
                    )
                    .map(drop)
            }),
        ),
        (
            "download forged signature",
            "bad_signature",
            Box::new(|| {
                proxy
                    .download(g1, "carol", &current, &alice.sign_download(g1, &current))
                    .map(drop)
            }),
        ),
        (
            "download other group's blob",
            "not_in_index",
            Box::new(|| {
                proxy
                    .download(g1, "bob", &foreign, &bob.sign_download(g1, &foreign))
                    .map(drop)
            }),
        ),
        (
            "approve by non-owner",
            "not_owner",
            Box::new(|| {
                proxy
                    .approve_join(g2, "dave", &bob.sign_join_approval(g2, "dave"))
                    .map(drop)
            }),
        ),
        (
            "approve unknown candidate",
            "unknown_candidate",
            Box::new(|| {
                proxy
                    .approve_join(g1, "dave", &alice.sign_join_approval(g1, "dave"))
                    .map(drop)
            }),
        ),
        (
            "approve existing member",
            "duplicate_member",
            Box::new(|| {
                proxy
                    .approve_join(g1, "bob", &alice.sign_join_approval(g1, "bob"))
                    .map(drop)
            }),
        ),
        (
            "approve unknown group",
            "unknown_group",
            Box::new(|| {
                proxy
                    .approve_join(
                        "grp-none",
                        "dave",
                        &alice.sign_join_approval("grp-none", "dave"),
                    )
                    .map(drop)
            }),
        ),
        (
            "revoke by non-owner",
            "not_owner",
            Box::new(|| {
                proxy
                    .revoke(g1, "carol", &bob.sign_revoke(g1, "carol"))
                    .map(drop)
            }),
        ),
        (
            "revoke owner",
            "cannot_revoke_owner",
            Box::new(|| {
                proxy
                    .revoke(g1, "alice", &alice.sign_revoke(g1, "alice"))
                    .map(drop)
            }),
        ),
        (
            "revoke non-member",
            "unknown_user",
            Box::new(|| {
                proxy
                    .revoke(g1, "charlie", &alice.sign_revoke(g1, "charlie"))
                    .map(drop)
            }),
        ),
        (
            "revoke signature for other user",
            "not_owner",
            Box::new(|| {
                proxy
                    .revoke(g1, "carol", &alice.sign_revoke(g1, "bob"))
                    .map(drop)
            }),
        ),
    ];

    cases.push((
        "revoke with missing blob",
        "blob_not_found",
        Box::new(|| {
            fs::remove_file(&last_path).unwrap();
            let res = proxy
                .revoke(g1, "carol", &alice.sign_revoke(g1, "carol"))
                .map(drop);
            fs::write(&last_path, &last_bytes).unwrap();
            res
        }),
    ));
    cases.push((
        "revoke with corrupted blob",
        "integrity_mismatch",
        Box::new(|| {
            let mut bad = last_bytes.clone();
            bad[20] ^= 0x40;
            fs::write(&last_path, &bad).unwrap();
            let res = proxy
                .revoke(g1, "carol", &alice.sign_revoke(g1, "carol"))
                .map(drop);
            fs::write(&last_path, &last_bytes).unwrap();
            res
        }),
    ));

    let total = cases.len();
    for (name, code, call) in &cases {
        let before = snapshot(&proxy, root);
        match call() {
            Err(e) if e.code() == *code => {}
            Err(e) => return Err(format!("{name}: expected {code}, got {}", e.code())),
            Ok(()) => return Err(format!("{name}: unexpectedly succeeded")),
        }
        let after = snapshot(&proxy, root);
        ensure!(
            after.height == before.height,
            "{name}: ledger height changed"
        );
        ensure!(
            after.stats == before.stats,
            "{name}: store stats {:?} -> {:?}",
            before.stats,
            after.stats
        );
        ensure!(after.state == before.state, "{name}: proxy state changed");
        ensure!(
            after.state_file == before.state_file,
            "{name}: state file changed"
        );
    }

    // Everything still works after the rejected calls.
    let report = client.revoke(alice, g1, "carol").unwrap();
    ensure!(
        report.reencrypted_files == 2,
        "follow-up revoke re-encrypted {}",
        report.reencrypted_files
    );
    ensure!(
        proxy.ledger().verify_chain(),
        "ledger invalid after rejections"
    );
    Ok(format!(
        "{total} rejected calls left ledger, store and state untouched"
    ))
}

// ---------------------------------------------------------------------------

fn persistence() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let (s, first, state) = {
        let proxy = Proxy::open(dir.path()).unwrap();
        let s = build_scenario(&proxy);
        let m = access_matrix(&proxy, &s);
        check_matrix(&m)?;
        let state = proxy.state_bytes();
        (s, m, state)
    };
    let proxy = Proxy::open(dir.path()).map_err(|e| format!("reopen: {e}"))?;
    ensure!(proxy.state_bytes() == state, "reloaded state differs");
    ensure!(proxy.ledger().verify_chain(), "reloaded ledger invalid");
    ensure!(
        proxy.ledger().height() == 2,
        "reloaded ledger height {}",
        proxy.ledger().height()
    );
    let second = access_matrix(&proxy, &s);
    ensure!(second == first, "matrix changed across restart");
    check_matrix(&second)?;

    // State keeps evolving after a reload.
    let client = Client::new(&proxy);
    let report = client.revoke(&s.people[0], &s.groups[0], "carol").unwrap();
    drop(proxy);
    let proxy = Proxy::open(dir.path()).unwrap();
    let client = Client::new(&proxy);
    let got = client
        .download_file(&s.people[1], &s.groups[0], &s.files[0])
        .unwrap();
    ensure!(
        got.verified && got.key_version == report.new_key_version,
        "post-revoke reload download"
    );
    ensure!(
        client
            .download_file(&s.people[2], &s.groups[0], &s.files[0])
            .is_err(),
        "revoked member regained access after reload"
    );
    Ok(format!("{} cells identical after restart", second.len()))
}

// ---------------------------------------------------------------------------

fn main() {
    let criteria: [Criterion; 8] = [
        ("1 end-to-end round trip", round_trip),
        ("2 group isolation matrix", group_isolation),
        ("3 revocation counts", revocation),
        ("4 ledger tamper evidence", tamper_evidence),
        ("5 content addressing and dedup", content_addressing),
        ("6 crypto soundness", crypto_soundness),
        ("7 rejection atomicity", rejection_atomicity),
        ("8 persistence round trip", persistence),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();

    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {name}: {detail} [{secs:.2}s]"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {name}: {why} [{secs:.2}s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
