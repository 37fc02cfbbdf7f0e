//! Content-addressed object storage plus an append-only chain of Merkle
//! commitments over batches ("epochs") of event ids.
//!
//! Directory layout:
//!
//! ```text
//! objects/<hex>          canonical event bytes, named by their digest
//! pending.log            uncommitted event ids, one per line
//! epochs/<n>.leaves      event ids of epoch n, in leaf order
//! commitments.log        epoch \t root \t prev_hash \t event_count \t timestamp
//! commitments.head       hash of the last commitment record
//! ```
//!
//! Every committed file is verified byte-for-byte against its canonical
//! rendering, so any single-byte mutation is detected.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{self, Write as _};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::evidence::{canonical_bytes, Timestamp, ValidatedEvent};
use crate::hash::{Digest, HashAlgorithm};

pub const DEFAULT_EPOCH_CADENCE: usize = 64;

const OBJECTS_DIR: &str = "objects";
const EPOCHS_DIR: &str = "epochs";
const PENDING_FILE: &str = "pending.log";
const LOG_FILE: &str = "commitments.log";
const HEAD_FILE: &str = "commitments.head";

#[derive(Debug, Error)]
pub enum LedgerError {
    #[error("no leaves to commit")]
    EmptyLeaves,
    #[error("no pending events in the current epoch")]
    EmptyEpoch,
    #[error("pending event {0} has no stored object")]
    DanglingEvent(Digest),
    #[error("event {0} is not in any committed epoch")]
    NotCommitted(Digest),
    #[error("object {0} is missing")]
    Missing(Digest),
    #[error("event {0} is already recorded")]
    DuplicateEvent(Digest),
    #[error("commit time {now} precedes the previous commitment at {previous}")]
    ClockRegression { now: Timestamp, previous: Timestamp },
    #[error("commitment chain broken at epoch {epoch}: {detail}")]
    Broken { epoch: u64, detail: String },
    #[error("corrupt {path}: {detail}")]
    Corrupt { path: String, detail: String },
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: io::Error },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> LedgerError + '_ {
    move |source| LedgerError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn corrupt(path: &Path, detail: impl Into<String>) -> LedgerError {
    LedgerError::Corrupt {
        path: path.display().to_string(),
        detail: detail.into(),
    }
}

/// Lowercase, exactly 64 characters, nothing else.
fn strict_digest(s: &str) -> Option<Digest> {
    if s.len() != 64 || !s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f')) {
        return None;
    }
    Digest::from_hex(s).ok()
}

// ---------------------------------------------------------------- objects

#[derive(Debug)]
enum Backend {
    Memory(BTreeMap<Digest, Vec<u8>>),
    Dir(PathBuf),
}

/// Content-addressed blob storage. `put` is idempotent.
#[derive(Debug)]
pub struct ObjectStore {
    alg: HashAlgorithm,
    backend: Backend,
}

impl ObjectStore {
    pub fn in_memory(alg: HashAlgorithm) -> Self {
        Self {
            alg,
            backend: Backend::Memory(BTreeMap::new()),
        }
    }

    pub fn open(dir: &Path, alg: HashAlgorithm) -> Result<Self, LedgerError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        Ok(Self {
            alg,
            backend: Backend::Dir(dir.to_path_buf()),
        })
    }

    pub fn put(&mut self, bytes: &[u8]) -> Result<Digest, LedgerError> {
        let d = self.alg.digest(bytes);
        match &mut self.backend {
            Backend::Memory(m) => {
                m.entry(d).or_insert_with(|| bytes.to_vec());
            }
            Backend::Dir(dir) => {
                let path = dir.join(d.to_hex());
                if !path.exists() {
                    let tmp = dir.join(format!(".{}.tmp", d.to_hex()));
                    fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
                    fs::rename(&tmp, &path).map_err(io_err(&path))?;
                }
            }
        }
        Ok(d)
    }

    /// Returns the object, re-hashing it to reject corrupted content.
    pub fn get(&self, d: &Digest) -> Result<Vec<u8>, LedgerError> {
        let bytes = match &self.backend {
            Backend::Memory(m) => m.get(d).cloned().ok_or(LedgerError::Missing(*d))?,
            Backend::Dir(dir) => {
                let path = dir.join(d.to_hex());
                match fs::read(&path) {
                    Ok(b) => b,
                    Err(e) if e.kind() == io::ErrorKind::NotFound => {
                        return Err(LedgerError::Missing(*d))
                    }
                    Err(e) => return Err(io_err(&path)(e)),
                }
            }
        };
        if self.alg.digest(&bytes) != *d {
            return Err(LedgerError::Corrupt {
                path: format!("object {d}"),
                detail: "content does not match its address".into(),
            });
        }
        Ok(bytes)
    }

    pub fn contains(&self, d: &Digest) -> bool {
        match &self.backend {
            Backend::Memory(m) => m.contains_key(d),
            Backend::Dir(dir) => dir.join(d.to_hex()).is_file(),
        }
    }
}

// ----------------------------------------------------------------- merkle

const LEAF_TAG: u8 = 0x00;
const NODE_TAG: u8 = 0x01;

fn leaf_hash(alg: HashAlgorithm, leaf: &Digest) -> Digest {
    alg.digest_parts(&[&[LEAF_TAG], leaf.as_bytes()])
}

fn node_hash(alg: HashAlgorithm, l: &Digest, r: &Digest) -> Digest {
    alg.digest_parts(&[&[NODE_TAG], l.as_bytes(), r.as_bytes()])
}

/// Binary Merkle root with domain-separated leaves and interior nodes; an
/// unpaired node at the end of a level is promoted unchanged.
pub fn merkle_root(leaves: &[Digest], alg: HashAlgorithm) -> Result<Digest, LedgerError> {
    if leaves.is_empty() {
        return Err(LedgerError::EmptyLeaves);
    }
    let mut level: Vec<Digest> = leaves.iter().map(|l| leaf_hash(alg, l)).collect();
    while level.len() > 1 {
        level = level
            .chunks(2)
            .map(|p| match p {
                [l, r] => node_hash(alg, l, r),
                [x] => *x,
                _ => unreachable!(),
            })
            .collect();
    }
    Ok(level[0])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// The sibling is the left operand.
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProofStep {
    pub sibling: Digest,
    pub side: Side,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InclusionProof {
    pub epoch: u64,
    pub index: u64,
    pub event_count: u64,
    /// Leaf to root. At most ⌈log₂ event_count⌉ steps; fewer when the leaf
    /// is promoted at some level.
    pub path: Vec<ProofStep>,
}

/// Sibling sides a valid proof for `(index, count)` must have.
fn expected_sides(index: u64, count: u64) -> Vec<Side> {
    let (mut i, mut n) = (index, count);
    let mut sides = Vec::new();
    while n > 1 {
        if !(i == n - 1 && n % 2 == 1) {
            sides.push(if i % 2 == 0 { Side::Right } else { Side::Left });
        }
        i /= 2;
        n = n.div_ceil(2);
    }
    sides
}

fn build_proof(leaves: &[Digest], index: usize, alg: HashAlgorithm) -> Vec<ProofStep> {
    let mut level: Vec<Digest> = leaves.iter().map(|l| leaf_hash(alg, l)).collect();
    let mut i = index;
    let mut path = Vec::new();
    while level.len() > 1 {
        let sibling = i ^ 1;
        if sibling < level.len() {
            path.push(ProofStep {
                sibling: level[sibling],
                side: if i.is_multiple_of(2) { Side::Right } else { Side::Left },
            });
        }
        level = level
            .chunks(2)
            .map(|p| match p {
                [l, r] => node_hash(alg, l, r),
                [x] => *x,
                _ => unreachable!(),
            })
            .collect();
        i /= 2;
    }
    path
}

/// Checks that `leaf` sits at `proof.index` under `root`. The proof's shape
/// must match its claimed position exactly.
pub fn verify_proof(leaf: &Digest, proof: &InclusionProof, root: &Digest, alg: HashAlgorithm) -> bool {
    if proof.index >= proof.event_count {
        return false;
    }
    let sides = expected_sides(proof.index, proof.event_count);
    if sides.len() != proof.path.len()
        || sides.iter().zip(&proof.path).any(|(s, step)| *s != step.side)
    {
        return false;
    }
    let acc = proof.path.iter().fold(leaf_hash(alg, leaf), |acc, step| match step.side {
        Side::Left => node_hash(alg, &step.sibling, &acc),
        Side::Right => node_hash(alg, &acc, &step.sibling),
    });
    acc == *root
}

// ------------------------------------------------------------ commitments

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CommitmentRecord {
    pub epoch: u64,
    pub root: Digest,
    pub prev_hash: Digest,
    pub event_count: u64,
    pub timestamp: Timestamp,
}

impl CommitmentRecord {
    pub fn hash(&self, alg: HashAlgorithm) -> Digest {
        alg.digest_parts(&[
            &self.epoch.to_be_bytes(),
            self.root.as_bytes(),
            self.prev_hash.as_bytes(),
            &self.event_count.to_be_bytes(),
            &self.timestamp.to_be_bytes(),
        ])
    }

    pub fn to_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\n",
            self.epoch, self.root, self.prev_hash, self.event_count, self.timestamp
        )
    }

    /// Parses a line produced by [`to_line`](Self::to_line), without the newline.
    pub fn parse_line(line: &str) -> Option<Self> {
        let f: Vec<&str> = line.split('\t').collect();
        let [epoch, root, prev, count, ts] = f.as_slice() else {
            return None;
        };
        let rec = CommitmentRecord {
            epoch: epoch.parse().ok()?,
            root: strict_digest(root)?,
            prev_hash: strict_digest(prev)?,
            event_count: count.parse().ok()?,
            timestamp: ts.parse().ok()?,
        };
        // Rejects "+1", "01" and friends.
        (rec.to_line().trim_end_matches('\n') == line).then_some(rec)
    }
}

/// Checks dense epoch numbering from 0, genesis and prev-hash links, and
/// non-decreasing timestamps. Does not check roots against leaves.
pub fn verify_chain(records: &[CommitmentRecord], alg: HashAlgorithm) -> Result<(), LedgerError> {
    let mut prev = Digest::ZERO;
    let mut prev_ts = 0;
    for (i, r) in records.iter().enumerate() {
        let broken = |detail: &str| LedgerError::Broken {
            epoch: i as u64,
            detail: detail.to_string(),
        };
        if r.epoch != i as u64 {
            return Err(broken("epoch numbers are not dense"));
        }
        if r.prev_hash != prev {
            return Err(broken("prev_hash does not link to the previous record"));
        }
        if r.timestamp < prev_ts {
            return Err(broken("timestamp decreases"));
        }
        if r.event_count == 0 {
            return Err(broken("empty epoch"));
        }
        prev = r.hash(alg);
        prev_ts = r.timestamp;
    }
    Ok(())
}

/// [`verify_chain`] plus a check that the last record hashes to `head`.
pub fn verify_chain_with_head(
    records: &[CommitmentRecord],
    head: Option<&Digest>,
    alg: HashAlgorithm,
) -> Result<(), LedgerError> {
    verify_chain(records, alg)?;
    let tip = records.last().map(|r| r.hash(alg));
    if tip.as_ref() != head {
        return Err(LedgerError::Broken {
            epoch: records.len().saturating_sub(1) as u64,
            detail: "head anchor does not match the last record".into(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LedgerSummary {
    pub epochs: u64,
    pub committed_events: u64,
    pub pending_events: u64,
    pub head: Option<Digest>,
}

/// Recorded events batched into epochs and committed by Merkle root.
#[derive(Debug)]
pub struct Ledger {
    alg: HashAlgorithm,
    cadence: usize,
    dir: Option<PathBuf>,
    objects: ObjectStore,
    pending: Vec<Digest>,
    records: Vec<CommitmentRecord>,
    epochs: Vec<Vec<Digest>>,
    index: HashMap<Digest, (u64, u64)>,
}

impl Ledger {
    /// `cadence` is the pending-event count that triggers an automatic
    /// commit; 0 disables auto-commit.
    pub fn in_memory(alg: HashAlgorithm, cadence: usize) -> Self {
        Self {
            alg,
            cadence,
            dir: None,
            objects: ObjectStore::in_memory(alg),
            pending: Vec::new(),
            records: Vec::new(),
            epochs: Vec::new(),
            index: HashMap::new(),
        }
    }

    /// Opens (or creates) a ledger directory, fully verifying committed state.
    pub fn open(dir: &Path, alg: HashAlgorithm, cadence: usize) -> Result<Self, LedgerError> {
        fs::create_dir_all(dir.join(EPOCHS_DIR)).map_err(io_err(dir))?;
        let objects = ObjectStore::open(&dir.join(OBJECTS_DIR), alg)?;
        let (records, epochs) = load_committed(dir, &objects, alg)?;

        let pending_path = dir.join(PENDING_FILE);
        let pending = match fs::read_to_string(&pending_path) {
            Ok(text) => parse_digest_lines(&pending_path, &text)?,
            Err(e) if e.kind() == io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(io_err(&pending_path)(e)),
        };

        let mut ledger = Self {
            alg,
            cadence,
            dir: Some(dir.to_path_buf()),
            objects,
            pending: Vec::new(),
            records,
            epochs: Vec::new(),
            index: HashMap::new(),
        };
        for leaves in epochs {
            ledger.index_epoch(&leaves);
            ledger.epochs.push(leaves);
        }
        for d in pending {
            if ledger.index.contains_key(&d) || ledger.pending.contains(&d) {
                return Err(corrupt(&pending_path, format!("duplicate event {d}")));
            }
            ledger.pending.push(d);
        }
        Ok(ledger)
    }

    fn index_epoch(&mut self, leaves: &[Digest]) {
        let epoch = self.epochs.len() as u64;
        for (i, d) in leaves.iter().enumerate() {
            self.index.insert(*d, (epoch, i as u64));
        }
    }

    pub fn hash_algorithm(&self) -> HashAlgorithm {
        self.alg
    }

    pub fn records(&self) -> &[CommitmentRecord] {
        &self.records
    }

    pub fn pending(&self) -> &[Digest] {
        &self.pending
    }

    pub fn objects(&self) -> &ObjectStore {
        &self.objects
    }

    pub fn epoch_leaves(&self, epoch: u64) -> Option<&[Digest]> {
        self.epochs.get(epoch as usize).map(Vec::as_slice)
    }

    pub fn head(&self) -> Option<Digest> {
        self.records.last().map(|r| r.hash(self.alg))
    }

    pub fn is_recorded(&self, id: &Digest) -> bool {
        self.index.contains_key(id) || self.pending.contains(id)
    }

    /// Stores the event's canonical bytes and queues its id for the current
    /// epoch. Returns the record if this triggered an automatic commit.
    pub fn record_event(
        &mut self,
        event: &ValidatedEvent,
        now: Timestamp,
    ) -> Result<Option<CommitmentRecord>, LedgerError> {
        let id = event.id();
        if event.hash_algorithm() != self.alg {
            return Err(LedgerError::Corrupt {
                path: "event".into(),
                detail: "event id uses a different hash algorithm than the ledger".into(),
            });
        }
        if self.is_recorded(&id) {
            return Err(LedgerError::DuplicateEvent(id));
        }
        let stored = self.objects.put(&canonical_bytes(event))?;
        debug_assert_eq!(stored, id);
        if let Some(dir) = &self.dir {
            let path = dir.join(PENDING_FILE);
            let mut f = fs::OpenOptions::new()
                .create(true)
                .append(true)
                .open(&path)
                .map_err(io_err(&path))?;
            writeln!(f, "{id}").map_err(io_err(&path))?;
        }
        self.pending.push(id);
        if self.cadence > 0 && self.pending.len() >= self.cadence {
            return self.commit_epoch(now).map(Some);
        }
        Ok(None)
    }

    /// Commits every pending event as the next epoch.
    pub fn commit_epoch(&mut self, now: Timestamp) -> Result<CommitmentRecord, LedgerError> {
        if self.pending.is_empty() {
            return Err(LedgerError::EmptyEpoch);
        }
        if let Some(d) = self.pending.iter().find(|d| !self.objects.contains(d)) {
            return Err(LedgerError::DanglingEvent(*d));
        }
        let previous = self.records.last();
        if let Some(p) = previous {
            if now < p.timestamp {
                return Err(LedgerError::ClockRegression {
                    now,
                    previous: p.timestamp,
                });
            }
        }
        let record = CommitmentRecord {
            epoch: self.records.len() as u64,
            root: merkle_root(&self.pending, self.alg)?,
            prev_hash: previous.map_or(Digest::ZERO, |p| p.hash(self.alg)),
            event_count: self.pending.len() as u64,
            timestamp: now,
        };
        if let Some(dir) = &self.dir {
            persist_commit(dir, &record, &self.pending, self.alg)?;
        }
        let leaves = std::mem::take(&mut self.pending);
        self.index_epoch(&leaves);
        self.epochs.push(leaves);
        self.records.push(record);
        Ok(record)
    }

    pub fn inclusion_proof(&self, id: &Digest) -> Result<InclusionProof, LedgerError> {
        let &(epoch, index) = self.index.get(id).ok_or(LedgerError::NotCommitted(*id))?;
        let leaves = &self.epochs[epoch as usize];
        Ok(InclusionProof {
            epoch,
            index,
            event_count: leaves.len() as u64,
            path: build_proof(leaves, index as usize, self.alg),
        })
    }

    /// Checks an inclusion proof against this ledger's commitment for the
    /// proof's epoch.
    pub fn verify_inclusion(&self, id: &Digest, proof: &InclusionProof) -> bool {
        self.records.get(proof.epoch as usize).is_some_and(|r| {
            r.event_count == proof.event_count && verify_proof(id, proof, &r.root, self.alg)
        })
    }

    /// Re-verifies everything: the chain, every root against its leaves, and
    /// every committed object. Directory ledgers are re-read from disk.
    pub fn verify(&self) -> Result<LedgerSummary, LedgerError> {
        let (records, epochs) = match &self.dir {
            Some(dir) => load_committed(dir, &self.objects, self.alg)?,
            None => {
                verify_chain(&self.records, self.alg)?;
                check_epochs(&self.records, &self.epochs, &self.objects, self.alg)?;
                (self.records.clone(), self.epochs.clone())
            }
        };
        Ok(LedgerSummary {
            epochs: records.len() as u64,
            committed_events: epochs.iter().map(|e| e.len() as u64).sum(),
            pending_events: self.pending.len() as u64,
            head: records.last().map(|r| r.hash(self.alg)),
        })
    }
}

fn parse_digest_lines(path: &Path, text: &str) -> Result<Vec<Digest>, LedgerError> {
    if !(text.is_empty() || text.ends_with('\n')) {
        return Err(corrupt(path, "missing trailing newline"));
    }
    text.lines()
        .enumerate()
        .map(|(i, l)| strict_digest(l).ok_or_else(|| corrupt(path, format!("line {}: bad digest", i + 1))))
        .collect()
}

fn read_optional(path: &Path) -> Result<Option<String>, LedgerError> {
    match fs::read(path) {
        Ok(bytes) => String::from_utf8(bytes)
            .map(Some)
            .map_err(|_| corrupt(path, "not UTF-8")),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(io_err(path)(e)),
    }
}

fn epoch_path(dir: &Path, epoch: u64) -> PathBuf {
    dir.join(EPOCHS_DIR).join(format!("{epoch}.leaves"))
}

fn render_leaves(leaves: &[Digest]) -> String {
    leaves.iter().map(|d| format!("{d}\n")).collect()
}

fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), LedgerError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

/// Membership first, then the log, then the head, then the pending reset:
/// an interrupted commit leaves a state that fails verification loudly
/// rather than one that silently drops events.
fn persist_commit(
    dir: &Path,
    record: &CommitmentRecord,
    leaves: &[Digest],
    alg: HashAlgorithm,
) -> Result<(), LedgerError> {
    write_atomic(&epoch_path(dir, record.epoch), render_leaves(leaves).as_bytes())?;
    let log = dir.join(LOG_FILE);
    let mut f = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&log)
        .map_err(io_err(&log))?;
    f.write_all(record.to_line().as_bytes()).map_err(io_err(&log))?;
    f.sync_all().map_err(io_err(&log))?;
    write_atomic(&dir.join(HEAD_FILE), format!("{}\n", record.hash(alg)).as_bytes())?;
    write_atomic(&dir.join(PENDING_FILE), b"")
}

/// Loads and checks the committed state. Damage to committed files is
/// reported as [`LedgerError::Broken`] at the epoch it touches.
fn load_committed(
    dir: &Path,
    objects: &ObjectStore,
    alg: HashAlgorithm,
) -> Result<(Vec<CommitmentRecord>, Vec<Vec<Digest>>), LedgerError> {
    let broken = |epoch: usize, path: &Path, detail: &str| LedgerError::Broken {
        epoch: epoch as u64,
        detail: format!("{}: {detail}", path.display()),
    };
    let log_path = dir.join(LOG_FILE);
    let log = match fs::read(&log_path) {
        Ok(bytes) => bytes,
        Err(e) if e.kind() == io::ErrorKind::NotFound => Vec::new(),
        Err(e) => return Err(io_err(&log_path)(e)),
    };
    let body = match log.strip_suffix(b"\n") {
        Some(body) => body,
        None if log.is_empty() => &log[..],
        None => {
            let last = log.split(|b| *b == b'\n').count() - 1;
            return Err(broken(last, &log_path, "missing trailing newline"));
        }
    };
    let records = if body.is_empty() && log.is_empty() {
        Vec::new()
    } else {
        body.split(|b| *b == b'\n')
            .enumerate()
            .map(|(i, l)| {
                std::str::from_utf8(l)
                    .ok()
                    .and_then(CommitmentRecord::parse_line)
                    .ok_or_else(|| broken(i, &log_path, "malformed record"))
            })
            .collect::<Result<Vec<_>, _>>()?
    };

    let head_path = dir.join(HEAD_FILE);
    let head = match read_optional(&head_path) {
        Ok(None) => None,
        Ok(Some(text)) => Some(
            text.strip_suffix('\n')
                .and_then(strict_digest)
                .ok_or_else(|| broken(records.len().saturating_sub(1), &head_path, "malformed head anchor"))?,
        ),
        Err(LedgerError::Corrupt { .. }) => {
            return Err(broken(records.len().saturating_sub(1), &head_path, "not UTF-8"))
        }
        Err(e) => return Err(e),
    };
    verify_chain_with_head(&records, head.as_ref(), alg)?;

    let mut epochs = Vec::with_capacity(records.len());
    for r in &records {
        let path = epoch_path(dir, r.epoch);
        let at = r.epoch as usize;
        let text = match read_optional(&path) {
            Ok(Some(t)) => t,
            Ok(None) => return Err(broken(at, &path, "missing epoch membership")),
            Err(LedgerError::Corrupt { .. }) => return Err(broken(at, &path, "not UTF-8")),
            Err(e) => return Err(e),
        };
        let leaves = parse_digest_lines(&path, &text).map_err(|e| match e {
            LedgerError::Corrupt { detail, .. } => broken(at, &path, &detail),
            other => other,
        })?;
        epochs.push(leaves);
    }
    check_epochs(&records, &epochs, objects, alg)?;
    Ok((records, epochs))
}

fn check_epochs(
    records: &[CommitmentRecord],
    epochs: &[Vec<Digest>],
    objects: &ObjectStore,
    alg: HashAlgorithm,
) -> Result<(), LedgerError> {
    let mut seen = std::collections::HashSet::new();
    for (r, leaves) in records.iter().zip(epochs) {
        let broken = |detail: String| LedgerError::Broken {
            epoch: r.epoch,
            detail,
        };
        if leaves.len() as u64 != r.event_count {
            return Err(broken("event count does not match membership".into()));
        }
        if merkle_root(leaves, alg)? != r.root {
            return Err(broken("root does not match membership".into()));
        }
        for d in leaves {
            if !seen.insert(*d) {
                return Err(broken(format!("event {d} committed twice")));
            }
            objects.get(d).map_err(|e| broken(e.to_string()))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evidence::fixtures;
    use crate::evidence::validate_event;

    fn leaves(n: usize) -> Vec<Digest> {
        (0..n).map(|i| HashAlgorithm::Sha256.digest(&(i as u64).to_be_bytes())).collect()
    }

    fn events(n: usize) -> Vec<ValidatedEvent> {
        let cat = fixtures::catalog();
        (0..n)
            .map(|i| {
                let e = fixtures::event("a1", &format!("t{i}"), "debugging", "ci", i % 3 != 0, 100 + i as u64);
                validate_event(e, &cat, 10_000).unwrap()
            })
            .collect()
    }

    #[test]
    fn empty_leaves_rejected() {
        assert!(matches!(merkle_root(&[], HashAlgorithm::Sha256), Err(LedgerError::EmptyLeaves)));
    }

    #[test]
    fn single_leaf_root_is_leaf_hash() {
        let l = leaves(1);
        let alg = HashAlgorithm::Sha256;
        assert_eq!(merkle_root(&l, alg).unwrap(), leaf_hash(alg, &l[0]));
    }

    #[test]
    fn every_proof_verifies_and_is_short() {
        let alg = HashAlgorithm::Sha256;
        for n in 1..=33usize {
            let l = leaves(n);
            let root = merkle_root(&l, alg).unwrap();
            let bound = (n as f64).log2().ceil() as usize;
            for i in 0..n {
                let proof = InclusionProof {
                    epoch: 0,
                    index: i as u64,
                    event_count: n as u64,
                    path: build_proof(&l, i, alg),
                };
                assert!(proof.path.len() <= bound);
                assert!(verify_proof(&l[i], &proof, &root, alg), "n={n} i={i}");
                let other = l[(i + 1) % n];
                if n > 1 {
                    assert!(!verify_proof(&other, &proof, &root, alg));
                }
                let mut moved = proof.clone();
                moved.index = (i as u64 + 1) % n as u64;
                if n > 1 {
                    assert!(!verify_proof(&l[i], &moved, &root, alg));
                }
            }
        }
    }

    #[test]
    fn auto_commit_at_cadence() {
        let mut ledger = Ledger::in_memory(HashAlgorithm::Sha256, 4);
        let evs = events(9);
        let mut commits = 0;
        for e in &evs {
            if ledger.record_event(e, 1000).unwrap().is_some() {
                commits += 1;
            }
        }
        assert_eq!(commits, 2);
        assert_eq!(ledger.pending().len(), 1);
        assert!(matches!(
            ledger.inclusion_proof(&evs[8].id()),
            Err(LedgerError::NotCommitted(_))
        ));
        for e in &evs[..8] {
            let p = ledger.inclusion_proof(&e.id()).unwrap();
            assert!(ledger.verify_inclusion(&e.id(), &p));
        }
        assert!(matches!(
            ledger.record_event(&evs[0], 1000),
            Err(LedgerError::DuplicateEvent(_))
        ));
        ledger.verify().unwrap();
    }

    #[test]
    fn commit_rules() {
        let mut ledger = Ledger::in_memory(HashAlgorithm::Sha256, 0);
        assert!(matches!(ledger.commit_epoch(5), Err(LedgerError::EmptyEpoch)));
        let evs = events(2);
        ledger.record_event(&evs[0], 0).unwrap();
        let r0 = ledger.commit_epoch(50).unwrap();
        assert_eq!(r0.prev_hash, Digest::ZERO);
        ledger.record_event(&evs[1], 0).unwrap();
        assert!(matches!(ledger.commit_epoch(49), Err(LedgerError::ClockRegression { .. })));
        let r1 = ledger.commit_epoch(50).unwrap();
        assert_eq!(r1.prev_hash, r0.hash(HashAlgorithm::Sha256));
        verify_chain(ledger.records(), HashAlgorithm::Sha256).unwrap();
    }

    #[test]
    fn chain_breaks_are_located() {
        let mut ledger = Ledger::in_memory(HashAlgorithm::Sha256, 1);
        for e in &events(4) {
            ledger.record_event(e, 10).unwrap();
        }
        let mut recs = ledger.records().to_vec();
        recs[1].root = Digest::ZERO;
        match verify_chain(&recs, HashAlgorithm::Sha256) {
            Err(LedgerError::Broken { epoch, .. }) => assert_eq!(epoch, 2),
            other => panic!("{other:?}"),
        }
        let mut recs = ledger.records().to_vec();
        recs[3].event_count = 2;
        let head = ledger.head();
        assert!(verify_chain(&recs, HashAlgorithm::Sha256).is_ok());
        assert!(verify_chain_with_head(&recs, head.as_ref(), HashAlgorithm::Sha256).is_err());
    }

    #[test]
    fn record_lines_are_strict() {
        let r = CommitmentRecord {
            epoch: 3,
            root: Digest([0xab; 32]),
            prev_hash: Digest([9; 32]),
            event_count: 12,
            timestamp: 99,
        };
        let line = r.to_line();
        assert_eq!(CommitmentRecord::parse_line(line.trim_end()), Some(r));
        assert_eq!(CommitmentRecord::parse_line(&line.trim_end().replace("\t12\t", "\t+12\t")), None);
        assert_eq!(CommitmentRecord::parse_line(&line.trim_end().to_uppercase()), None);
    }

    #[test]
    fn directory_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let evs = events(5);
        {
            let mut ledger = Ledger::open(dir.path(), HashAlgorithm::Sha256, 2).unwrap();
            for e in &evs {
                ledger.record_event(e, 77).unwrap();
            }
        }
        let ledger = Ledger::open(dir.path(), HashAlgorithm::Sha256, 2).unwrap();
        assert_eq!(ledger.records().len(), 2);
        assert_eq!(ledger.pending(), &[evs[4].id()]);
        let summary = ledger.verify().unwrap();
        assert_eq!(summary.committed_events, 4);
        let p = ledger.inclusion_proof(&evs[3].id()).unwrap();
        assert!(ledger.verify_inclusion(&evs[3].id(), &p));
        assert_eq!(
            ledger.objects().get(&evs[0].id()).unwrap(),
            canonical_bytes(&evs[0])
        );
    }
}
