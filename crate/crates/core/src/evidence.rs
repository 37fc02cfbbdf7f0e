//! Evidence events: validation, canonical encoding, identity, storage,
//! and provenance queries.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::ops::Deref;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hash::{Digest, HashAlgorithm};
use crate::ids::{check_label, AgentId, IdError, RegimeId, TaskId, VerifierId};
use crate::regimes::{RegimeCatalog, StrengthLevel};

/// Seconds since the Unix epoch.
pub type Timestamp = u64;

pub const MAX_DETAIL_CHARS: usize = 1024;

/// The kind of work an event belongs to. Equality is exact on both parts.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContextKey {
    pub task_class: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subdomain: Option<String>,
}

impl ContextKey {
    pub fn new(task_class: impl Into<String>) -> Self {
        Self {
            task_class: task_class.into(),
            subdomain: None,
        }
    }

    pub fn with_subdomain(task_class: impl Into<String>, subdomain: impl Into<String>) -> Self {
        Self {
            task_class: task_class.into(),
            subdomain: Some(subdomain.into()),
        }
    }

    pub fn is_well_formed(&self) -> bool {
        check_label(&self.task_class).is_ok()
            && self.subdomain.as_deref().is_none_or(|s| check_label(s).is_ok())
    }
}

impl fmt::Display for ContextKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.subdomain {
            Some(sub) => write!(f, "{}/{}", self.task_class, sub),
            None => f.write_str(&self.task_class),
        }
    }
}

impl FromStr for ContextKey {
    type Err = IdError;

    /// `task-class` or `task-class/subdomain`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = match s.split_once('/') {
            Some((class, sub)) => ContextKey::with_subdomain(class, sub),
            None => ContextKey::new(s),
        };
        check_label(&key.task_class)?;
        if let Some(sub) = &key.subdomain {
            check_label(sub)?;
        }
        Ok(key)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Success,
    Failure,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Success => "success",
            Verdict::Failure => "failure",
        }
    }

    pub fn is_success(self) -> bool {
        self == Verdict::Success
    }
}

impl FromStr for Verdict {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "success" => Ok(Verdict::Success),
            "failure" => Ok(Verdict::Failure),
            other => Err(format!("unknown verdict {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outcome {
    pub verdict: Verdict,
    /// Free text; never affects scoring or event identity.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Outcome {
    pub fn success() -> Self {
        Self {
            verdict: Verdict::Success,
            detail: None,
        }
    }

    pub fn failure() -> Self {
        Self {
            verdict: Verdict::Failure,
            detail: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IntegrityStatus {
    Clean,
    Disputed,
    Reversed,
    Penalized,
}

impl IntegrityStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            IntegrityStatus::Clean => "clean",
            IntegrityStatus::Disputed => "disputed",
            IntegrityStatus::Reversed => "reversed",
            IntegrityStatus::Penalized => "penalized",
        }
    }

    /// Position in the monotone lifecycle; reversed and penalized are both terminal.
    pub fn rank(self) -> u8 {
        match self {
            IntegrityStatus::Clean => 0,
            IntegrityStatus::Disputed => 1,
            IntegrityStatus::Reversed | IntegrityStatus::Penalized => 2,
        }
    }

    /// Reversed or penalized: counts as an integrity violation.
    pub fn is_violation(self) -> bool {
        self.rank() == 2
    }
}

impl FromStr for IntegrityStatus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "clean" => Ok(IntegrityStatus::Clean),
            "disputed" => Ok(IntegrityStatus::Disputed),
            "reversed" => Ok(IntegrityStatus::Reversed),
            "penalized" => Ok(IntegrityStatus::Penalized),
            other => Err(format!("unknown integrity status {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    None,
    Negligence,
    Fraud,
}

impl Severity {
    pub fn as_str(self) -> &'static str {
        match self {
            Severity::None => "none",
            Severity::Negligence => "negligence",
            Severity::Fraud => "fraud",
        }
    }
}

impl FromStr for Severity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Severity::None),
            "negligence" => Ok(Severity::Negligence),
            "fraud" => Ok(Severity::Fraud),
            other => Err(format!("unknown severity {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrityRecord {
    pub status: IntegrityStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dispute_time: Option<Timestamp>,
    pub severity: Severity,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("integrity status cannot move from {from} to {to}", from = .from.as_str(), to = .to.as_str())]
pub struct IntegrityTransitionError {
    pub from: IntegrityStatus,
    pub to: IntegrityStatus,
}

impl IntegrityRecord {
    pub fn clean() -> Self {
        Self {
            status: IntegrityStatus::Clean,
            dispute_time: None,
            severity: Severity::None,
        }
    }

    pub fn penalized(severity: Severity, dispute_time: Timestamp) -> Self {
        Self {
            status: IntegrityStatus::Penalized,
            dispute_time: Some(dispute_time),
            severity,
        }
    }

    /// `clean` exactly when severity is `none` and no dispute time is set.
    pub fn is_consistent(&self) -> bool {
        let clean_fields = self.severity == Severity::None && self.dispute_time.is_none();
        (self.status == IntegrityStatus::Clean) == clean_fields
    }

    /// Moves forward in the lifecycle clean → disputed → {reversed | penalized}.
    pub fn transition(
        &self,
        to: IntegrityStatus,
        severity: Severity,
        at: Timestamp,
    ) -> Result<Self, IntegrityTransitionError> {
        if to.rank() <= self.status.rank() {
            return Err(IntegrityTransitionError {
                from: self.status,
                to,
            });
        }
        Ok(Self {
            status: to,
            dispute_time: Some(self.dispute_time.unwrap_or(at)),
            severity,
        })
    }
}

/// One verified agent-task interaction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvidenceEvent {
    pub agent: AgentId,
    pub task: TaskId,
    pub context: ContextKey,
    pub regime_id: RegimeId,
    pub outcome: Outcome,
    pub strength: StrengthLevel,
    pub timestamp: Timestamp,
    pub verifier: VerifierId,
    pub integrity: IntegrityRecord,
    pub evidence_kinds: BTreeSet<String>,
}

impl EvidenceEvent {
    /// Parses one JSON Lines record.
    pub fn from_json_line(line: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(line)
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("events always serialize")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Violation {
    #[error("unknown regime {0}")]
    UnknownRegime(RegimeId),
    #[error("event strength {event} does not match regime strength {regime}")]
    StrengthMismatch {
        event: StrengthLevel,
        regime: StrengthLevel,
    },
    #[error("missing required evidence kind {0:?}")]
    MissingEvidenceKind(String),
    #[error("timestamp {timestamp} is later than now ({now})")]
    FutureTimestamp { timestamp: Timestamp, now: Timestamp },
    #[error("malformed identifier in field {0}")]
    MalformedIdentifier(&'static str),
    #[error("malformed context {0}")]
    MalformedContext(String),
    #[error("malformed evidence kind {0:?}")]
    MalformedEvidenceKind(String),
    #[error("outcome detail exceeds {MAX_DETAIL_CHARS} characters")]
    DetailTooLong,
    #[error("integrity record is inconsistent")]
    InconsistentIntegrity,
    #[error("dispute time precedes the event timestamp")]
    DisputeBeforeEvent,
}

/// An event that passed [`validate_event`], with its digest cached.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidatedEvent {
    event: EvidenceEvent,
    id: Digest,
    alg: HashAlgorithm,
}

impl ValidatedEvent {
    pub fn event(&self) -> &EvidenceEvent {
        &self.event
    }

    pub fn id(&self) -> Digest {
        self.id
    }

    pub fn hash_algorithm(&self) -> HashAlgorithm {
        self.alg
    }

    pub fn into_inner(self) -> EvidenceEvent {
        self.event
    }

    /// Re-admits an event that was validated when it was first stored.
    fn from_trusted(event: EvidenceEvent, alg: HashAlgorithm) -> Self {
        let id = event_id_with(&event, alg);
        Self { event, id, alg }
    }
}

impl Deref for ValidatedEvent {
    type Target = EvidenceEvent;

    fn deref(&self) -> &EvidenceEvent {
        &self.event
    }
}

/// Validates with the default hash algorithm.
pub fn validate_event(
    event: EvidenceEvent,
    catalog: &RegimeCatalog,
    now: Timestamp,
) -> Result<ValidatedEvent, Vec<Violation>> {
    validate_event_with(event, catalog, now, HashAlgorithm::default())
}

/// Checks every event invariant and reports all violations found.
pub fn validate_event_with(
    event: EvidenceEvent,
    catalog: &RegimeCatalog,
    now: Timestamp,
    alg: HashAlgorithm,
) -> Result<ValidatedEvent, Vec<Violation>> {
    let mut v = Vec::new();

    for (field, ok) in [
        ("agent", event.agent.is_well_formed()),
        ("task", event.task.is_well_formed()),
        ("regime_id", event.regime_id.is_well_formed()),
        ("verifier", event.verifier.is_well_formed()),
    ] {
        if !ok {
            v.push(Violation::MalformedIdentifier(field));
        }
    }
    if !event.context.is_well_formed() {
        v.push(Violation::MalformedContext(event.context.to_string()));
    }
    for kind in &event.evidence_kinds {
        if check_label(kind).is_err() {
            v.push(Violation::MalformedEvidenceKind(kind.clone()));
        }
    }
    if event
        .outcome
        .detail
        .as_ref()
        .is_some_and(|d| d.chars().count() > MAX_DETAIL_CHARS)
    {
        v.push(Violation::DetailTooLong);
    }
    if event.timestamp > now {
        v.push(Violation::FutureTimestamp {
            timestamp: event.timestamp,
            now,
        });
    }
    if !event.integrity.is_consistent() {
        v.push(Violation::InconsistentIntegrity);
    }
    if event
        .integrity
        .dispute_time
        .is_some_and(|t| t < event.timestamp)
    {
        v.push(Violation::DisputeBeforeEvent);
    }

    match catalog.lookup(&event.regime_id) {
        None => v.push(Violation::UnknownRegime(event.regime_id.clone())),
        Some(regime) => {
            if regime.strength != event.strength {
                v.push(Violation::StrengthMismatch {
                    event: event.strength,
                    regime: regime.strength,
                });
            }
            for kind in regime.required_evidence.difference(&event.evidence_kinds) {
                v.push(Violation::MissingEvidenceKind(kind.clone()));
            }
        }
    }

    if v.is_empty() {
        Ok(ValidatedEvent::from_trusted(event, alg))
    } else {
        Err(v)
    }
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    let len = u32::try_from(s.len()).expect("field length fits in u32");
    out.extend_from_slice(&len.to_be_bytes());
    out.extend_from_slice(s.as_bytes());
}

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&8u32.to_be_bytes());
    out.extend_from_slice(&v.to_be_bytes());
}

/// Deterministic byte encoding of an event.
///
/// Field order: agent, task, task_class, subdomain (empty when absent),
/// regime_id, verdict, strength, timestamp, verifier, integrity status,
/// integrity severity, evidence kinds. Every field is a 4-byte big-endian
/// length followed by its payload: UTF-8 for text, 8-byte big-endian for
/// integers. The evidence kinds field is a 4-byte count followed by each
/// kind, sorted, as a length-prefixed string. Outcome detail and dispute
/// time are not part of the encoding.
pub fn canonical_bytes(event: &EvidenceEvent) -> Vec<u8> {
    let mut out = Vec::with_capacity(256);
    put_str(&mut out, event.agent.as_str());
    put_str(&mut out, event.task.as_str());
    put_str(&mut out, &event.context.task_class);
    put_str(&mut out, event.context.subdomain.as_deref().unwrap_or(""));
    put_str(&mut out, event.regime_id.as_str());
    put_str(&mut out, event.outcome.verdict.as_str());
    put_u64(&mut out, u64::from(event.strength.level()));
    put_u64(&mut out, event.timestamp);
    put_str(&mut out, event.verifier.as_str());
    put_str(&mut out, event.integrity.status.as_str());
    put_str(&mut out, event.integrity.severity.as_str());
    let count = u32::try_from(event.evidence_kinds.len()).expect("kind count fits in u32");
    out.extend_from_slice(&count.to_be_bytes());
    for kind in &event.evidence_kinds {
        put_str(&mut out, kind);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("truncated input at byte {0}")]
    Truncated(usize),
    #[error("field {0} is not valid UTF-8")]
    Utf8(&'static str),
    #[error("field {field} has an invalid value")]
    InvalidValue { field: &'static str },
    #[error("{0} trailing bytes")]
    TrailingBytes(usize),
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or(DecodeError::Truncated(self.pos))?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32, DecodeError> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes(b.try_into().expect("4 bytes")))
    }

    fn string(&mut self, field: &'static str) -> Result<String, DecodeError> {
        let len = self.u32()? as usize;
        let b = self.take(len)?;
        String::from_utf8(b.to_vec()).map_err(|_| DecodeError::Utf8(field))
    }

    fn u64(&mut self, field: &'static str) -> Result<u64, DecodeError> {
        if self.u32()? != 8 {
            return Err(DecodeError::InvalidValue { field });
        }
        let b = self.take(8)?;
        Ok(u64::from_be_bytes(b.try_into().expect("8 bytes")))
    }

    fn parsed<T: FromStr>(&mut self, field: &'static str) -> Result<T, DecodeError> {
        self.string(field)?
            .parse()
            .map_err(|_| DecodeError::InvalidValue { field })
    }
}

/// Inverse of [`canonical_bytes`]. Fields outside the encoding (outcome
/// detail, dispute time) come back as `None`.
pub fn decode_canonical(bytes: &[u8]) -> Result<EvidenceEvent, DecodeError> {
    let mut r = Reader { bytes, pos: 0 };
    let agent = r.parsed("agent")?;
    let task = r.parsed("task")?;
    let task_class = r.string("task_class")?;
    let subdomain = r.string("subdomain")?;
    let regime_id = r.parsed("regime_id")?;
    let verdict = r.parsed("verdict")?;
    let strength = u8::try_from(r.u64("strength")?)
        .ok()
        .and_then(StrengthLevel::from_level)
        .ok_or(DecodeError::InvalidValue { field: "strength" })?;
    let timestamp = r.u64("timestamp")?;
    let verifier = r.parsed("verifier")?;
    let status = r.parsed("integrity.status")?;
    let severity = r.parsed("integrity.severity")?;
    let count = r.u32()?;
    let mut evidence_kinds = BTreeSet::new();
    for _ in 0..count {
        evidence_kinds.insert(r.string("evidence_kinds")?);
    }
    if r.pos != bytes.len() {
        return Err(DecodeError::TrailingBytes(bytes.len() - r.pos));
    }
    Ok(EvidenceEvent {
        agent,
        task,
        context: ContextKey {
            task_class,
            subdomain: (!subdomain.is_empty()).then_some(subdomain),
        },
        regime_id,
        outcome: Outcome {
            verdict,
            detail: None,
        },
        strength,
        timestamp,
        verifier,
        integrity: IntegrityRecord {
            status,
            dispute_time: None,
            severity,
        },
        evidence_kinds,
    })
}

/// Digest of the event with its integrity fields reset to clean: shared by
/// an event and every later restatement of it under a new status.
pub fn record_id(event: &ValidatedEvent) -> Digest {
    if event.integrity.status == IntegrityStatus::Clean {
        return event.id();
    }
    let clean = EvidenceEvent {
        integrity: IntegrityRecord::clean(),
        ..event.event().clone()
    };
    event_id_with(&clean, event.hash_algorithm())
}

/// SHA-256 of the canonical bytes.
pub fn event_id(event: &EvidenceEvent) -> Digest {
    event_id_with(event, HashAlgorithm::Sha256)
}

pub fn event_id_with(event: &EvidenceEvent, alg: HashAlgorithm) -> Digest {
    alg.digest(&canonical_bytes(event))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Receipt {
    pub sequence_number: u64,
    pub event_id: Digest,
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("event {0} is already stored")]
    DuplicateEvent(Digest),
    #[error("event was hashed with {event:?} but the store uses {store:?}")]
    HashMismatch {
        event: HashAlgorithm,
        store: HashAlgorithm,
    },
    #[error("storage failure: {0}")]
    StorageFailure(String),
}

impl From<std::io::Error> for StoreError {
    fn from(e: std::io::Error) -> Self {
        StoreError::StorageFailure(e.to_string())
    }
}

/// Conjunctive filter; `None` fields match anything.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EventFilter {
    pub agent: Option<AgentId>,
    pub task_class: Option<String>,
    pub regime_id: Option<RegimeId>,
    pub min_strength: Option<StrengthLevel>,
    pub verdict: Option<Verdict>,
    /// Inclusive on both ends.
    pub time_range: Option<(Timestamp, Timestamp)>,
}

impl EventFilter {
    pub fn matches(&self, e: &EvidenceEvent) -> bool {
        self.agent.as_ref().is_none_or(|a| *a == e.agent)
            && self
                .task_class
                .as_ref()
                .is_none_or(|c| *c == e.context.task_class)
            && self.regime_id.as_ref().is_none_or(|r| *r == e.regime_id)
            && self.min_strength.is_none_or(|s| e.strength >= s)
            && self.verdict.is_none_or(|v| v == e.outcome.verdict)
            && self
                .time_range
                .is_none_or(|(lo, hi)| lo <= e.timestamp && e.timestamp <= hi)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryResult<'a> {
    pub count: usize,
    /// `(sequence_number, event)` in append order.
    pub events: Vec<(u64, &'a ValidatedEvent)>,
}

/// Append-only event store, in memory with an optional JSON Lines file.
///
/// Single writer: appends take `&mut self`; readers borrow a consistent view.
#[derive(Debug)]
pub struct EvidenceStore {
    alg: HashAlgorithm,
    events: Vec<ValidatedEvent>,
    by_id: HashMap<Digest, u64>,
    file: Option<(PathBuf, File)>,
}

impl EvidenceStore {
    pub fn new(alg: HashAlgorithm) -> Self {
        Self {
            alg,
            events: Vec::new(),
            by_id: HashMap::new(),
            file: None,
        }
    }

    pub fn in_memory() -> Self {
        Self::new(HashAlgorithm::default())
    }

    /// Opens (creating if needed) a JSON Lines backed store.
    pub fn open(path: &Path, alg: HashAlgorithm) -> Result<Self, StoreError> {
        let mut store = Self::new(alg);
        if path.exists() {
            let reader = BufReader::new(File::open(path)?);
            for (n, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let event = EvidenceEvent::from_json_line(&line).map_err(|e| {
                    StoreError::StorageFailure(format!("{}:{}: {e}", path.display(), n + 1))
                })?;
                store.push(ValidatedEvent::from_trusted(event, alg))?;
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        store.file = Some((path.to_path_buf(), file));
        Ok(store)
    }

    fn push(&mut self, event: ValidatedEvent) -> Result<Receipt, StoreError> {
        if event.alg != self.alg {
            return Err(StoreError::HashMismatch {
                event: event.alg,
                store: self.alg,
            });
        }
        if self.by_id.contains_key(&event.id) {
            return Err(StoreError::DuplicateEvent(event.id));
        }
        let seq = self.events.len() as u64;
        self.by_id.insert(event.id, seq);
        let receipt = Receipt {
            sequence_number: seq,
            event_id: event.id,
        };
        self.events.push(event);
        Ok(receipt)
    }

    pub fn append(&mut self, event: ValidatedEvent) -> Result<Receipt, StoreError> {
        if self.by_id.contains_key(&event.id) {
            return Err(StoreError::DuplicateEvent(event.id));
        }
        if let Some((_, file)) = &mut self.file {
            writeln!(file, "{}", event.to_json_line())?;
            file.flush()?;
        }
        self.push(event)
    }

    pub fn query(&self, filter: &EventFilter) -> QueryResult<'_> {
        let events: Vec<_> = self
            .events
            .iter()
            .enumerate()
            .filter(|(_, e)| filter.matches(e))
            .map(|(i, e)| (i as u64, e))
            .collect();
        QueryResult {
            count: events.len(),
            events,
        }
    }

    pub fn events(&self) -> &[ValidatedEvent] {
        &self.events
    }

    pub fn get(&self, sequence_number: u64) -> Option<&ValidatedEvent> {
        self.events.get(usize::try_from(sequence_number).ok()?)
    }

    pub fn sequence_of(&self, id: &Digest) -> Option<u64> {
        self.by_id.get(id).copied()
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn hash_algorithm(&self) -> HashAlgorithm {
        self.alg
    }

    pub fn path(&self) -> Option<&Path> {
        self.file.as_ref().map(|(p, _)| p.as_path())
    }
}

/// Free-function form of [`EvidenceStore::query`].
pub fn provenance_query<'a>(store: &'a EvidenceStore, filter: &EventFilter) -> QueryResult<'a> {
    store.query(filter)
}
