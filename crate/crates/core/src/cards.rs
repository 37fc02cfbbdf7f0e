//! Context-conditioned reputation cards and their scoring.
//!
//! A card holds the history of one agent in one context. Scoring treats
//! each entry as a weighted Beta-Bernoulli pseudo-count: the weight is the
//! product of a strength discount relative to the required strength, an
//! exponential recency decay, and the reliability of the verifier that
//! produced the entry. Integrity violations add pseudo-failures and open a
//! scrutiny window.
//!
//! An integrity event that restates an earlier record (same fields, later
//! integrity status) supersedes it: among entries of one record only those
//! with the most advanced status count towards the success and failure mass.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use thiserror::Error;

use crate::evidence::{
    record_id, ContextKey, IntegrityStatus, Severity, Timestamp, ValidatedEvent, Verdict,
};
use crate::hash::Digest;
use crate::ids::{AgentId, TaskId, VerifierId};
use crate::num::Scalar;
use crate::regimes::StrengthLevel;

pub const DAY_SECONDS: u64 = 86_400;

#[derive(Debug, Clone, PartialEq)]
pub struct AggregationConfig<T> {
    /// Prior pseudo-successes a₀.
    pub prior_successes: T,
    /// Prior pseudo-failures b₀.
    pub prior_failures: T,
    /// Per-level discount γ for evidence weaker than the required strength.
    pub strength_discount: T,
    pub recency_half_life_seconds: T,
    /// Pseudo-failures added per integrity violation.
    pub violation_penalty_failures: T,
    pub scrutiny_duration_seconds: u64,
    /// Normal quantile for the lower confidence bound.
    pub z: T,
}

impl<T: Scalar> Default for AggregationConfig<T> {
    fn default() -> Self {
        Self {
            prior_successes: T::one(),
            prior_failures: T::one(),
            strength_discount: T::of(0.5),
            recency_half_life_seconds: T::of_u64(90 * DAY_SECONDS),
            violation_penalty_failures: T::of(5.0),
            scrutiny_duration_seconds: 30 * DAY_SECONDS,
            z: T::of(1.645),
        }
    }
}

impl<T: Scalar> AggregationConfig<T> {
    pub fn validate(&self) -> Result<(), CardError> {
        let positive = [
            ("prior_successes", self.prior_successes),
            ("prior_failures", self.prior_failures),
            ("strength_discount", self.strength_discount),
            ("recency_half_life_seconds", self.recency_half_life_seconds),
            ("violation_penalty_failures", self.violation_penalty_failures),
            ("z", self.z),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > T::zero()) {
                return Err(CardError::InvalidConfig(format!("{name} must be positive")));
            }
        }
        if self.strength_discount > T::one() {
            return Err(CardError::InvalidConfig(
                "strength_discount must be at most 1".into(),
            ));
        }
        if self.scrutiny_duration_seconds == 0 {
            return Err(CardError::InvalidConfig(
                "scrutiny_duration_seconds must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CardError {
    #[error("event context {event} does not match card context {card}")]
    ContextMismatch { card: ContextKey, event: ContextKey },
    #[error("event agent {event} does not match card agent {card}")]
    AgentMismatch { card: AgentId, event: AgentId },
    #[error("event {0} is already on the card")]
    DuplicateEntry(Digest),
    #[error("no entry for task {0}")]
    UnknownTask(TaskId),
    #[error("every entry for task {0} is already penalized or reversed")]
    AlreadyPenalized(TaskId),
    #[error("a violation needs a severity other than none")]
    InvalidSeverity,
    #[error("negative age")]
    NegativeAge,
    #[error("half-life must be positive")]
    InvalidHalfLife,
    #[error("invalid aggregation config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CardEntry {
    pub event_id: Digest,
    pub task: TaskId,
    /// Identity of the underlying record, ignoring integrity fields.
    pub record: Digest,
    pub strength: StrengthLevel,
    pub verdict: Verdict,
    pub timestamp: Timestamp,
    pub verifier: VerifierId,
    pub status: IntegrityStatus,
    pub severity: Severity,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReputationCard {
    pub agent: AgentId,
    pub context: ContextKey,
    /// Sorted by `(timestamp, event_id)`.
    pub entries: Vec<CardEntry>,
    pub violation_count: u32,
    pub scrutiny_until: Option<Timestamp>,
    pub last_updated: Timestamp,
}

impl ReputationCard {
    pub fn new(agent: AgentId, context: ContextKey) -> Self {
        Self {
            agent,
            context,
            entries: Vec::new(),
            violation_count: 0,
            scrutiny_until: None,
            last_updated: 0,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn extend_scrutiny(&mut self, until: Timestamp) {
        self.scrutiny_until = Some(self.scrutiny_until.map_or(until, |u| u.max(until)));
    }

    /// Adds one event. The resulting card does not depend on the order in
    /// which events arrive.
    pub fn update<T: Scalar>(
        &mut self,
        event: &ValidatedEvent,
        cfg: &AggregationConfig<T>,
    ) -> Result<(), CardError> {
        if event.agent != self.agent {
            return Err(CardError::AgentMismatch {
                card: self.agent.clone(),
                event: event.agent.clone(),
            });
        }
        if event.context != self.context {
            return Err(CardError::ContextMismatch {
                card: self.context.clone(),
                event: event.context.clone(),
            });
        }
        let key = (event.timestamp, event.id());
        let pos = match self
            .entries
            .binary_search_by(|e| (e.timestamp, e.event_id).cmp(&key))
        {
            Ok(_) => return Err(CardError::DuplicateEntry(event.id())),
            Err(pos) => pos,
        };
        self.entries.insert(
            pos,
            CardEntry {
                event_id: event.id(),
                task: event.task.clone(),
                record: record_id(event),
                strength: event.strength,
                verdict: event.outcome.verdict,
                timestamp: event.timestamp,
                verifier: event.verifier.clone(),
                status: event.integrity.status,
                severity: event.integrity.severity,
            },
        );
        if event.integrity.status.is_violation() {
            self.violation_count += 1;
            let from = event.integrity.dispute_time.unwrap_or(event.timestamp);
            self.extend_scrutiny(from.saturating_add(cfg.scrutiny_duration_seconds));
        }
        self.last_updated = self.last_updated.max(event.timestamp);
        Ok(())
    }

    /// Marks the latest not-yet-penalized entry for `task` as penalized.
    pub fn apply_integrity_violation<T: Scalar>(
        &mut self,
        task: &TaskId,
        severity: Severity,
        now: Timestamp,
        cfg: &AggregationConfig<T>,
    ) -> Result<(), CardError> {
        if severity == Severity::None {
            return Err(CardError::InvalidSeverity);
        }
        let mut seen = false;
        let target = self.entries.iter_mut().rev().find(|e| {
            if e.task == *task {
                seen = true;
                !e.status.is_violation()
            } else {
                false
            }
        });
        match target {
            Some(entry) => {
                entry.status = IntegrityStatus::Penalized;
                entry.severity = severity;
            }
            None if seen => return Err(CardError::AlreadyPenalized(task.clone())),
            None => return Err(CardError::UnknownTask(task.clone())),
        }
        self.violation_count += 1;
        self.extend_scrutiny(now.saturating_add(cfg.scrutiny_duration_seconds));
        self.last_updated = self.last_updated.max(now);
        Ok(())
    }

    /// Entries that count towards the success/failure mass.
    pub fn effective_entries(&self) -> impl Iterator<Item = &CardEntry> {
        let mut top: HashMap<&Digest, u8> = HashMap::new();
        for e in &self.entries {
            let r = top.entry(&e.record).or_insert(0);
            *r = (*r).max(e.status.rank());
        }
        self.entries
            .iter()
            .filter(move |e| top.get(&e.record).is_some_and(|&r| r == e.status.rank()))
    }

    pub fn score<T: Scalar>(
        &self,
        required: StrengthLevel,
        now: Timestamp,
        cfg: &AggregationConfig<T>,
        reliability: &impl ReliabilitySource<T>,
    ) -> Assessment<T> {
        score(self, required, now, cfg, reliability)
    }
}

/// Value-style form of [`ReputationCard::update`].
pub fn update_card<T: Scalar>(
    mut card: ReputationCard,
    event: &ValidatedEvent,
    cfg: &AggregationConfig<T>,
) -> Result<ReputationCard, CardError> {
    card.update(event, cfg)?;
    Ok(card)
}

/// Value-style form of [`ReputationCard::apply_integrity_violation`].
pub fn apply_integrity_violation<T: Scalar>(
    mut card: ReputationCard,
    task: &TaskId,
    severity: Severity,
    now: Timestamp,
    cfg: &AggregationConfig<T>,
) -> Result<ReputationCard, CardError> {
    card.apply_integrity_violation(task, severity, now, cfg)?;
    Ok(card)
}

/// Builds the card for `(agent, context)` from scratch: filter, sort by
/// `(timestamp, event_id)`, fold.
pub fn rebuild_card<'a, T: Scalar>(
    events: impl IntoIterator<Item = &'a ValidatedEvent>,
    agent: &AgentId,
    context: &ContextKey,
    cfg: &AggregationConfig<T>,
) -> ReputationCard {
    let mut matching: Vec<&ValidatedEvent> = events
        .into_iter()
        .filter(|e| e.agent == *agent && e.context == *context)
        .collect();
    matching.sort_by_key(|e| (e.timestamp, e.id()));
    matching.dedup_by_key(|e| e.id());
    let mut card = ReputationCard::new(agent.clone(), context.clone());
    for e in matching {
        card.update(e, cfg).expect("filtered to matching, deduplicated events");
    }
    card
}

/// `2^(-age / half_life)`.
pub fn decay_weight<T: Scalar>(age_seconds: T, half_life: T) -> Result<T, CardError> {
    if age_seconds < T::zero() {
        return Err(CardError::NegativeAge);
    }
    if !(half_life > T::zero()) {
        return Err(CardError::InvalidHalfLife);
    }
    Ok((-(age_seconds / half_life)).exp2())
}

/// Weight of a single entry towards an assessment at `required` strength.
pub fn entry_weight<T: Scalar>(
    entry: &CardEntry,
    required: StrengthLevel,
    now: Timestamp,
    cfg: &AggregationConfig<T>,
    reliability: &impl ReliabilitySource<T>,
) -> T {
    let gap = i32::from(entry.strength.shortfall(required));
    let age = T::of_u64(now.saturating_sub(entry.timestamp));
    let decay = decay_weight(age, cfg.recency_half_life_seconds)
        .expect("age is non-negative and config half-life positive");
    cfg.strength_discount.powi(gap) * decay * reliability.reliability(&entry.verifier)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Assessment<T> {
    /// Posterior mean.
    pub score: T,
    /// One-sided lower confidence bound, clamped at 0.
    pub lcb: T,
    /// `score - lcb`.
    pub uncertainty: T,
    /// Recency- and reliability-weighted mass of entries at or above the
    /// required strength.
    pub n_eff: T,
    pub scrutiny_active: bool,
}

impl<T: Scalar> fmt::Display for Assessment<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "score={:.6} lcb={:.6} uncertainty={:.6} n_eff={:.6} scrutiny={}",
            self.score, self.lcb, self.uncertainty, self.n_eff, self.scrutiny_active
        )
    }
}

/// Scores a card at the required strength. Entries dated after `now` are
/// treated as age zero.
pub fn score<T: Scalar>(
    card: &ReputationCard,
    required: StrengthLevel,
    now: Timestamp,
    cfg: &AggregationConfig<T>,
    reliability: &impl ReliabilitySource<T>,
) -> Assessment<T> {
    let mut successes = T::zero();
    let mut failures = T::zero();
    let mut n_eff = T::zero();
    for entry in card.effective_entries() {
        let w = entry_weight(entry, required, now, cfg, reliability);
        match entry.verdict {
            Verdict::Success => successes = successes + w,
            Verdict::Failure => failures = failures + w,
        }
        if entry.strength >= required {
            let age = T::of_u64(now.saturating_sub(entry.timestamp));
            let decay = decay_weight(age, cfg.recency_half_life_seconds)
                .expect("validated half-life");
            n_eff = n_eff + decay * reliability.reliability(&entry.verifier);
        }
    }
    failures = failures + cfg.violation_penalty_failures * T::of_u64(u64::from(card.violation_count));
    posterior(
        cfg.prior_successes + successes,
        cfg.prior_failures + failures,
        n_eff,
        card.scrutiny_until.is_some_and(|until| now < until),
        cfg.z,
    )
}

/// Turns Beta posterior parameters into an assessment.
pub fn posterior<T: Scalar>(a: T, b: T, n_eff: T, scrutiny_active: bool, z: T) -> Assessment<T> {
    let n = a + b;
    let mean = a / n;
    let half_width = z * (mean * (T::one() - mean) / n).sqrt();
    let lcb = (mean - half_width).max(T::zero());
    Assessment {
        score: mean,
        lcb,
        uncertainty: mean - lcb,
        n_eff,
        scrutiny_active,
    }
}

/// Supplies r(v), the weight given to a verifier's verdicts.
pub trait ReliabilitySource<T> {
    fn reliability(&self, verifier: &VerifierId) -> T;
}

/// Every verifier gets the same reliability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantReliability<T>(pub T);

impl<T: Copy> ReliabilitySource<T> for ConstantReliability<T> {
    fn reliability(&self, _: &VerifierId) -> T {
        self.0
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CrossCheckTally {
    pub agreements: u64,
    pub cross_checks: u64,
}

/// Cross-verification history per verifier, with reliability
/// r(v) = (agreements + 9) / (cross_checks + 10).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VerifierReliabilityTable {
    tallies: BTreeMap<VerifierId, CrossCheckTally>,
}

impl VerifierReliabilityTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record_cross_check(&mut self, verifier: &VerifierId, agreed: bool) {
        let t = self.tallies.entry(verifier.clone()).or_default();
        t.cross_checks += 1;
        if agreed {
            t.agreements += 1;
        }
    }

    pub fn tally(&self, verifier: &VerifierId) -> CrossCheckTally {
        self.tallies.get(verifier).copied().unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&VerifierId, &CrossCheckTally)> {
        self.tallies.iter()
    }

    /// `verifier<TAB>agreements<TAB>cross_checks` lines.
    pub fn to_tsv(&self) -> String {
        self.tallies
            .iter()
            .map(|(v, t)| format!("{v}\t{}\t{}\n", t.agreements, t.cross_checks))
            .collect()
    }

    pub fn from_tsv(text: &str) -> Result<Self, String> {
        let mut table = Self::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let bad = || format!("reliability line {}: {line:?}", n + 1);
            let mut parts = line.split('\t');
            let (Some(v), Some(a), Some(c), None) =
                (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(bad());
            };
            let v = VerifierId::new(v).map_err(|_| bad())?;
            let agreements: u64 = a.parse().map_err(|_| bad())?;
            let cross_checks: u64 = c.parse().map_err(|_| bad())?;
            if agreements > cross_checks {
                return Err(bad());
            }
            table.tallies.insert(
                v,
                CrossCheckTally {
                    agreements,
                    cross_checks,
                },
            );
        }
        Ok(table)
    }
}

impl<T: Scalar> ReliabilitySource<T> for VerifierReliabilityTable {
    fn reliability(&self, verifier: &VerifierId) -> T {
        let t = self.tally(verifier);
        T::of_u64(t.agreements + 9) / T::of_u64(t.cross_checks + 10)
    }
}

/// Free-function form of [`VerifierReliabilityTable::record_cross_check`].
pub fn record_cross_check(
    mut table: VerifierReliabilityTable,
    verifier: &VerifierId,
    agreed: bool,
) -> VerifierReliabilityTable {
    table.record_cross_check(verifier, agreed);
    table
}

/// All cards, keyed by `(agent, context)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CardStore {
    cards: BTreeMap<(AgentId, ContextKey), ReputationCard>,
}

impl CardStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_events<'a, T: Scalar>(
        events: impl IntoIterator<Item = &'a ValidatedEvent>,
        cfg: &AggregationConfig<T>,
    ) -> Result<Self, CardError> {
        let mut store = Self::new();
        for e in events {
            store.ingest(e, cfg)?;
        }
        Ok(store)
    }

    pub fn ingest<T: Scalar>(
        &mut self,
        event: &ValidatedEvent,
        cfg: &AggregationConfig<T>,
    ) -> Result<(), CardError> {
        self.cards
            .entry((event.agent.clone(), event.context.clone()))
            .or_insert_with(|| ReputationCard::new(event.agent.clone(), event.context.clone()))
            .update(event, cfg)
    }

    pub fn get(&self, agent: &AgentId, context: &ContextKey) -> Option<&ReputationCard> {
        self.cards.get(&(agent.clone(), context.clone()))
    }

    pub fn get_mut(&mut self, agent: &AgentId, context: &ContextKey) -> Option<&mut ReputationCard> {
        self.cards.get_mut(&(agent.clone(), context.clone()))
    }

    /// No evidence in this context yet.
    pub fn is_cold(&self, agent: &AgentId, context: &ContextKey) -> bool {
        self.get(agent, context).is_none_or(ReputationCard::is_empty)
    }

    /// Scores the card, or an empty card when the agent has none.
    pub fn assess<T: Scalar>(
        &self,
        agent: &AgentId,
        context: &ContextKey,
        required: StrengthLevel,
        now: Timestamp,
        cfg: &AggregationConfig<T>,
        reliability: &impl ReliabilitySource<T>,
    ) -> Assessment<T> {
        match self.get(agent, context) {
            Some(card) => card.score(required, now, cfg, reliability),
            None => ReputationCard::new(agent.clone(), context.clone())
                .score(required, now, cfg, reliability),
        }
    }

    pub fn cards(&self) -> impl Iterator<Item = &ReputationCard> {
        self.cards.values()
    }

    pub fn contexts_of<'a>(&'a self, agent: &'a AgentId) -> impl Iterator<Item = &'a ContextKey> + 'a {
        self.cards
            .keys()
            .filter(move |(a, _)| a == agent)
            .map(|(_, c)| c)
    }

    pub fn len(&self) -> usize {
        self.cards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cards.is_empty()
    }
}
