//! The two-agent security-audit allocation: α has a long debugging record
//! and a thin, weakly verified security record; β has fewer tasks overall
//! but an expert-reviewed security record.

use rand::SeedableRng;
use rand_pcg::Pcg64;
use thiserror::Error;

use crate::cards::{AggregationConfig, Assessment, CardStore, VerifierReliabilityTable};
use crate::evidence::{
    validate_event, ContextKey, EvidenceEvent, EvidenceStore, IntegrityRecord, Outcome, Timestamp,
};
use crate::ids::{AgentId, OwnerId, RegimeId, TaskId, VerifierId};
use crate::policy::{allocate, AllocationContext, AllocationError, Candidate, PolicyConfig, PolicyDecision, TaskSpec};
use crate::regimes::{RegimeCatalog, StrengthLevel};

pub const SHOWCASE_ALPHA: &str = "alpha";
pub const SHOWCASE_BETA: &str = "beta";

const NOW: Timestamp = 1_700_000_000;
const HOUR: u64 = 3600;
const REVIEWERS: [&str; 5] = ["reviewer-1", "reviewer-2", "reviewer-3", "reviewer-4", "reviewer-5"];

#[derive(Debug)]
pub struct ShowcaseScenario {
    pub catalog: RegimeCatalog,
    pub evidence: EvidenceStore,
    pub cards: CardStore,
    pub reliability: VerifierReliabilityTable,
    pub aggregation: AggregationConfig<f64>,
    pub policy: PolicyConfig<f64>,
    pub task: TaskSpec<f64>,
    pub candidates: Vec<Candidate<f64>>,
    pub verifiers: Vec<VerifierId>,
    pub now: Timestamp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShowcaseOutcome {
    pub winner: AgentId,
    pub alpha: (Assessment<f64>, PolicyDecision<f64>),
    pub beta: (Assessment<f64>, PolicyDecision<f64>),
    pub panel: Vec<VerifierId>,
}

#[derive(Debug, Error)]
pub enum ShowcaseError {
    #[error("alpha has only 10 security events; {0} successes is impossible")]
    SuccessCountOutOfRange(u32),
    #[error(transparent)]
    Allocation(#[from] AllocationError<f64>),
}

struct History<'a> {
    agent: &'a str,
    class: &'a str,
    regime: &'a str,
    events: usize,
    /// Indices of the failed events.
    failures: &'a dyn Fn(usize) -> bool,
    spacing: u64,
}

fn push_history(h: &History<'_>, catalog: &RegimeCatalog, evidence: &mut EvidenceStore) {
    let regime = catalog
        .lookup(&RegimeId::new(h.regime).expect("valid id"))
        .expect("starter regime");
    for i in 0..h.events {
        let event = EvidenceEvent {
            agent: AgentId::new(h.agent).expect("valid id"),
            task: TaskId::new(format!("{}-{}-{i:03}", h.agent, h.class)).expect("valid id"),
            context: ContextKey::new(h.class),
            regime_id: regime.regime_id.clone(),
            outcome: if (h.failures)(i) {
                Outcome::failure()
            } else {
                Outcome::success()
            },
            strength: regime.strength,
            timestamp: NOW - (i as u64 + 1) * h.spacing,
            verifier: VerifierId::new(REVIEWERS[i % REVIEWERS.len()]).expect("valid id"),
            integrity: IntegrityRecord::clean(),
            evidence_kinds: regime.required_evidence.clone(),
        };
        let v = validate_event(event, catalog, NOW).expect("fixture events are valid");
        evidence.append(v).expect("fixture events are distinct");
    }
}

/// Builds both histories with `alpha_security_successes` (0..=10) of α's
/// ten scanner-verified security events succeeding.
pub fn showcase_scenario(alpha_security_successes: u32) -> Result<ShowcaseScenario, ShowcaseError> {
    let k = alpha_security_successes as usize;
    if k > 10 {
        return Err(ShowcaseError::SuccessCountOutOfRange(alpha_security_successes));
    }
    let catalog = RegimeCatalog::starter();
    let mut evidence = EvidenceStore::in_memory();

    // α: 460 / 500 debugging successes, two failures in every 25 tasks.
    push_history(
        &History {
            agent: SHOWCASE_ALPHA,
            class: "debugging",
            regime: "debug-ci",
            events: 500,
            failures: &|i| i % 25 == 0 || i % 25 == 12,
            spacing: HOUR,
        },
        &catalog,
        &mut evidence,
    );
    push_history(
        &History {
            agent: SHOWCASE_ALPHA,
            class: "security-audit",
            regime: "security-scanner",
            events: 10,
            failures: &|i| i >= k,
            spacing: 12 * HOUR,
        },
        &catalog,
        &mut evidence,
    );
    // β: 44 / 50 debugging, 26 / 30 expert-reviewed security audits.
    push_history(
        &History {
            agent: SHOWCASE_BETA,
            class: "debugging",
            regime: "debug-ci",
            events: 50,
            failures: &|i| i % 8 == 4 && i < 48,
            spacing: 6 * HOUR,
        },
        &catalog,
        &mut evidence,
    );
    push_history(
        &History {
            agent: SHOWCASE_BETA,
            class: "security-audit",
            regime: "security-expert",
            events: 30,
            failures: &|i| i % 7 == 5,
            spacing: 6 * HOUR,
        },
        &catalog,
        &mut evidence,
    );

    let aggregation = AggregationConfig::default();
    let cards = CardStore::from_events(evidence.events(), &aggregation).expect("fixture cards build");
    let security_expert = RegimeId::new("security-expert").expect("valid id");
    let task = TaskSpec {
        task: TaskId::new("security-audit-task").expect("valid id"),
        owner: OwnerId::new("audit-client").expect("valid id"),
        context: ContextKey::new("security-audit"),
        required_strength: catalog.lookup(&security_expert).expect("starter").strength,
        required_regime: security_expert,
        base_stake: 100.0,
        value_at_risk: 1_000_000.0,
        sandbox: false,
    };
    debug_assert_eq!(task.required_strength, StrengthLevel::ExpertAdversarialReview);
    Ok(ShowcaseScenario {
        catalog,
        evidence,
        cards,
        reliability: VerifierReliabilityTable::new(),
        aggregation,
        policy: PolicyConfig::default(),
        task,
        candidates: [SHOWCASE_ALPHA, SHOWCASE_BETA]
            .iter()
            .map(|a| Candidate::new(AgentId::new(*a).expect("valid id")))
            .collect(),
        verifiers: REVIEWERS.iter().map(|v| VerifierId::new(*v).expect("valid id")).collect(),
        now: NOW,
    })
}

impl ShowcaseScenario {
    pub fn allocate(&self, seed: u64) -> Result<ShowcaseOutcome, ShowcaseError> {
        let ctx = AllocationContext {
            cards: &self.cards,
            catalog: &self.catalog,
            aggregation: &self.aggregation,
            policy: &self.policy,
            reliability: &self.reliability,
            now: self.now,
        };
        let mut rng = Pcg64::seed_from_u64(seed);
        let a = allocate(&ctx, &self.task, &self.candidates, &self.verifiers, &mut rng)?;
        let find = |name: &str| {
            a.decisions
                .iter()
                .find(|(id, _, _)| id.as_str() == name)
                .map(|(_, s, d)| (*s, *d))
                .expect("both agents are candidates")
        };
        Ok(ShowcaseOutcome {
            alpha: find(SHOWCASE_ALPHA),
            beta: find(SHOWCASE_BETA),
            winner: a.winner,
            panel: a.panel,
        })
    }
}

pub fn run_showcase(alpha_security_successes: u32) -> Result<ShowcaseOutcome, ShowcaseError> {
    showcase_scenario(alpha_security_successes)?.allocate(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evidence::Verdict;

    #[test]
    fn history_counts() {
        let s = showcase_scenario(4).unwrap();
        let count = |agent: &str, class: &str, ok: bool| {
            s.evidence
                .events()
                .iter()
                .filter(|e| {
                    e.agent.as_str() == agent
                        && e.context.task_class == class
                        && (e.outcome.verdict == Verdict::Success) == ok
                })
                .count()
        };
        assert_eq!(count(SHOWCASE_ALPHA, "debugging", true), 460);
        assert_eq!(count(SHOWCASE_ALPHA, "debugging", false), 40);
        assert_eq!(count(SHOWCASE_ALPHA, "security-audit", true), 4);
        assert_eq!(count(SHOWCASE_ALPHA, "security-audit", false), 6);
        assert_eq!(count(SHOWCASE_BETA, "debugging", true), 44);
        assert_eq!(count(SHOWCASE_BETA, "security-audit", true), 26);
        assert_eq!(count(SHOWCASE_BETA, "security-audit", false), 4);
    }

    #[test]
    fn beta_wins_for_every_alpha_record() {
        for k in 0..=10 {
            let out = run_showcase(k).unwrap();
            assert_eq!(out.winner.as_str(), SHOWCASE_BETA, "k={k}");
            assert_eq!(out.beta.1, PolicyDecision::Eligible { required_stake: 100.0 });
            assert!(!out.alpha.1.is_eligible());
        }
        assert!(run_showcase(11).is_err());
    }
}
