//! Generators and independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use agentrep_core::cards::AggregationConfig;
use agentrep_core::evidence::{
    event_id, validate_event, ContextKey, EvidenceEvent, IntegrityRecord, IntegrityStatus, Outcome, Severity,
    ValidatedEvent, Verdict,
};
use agentrep_core::ids::{AgentId, TaskId, VerifierId};
use agentrep_core::regimes::{RegimeCatalog, StrengthLevel};
use agentrep_core::hash::HashAlgorithm;
use agentrep_core::ledger::{Ledger, LedgerError};
use agentrep_core::{Digest, RegimeId};
use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

pub const NOW: u64 = 1_700_000_000;
pub const DAY: u64 = 86_400;

pub const AGENTS: [&str; 3] = ["alpha", "beta", "gamma"];
pub const VERIFIERS: [&str; 4] = ["v0", "v1", "v2", "v3"];
/// (regime id, task class) of every starter regime.
pub const REGIMES: [(&str, &str); 6] = [
    ("debug-static", "debugging"),
    ("debug-ci", "debugging"),
    ("patch-ci", "patch-submission"),
    ("patch-review", "patch-submission"),
    ("security-scanner", "security-audit"),
    ("security-expert", "security-audit"),
];

pub fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

pub fn catalog() -> RegimeCatalog {
    RegimeCatalog::starter()
}

/// Deterministic runner, so failures reproduce.
pub fn runner(cases: u32) -> TestRunner {
    TestRunner::new_with_rng(
        Config {
            cases,
            failure_persistence: None,
            ..Config::default()
        },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    )
}

#[derive(Debug, Clone)]
pub struct EventSpec {
    pub agent: usize,
    pub regime: usize,
    pub subdomain: Option<u8>,
    pub success: bool,
    pub age: u64,
    pub verifier: usize,
    /// 0 clean, 1 disputed, 2 reversed, 3 penalized.
    pub integrity: u8,
    pub task: u8,
}

pub fn arb_spec() -> impl Strategy<Value = EventSpec> {
    (
        0..AGENTS.len(),
        0..REGIMES.len(),
        prop::option::weighted(0.2, 0u8..2),
        any::<bool>(),
        0u64..400 * DAY,
        0..VERIFIERS.len(),
        prop_oneof![8 => Just(0u8), 1 => Just(1u8), 1 => Just(2u8), 1 => Just(3u8)],
        0u8..20,
    )
        .prop_map(|(agent, regime, subdomain, success, age, verifier, integrity, task)| EventSpec {
            agent,
            regime,
            subdomain,
            success,
            age,
            verifier,
            integrity,
            task,
        })
}

pub fn build_event(spec: &EventSpec) -> EvidenceEvent {
    let cat = catalog();
    let (rid, class) = REGIMES[spec.regime];
    let regime = cat.lookup(&RegimeId::new(rid).unwrap()).unwrap();
    let timestamp = NOW - spec.age;
    let at = (timestamp + DAY).min(NOW);
    let integrity = match spec.integrity {
        0 => IntegrityRecord::clean(),
        1 => IntegrityRecord {
            status: IntegrityStatus::Disputed,
            dispute_time: Some(at),
            severity: Severity::None,
        },
        2 => IntegrityRecord {
            status: IntegrityStatus::Reversed,
            dispute_time: Some(at),
            severity: Severity::Negligence,
        },
        _ => IntegrityRecord::penalized(Severity::Fraud, at),
    };
    EvidenceEvent {
        agent: AgentId::new(AGENTS[spec.agent]).unwrap(),
        task: TaskId::new(format!("task-{}", spec.task)).unwrap(),
        context: match spec.subdomain {
            Some(s) => ContextKey::with_subdomain(class, format!("sub{s}")),
            None => ContextKey::new(class),
        },
        regime_id: regime.regime_id.clone(),
        outcome: if spec.success {
            Outcome::success()
        } else {
            Outcome::failure()
        },
        strength: regime.strength,
        timestamp,
        verifier: VerifierId::new(VERIFIERS[spec.verifier]).unwrap(),
        integrity,
        evidence_kinds: regime.required_evidence.clone(),
    }
}

pub fn validated(spec: &EventSpec) -> ValidatedEvent {
    validate_event(build_event(spec), &catalog(), NOW).expect("generated events are valid")
}

/// Validated events with duplicates (equal ids) removed, first kept.
pub fn validated_unique(specs: &[EventSpec]) -> Vec<ValidatedEvent> {
    let mut seen = BTreeSet::new();
    specs
        .iter()
        .map(validated)
        .filter(|e| seen.insert(e.id()))
        .collect()
}

pub fn arb_events(max: usize) -> impl Strategy<Value = Vec<ValidatedEvent>> {
    prop::collection::vec(arb_spec(), 0..=max).prop_map(|s| validated_unique(&s))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleScore {
    pub score: f64,
    pub lcb: f64,
    pub n_eff: f64,
    pub scrutiny: bool,
}

/// Direct summation over the raw events of one (agent, context):
///
/// per record (the event with its integrity fields reset) keep only the events with the most advanced integrity status;
/// each kept event weighs `γ^shortfall · 2^(-age/h) · r(verifier)`;
/// every reversed or penalized event adds `p` pseudo-failures; then the
/// Beta posterior mean and its normal-approximation lower bound.
pub fn oracle_score(
    events: &[ValidatedEvent],
    agent: &AgentId,
    context: &ContextKey,
    required: StrengthLevel,
    now: u64,
    cfg: &AggregationConfig<f64>,
    reliability: impl Fn(&VerifierId) -> f64,
) -> OracleScore {
    let mine: Vec<&ValidatedEvent> = events
        .iter()
        .filter(|e| e.agent == *agent && e.context == *context)
        .collect();
    let record = |e: &ValidatedEvent| {
        let clean = EvidenceEvent {
            integrity: IntegrityRecord::clean(),
            ..e.event().clone()
        };
        event_id(&clean)
    };
    let mut top: BTreeMap<Digest, u8> = BTreeMap::new();
    for e in &mine {
        let r = e.integrity.status.rank();
        let t = top.entry(record(e)).or_insert(r);
        *t = (*t).max(r);
    }
    let (mut s, mut f, mut n_eff) = (0.0f64, 0.0f64, 0.0f64);
    let mut violations = 0u32;
    let mut scrutiny_until: Option<u64> = None;
    for e in &mine {
        if e.integrity.status.is_violation() {
            violations += 1;
            let until = e.integrity.dispute_time.unwrap_or(e.timestamp) + cfg.scrutiny_duration_seconds;
            scrutiny_until = Some(scrutiny_until.map_or(until, |u: u64| u.max(until)));
        }
        if top[&record(e)] != e.integrity.status.rank() {
            continue;
        }
        let shortfall = required.level().saturating_sub(e.strength.level()) as i32;
        let age = now.saturating_sub(e.timestamp) as f64;
        let decay = 2f64.powf(-age / cfg.recency_half_life_seconds);
        let r = reliability(&e.verifier);
        let w = cfg.strength_discount.powi(shortfall) * decay * r;
        if e.outcome.verdict == Verdict::Success {
            s += w;
        } else {
            f += w;
        }
        if e.strength.level() >= required.level() {
            n_eff += decay * r;
        }
    }
    let a = cfg.prior_successes + s;
    let b = cfg.prior_failures + f + cfg.violation_penalty_failures * violations as f64;
    let mean = a / (a + b);
    let lcb = (mean - cfg.z * (mean * (1.0 - mean) / (a + b)).sqrt()).max(0.0);
    OracleScore {
        score: mean,
        lcb,
        n_eff,
        scrutiny: scrutiny_until.is_some_and(|u| now < u),
    }
}

pub fn all_strengths() -> [StrengthLevel; 4] {
    [
        StrengthLevel::StaticAnalysis,
        StrengthLevel::AutomatedTestExecution,
        StrengthLevel::IndependentHumanReview,
        StrengthLevel::ExpertAdversarialReview,
    ]
}

/// Distinct (agent, context) pairs among the events.
pub fn card_keys(events: &[ValidatedEvent]) -> BTreeSet<(AgentId, ContextKey)> {
    events.iter().map(|e| (e.agent.clone(), e.context.clone())).collect()
}

/// One overfitter among three honest agents, a strength-1 and a strength-4
/// regime in equal shares, noiseless verifiers.
pub const DEGRADATION_SCENARIO: &str = "\
seed: 42
rounds: 2000
demonstration_tasks: 30
eligibility_threshold: 0.6

[task]
context: debugging
regime: debug-static
weight: 0.5
base_stake: 10
value_at_risk: 100

[task]
context: security-audit
regime: security-expert
weight: 0.5
base_stake: 10
value_at_risk: 100

[agent]
id: over
competence: debugging=0.4, security-audit=0.4
behavior: overfitter 0.5

[agent]
id: h1
competence: debugging=0.75, security-audit=0.8

[agent]
id: h2
competence: debugging=0.7, security-audit=0.85

[agent]
id: h3
competence: debugging=0.65, security-audit=0.75

[verifier]
id: v1

[verifier]
id: v2

[verifier]
id: v3

[verifier]
id: v4
";

/// A colluder and an equally weak honest twin next to two strong agents;
/// `vx` always passes the colluder.
pub fn collusion_scenario(panel: usize) -> String {
    format!(
        "\
seed: 9
rounds: 500
demonstration_tasks: 100
eligibility_threshold: 0.6
panel_size: {panel}
escalated_panel_size: {panel}

[task]
context: debugging
regime: debug-ci
weight: 1
base_stake: 10
value_at_risk: 100

[agent]
id: colluder
competence: debugging=0.2
behavior: colluder vx

[agent]
id: twin
competence: debugging=0.2

[agent]
id: strong
competence: debugging=0.9

[agent]
id: good
competence: debugging=0.85

[verifier]
id: v1

[verifier]
id: v2

[verifier]
id: vx
colluding_with: colluder
"
    )
}

/// Five agents over two contexts with noisy verifiers.
pub fn marketplace_scenario(seed: u64) -> String {
    format!(
        "\
seed: {seed}
rounds: 500
epoch_cadence: 16
eligibility_threshold: 0.55

[task]
context: debugging
regime: debug-ci
weight: 0.6
base_stake: 10
value_at_risk: 100

[task]
context: patch-submission
regime: patch-review
weight: 0.4
base_stake: 20
value_at_risk: 2000

[agent]
id: a1
competence: debugging=0.9, patch-submission=0.6

[agent]
id: a2
competence: debugging=0.7, patch-submission=0.85

[agent]
id: a3
competence: debugging=0.5, patch-submission=0.5
behavior: overfitter 0.3

[agent]
id: a4
competence: debugging=0.8, patch-submission=0.75
stake_balance: 400

[agent]
id: a5
competence: debugging=0.3, patch-submission=0.9

[verifier]
id: v1
false_positive_rate: 0.1
false_negative_rate: 0.05

[verifier]
id: v2
false_positive_rate: 0.05

[verifier]
id: v3

[verifier]
id: v4
false_negative_rate: 0.1
"
    )
}

pub const LEDGER_ALG: HashAlgorithm = HashAlgorithm::Sha256;

pub fn fixture_events(n: usize) -> Vec<ValidatedEvent> {
    let specs: Vec<EventSpec> = (0..n)
        .map(|i| EventSpec {
            agent: i % AGENTS.len(),
            regime: i % REGIMES.len(),
            subdomain: None,
            success: i % 3 != 0,
            age: (n - i) as u64 * 3600,
            verifier: i % VERIFIERS.len(),
            integrity: 0,
            task: i as u8,
        })
        .collect();
    let events = validated_unique(&specs);
    assert_eq!(events.len(), n);
    events
}

/// A directory ledger with every event committed: 11 events at cadence 3
/// gives four epochs, the last one odd-sized.
pub fn build_ledger_fixture(dir: &Path) -> Vec<ValidatedEvent> {
    let events = fixture_events(11);
    let mut ledger = Ledger::open(dir, LEDGER_ALG, 3).unwrap();
    for (i, e) in events.iter().enumerate() {
        ledger.record_event(e, NOW + i as u64).unwrap();
    }
    ledger.commit_epoch(NOW + 100).unwrap();
    assert_eq!(ledger.records().len(), 4);
    assert!(ledger.pending().is_empty());
    events
}

pub fn ledger_files(dir: &Path) -> Vec<PathBuf> {
    let mut files = vec![dir.join("commitments.log"), dir.join("commitments.head")];
    for sub in ["epochs", "objects"] {
        let mut entries: Vec<PathBuf> = fs::read_dir(dir.join(sub))
            .unwrap()
            .map(|e| e.unwrap().path())
            .collect();
        entries.sort();
        files.extend(entries);
    }
    files
}

pub fn ledger_detects_tampering(dir: &Path) -> bool {
    ledger_error(dir).is_some()
}

/// The error opening and verifying the ledger at `dir` produces, if any.
pub fn ledger_error(dir: &Path) -> Option<LedgerError> {
    match Ledger::open(dir, LEDGER_ALG, 3) {
        Err(e) => Some(e),
        Ok(ledger) => ledger.verify().err(),
    }
}


/// Applies `trials` random single-byte mutations (alternating single-bit
/// flips and whole-byte replacements) across the ledger's files, restoring
/// each one afterwards. Returns the mutations that went undetected.
pub fn mutate_ledger_files(
    dir: &Path,
    trials: usize,
    seed: u64,
    detected: impl Fn(&Path) -> bool,
) -> Vec<(PathBuf, usize)> {
    let files = ledger_files(dir);
    let sizes: Vec<usize> = files.iter().map(|f| fs::metadata(f).unwrap().len() as usize).collect();
    let total: usize = sizes.iter().sum();
    let mut rng = Pcg64::seed_from_u64(seed);
    let mut missed = Vec::new();
    for trial in 0..trials {
        let mut offset = rng.random_range(0..total);
        let mut file = 0;
        while offset >= sizes[file] {
            offset -= sizes[file];
            file += 1;
        }
        let original = fs::read(&files[file]).unwrap();
        let mut bytes = original.clone();
        bytes[offset] ^= if trial % 2 == 0 {
            1 << rng.random_range(0..8)
        } else {
            rng.random_range(1..=255u8)
        };
        fs::write(&files[file], &bytes).unwrap();
        if !detected(dir) {
            missed.push((files[file].clone(), offset));
        }
        fs::write(&files[file], &original).unwrap();
    }
    missed
}
