//! Deterministic marketplace simulator.
//!
//! Each round draws a task, allocates it through the policy engine, samples
//! the winner's work from its latent competence, has the assigned panel
//! report verdicts, and records the majority verdict through the full
//! evidence → card → ledger pipeline. Latent competences stay inside the
//! simulator; the reputation engine only ever sees recorded evidence.
//!
//! Randomness comes from PCG-64 (`rand_pcg::Pcg64`). Every entity gets its
//! own substream seeded with `SHA-256(seed_be ‖ label)`, so adding an agent
//! does not perturb the draws of the others.

mod metrics;
mod showcase;
mod scenario;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64;
use thiserror::Error;

use crate::cards::{AggregationConfig, CardStore, VerifierReliabilityTable};
use crate::evidence::{
    validate_event_with, ContextKey, EvidenceEvent, EvidenceStore, IntegrityRecord, Outcome,
    Severity, Timestamp, ValidatedEvent, Verdict,
};
use crate::hash::{sha256, HashAlgorithm};
use crate::ids::{AgentId, OwnerId, RegimeId, TaskId, VerifierId};
use crate::ledger::{Ledger, DEFAULT_EPOCH_CADENCE};
use crate::policy::{
    allocate, assign_verifiers, escalate, slash, AllocationContext, AllocationError, Candidate,
    PolicyConfig, TaskSpec,
};
use crate::regimes::{RegimeCatalog, StrengthLevel, VerificationRegime};

pub use metrics::{
    measure_regime_degradation, spearman, DegradationError, DegradationSeries, SimMetrics,
    DEGRADATION_WINDOW,
};
pub use showcase::{
    showcase_scenario, run_showcase, ShowcaseOutcome, ShowcaseScenario, ShowcaseError,
    SHOWCASE_ALPHA, SHOWCASE_BETA,
};
pub use scenario::parse_scenario;

#[derive(Debug, Clone, PartialEq)]
pub enum Behavior {
    Honest,
    /// Passes regimes of strength 1–2 with probability `min(1, p + boost)`.
    Overfitter { low_strength_boost: f64 },
    /// Coordinates false approvals with `partner`.
    Colluder { partner: VerifierId },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentModel {
    pub id: AgentId,
    /// True success probability per context; absent means 0.
    pub competence: BTreeMap<ContextKey, f64>,
    pub behavior: Behavior,
    pub stake_balance: u64,
    /// Declared affiliations, excluded from this agent's panels.
    pub affiliates: BTreeSet<VerifierId>,
}

impl AgentModel {
    pub fn honest(id: &str, competence: &[(&str, f64)]) -> Self {
        Self {
            id: AgentId::new(id).expect("valid agent id"),
            competence: competence
                .iter()
                .map(|(c, p)| (c.parse().expect("valid context"), *p))
                .collect(),
            behavior: Behavior::Honest,
            stake_balance: 1_000_000,
            affiliates: BTreeSet::new(),
        }
    }

    pub fn competence_in(&self, context: &ContextKey) -> f64 {
        self.competence.get(context).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifierModel {
    pub id: VerifierId,
    pub false_positive_rate: f64,
    pub false_negative_rate: f64,
    pub colluding_with: Option<AgentId>,
}

impl VerifierModel {
    pub fn noiseless(id: &str) -> Self {
        Self {
            id: VerifierId::new(id).expect("valid verifier id"),
            false_positive_rate: 0.0,
            false_negative_rate: 0.0,
            colluding_with: None,
        }
    }
}

/// A verifier/agent pair that fakes approvals, from either side's declaration.
pub fn colludes(verifier: &VerifierModel, agent: &AgentModel) -> bool {
    verifier.colluding_with.as_ref() == Some(&agent.id)
        || matches!(&agent.behavior, Behavior::Colluder { partner } if *partner == verifier.id)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskMixEntry {
    pub context: ContextKey,
    pub regime_id: RegimeId,
    pub weight: f64,
    pub value_at_risk: f64,
    pub base_stake: f64,
    pub sandbox: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub rounds: u64,
    pub agents: Vec<AgentModel>,
    pub verifiers: Vec<VerifierModel>,
    pub task_mix: Vec<TaskMixEntry>,
    pub catalog: RegimeCatalog,
    pub aggregation: AggregationConfig<f64>,
    pub policy: PolicyConfig<f64>,
    pub epoch_cadence: usize,
    pub hash: HashAlgorithm,
    /// Sandbox tasks given to every agent for every task-mix entry before
    /// the first round, so that agents can leave cold start.
    pub demonstration_tasks: u32,
    /// Chance that a false-positive success is discovered and disputed.
    pub discovery_probability: f64,
    pub start_time: Timestamp,
    pub round_seconds: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            rounds: 0,
            agents: Vec::new(),
            verifiers: Vec::new(),
            task_mix: Vec::new(),
            catalog: RegimeCatalog::starter(),
            aggregation: AggregationConfig::default(),
            policy: PolicyConfig::default(),
            epoch_cadence: DEFAULT_EPOCH_CADENCE,
            hash: HashAlgorithm::default(),
            demonstration_tasks: 10,
            discovery_probability: 0.3,
            start_time: 1_700_000_000,
            round_seconds: 3600,
        }
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Config(String),
    #[error("pipeline failure: {0}")]
    Pipeline(String),
}

fn unit(p: f64) -> bool {
    (0.0..=1.0).contains(&p)
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Config(m));
        self.aggregation
            .validate()
            .map_err(|e| SimError::Config(e.to_string()))?;
        self.policy
            .validate()
            .map_err(|e| SimError::Config(e.to_string()))?;
        if !self.task_mix.is_empty() {
            let total: f64 = self.task_mix.iter().map(|t| t.weight).sum();
            if (total - 1.0).abs() > 1e-9 {
                return bad(format!("task-mix weights sum to {total}, not 1"));
            }
        } else if self.rounds > 0 {
            return bad("rounds > 0 needs a task mix".into());
        }
        for t in &self.task_mix {
            if !(t.weight >= 0.0) {
                return bad(format!("negative weight for {}", t.regime_id));
            }
            if !(t.base_stake >= 0.0 && t.base_stake.is_finite()) || !(t.value_at_risk >= 0.0) {
                return bad(format!("stake and value for {} must be non-negative", t.regime_id));
            }
            match self.catalog.lookup(&t.regime_id) {
                None => return bad(format!("unknown regime {}", t.regime_id)),
                Some(r) if r.task_class != t.context.task_class => {
                    return bad(format!(
                        "regime {} covers {}, not {}",
                        t.regime_id, r.task_class, t.context
                    ))
                }
                _ => {}
            }
        }
        let mut ids = BTreeSet::new();
        for a in &self.agents {
            if !ids.insert(a.id.as_str()) {
                return bad(format!("duplicate agent {}", a.id));
            }
            if !a.competence.values().all(|p| unit(*p)) {
                return bad(format!("competence of {} outside [0, 1]", a.id));
            }
            if let Behavior::Overfitter { low_strength_boost } = a.behavior {
                if !unit(low_strength_boost) {
                    return bad(format!("boost of {} outside [0, 1]", a.id));
                }
            }
        }
        let mut vids = BTreeSet::new();
        for v in &self.verifiers {
            if !vids.insert(v.id.as_str()) {
                return bad(format!("duplicate verifier {}", v.id));
            }
            for r in [v.false_positive_rate, v.false_negative_rate] {
                if !(0.0..1.0).contains(&r) {
                    return bad(format!("error rates of {} must lie in [0, 1)", v.id));
                }
            }
            if let Some(a) = &v.colluding_with {
                if !ids.contains(a.as_str()) {
                    return bad(format!("{} colludes with unknown agent {a}", v.id));
                }
            }
        }
        if !unit(self.discovery_probability) {
            return bad("discovery_probability outside [0, 1]".into());
        }
        if self.round_seconds == 0 {
            return bad("round_seconds must be positive".into());
        }
        Ok(())
    }
}

/// One PCG-64 substream per label.
pub fn substream(seed: u64, label: &str) -> Pcg64 {
    let d = sha256(&[&seed.to_be_bytes()[..], label.as_bytes()].concat());
    Pcg64::from_seed(d.0)
}

/// Whether the agent's work genuinely passes the regime (overfitting
/// included); drawn from the agent's latent competence.
pub fn draw_result<R: Rng + ?Sized>(
    agent: &AgentModel,
    strength: StrengthLevel,
    context: &ContextKey,
    rng: &mut R,
) -> bool {
    let p = agent.competence_in(context);
    let p = match agent.behavior {
        Behavior::Overfitter { low_strength_boost } if strength.level() <= 2 => {
            (p + low_strength_boost).min(1.0)
        }
        _ => p,
    };
    rng.random::<f64>() < p
}

/// The verdict a verifier reports for a result.
pub fn report<R: Rng + ?Sized>(
    verifier: &VerifierModel,
    agent: &AgentModel,
    result: bool,
    rng: &mut R,
) -> Verdict {
    let u = rng.random::<f64>();
    let success = if colludes(verifier, agent) {
        true
    } else if result {
        u >= verifier.false_negative_rate
    } else {
        u < verifier.false_positive_rate
    };
    if success {
        Verdict::Success
    } else {
        Verdict::Failure
    }
}

pub fn sample_outcome<R: Rng + ?Sized>(
    agent: &AgentModel,
    regime: &VerificationRegime,
    verifier: &VerifierModel,
    context: &ContextKey,
    rng: &mut R,
) -> Outcome {
    let result = draw_result(agent, regime.strength, context, rng);
    Outcome {
        verdict: report(verifier, agent, result, rng),
        detail: None,
    }
}

/// What happened in one allocated marketplace round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: u64,
    pub regime_id: RegimeId,
    pub strength: StrengthLevel,
    pub context: ContextKey,
    pub winner: AgentId,
    /// Majority verdict was success.
    pub observed_pass: bool,
    /// Winner's latent competence in the context (before any overfitting).
    pub winner_competence: f64,
    pub best_competence: f64,
    pub panel_size: usize,
    pub disputed: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunHistory {
    pub rounds: u64,
    pub records: Vec<RoundRecord>,
}

#[derive(Debug)]
pub struct SimRun {
    pub metrics: SimMetrics,
    pub cards: CardStore,
    pub ledger: Ledger,
    pub evidence: EvidenceStore,
    pub reliability: VerifierReliabilityTable,
    pub history: RunHistory,
    pub balances: BTreeMap<AgentId, u64>,
}

struct Sim<'a> {
    cfg: &'a ScenarioConfig,
    evidence: EvidenceStore,
    cards: CardStore,
    ledger: Ledger,
    reliability: VerifierReliabilityTable,
    balances: Vec<u64>,
    agent_rngs: Vec<Pcg64>,
    verifier_rngs: BTreeMap<VerifierId, Pcg64>,
    assign_rng: Pcg64,
    dispute_rng: Pcg64,
    next_task: u64,
    slash_events: u64,
    slashed_total: u64,
}

struct Executed {
    observed_pass: bool,
    disputed: bool,
}

fn pipeline<E: std::fmt::Display>(e: E) -> SimError {
    SimError::Pipeline(e.to_string())
}

impl<'a> Sim<'a> {
    fn verifier(&self, id: &VerifierId) -> &'a VerifierModel {
        self.cfg
            .verifiers
            .iter()
            .find(|v| v.id == *id)
            .expect("panels are drawn from the configured verifiers")
    }

    fn record(&mut self, event: EvidenceEvent, now: Timestamp) -> Result<ValidatedEvent, SimError> {
        let v = validate_event_with(event, &self.cfg.catalog, now, self.cfg.hash).map_err(|vs| {
            SimError::Pipeline(format!("simulated event rejected: {vs:?}"))
        })?;
        self.evidence.append(v.clone()).map_err(pipeline)?;
        self.cards.ingest(&v, &self.cfg.aggregation).map_err(pipeline)?;
        self.ledger.record_event(&v, now).map_err(pipeline)?;
        Ok(v)
    }

    /// Runs one allocated task end to end. `stake` is already validated as
    /// affordable.
    fn execute(
        &mut self,
        agent_idx: usize,
        entry: &TaskMixEntry,
        task: &TaskId,
        panel: &[VerifierId],
        stake: f64,
        now: Timestamp,
    ) -> Result<Executed, SimError> {
        let cfg = self.cfg;
        let agent = &cfg.agents[agent_idx];
        let regime = cfg
            .catalog
            .lookup(&entry.regime_id)
            .expect("validated task mix");
        let locked = stake.ceil() as u64;
        self.balances[agent_idx] -= locked;

        let result = draw_result(agent, regime.strength, &entry.context, &mut self.agent_rngs[agent_idx]);
        let verdicts: Vec<Verdict> = panel
            .iter()
            .map(|id| {
                let v = self.verifier(id);
                let rng = self.verifier_rngs.get_mut(id).expect("known verifier");
                report(v, agent, result, rng)
            })
            .collect();
        let successes = verdicts.iter().filter(|v| v.is_success()).count();
        let majority = if 2 * successes > verdicts.len() {
            Verdict::Success
        } else {
            Verdict::Failure
        };
        if panel.len() > 1 {
            for (id, v) in panel.iter().zip(&verdicts) {
                self.reliability.record_cross_check(id, *v == majority);
            }
        }
        let lead = panel
            .iter()
            .zip(&verdicts)
            .find(|(_, v)| **v == majority)
            .map(|(id, _)| id.clone())
            .expect("the majority verdict has at least one voter");

        let event = EvidenceEvent {
            agent: agent.id.clone(),
            task: task.clone(),
            context: entry.context.clone(),
            regime_id: entry.regime_id.clone(),
            outcome: Outcome {
                verdict: majority,
                detail: None,
            },
            strength: regime.strength,
            timestamp: now,
            verifier: lead,
            integrity: IntegrityRecord::clean(),
            evidence_kinds: regime.required_evidence.clone(),
        };
        self.record(event.clone(), now)?;

        let false_positive = majority == Verdict::Success && !result;
        let disputed = false_positive && self.dispute_rng.random::<f64>() < cfg.discovery_probability;
        if disputed {
            let fraud = panel.iter().any(|id| colludes(self.verifier(id), agent));
            let severity = if fraud {
                Severity::Fraud
            } else {
                Severity::Negligence
            };
            let outcome = slash(locked as f64, severity, now, &cfg.policy).map_err(pipeline)?;
            let slashed = (outcome.slashed.floor() as u64).min(locked);
            self.balances[agent_idx] += locked - slashed;
            self.slashed_total += slashed;
            self.slash_events += 1;
            self.record(
                EvidenceEvent {
                    integrity: outcome.integrity,
                    ..event
                },
                now,
            )?;
        } else {
            self.balances[agent_idx] += locked;
        }
        Ok(Executed {
            observed_pass: majority == Verdict::Success,
            disputed,
        })
    }

    fn task_spec(&mut self, entry: &TaskMixEntry, sandbox: bool) -> TaskSpec<f64> {
        let regime = self.cfg.catalog.lookup(&entry.regime_id).expect("validated");
        self.next_task += 1;
        TaskSpec {
            task: TaskId::new(format!("task-{:06}", self.next_task)).expect("valid task id"),
            owner: OwnerId::new("marketplace").expect("valid owner id"),
            context: entry.context.clone(),
            required_regime: entry.regime_id.clone(),
            required_strength: regime.strength,
            base_stake: entry.base_stake,
            value_at_risk: entry.value_at_risk,
            sandbox,
        }
    }

    fn demonstrations(&mut self, clock: &mut Timestamp) -> Result<(), SimError> {
        let cfg = self.cfg;
        let pool: Vec<VerifierId> = cfg.verifiers.iter().map(|v| v.id.clone()).collect();
        for _ in 0..cfg.demonstration_tasks {
            for entry in cfg.task_mix.iter().filter(|e| e.weight > 0.0) {
                for (i, agent) in cfg.agents.iter().enumerate() {
                    *clock += cfg.round_seconds;
                    let task = self.task_spec(entry, true);
                    let stake = cfg.policy.cold_start_multiplier * entry.base_stake;
                    if self.balances[i] < stake.ceil() as u64 {
                        continue;
                    }
                    let assessment = self.cards.assess(
                        &agent.id,
                        &entry.context,
                        task.required_strength,
                        *clock,
                        &cfg.aggregation,
                        &self.reliability,
                    );
                    let need = escalate(&assessment, &task, &cfg.policy).panel_size;
                    let Ok(panel) = assign_verifiers(&pool, &agent.affiliates, need, &mut self.assign_rng)
                    else {
                        continue;
                    };
                    self.execute(i, entry, &task.task, &panel, stake, *clock)?;
                }
            }
        }
        Ok(())
    }
}

fn pick_entry(mix: &[TaskMixEntry], u: f64) -> &TaskMixEntry {
    let mut acc = 0.0;
    for e in mix {
        acc += e.weight;
        if u < acc {
            return e;
        }
    }
    mix.iter().rev().find(|e| e.weight > 0.0).unwrap_or(&mix[mix.len() - 1])
}

/// Runs a scenario with in-memory stores.
pub fn run_sim(config: &ScenarioConfig) -> Result<SimRun, SimError> {
    run_sim_in(config, None)
}

/// Runs a scenario; with `out`, the evidence log and ledger are written
/// under that directory (`evidence.jsonl`, `ledger/`).
pub fn run_sim_in(config: &ScenarioConfig, out: Option<&Path>) -> Result<SimRun, SimError> {
    config.validate()?;
    let cfg = config;
    let (evidence, ledger) = match out {
        None => (
            EvidenceStore::new(cfg.hash),
            Ledger::in_memory(cfg.hash, cfg.epoch_cadence),
        ),
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(pipeline)?;
            (
                EvidenceStore::open(&dir.join("evidence.jsonl"), cfg.hash).map_err(pipeline)?,
                Ledger::open(&dir.join("ledger"), cfg.hash, cfg.epoch_cadence).map_err(pipeline)?,
            )
        }
    };
    if !evidence.is_empty() || !ledger.records().is_empty() || !ledger.pending().is_empty() {
        return Err(SimError::Config("output directory already holds a run".into()));
    }
    let mut sim = Sim {
        cfg,
        evidence,
        cards: CardStore::new(),
        ledger,
        reliability: VerifierReliabilityTable::new(),
        balances: cfg.agents.iter().map(|a| a.stake_balance).collect(),
        agent_rngs: cfg
            .agents
            .iter()
            .map(|a| substream(cfg.seed, &format!("agent:{}", a.id)))
            .collect(),
        verifier_rngs: cfg
            .verifiers
            .iter()
            .map(|v| (v.id.clone(), substream(cfg.seed, &format!("verifier:{}", v.id))))
            .collect(),
        assign_rng: substream(cfg.seed, "assign"),
        dispute_rng: substream(cfg.seed, "dispute"),
        next_task: 0,
        slash_events: 0,
        slashed_total: 0,
    };
    let mut task_rng = substream(cfg.seed, "tasks");
    let pool: Vec<VerifierId> = cfg.verifiers.iter().map(|v| v.id.clone()).collect();
    let mut clock = cfg.start_time;
    let mut history = RunHistory {
        rounds: cfg.rounds,
        records: Vec::new(),
    };

    if cfg.rounds > 0 {
        sim.demonstrations(&mut clock)?;
    }
    for round in 0..cfg.rounds {
        clock += cfg.round_seconds;
        let entry = pick_entry(&cfg.task_mix, task_rng.random::<f64>());
        let task = sim.task_spec(entry, entry.sandbox);
        let candidates: Vec<Candidate<f64>> = cfg
            .agents
            .iter()
            .zip(&sim.balances)
            .map(|(a, bal)| Candidate {
                agent: a.id.clone(),
                affiliates: a.affiliates.clone(),
                available_stake: Some(*bal as f64),
            })
            .collect();
        let ctx = AllocationContext {
            cards: &sim.cards,
            catalog: &cfg.catalog,
            aggregation: &cfg.aggregation,
            policy: &cfg.policy,
            reliability: &sim.reliability,
            now: clock,
        };
        let allocation = match allocate(&ctx, &task, &candidates, &pool, &mut sim.assign_rng) {
            Ok(a) => a,
            Err(AllocationError::NoEligibleAgent { .. } | AllocationError::Assign(_)) => continue,
            Err(e) => return Err(pipeline(e)),
        };
        let idx = cfg
            .agents
            .iter()
            .position(|a| a.id == allocation.winner)
            .expect("winner is a configured agent");
        let stake = allocation
            .decision
            .required_stake()
            .expect("winners are eligible");
        let done = sim.execute(idx, entry, &task.task, &allocation.panel, stake, clock)?;
        let best = cfg
            .agents
            .iter()
            .map(|a| a.competence_in(&entry.context))
            .fold(0.0, f64::max);
        history.records.push(RoundRecord {
            round,
            regime_id: entry.regime_id.clone(),
            strength: task.required_strength,
            context: entry.context.clone(),
            winner: allocation.winner,
            observed_pass: done.observed_pass,
            winner_competence: cfg.agents[idx].competence_in(&entry.context),
            best_competence: best,
            panel_size: allocation.panel.len(),
            disputed: done.disputed,
        });
    }

    if !sim.ledger.pending().is_empty() {
        sim.ledger.commit_epoch(clock).map_err(pipeline)?;
    }
    sim.ledger.verify().map_err(pipeline)?;

    let balances: BTreeMap<AgentId, u64> = cfg
        .agents
        .iter()
        .zip(&sim.balances)
        .map(|(a, b)| (a.id.clone(), *b))
        .collect();
    let metrics = metrics::compute(
        cfg,
        &history,
        &sim.cards,
        &sim.reliability,
        &sim.ledger,
        clock,
        metrics::Totals {
            slash_events: sim.slash_events,
            slashed_stake: sim.slashed_total,
            initial_stake: cfg.agents.iter().map(|a| a.stake_balance).sum(),
            final_stake: sim.balances.iter().sum(),
            events: sim.evidence.len() as u64,
        },
    );
    Ok(SimRun {
        metrics,
        cards: sim.cards,
        ledger: sim.ledger,
        evidence: sim.evidence,
        reliability: sim.reliability,
        history,
        balances,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn regime(id: &str) -> VerificationRegime {
        RegimeCatalog::starter()
            .lookup(&RegimeId::new(id).unwrap())
            .unwrap()
            .clone()
    }

    #[test]
    fn degenerate_outcomes() {
        let ctx: ContextKey = "debugging".parse().unwrap();
        let sure = AgentModel::honest("a", &[("debugging", 1.0)]);
        let v = VerifierModel::noiseless("v");
        let mut rng = substream(1, "x");
        let r = regime("debug-ci");
        for _ in 0..200 {
            assert_eq!(sample_outcome(&sure, &r, &v, &ctx, &mut rng).verdict, Verdict::Success);
        }
        let hopeless = AgentModel::honest("b", &[("debugging", 0.0)]);
        let partner = VerifierModel {
            colluding_with: Some(hopeless.id.clone()),
            ..VerifierModel::noiseless("w")
        };
        for _ in 0..200 {
            assert_eq!(
                sample_outcome(&hopeless, &r, &partner, &ctx, &mut rng).verdict,
                Verdict::Success
            );
            assert_eq!(sample_outcome(&hopeless, &r, &v, &ctx, &mut rng).verdict, Verdict::Failure);
        }
    }

    #[test]
    fn substreams_are_independent_of_each_other() {
        let a: Vec<u64> = (0..4).map(|_| 0).scan(substream(5, "agent:a"), |r, _| Some(r.random())).collect();
        let b: Vec<u64> = (0..4).map(|_| 0).scan(substream(5, "agent:b"), |r, _| Some(r.random())).collect();
        let a2: Vec<u64> = (0..4).map(|_| 0).scan(substream(5, "agent:a"), |r, _| Some(r.random())).collect();
        assert_eq!(a, a2);
        assert_ne!(a, b);
    }

    #[test]
    fn pick_entry_follows_weights() {
        let e = |w: f64, id: &str| TaskMixEntry {
            context: "debugging".parse().unwrap(),
            regime_id: RegimeId::new(id).unwrap(),
            weight: w,
            value_at_risk: 1.0,
            base_stake: 1.0,
            sandbox: false,
        };
        let mix = vec![e(0.25, "debug-static"), e(0.75, "debug-ci")];
        assert_eq!(pick_entry(&mix, 0.1).regime_id.as_str(), "debug-static");
        assert_eq!(pick_entry(&mix, 0.3).regime_id.as_str(), "debug-ci");
        assert_eq!(pick_entry(&mix, 0.9999999).regime_id.as_str(), "debug-ci");
    }

    #[test]
    fn zero_rounds_is_empty() {
        let cfg = ScenarioConfig {
            agents: vec![AgentModel::honest("a", &[("debugging", 0.9)])],
            verifiers: vec![VerifierModel::noiseless("v")],
            ..ScenarioConfig::default()
        };
        let run = run_sim(&cfg).unwrap();
        assert_eq!(run.evidence.len(), 0);
        assert!(run.ledger.records().is_empty());
        assert_eq!(run.metrics.allocated_rounds, 0);
        run.ledger.verify().unwrap();
    }
}
