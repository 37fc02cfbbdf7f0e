mod common;

use agentrep_core::evidence::Verdict;
use agentrep_core::ids::AgentId;
use agentrep_core::sim::{
    draw_result, parse_scenario, run_sim, run_sim_in, spearman, substream, AgentModel, Behavior,
    ScenarioConfig, SimError,
};
use agentrep_core::{ContextKey, Ledger, RegimeId, StrengthLevel};
use common::*;

fn scenario(text: &str) -> ScenarioConfig {
    parse_scenario(text, None).unwrap_or_else(|e| panic!("{e:?}"))
}

fn two_agents(rounds: u64) -> String {
    format!(
        "seed: 3\nrounds: {rounds}\n\n[task]\ncontext: debugging\nregime: debug-ci\nweight: 1\n\
         base_stake: 10\nvalue_at_risk: 100\n\n[agent]\nid: strong\ncompetence: debugging=0.9\n\n\
         [agent]\nid: weak\ncompetence: debugging=0.5\n\n[verifier]\nid: v1\n\n[verifier]\nid: v2\n\n[verifier]\nid: v3\n"
    )
}

#[test]
fn equal_seeds_reproduce_byte_for_byte() {
    let cfg = scenario(&marketplace_scenario(11));
    assert_eq!(cfg.agents.len(), 5);
    let a = run_sim(&cfg).unwrap();
    let b = run_sim(&cfg).unwrap();
    assert_eq!(a.metrics.to_report(), b.metrics.to_report());
    assert_eq!(a.metrics.final_root, b.metrics.final_root);
    assert!(a.metrics.final_root.is_some());
    let ids = |r: &agentrep_core::sim::SimRun| r.evidence.events().iter().map(|e| e.id()).collect::<Vec<_>>();
    assert_eq!(ids(&a), ids(&b));

    let c = run_sim(&scenario(&marketplace_scenario(12))).unwrap();
    assert_ne!(ids(&a), ids(&c));
}

#[test]
fn written_runs_reopen_and_verify() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario(&marketplace_scenario(5));
    let run = run_sim_in(&cfg, Some(dir.path())).unwrap();
    let ledger = Ledger::open(&dir.path().join("ledger"), cfg.hash, cfg.epoch_cadence).unwrap();
    let summary = ledger.verify().unwrap();
    assert_eq!(summary.committed_events, run.metrics.events);
    assert_eq!(summary.head, run.metrics.ledger_head);
    // A second run into the same directory is refused.
    assert!(matches!(run_sim_in(&cfg, Some(dir.path())), Err(SimError::Config(_))));
}

#[test]
fn every_event_is_committed_and_provable() {
    let run = run_sim(&scenario(&marketplace_scenario(21))).unwrap();
    assert!(run.ledger.pending().is_empty());
    assert_eq!(run.metrics.events as usize, run.evidence.len());
    for e in run.evidence.events() {
        let p = run.ledger.inclusion_proof(&e.id()).unwrap();
        assert!(run.ledger.verify_inclusion(&e.id(), &p));
    }
}

#[test]
fn stronger_agent_earns_the_higher_score() {
    let run = run_sim(&scenario(&two_agents(300))).unwrap();
    let ctx = ContextKey::new("debugging");
    let now = run.evidence.events().iter().map(|e| e.timestamp).max().unwrap();
    let score = |id: &str| {
        run.cards
            .assess(&AgentId::new(id).unwrap(), &ctx, StrengthLevel::StaticAnalysis, now, &agentrep_core::AggregationConfig::default(), &run.reliability)
            .score
    };
    assert!(score("strong") > score("weak"));
    assert_eq!(run.metrics.reputation_truth_correlation, Some(1.0));
    assert!(run.history.records.iter().all(|r| r.winner.as_str() == "strong"));
}

#[test]
fn single_context_runs_leave_other_contexts_untouched() {
    let run = run_sim(&scenario(&two_agents(200))).unwrap();
    let security = ContextKey::new("security-audit");
    for id in ["strong", "weak"] {
        let agent = AgentId::new(id).unwrap();
        assert!(run.cards.is_cold(&agent, &security));
        let a = run.cards.assess(&agent, &security, StrengthLevel::ExpertAdversarialReview, 0, &agentrep_core::AggregationConfig::default(), &run.reliability);
        assert_eq!(a.score, 0.5);
    }
}

#[test]
fn slashing_conserves_stake() {
    let mut cfg = scenario(&marketplace_scenario(8));
    for v in &mut cfg.verifiers {
        v.false_positive_rate = 0.3;
    }
    let run = run_sim(&cfg).unwrap();
    let m = &run.metrics;
    assert!(m.slash_events > 0);
    assert_eq!(m.initial_stake - m.final_stake, m.slashed_stake);
    assert_eq!(run.balances.values().sum::<u64>(), m.final_stake);
    let penalized = run.evidence.events().iter().filter(|e| e.integrity.status.is_violation()).count();
    assert_eq!(m.slash_events as usize, penalized);
}

#[test]
fn overfitting_inflates_only_weak_regimes() {
    let a = AgentModel {
        behavior: Behavior::Overfitter { low_strength_boost: 0.6 },
        ..AgentModel::honest("o", &[("debugging", 0.3)])
    };
    let ctx = ContextKey::new("debugging");
    let rate = |s: StrengthLevel| {
        let mut rng = substream(77, "mc");
        (0..10_000).filter(|_| draw_result(&a, s, &ctx, &mut rng)).count() as f64 / 10_000.0
    };
    assert!((rate(StrengthLevel::StaticAnalysis) - 0.9).abs() <= 0.02);
    assert!((rate(StrengthLevel::AutomatedTestExecution) - 0.9).abs() <= 0.02);
    assert!((rate(StrengthLevel::IndependentHumanReview) - 0.3).abs() <= 0.02);
    assert!((rate(StrengthLevel::ExpertAdversarialReview) - 0.3).abs() <= 0.02);
}

#[test]
fn honest_noiseless_runs_show_no_degradation() {
    let text = DEGRADATION_SCENARIO.replace("behavior: overfitter 0.5\n", "");
    let run = run_sim(&scenario(&text)).unwrap();
    for (id, d) in &run.metrics.regime_degradation {
        let gap = d.steady_state.unwrap();
        assert!(gap.abs() <= 0.05, "{id}: {gap}");
    }
}

#[test]
fn overfitting_opens_a_gap_at_low_strength() {
    let run = run_sim(&scenario(DEGRADATION_SCENARIO)).unwrap();
    let gap = |id: &str| run.metrics.regime_degradation[&RegimeId::new(id).unwrap()].steady_state.unwrap();
    assert!(gap("debug-static") > 0.2);
    assert!(gap("security-expert").abs() <= 0.05);
}

#[test]
fn wider_panels_curb_collusion() {
    let inflation = |panel| {
        run_sim(&scenario(&collusion_scenario(panel)))
            .unwrap()
            .metrics
            .collusion_inflation
            .unwrap()
    };
    assert!(inflation(3) < inflation(1));
}

#[test]
fn zero_rounds_is_an_empty_run() {
    let run = run_sim(&scenario(&two_agents(0))).unwrap();
    assert_eq!(run.metrics.events, 0);
    assert_eq!(run.metrics.epochs, 0);
    assert_eq!(run.metrics.final_root, None);
    assert_eq!(run.metrics.allocation_regret, None);
    assert_eq!(run.metrics.initial_stake, run.metrics.final_stake);
}

#[test]
fn scenario_errors_carry_positions() {
    let errs = parse_scenario("seed: x\nrounds: 5\n[agent]\nid: a\ncompetence: debugging=2\nmood: calm\n", None).unwrap_err();
    assert!(errs.iter().any(|e| e.line == 1), "{errs:?}");
    assert!(errs.iter().any(|e| e.line == 6), "{errs:?}");
}

#[test]
fn verdicts_from_colluders_are_always_successes() {
    use agentrep_core::sim::{report, VerifierModel};
    let a = AgentModel::honest("c", &[("debugging", 0.0)]);
    let v = VerifierModel { colluding_with: Some(a.id.clone()), ..VerifierModel::noiseless("vx") };
    let mut rng = substream(1, "c");
    assert!((0..500).all(|_| report(&v, &a, false, &mut rng) == Verdict::Success));
}

#[test]
fn spearman_uses_average_ranks() {
    assert_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]), Some(1.0));
    assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), Some(-1.0));
    let tied = spearman(&[1.0, 1.0, 2.0], &[1.0, 2.0, 3.0]).unwrap();
    assert!((tied - 0.866_025_403_784_438_6).abs() < 1e-12);
    assert_eq!(spearman(&[1.0, 1.0], &[1.0, 2.0]), None);
}
