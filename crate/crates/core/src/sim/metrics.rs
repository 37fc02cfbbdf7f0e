use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use thiserror::Error;

use super::{colludes, Behavior, RunHistory, ScenarioConfig};
use crate::cards::{CardStore, VerifierReliabilityTable};
use crate::evidence::{ContextKey, Timestamp};
use crate::hash::Digest;
use crate::ids::RegimeId;
use crate::ledger::Ledger;
use crate::regimes::StrengthLevel;

/// Rounds per degradation window.
pub const DEGRADATION_WINDOW: u64 = 50;

/// Scores in metrics are read at the weakest strength, so every entry
/// counts at full strength weight.
const METRIC_STRENGTH: StrengthLevel = StrengthLevel::StaticAnalysis;

#[derive(Debug, Clone, PartialEq)]
pub struct DegradationSeries {
    pub strength: StrengthLevel,
    /// Per window, observed pass rate minus the winners' mean latent
    /// competence; `None` for windows with no allocation of this regime.
    pub windows: Vec<Option<f64>>,
    /// The same gap pooled over every allocation in the second half of
    /// the windows.
    pub steady_state: Option<f64>,
    pub allocations: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DegradationError {
    #[error("no allocated rounds to measure")]
    EmptyHistory,
}

#[derive(Default, Clone, Copy)]
struct Acc {
    n: usize,
    passes: usize,
    competence: f64,
}

impl Acc {
    fn add(&mut self, pass: bool, p: f64) {
        self.n += 1;
        self.passes += usize::from(pass);
        self.competence += p;
    }

    fn gap(&self) -> Option<f64> {
        (self.n > 0).then(|| (self.passes as f64 - self.competence) / self.n as f64)
    }
}

pub fn measure_regime_degradation(
    history: &RunHistory,
) -> Result<BTreeMap<RegimeId, DegradationSeries>, DegradationError> {
    if history.records.is_empty() {
        return Err(DegradationError::EmptyHistory);
    }
    let last_round = history.records.iter().map(|r| r.round).max().unwrap_or(0);
    let rounds = history.rounds.max(last_round + 1);
    let n_windows = rounds.div_ceil(DEGRADATION_WINDOW) as usize;
    let steady_from = n_windows / 2;

    let mut per: BTreeMap<RegimeId, (StrengthLevel, Vec<Acc>, Acc)> = BTreeMap::new();
    for r in &history.records {
        let (_, windows, steady) = per
            .entry(r.regime_id.clone())
            .or_insert_with(|| (r.strength, vec![Acc::default(); n_windows], Acc::default()));
        let w = (r.round / DEGRADATION_WINDOW) as usize;
        windows[w].add(r.observed_pass, r.winner_competence);
        if w >= steady_from {
            steady.add(r.observed_pass, r.winner_competence);
        }
    }
    Ok(per
        .into_iter()
        .map(|(id, (strength, windows, steady))| {
            let series = DegradationSeries {
                strength,
                allocations: windows.iter().map(|a| a.n).sum(),
                windows: windows.iter().map(Acc::gap).collect(),
                steady_state: steady.gap(),
            };
            (id, series)
        })
        .collect())
}

fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties. `None` with
/// fewer than two points or when either side is constant.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Option<f64> {
    assert_eq!(xs.len(), ys.len());
    if xs.len() < 2 {
        return None;
    }
    let (rx, ry) = (average_ranks(xs), average_ranks(ys));
    let n = xs.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimMetrics {
    pub rounds: u64,
    pub allocated_rounds: u64,
    pub events: u64,
    pub epochs: u64,
    /// Mean of (best latent competence − winner's); `None` without allocations.
    pub allocation_regret: Option<f64>,
    /// Mean over contexts of the per-context Spearman correlation between
    /// final scores and latent competences.
    pub reputation_truth_correlation: Option<f64>,
    pub correlation_by_context: BTreeMap<ContextKey, Option<f64>>,
    pub regime_degradation: BTreeMap<RegimeId, DegradationSeries>,
    /// Colluders' mean score minus honest agents' at equal competence.
    pub collusion_inflation: Option<f64>,
    pub slash_events: u64,
    pub slashed_stake: u64,
    pub initial_stake: u64,
    pub final_stake: u64,
    pub final_root: Option<Digest>,
    pub ledger_head: Option<Digest>,
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), |x| format!("{x:.6}"))
}

impl SimMetrics {
    /// `key: value` lines with 6-decimal floats; stable across runs.
    pub fn to_report(&self) -> String {
        let mut s = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(s, "{k}: {v}");
        };
        line("rounds", self.rounds.to_string());
        line("allocated_rounds", self.allocated_rounds.to_string());
        line("events", self.events.to_string());
        line("epochs", self.epochs.to_string());
        line("allocation_regret", opt(self.allocation_regret));
        line("reputation_truth_correlation", opt(self.reputation_truth_correlation));
        for (c, v) in &self.correlation_by_context {
            line(&format!("correlation.{c}"), opt(*v));
        }
        line("collusion_inflation", opt(self.collusion_inflation));
        line("slash_events", self.slash_events.to_string());
        line("slashed_stake", self.slashed_stake.to_string());
        line("initial_stake", self.initial_stake.to_string());
        line("final_stake", self.final_stake.to_string());
        for (id, d) in &self.regime_degradation {
            line(&format!("degradation.{id}.strength"), d.strength.level().to_string());
            line(&format!("degradation.{id}.allocations"), d.allocations.to_string());
            line(&format!("degradation.{id}.steady_state"), opt(d.steady_state));
            let windows: Vec<String> = d.windows.iter().map(|w| opt(*w)).collect();
            line(&format!("degradation.{id}.windows"), windows.join(","));
        }
        let digest = |d: &Option<Digest>| d.map_or_else(|| "none".to_string(), |d| d.to_hex());
        line("final_root", digest(&self.final_root));
        line("ledger_head", digest(&self.ledger_head));
        s
    }
}

pub(super) struct Totals {
    pub slash_events: u64,
    pub slashed_stake: u64,
    pub initial_stake: u64,
    pub final_stake: u64,
    pub events: u64,
}

pub(super) fn compute(
    cfg: &ScenarioConfig,
    history: &RunHistory,
    cards: &CardStore,
    reliability: &VerifierReliabilityTable,
    ledger: &Ledger,
    now: Timestamp,
    totals: Totals,
) -> SimMetrics {
    let score = |agent: &crate::ids::AgentId, ctx: &ContextKey| {
        cards
            .assess(agent, ctx, METRIC_STRENGTH, now, &cfg.aggregation, reliability)
            .score
    };
    let contexts: BTreeSet<&ContextKey> = cfg.task_mix.iter().map(|t| &t.context).collect();

    let mut correlation_by_context = BTreeMap::new();
    for ctx in &contexts {
        let (scores, truth): (Vec<f64>, Vec<f64>) = cfg
            .agents
            .iter()
            .filter_map(|a| a.competence.get(*ctx).map(|p| (score(&a.id, ctx), *p)))
            .unzip();
        correlation_by_context.insert((*ctx).clone(), spearman(&scores, &truth));
    }
    let defined: Vec<f64> = correlation_by_context.values().flatten().copied().collect();
    let reputation_truth_correlation =
        (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);

    let is_colluder = |a: &super::AgentModel| cfg.verifiers.iter().any(|v| colludes(v, a));
    let mut diffs = Vec::new();
    for ctx in &contexts {
        for c in cfg.agents.iter().filter(|a| is_colluder(a)) {
            let Some(pc) = c.competence.get(*ctx) else { continue };
            for h in cfg
                .agents
                .iter()
                .filter(|a| a.behavior == Behavior::Honest && !is_colluder(a))
            {
                if h.competence.get(*ctx).is_some_and(|ph| (ph - pc).abs() <= 1e-9) {
                    diffs.push(score(&c.id, ctx) - score(&h.id, ctx));
                }
            }
        }
    }
    let collusion_inflation = (!diffs.is_empty()).then(|| diffs.iter().sum::<f64>() / diffs.len() as f64);

    let n = history.records.len();
    let allocation_regret = (n > 0).then(|| {
        history
            .records
            .iter()
            .map(|r| r.best_competence - r.winner_competence)
            .sum::<f64>()
            / n as f64
    });

    SimMetrics {
        rounds: history.rounds,
        allocated_rounds: n as u64,
        events: totals.events,
        epochs: ledger.records().len() as u64,
        allocation_regret,
        reputation_truth_correlation,
        correlation_by_context,
        regime_degradation: measure_regime_degradation(history).unwrap_or_default(),
        collusion_inflation,
        slash_events: totals.slash_events,
        slashed_stake: totals.slashed_stake,
        initial_stake: totals.initial_stake,
        final_stake: totals.final_stake,
        final_root: ledger.records().last().map(|r| r.root),
        ledger_head: ledger.head(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spearman_examples() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]), Some(1.0));
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), Some(-1.0));
        assert_eq!(spearman(&[1.0], &[1.0]), None);
        assert_eq!(spearman(&[1.0, 1.0], &[1.0, 2.0]), None);
        // Ties get average ranks: x ranks (1.5, 1.5, 3), y ranks (1, 2, 3).
        let r = spearman(&[1.0, 1.0, 2.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!((r - 0.866_025_403_784_438_6).abs() < 1e-12);
    }

    #[test]
    fn empty_history_is_an_error() {
        assert_eq!(
            measure_regime_degradation(&RunHistory::default()),
            Err(DegradationError::EmptyHistory)
        );
    }
}
