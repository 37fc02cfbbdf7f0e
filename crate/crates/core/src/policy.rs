//! The decision-facing policy engine: eligibility, ranking, collateral,
//! slashing, access tiers, verification escalation, and verifier
//! assignment.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::Rng;
use thiserror::Error;

use crate::cards::{AggregationConfig, Assessment, CardStore, ReliabilitySource};
use crate::evidence::{ContextKey, IntegrityRecord, Severity, Timestamp};
use crate::ids::{AgentId, OwnerId, RegimeId, TaskId, VerifierId};
use crate::num::Scalar;
use crate::regimes::{RegimeCatalog, StrengthLevel};

#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec<T> {
    pub task: TaskId,
    pub owner: OwnerId,
    pub context: ContextKey,
    pub required_regime: RegimeId,
    pub required_strength: StrengthLevel,
    pub base_stake: T,
    pub value_at_risk: T,
    pub sandbox: bool,
}

/// Minimum `(lcb, n_eff)` for one access tier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TierRule<T> {
    pub min_lcb: T,
    pub min_n_eff: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyConfig<T> {
    /// τ, applied to the lower confidence bound.
    pub eligibility_threshold: T,
    /// n_min: effective high-strength mass needed for a standard stake.
    pub min_effective_mass: T,
    /// κ in `base_stake * (1 + κ * uncertainty)`.
    pub risk_premium: T,
    /// m₀: stake multiplier for cold agents on sandbox tasks.
    pub cold_start_multiplier: T,
    pub slash_negligence: T,
    pub slash_fraud: T,
    /// Tier t requires `tiers[t]`; tier 0 is always attainable.
    pub tiers: [TierRule<T>; 4],
    /// Tasks at or above this value at risk get a cross-verification panel.
    pub cross_verification_value: T,
    /// Assessments with more uncertainty than this get a panel.
    pub uncertainty_bound: T,
    pub panel_size: usize,
    pub escalated_panel_size: usize,
}

impl<T: Scalar> Default for PolicyConfig<T> {
    fn default() -> Self {
        let tier = |lcb: f64, n: f64| TierRule {
            min_lcb: T::of(lcb),
            min_n_eff: T::of(n),
        };
        Self {
            eligibility_threshold: T::of(0.7),
            min_effective_mass: T::of(5.0),
            risk_premium: T::of(2.0),
            cold_start_multiplier: T::of(3.0),
            slash_negligence: T::of(0.5),
            slash_fraud: T::one(),
            tiers: [
                tier(0.0, 0.0),
                tier(0.5, 2.0),
                tier(0.7, 5.0),
                tier(0.85, 10.0),
            ],
            cross_verification_value: T::of(1000.0),
            uncertainty_bound: T::of(0.15),
            panel_size: 1,
            escalated_panel_size: 3,
        }
    }
}

impl<T: Scalar> PolicyConfig<T> {
    pub fn validate(&self) -> Result<(), PolicyError> {
        let bad = |m: &str| Err(PolicyError::InvalidConfig(m.to_string()));
        for w in self.tiers.windows(2) {
            if !(w[0].min_lcb < w[1].min_lcb && w[0].min_n_eff < w[1].min_n_eff) {
                return bad("tier thresholds must be strictly increasing");
            }
        }
        for f in [self.slash_negligence, self.slash_fraud] {
            if !(T::zero()..=T::one()).contains(&f) {
                return bad("slash fractions must lie in [0, 1]");
            }
        }
        if self.panel_size == 0 || self.escalated_panel_size < self.panel_size {
            return bad("panel sizes must satisfy 1 <= panel_size <= escalated_panel_size");
        }
        let non_negative = [
            self.eligibility_threshold,
            self.min_effective_mass,
            self.risk_premium,
            self.cross_verification_value,
            self.uncertainty_bound,
        ];
        if non_negative.iter().any(|v| !(v.is_finite() && *v >= T::zero())) {
            return bad("thresholds and coefficients must be finite and non-negative");
        }
        if !(self.cold_start_multiplier >= T::one()) {
            return bad("cold_start_multiplier must be at least 1");
        }
        Ok(())
    }

    pub fn slash_fraction(&self, severity: Severity) -> Option<T> {
        match severity {
            Severity::None => None,
            Severity::Negligence => Some(self.slash_negligence),
            Severity::Fraud => Some(self.slash_fraud),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum IneligibleReason {
    BelowThreshold,
    ColdStartSandboxOnly,
    ScrutinyBlock,
}

impl IneligibleReason {
    pub fn as_str(self) -> &'static str {
        match self {
            IneligibleReason::BelowThreshold => "below-threshold",
            IneligibleReason::ColdStartSandboxOnly => "cold-start-sandbox-only",
            IneligibleReason::ScrutinyBlock => "scrutiny-block",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicyDecision<T> {
    Eligible { required_stake: T },
    /// Eligible only against a stake carrying a risk premium.
    Conditional { required_stake: T },
    Ineligible { reason: IneligibleReason },
}

impl<T: Copy> PolicyDecision<T> {
    pub fn required_stake(&self) -> Option<T> {
        match *self {
            PolicyDecision::Eligible { required_stake }
            | PolicyDecision::Conditional { required_stake } => Some(required_stake),
            PolicyDecision::Ineligible { .. } => None,
        }
    }

    pub fn is_eligible(&self) -> bool {
        matches!(self, PolicyDecision::Eligible { .. })
    }

    /// 0 for Eligible, 1 for Conditional, `None` for Ineligible.
    fn class(&self) -> Option<u8> {
        match self {
            PolicyDecision::Eligible { .. } => Some(0),
            PolicyDecision::Conditional { .. } => Some(1),
            PolicyDecision::Ineligible { .. } => None,
        }
    }
}

impl<T: Scalar> fmt::Display for PolicyDecision<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicyDecision::Eligible { required_stake } => {
                write!(f, "eligible stake={required_stake:.6}")
            }
            PolicyDecision::Conditional { required_stake } => {
                write!(f, "conditional stake={required_stake:.6}")
            }
            PolicyDecision::Ineligible { reason } => write!(f, "ineligible reason={}", reason.as_str()),
        }
    }
}

/// Free-function form of [`PolicyDecision::required_stake`].
pub fn required_stake<T: Copy>(decision: &PolicyDecision<T>) -> Option<T> {
    decision.required_stake()
}

/// Gates one agent for one task. `assessment` must be computed at the
/// task's required strength; `is_cold` means the agent has no evidence in
/// the task's context.
pub fn eligibility<T: Scalar>(
    assessment: &Assessment<T>,
    task: &TaskSpec<T>,
    cfg: &PolicyConfig<T>,
    is_cold: bool,
) -> PolicyDecision<T> {
    if is_cold {
        return if task.sandbox {
            PolicyDecision::Eligible {
                required_stake: cfg.cold_start_multiplier * task.base_stake,
            }
        } else {
            PolicyDecision::Ineligible {
                reason: IneligibleReason::ColdStartSandboxOnly,
            }
        };
    }
    if assessment.scrutiny_active && !task.sandbox {
        return PolicyDecision::Ineligible {
            reason: IneligibleReason::ScrutinyBlock,
        };
    }
    if assessment.lcb < cfg.eligibility_threshold {
        return PolicyDecision::Ineligible {
            reason: IneligibleReason::BelowThreshold,
        };
    }
    if assessment.n_eff >= cfg.min_effective_mass {
        PolicyDecision::Eligible {
            required_stake: task.base_stake,
        }
    } else {
        PolicyDecision::Conditional {
            required_stake: task.base_stake
                * (T::one() + cfg.risk_premium * assessment.uncertainty),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedCandidate<T> {
    pub agent: AgentId,
    pub assessment: Assessment<T>,
    pub decision: PolicyDecision<T>,
}

fn desc<T: PartialOrd>(a: T, b: T) -> Ordering {
    b.partial_cmp(&a).unwrap_or(Ordering::Equal)
}

/// Drops ineligible candidates and orders the rest: Eligible before
/// Conditional, then lcb descending, n_eff descending, agent id ascending.
pub fn rank<T: Scalar>(
    candidates: impl IntoIterator<Item = (AgentId, Assessment<T>, PolicyDecision<T>)>,
) -> Vec<RankedCandidate<T>> {
    let mut out: Vec<_> = candidates
        .into_iter()
        .filter(|(_, _, d)| d.class().is_some())
        .map(|(agent, assessment, decision)| RankedCandidate {
            agent,
            assessment,
            decision,
        })
        .collect();
    out.sort_by(|x, y| {
        x.decision
            .class()
            .cmp(&y.decision.class())
            .then_with(|| desc(x.assessment.lcb, y.assessment.lcb))
            .then_with(|| desc(x.assessment.n_eff, y.assessment.n_eff))
            .then_with(|| x.agent.cmp(&y.agent))
    });
    out
}

/// Highest tier whose thresholds are all met.
pub fn access_tier<T: Scalar>(assessment: &Assessment<T>, cfg: &PolicyConfig<T>) -> u8 {
    cfg.tiers
        .iter()
        .rposition(|t| assessment.lcb >= t.min_lcb && assessment.n_eff >= t.min_n_eff)
        .unwrap_or(0) as u8
}

/// Per-context tiers for one agent.
pub fn access_tiers<T: Scalar>(
    assessments: &BTreeMap<ContextKey, Assessment<T>>,
    cfg: &PolicyConfig<T>,
) -> BTreeMap<ContextKey, u8> {
    assessments
        .iter()
        .map(|(c, a)| (c.clone(), access_tier(a, cfg)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VerificationRequirement {
    pub panel_size: usize,
    /// Never below the task's required strength.
    pub strength_floor: StrengthLevel,
    pub cross_verification: bool,
}

pub fn escalate<T: Scalar>(
    assessment: &Assessment<T>,
    task: &TaskSpec<T>,
    cfg: &PolicyConfig<T>,
) -> VerificationRequirement {
    let escalated = assessment.scrutiny_active
        || assessment.uncertainty > cfg.uncertainty_bound
        || task.value_at_risk >= cfg.cross_verification_value;
    let panel_size = if escalated {
        cfg.escalated_panel_size
    } else {
        cfg.panel_size
    };
    VerificationRequirement {
        panel_size,
        strength_floor: task.required_strength,
        cross_verification: panel_size > 1,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolicyError {
    #[error("severity {0:?} has no slash fraction")]
    UnknownSeverity(Severity),
    #[error("stake must be finite and non-negative")]
    NegativeStake,
    #[error("invalid policy config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlashOutcome<T> {
    pub slashed: T,
    pub remaining: T,
    /// To be applied to the agent's card as an integrity violation.
    pub integrity: IntegrityRecord,
}

/// Forfeits `fraction(severity)` of `staked`.
///
/// `remaining` is computed first and `slashed` is derived from it, which
/// makes `slashed + remaining == staked` hold exactly in floating point.
pub fn slash<T: Scalar>(
    staked: T,
    severity: Severity,
    at: Timestamp,
    cfg: &PolicyConfig<T>,
) -> Result<SlashOutcome<T>, PolicyError> {
    let fraction = cfg
        .slash_fraction(severity)
        .ok_or(PolicyError::UnknownSeverity(severity))?;
    if !(staked.is_finite() && staked >= T::zero()) {
        return Err(PolicyError::NegativeStake);
    }
    let remaining = staked - staked * fraction;
    let slashed = staked - remaining;
    Ok(SlashOutcome {
        slashed,
        remaining,
        integrity: IntegrityRecord::penalized(severity, at),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AssignError {
    #[error("{available} eligible verifiers for a panel of {needed}")]
    InsufficientVerifiers { available: usize, needed: usize },
}

/// Uniform sample without replacement from `pool`, skipping the agent's
/// declared affiliates. Deterministic for a given rng state.
pub fn assign_verifiers<R: Rng + ?Sized>(
    pool: &[VerifierId],
    affiliates: &BTreeSet<VerifierId>,
    panel_size: usize,
    rng: &mut R,
) -> Result<Vec<VerifierId>, AssignError> {
    let mut seen = BTreeSet::new();
    let eligible: Vec<&VerifierId> = pool
        .iter()
        .filter(|v| !affiliates.contains(*v) && seen.insert(*v))
        .collect();
    if eligible.len() < panel_size {
        return Err(AssignError::InsufficientVerifiers {
            available: eligible.len(),
            needed: panel_size,
        });
    }
    Ok(rand::seq::index::sample(rng, eligible.len(), panel_size)
        .into_iter()
        .map(|i| eligible[i].clone())
        .collect())
}

/// An agent offered for a task.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate<T> {
    pub agent: AgentId,
    /// Verifiers the agent has declared an affiliation with.
    pub affiliates: BTreeSet<VerifierId>,
    /// Collateral the agent can post; `None` means unlimited.
    pub available_stake: Option<T>,
}

impl<T> Candidate<T> {
    pub fn new(agent: AgentId) -> Self {
        Self {
            agent,
            affiliates: BTreeSet::new(),
            available_stake: None,
        }
    }
}

/// Read-only state an allocation is computed against.
pub struct AllocationContext<'a, T, R> {
    pub cards: &'a CardStore,
    pub catalog: &'a RegimeCatalog,
    pub aggregation: &'a AggregationConfig<T>,
    pub policy: &'a PolicyConfig<T>,
    pub reliability: &'a R,
    pub now: Timestamp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Allocation<T> {
    pub winner: AgentId,
    pub decision: PolicyDecision<T>,
    pub assessment: Assessment<T>,
    pub verification: VerificationRequirement,
    pub panel: Vec<VerifierId>,
    pub ranking: Vec<RankedCandidate<T>>,
    /// Every candidate's assessment and decision, in input order.
    pub decisions: Vec<(AgentId, Assessment<T>, PolicyDecision<T>)>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AllocationError<T: fmt::Debug> {
    #[error("no eligible agent")]
    NoEligibleAgent {
        decisions: Vec<(AgentId, Assessment<T>, PolicyDecision<T>)>,
    },
    #[error("task regime {0} is not registered")]
    UnknownRegime(RegimeId),
    #[error("task requires {task} but regime strength is {regime}")]
    StrengthMismatch {
        task: StrengthLevel,
        regime: StrengthLevel,
    },
    #[error(transparent)]
    Assign(#[from] AssignError),
}

/// Scores every candidate at the task's strength, gates, ranks, picks the
/// first, and draws its verifier panel.
pub fn allocate<T, R, G>(
    ctx: &AllocationContext<'_, T, R>,
    task: &TaskSpec<T>,
    candidates: &[Candidate<T>],
    verifier_pool: &[VerifierId],
    rng: &mut G,
) -> Result<Allocation<T>, AllocationError<T>>
where
    T: Scalar,
    R: ReliabilitySource<T>,
    G: Rng + ?Sized,
{
    let regime = ctx
        .catalog
        .lookup(&task.required_regime)
        .ok_or_else(|| AllocationError::UnknownRegime(task.required_regime.clone()))?;
    if regime.strength != task.required_strength {
        return Err(AllocationError::StrengthMismatch {
            task: task.required_strength,
            regime: regime.strength,
        });
    }

    let decisions: Vec<_> = candidates
        .iter()
        .map(|c| {
            let assessment = ctx.cards.assess(
                &c.agent,
                &task.context,
                task.required_strength,
                ctx.now,
                ctx.aggregation,
                ctx.reliability,
            );
            let cold = ctx.cards.is_cold(&c.agent, &task.context);
            let decision = eligibility(&assessment, task, ctx.policy, cold);
            (c.agent.clone(), assessment, decision)
        })
        .collect();

    let affordable = decisions.iter().zip(candidates).filter(|((_, _, d), c)| {
        match (d.required_stake(), c.available_stake) {
            (Some(stake), Some(available)) => stake <= available,
            _ => true,
        }
    });
    let ranking = rank(affordable.map(|(d, _)| d.clone()));
    let Some(first) = ranking.first() else {
        return Err(AllocationError::NoEligibleAgent { decisions });
    };

    let winner = candidates
        .iter()
        .find(|c| c.agent == first.agent)
        .expect("ranked agents come from the candidate list");
    let verification = escalate(&first.assessment, task, ctx.policy);
    let panel = assign_verifiers(
        verifier_pool,
        &winner.affiliates,
        verification.panel_size,
        rng,
    )?;

    Ok(Allocation {
        winner: first.agent.clone(),
        decision: first.decision,
        assessment: first.assessment,
        verification,
        panel,
        ranking: ranking.clone(),
        decisions,
    })
}
