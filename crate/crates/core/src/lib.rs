//! Context-conditioned, verification-aware reputation for autonomous agents.
//!
//! Evidence events recorded under declared verification regimes feed
//! per-(agent, context) reputation cards; a policy engine gates and ranks
//! agents for tasks from those cards; a commitment ledger makes the
//! evidence history tamper-evident; and a seeded marketplace simulator
//! exercises the whole pipeline.
//!
//! Scoring and policy math is generic over [`num::Scalar`] (`f32`/`f64`).
//! The aliases below fix the scalar to `f64`.

// `!(x >= 0)` is how parameter checks reject NaN along with negatives.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cards;
pub mod config;
pub mod evidence;
pub mod hash;
pub mod ids;
pub mod kv;
pub mod ledger;
pub mod num;
pub mod policy;
pub mod regimes;
pub mod sim;

pub use cards::{CardStore, ReputationCard, VerifierReliabilityTable};
pub use evidence::{ContextKey, EvidenceEvent, EvidenceStore, ValidatedEvent};
pub use hash::{Digest, HashAlgorithm};
pub use ids::{AgentId, OwnerId, RegimeId, TaskId, VerifierId};
pub use ledger::Ledger;
pub use regimes::{RegimeCatalog, StrengthLevel, VerificationRegime};

pub type AggregationConfig = cards::AggregationConfig<f64>;
pub type Assessment = cards::Assessment<f64>;
pub type PolicyConfig = policy::PolicyConfig<f64>;
pub type PolicyDecision = policy::PolicyDecision<f64>;
pub type TaskSpec = policy::TaskSpec<f64>;
pub type Candidate = policy::Candidate<f64>;
pub type Allocation = policy::Allocation<f64>;
