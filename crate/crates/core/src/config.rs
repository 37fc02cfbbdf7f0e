//! Global configuration files and the tunable keys shared with scenario
//! files.
//!
//! Every key is optional; missing keys keep their defaults and unknown keys
//! are errors.

use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;

use crate::cards::AggregationConfig;
use crate::hash::HashAlgorithm;
use crate::kv::{self, Entry};
use crate::ledger::DEFAULT_EPOCH_CADENCE;
use crate::num::Scalar;
use crate::evidence::ContextKey;
use crate::ids::{OwnerId, RegimeId, TaskId};
use crate::policy::{PolicyConfig, TaskSpec};
use crate::regimes::RegimeCatalog;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.col, self.message)
    }
}

impl std::error::Error for ConfigError {}

impl ConfigError {
    pub(crate) fn at(entry: &Entry, message: impl Into<String>) -> Self {
        Self {
            line: entry.line,
            col: entry.col,
            message: message.into(),
        }
    }

    pub(crate) fn whole(message: impl Into<String>) -> Self {
        Self {
            line: 0,
            col: 0,
            message: message.into(),
        }
    }
}

impl From<kv::SyntaxError> for ConfigError {
    fn from(e: kv::SyntaxError) -> Self {
        Self {
            line: e.line,
            col: e.col,
            message: e.message,
        }
    }
}

pub(crate) fn parse_num<N: std::str::FromStr>(entry: &Entry) -> Result<N, ConfigError> {
    entry
        .value
        .parse()
        .map_err(|_| ConfigError::at(entry, format!("{}: invalid number {:?}", entry.key, entry.value)))
}

fn parse_scalar<T: Scalar>(entry: &Entry) -> Result<T, ConfigError> {
    let v: f64 = parse_num(entry)?;
    if !v.is_finite() {
        return Err(ConfigError::at(entry, format!("{}: must be finite", entry.key)));
    }
    Ok(T::of(v))
}

fn parse_four<T: Scalar>(entry: &Entry) -> Result<[T; 4], ConfigError> {
    let items = kv::split_list(&entry.value);
    let values = items
        .iter()
        .map(|s| s.parse::<f64>().ok().filter(|v| v.is_finite()).map(T::of))
        .collect::<Option<Vec<T>>>();
    match values {
        Some(v) if v.len() == 4 => Ok([v[0], v[1], v[2], v[3]]),
        _ => Err(ConfigError::at(
            entry,
            format!("{}: expected four comma-separated numbers", entry.key),
        )),
    }
}

/// Applies one aggregation key. `Ok(false)` means the key is not an
/// aggregation key.
pub fn apply_aggregation_key<T: Scalar>(
    cfg: &mut AggregationConfig<T>,
    entry: &Entry,
) -> Result<bool, ConfigError> {
    match entry.key.as_str() {
        "prior_successes" => cfg.prior_successes = parse_scalar(entry)?,
        "prior_failures" => cfg.prior_failures = parse_scalar(entry)?,
        "strength_discount" => cfg.strength_discount = parse_scalar(entry)?,
        "recency_half_life_seconds" => cfg.recency_half_life_seconds = parse_scalar(entry)?,
        "violation_penalty_failures" => cfg.violation_penalty_failures = parse_scalar(entry)?,
        "scrutiny_duration_seconds" => cfg.scrutiny_duration_seconds = parse_num(entry)?,
        "z" => cfg.z = parse_scalar(entry)?,
        _ => return Ok(false),
    }
    Ok(true)
}

/// Applies one policy key. `Ok(false)` means the key is not a policy key.
pub fn apply_policy_key<T: Scalar>(cfg: &mut PolicyConfig<T>, entry: &Entry) -> Result<bool, ConfigError> {
    match entry.key.as_str() {
        "eligibility_threshold" => cfg.eligibility_threshold = parse_scalar(entry)?,
        "min_effective_mass" => cfg.min_effective_mass = parse_scalar(entry)?,
        "risk_premium" => cfg.risk_premium = parse_scalar(entry)?,
        "cold_start_multiplier" => cfg.cold_start_multiplier = parse_scalar(entry)?,
        "slash_negligence" => cfg.slash_negligence = parse_scalar(entry)?,
        "slash_fraud" => cfg.slash_fraud = parse_scalar(entry)?,
        "tier_lcb" => {
            for (t, v) in cfg.tiers.iter_mut().zip(parse_four::<T>(entry)?) {
                t.min_lcb = v;
            }
        }
        "tier_n_eff" => {
            for (t, v) in cfg.tiers.iter_mut().zip(parse_four::<T>(entry)?) {
                t.min_n_eff = v;
            }
        }
        "cross_verification_value" => cfg.cross_verification_value = parse_scalar(entry)?,
        "uncertainty_bound" => cfg.uncertainty_bound = parse_scalar(entry)?,
        "panel_size" => cfg.panel_size = parse_num(entry)?,
        "escalated_panel_size" => cfg.escalated_panel_size = parse_num(entry)?,
        _ => return Ok(false),
    }
    Ok(true)
}

/// Rejects a key seen twice among `entries`.
pub(crate) fn check_duplicates(entries: &[Entry], errors: &mut Vec<ConfigError>) {
    let mut seen = BTreeSet::new();
    for e in entries {
        if !seen.insert(e.key.as_str()) {
            errors.push(ConfigError::at(e, format!("duplicate key {:?}", e.key)));
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalConfig {
    pub data_dir: Option<PathBuf>,
    /// Extra regime documents loaded on top of the starter catalog.
    pub regimes_dir: Option<PathBuf>,
    pub aggregation: AggregationConfig<f64>,
    pub policy: PolicyConfig<f64>,
    pub hash: HashAlgorithm,
    pub epoch_cadence: usize,
}

impl Default for GlobalConfig {
    fn default() -> Self {
        Self {
            data_dir: None,
            regimes_dir: None,
            aggregation: AggregationConfig::default(),
            policy: PolicyConfig::default(),
            hash: HashAlgorithm::default(),
            epoch_cadence: DEFAULT_EPOCH_CADENCE,
        }
    }
}

impl GlobalConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.aggregation
            .validate()
            .map_err(|e| ConfigError::whole(e.to_string()))?;
        self.policy
            .validate()
            .map_err(|e| ConfigError::whole(e.to_string()))
    }
}

pub fn parse_global_config(text: &str) -> Result<GlobalConfig, Vec<ConfigError>> {
    let blocks = kv::parse_blocks(text).map_err(|es| es.into_iter().map(ConfigError::from).collect::<Vec<_>>())?;
    let mut cfg = GlobalConfig::default();
    let mut errors = Vec::new();
    for b in &blocks[1..] {
        errors.push(ConfigError {
            line: b.line,
            col: 1,
            message: "config files take no blocks".into(),
        });
    }
    let entries = &blocks[0].entries;
    check_duplicates(entries, &mut errors);
    for e in entries {
        let applied = match e.key.as_str() {
            "data_dir" => {
                cfg.data_dir = Some(PathBuf::from(&e.value));
                Ok(true)
            }
            "regimes_dir" => {
                cfg.regimes_dir = Some(PathBuf::from(&e.value));
                Ok(true)
            }
            "hash_algorithm" => e
                .value
                .parse()
                .map(|h| {
                    cfg.hash = h;
                    true
                })
                .map_err(|_| ConfigError::at(e, format!("unknown hash algorithm {:?}", e.value))),
            "epoch_cadence" => parse_num(e).map(|n| {
                cfg.epoch_cadence = n;
                true
            }),
            _ => apply_aggregation_key(&mut cfg.aggregation, e).and_then(|done| {
                if done {
                    Ok(true)
                } else {
                    apply_policy_key(&mut cfg.policy, e)
                }
            }),
        };
        match applied {
            Ok(true) => {}
            Ok(false) => errors.push(ConfigError::at(e, format!("unknown key {:?}", e.key))),
            Err(err) => errors.push(err),
        }
    }
    if errors.is_empty() {
        if let Err(e) = cfg.validate() {
            errors.push(e);
        }
    }
    if errors.is_empty() {
        Ok(cfg)
    } else {
        Err(errors)
    }
}

const TASK_KEYS: [&str; 7] = [
    "task",
    "owner",
    "context",
    "regime",
    "base_stake",
    "value_at_risk",
    "sandbox",
];

/// Parses a task file. `task`, `owner`, `context`, `regime` and
/// `base_stake` are required; `value_at_risk` defaults to 0 and `sandbox`
/// to false. The required strength is the regime's own.
pub fn parse_task_spec(text: &str, catalog: &RegimeCatalog) -> Result<TaskSpec<f64>, Vec<ConfigError>> {
    let blocks = kv::parse_blocks(text).map_err(|es| es.into_iter().map(ConfigError::from).collect::<Vec<_>>())?;
    let mut errors = Vec::new();
    for b in &blocks[1..] {
        errors.push(ConfigError {
            line: b.line,
            col: 1,
            message: "task files take no blocks".into(),
        });
    }
    let entries = &blocks[0].entries;
    check_duplicates(entries, &mut errors);
    let get = |k: &str| entries.iter().find(|e| e.key == k);
    for e in entries {
        if !TASK_KEYS.contains(&e.key.as_str()) {
            errors.push(ConfigError::at(e, format!("unknown key {:?}", e.key)));
        }
    }
    let mut require = |k: &str| {
        let e = get(k);
        if e.is_none() {
            errors.push(ConfigError::whole(format!("missing required key {k:?}")));
        }
        e
    };
    let (task, owner, context, regime, base) = (
        require("task"),
        require("owner"),
        require("context"),
        require("regime"),
        require("base_stake"),
    );
    fn id<I: std::str::FromStr>(e: Option<&Entry>, errors: &mut Vec<ConfigError>) -> Option<I> {
        let e = e?;
        let parsed = e.value.parse().ok();
        if parsed.is_none() {
            errors.push(ConfigError::at(e, format!("{}: malformed value {:?}", e.key, e.value)));
        }
        parsed
    }
    let task: Option<TaskId> = id(task, &mut errors);
    let owner: Option<OwnerId> = id(owner, &mut errors);
    let context: Option<ContextKey> = id(context, &mut errors);
    let regime_id: Option<RegimeId> = id(regime, &mut errors);
    let mut stake = |e: Option<&Entry>| -> Option<f64> {
        let e = e?;
        match parse_num::<f64>(e) {
            Ok(v) if v.is_finite() && v >= 0.0 => Some(v),
            Ok(_) => {
                errors.push(ConfigError::at(e, format!("{}: must be finite and non-negative", e.key)));
                None
            }
            Err(err) => {
                errors.push(err);
                None
            }
        }
    };
    let base_stake = stake(base);
    let value_at_risk = match get("value_at_risk") {
        Some(e) => stake(Some(e)),
        None => Some(0.0),
    };
    let sandbox = match get("sandbox").map(|e| (e, e.value.as_str())) {
        None | Some((_, "false")) => Some(false),
        Some((_, "true")) => Some(true),
        Some((e, _)) => {
            errors.push(ConfigError::at(e, "sandbox: expected true or false"));
            None
        }
    };
    let strength = regime_id.as_ref().and_then(|rid| {
        let found = catalog.lookup(rid);
        if found.is_none() {
            errors.push(ConfigError::at(get("regime").expect("present"), format!("unknown regime {rid}")));
        }
        found.map(|r| (r.strength, r.task_class.clone()))
    });
    if let (Some((_, class)), Some(ctx)) = (&strength, &context) {
        if *class != ctx.task_class {
            errors.push(ConfigError::at(
                get("context").expect("present"),
                format!("regime covers {class}, not {ctx}"),
            ));
        }
    }
    if !errors.is_empty() {
        return Err(errors);
    }
    Ok(TaskSpec {
        task: task.expect("checked"),
        owner: owner.expect("checked"),
        context: context.expect("checked"),
        required_regime: regime_id.expect("checked"),
        required_strength: strength.expect("checked").0,
        base_stake: base_stake.expect("checked"),
        value_at_risk: value_at_risk.expect("checked"),
        sandbox: sandbox.expect("checked"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_defaults() {
        assert_eq!(parse_global_config("").unwrap(), GlobalConfig::default());
    }

    #[test]
    fn keys_override_defaults() {
        let cfg = parse_global_config(
            "hash_algorithm: sha512-256\nepoch_cadence: 8\neligibility_threshold: 0.6\nz: 1.96\ntier_lcb: 0, 0.4, 0.6, 0.8\n",
        )
        .unwrap();
        assert_eq!(cfg.hash, HashAlgorithm::Sha512_256);
        assert_eq!(cfg.epoch_cadence, 8);
        assert_eq!(cfg.policy.eligibility_threshold, 0.6);
        assert_eq!(cfg.aggregation.z, 1.96);
        assert_eq!(cfg.policy.tiers[1].min_lcb, 0.4);
    }

    #[test]
    fn errors_are_located() {
        let errs = parse_global_config("z: 1\nbogus: 2\nz: 3\npanel_size: x\n").unwrap_err();
        let lines: Vec<_> = errs.iter().map(|e| e.line).collect();
        assert_eq!(lines, vec![3, 2, 4]);
        let errs = parse_global_config("slash_fraud: 2\n").unwrap_err();
        assert_eq!(errs.len(), 1);
    }

    #[test]
    fn task_files_parse_and_check_the_regime() {
        let cat = RegimeCatalog::starter();
        let t = parse_task_spec(
            "task: job-1\nowner: acme\ncontext: security-audit\nregime: security-expert\nbase_stake: 100\nvalue_at_risk: 5000\n",
            &cat,
        )
        .unwrap();
        assert_eq!(t.required_strength, crate::regimes::StrengthLevel::ExpertAdversarialReview);
        assert!(!t.sandbox);
        let errs = parse_task_spec("task: j\ncontext: debugging\nregime: security-expert\nbase_stake: -1\ncolour: red\n", &cat)
            .unwrap_err();
        let text: Vec<String> = errs.iter().map(|e| e.to_string()).collect();
        assert!(text.iter().any(|m| m.contains("owner")), "{text:?}");
        assert!(text.iter().any(|m| m.contains("colour")), "{text:?}");
        assert!(text.iter().any(|m| m.contains("non-negative")), "{text:?}");
        assert!(text.iter().any(|m| m.contains("covers")), "{text:?}");
    }
}
