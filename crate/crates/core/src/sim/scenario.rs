//! Scenario files: top-level run keys (plus any aggregation or policy key),
//! then `[task]`, `[agent]` and `[verifier]` blocks.
//!
//! ```text
//! seed: 7
//! rounds: 500
//! eligibility_threshold: 0.6
//!
//! [task]
//! context: debugging
//! regime: debug-ci
//! weight: 1
//! value_at_risk: 100
//! base_stake: 10
//!
//! [agent]
//! id: alice
//! competence: debugging=0.8
//! behavior: overfitter 0.5
//!
//! [verifier]
//! id: v1
//! false_positive_rate: 0.05
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use super::{AgentModel, Behavior, ScenarioConfig, TaskMixEntry, VerifierModel};
use crate::config::{apply_aggregation_key, apply_policy_key, check_duplicates, parse_num, ConfigError};
use crate::ids::{AgentId, RegimeId, VerifierId};
use crate::kv::{self, Block, Entry};

fn bad(e: &Entry, msg: impl Into<String>) -> ConfigError {
    ConfigError::at(e, msg)
}

fn parse_bool(e: &Entry) -> Result<bool, ConfigError> {
    match e.value.as_str() {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(bad(e, format!("{}: expected true or false", e.key))),
    }
}

fn parse_id<I: std::str::FromStr>(e: &Entry) -> Result<I, ConfigError> {
    e.value
        .parse()
        .map_err(|_| bad(e, format!("{}: malformed identifier {:?}", e.key, e.value)))
}

fn parse_behavior(e: &Entry) -> Result<Behavior, ConfigError> {
    let mut words = e.value.split_whitespace();
    let b = match (words.next(), words.next(), words.next()) {
        (Some("honest"), None, _) => Behavior::Honest,
        (Some("overfitter"), Some(boost), None) => Behavior::Overfitter {
            low_strength_boost: boost
                .parse()
                .map_err(|_| bad(e, format!("behavior: invalid boost {boost:?}")))?,
        },
        (Some("colluder"), Some(partner), None) => Behavior::Colluder {
            partner: VerifierId::new(partner)
                .map_err(|_| bad(e, format!("behavior: malformed partner {partner:?}")))?,
        },
        _ => {
            return Err(bad(
                e,
                "behavior: expected `honest`, `overfitter <boost>` or `colluder <verifier>`",
            ))
        }
    };
    Ok(b)
}

/// Collects fields of one block, reporting unknown keys, duplicates and
/// missing required keys.
struct Fields<'a> {
    block: &'a Block,
    errors: &'a mut Vec<ConfigError>,
}

impl<'a> Fields<'a> {
    fn new(block: &'a Block, allowed: &[&str], errors: &'a mut Vec<ConfigError>) -> Self {
        check_duplicates(&block.entries, errors);
        for e in &block.entries {
            if !allowed.contains(&e.key.as_str()) {
                errors.push(bad(e, format!("unknown key {:?}", e.key)));
            }
        }
        Self { block, errors }
    }

    fn get<T>(&mut self, key: &str, parse: impl Fn(&Entry) -> Result<T, ConfigError>) -> Option<T> {
        let e = self.block.entries.iter().find(|e| e.key == key)?;
        parse(e).map_err(|err| self.errors.push(err)).ok()
    }

    fn require<T>(&mut self, key: &str, parse: impl Fn(&Entry) -> Result<T, ConfigError>) -> Option<T> {
        if !self.block.entries.iter().any(|e| e.key == key) {
            self.errors.push(ConfigError {
                line: self.block.line,
                col: 1,
                message: format!("missing required key {key:?}"),
            });
            return None;
        }
        self.get(key, parse)
    }
}

fn parse_task(b: &Block, errors: &mut Vec<ConfigError>) -> Option<TaskMixEntry> {
    let mut f = Fields::new(
        b,
        &["context", "regime", "weight", "value_at_risk", "base_stake", "sandbox"],
        errors,
    );
    let context = f.require("context", parse_id);
    let regime_id = f.require("regime", parse_id::<RegimeId>);
    let weight = f.require("weight", parse_num::<f64>);
    let value_at_risk = f.get("value_at_risk", parse_num::<f64>).unwrap_or(0.0);
    let base_stake = f.get("base_stake", parse_num::<f64>).unwrap_or(1.0);
    let sandbox = f.get("sandbox", parse_bool).unwrap_or(false);
    Some(TaskMixEntry {
        context: context?,
        regime_id: regime_id?,
        weight: weight?,
        value_at_risk,
        base_stake,
        sandbox,
    })
}

fn parse_competence(e: &Entry) -> Result<BTreeMap<crate::evidence::ContextKey, f64>, ConfigError> {
    kv::split_list(&e.value)
        .iter()
        .map(|item| {
            let (ctx, p) = item
                .split_once('=')
                .ok_or_else(|| bad(e, format!("competence: expected context=probability, got {item:?}")))?;
            let ctx = ctx
                .trim()
                .parse()
                .map_err(|_| bad(e, format!("competence: malformed context {ctx:?}")))?;
            let p = p
                .trim()
                .parse()
                .map_err(|_| bad(e, format!("competence: invalid probability {p:?}")))?;
            Ok((ctx, p))
        })
        .collect()
}

fn parse_agent(b: &Block, errors: &mut Vec<ConfigError>) -> Option<AgentModel> {
    let mut f = Fields::new(
        b,
        &["id", "competence", "behavior", "stake_balance", "affiliates"],
        errors,
    );
    let id = f.require("id", parse_id::<AgentId>);
    let competence = f.require("competence", parse_competence);
    let behavior = f.get("behavior", parse_behavior).unwrap_or(Behavior::Honest);
    let stake_balance = f.get("stake_balance", parse_num::<u64>).unwrap_or(1_000_000);
    let affiliates = f
        .get("affiliates", |e| {
            kv::split_list(&e.value)
                .iter()
                .map(|v| VerifierId::new(v.as_str()).map_err(|_| bad(e, format!("affiliates: malformed id {v:?}"))))
                .collect::<Result<BTreeSet<_>, _>>()
        })
        .unwrap_or_default();
    Some(AgentModel {
        id: id?,
        competence: competence?,
        behavior,
        stake_balance,
        affiliates,
    })
}

fn parse_verifier(b: &Block, errors: &mut Vec<ConfigError>) -> Option<VerifierModel> {
    let mut f = Fields::new(
        b,
        &["id", "false_positive_rate", "false_negative_rate", "colluding_with"],
        errors,
    );
    let id = f.require("id", parse_id::<VerifierId>);
    let fp = f.get("false_positive_rate", parse_num::<f64>).unwrap_or(0.0);
    let fn_ = f.get("false_negative_rate", parse_num::<f64>).unwrap_or(0.0);
    let colluding_with = f.get("colluding_with", parse_id::<AgentId>);
    Some(VerifierModel {
        id: id?,
        false_positive_rate: fp,
        false_negative_rate: fn_,
        colluding_with,
    })
}

/// Parses and validates a scenario file. `regimes_dir` is resolved
/// relative to `base_dir` when given.
pub fn parse_scenario(text: &str, base_dir: Option<&Path>) -> Result<ScenarioConfig, Vec<ConfigError>> {
    let blocks = kv::parse_blocks(text).map_err(|es| es.into_iter().map(ConfigError::from).collect::<Vec<_>>())?;
    let mut cfg = ScenarioConfig::default();
    let mut errors = Vec::new();

    check_duplicates(&blocks[0].entries, &mut errors);
    for e in &blocks[0].entries {
        let res: Result<bool, ConfigError> = match e.key.as_str() {
            "seed" => parse_num(e).map(|v| cfg.seed = v).map(|_| true),
            "rounds" => parse_num(e).map(|v| cfg.rounds = v).map(|_| true),
            "epoch_cadence" => parse_num(e).map(|v| cfg.epoch_cadence = v).map(|_| true),
            "demonstration_tasks" => parse_num(e).map(|v| cfg.demonstration_tasks = v).map(|_| true),
            "discovery_probability" => parse_num(e).map(|v| cfg.discovery_probability = v).map(|_| true),
            "start_time" => parse_num(e).map(|v| cfg.start_time = v).map(|_| true),
            "round_seconds" => parse_num(e).map(|v| cfg.round_seconds = v).map(|_| true),
            "hash_algorithm" => e
                .value
                .parse()
                .map(|h| cfg.hash = h)
                .map(|_| true)
                .map_err(|_| bad(e, format!("unknown hash algorithm {:?}", e.value))),
            "regimes_dir" => {
                let dir = match base_dir {
                    Some(b) => b.join(&e.value),
                    None => e.value.clone().into(),
                };
                cfg.catalog
                    .load_dir(&dir)
                    .map(|_| true)
                    .map_err(|err| bad(e, format!("regimes_dir: {err}")))
            }
            _ => apply_aggregation_key(&mut cfg.aggregation, e).and_then(|done| {
                if done {
                    Ok(true)
                } else {
                    apply_policy_key(&mut cfg.policy, e)
                }
            }),
        };
        match res {
            Ok(true) => {}
            Ok(false) => errors.push(bad(e, format!("unknown key {:?}", e.key))),
            Err(err) => errors.push(err),
        }
    }

    for b in &blocks[1..] {
        match b.name.as_deref() {
            Some("task") => cfg.task_mix.extend(parse_task(b, &mut errors)),
            Some("agent") => cfg.agents.extend(parse_agent(b, &mut errors)),
            Some("verifier") => cfg.verifiers.extend(parse_verifier(b, &mut errors)),
            other => errors.push(ConfigError {
                line: b.line,
                col: 1,
                message: format!("unknown block [{}]", other.unwrap_or("")),
            }),
        }
    }

    if errors.is_empty() {
        if let Err(e) = cfg.validate() {
            errors.push(ConfigError::whole(e.to_string()));
        }
    }
    if errors.is_empty() {
        Ok(cfg)
    } else {
        Err(errors)
    }
}
