//! Verification regimes: the declarative document format, validation,
//! strength levels, and the in-memory catalog.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{check_label, RegimeId};
use crate::kv::{self, Entry};

/// Ordinal strength of a verification regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum StrengthLevel {
    StaticAnalysis = 1,
    AutomatedTestExecution = 2,
    IndependentHumanReview = 3,
    ExpertAdversarialReview = 4,
}

impl StrengthLevel {
    pub const ALL: [StrengthLevel; 4] = [
        StrengthLevel::StaticAnalysis,
        StrengthLevel::AutomatedTestExecution,
        StrengthLevel::IndependentHumanReview,
        StrengthLevel::ExpertAdversarialReview,
    ];

    pub fn level(self) -> u8 {
        self as u8
    }

    pub fn from_level(level: u8) -> Option<Self> {
        Self::ALL.get(usize::from(level).wrapping_sub(1)).copied()
    }

    pub fn label(self) -> &'static str {
        match self {
            StrengthLevel::StaticAnalysis => "static-analysis",
            StrengthLevel::AutomatedTestExecution => "automated-test-execution",
            StrengthLevel::IndependentHumanReview => "independent-human-review",
            StrengthLevel::ExpertAdversarialReview => "expert-adversarial-review",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.label() == label)
    }

    /// How many levels `self` falls short of `required` (0 when it meets it).
    pub fn shortfall(self, required: StrengthLevel) -> u8 {
        required.level().saturating_sub(self.level())
    }
}

impl From<StrengthLevel> for u8 {
    fn from(s: StrengthLevel) -> u8 {
        s.level()
    }
}

impl TryFrom<u8> for StrengthLevel {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        StrengthLevel::from_level(v).ok_or_else(|| format!("strength level {v} is not in 1..=4"))
    }
}

impl fmt::Display for StrengthLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for StrengthLevel {
    type Err = String;

    /// Accepts either the label or the numeric level.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(level) = Self::from_label(s) {
            return Ok(level);
        }
        s.parse::<u8>()
            .ok()
            .and_then(Self::from_level)
            .ok_or_else(|| format!("unknown strength {s:?}"))
    }
}

/// A property a regime assesses.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Property {
    Correctness,
    Performance,
    Security,
    Maintainability,
    Other(String),
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Property::Correctness => f.write_str("correctness"),
            Property::Performance => f.write_str("performance"),
            Property::Security => f.write_str("security"),
            Property::Maintainability => f.write_str("maintainability"),
            Property::Other(label) => write!(f, "other({label})"),
        }
    }
}

impl FromStr for Property {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "correctness" => Property::Correctness,
            "performance" => Property::Performance,
            "security" => Property::Security,
            "maintainability" => Property::Maintainability,
            _ => {
                let label = s
                    .strip_prefix("other(")
                    .and_then(|rest| rest.strip_suffix(')'))
                    .filter(|l| check_label(l).is_ok())
                    .ok_or_else(|| format!("unknown property {s:?}"))?;
                Property::Other(label.to_string())
            }
        })
    }
}

/// Evidence kinds produced by a human reviewer.
pub const HUMAN_EVIDENCE_KINDS: [&str; 3] =
    ["expert-review-report", "human-review-report", "manual-review-notes"];

/// Curated starter vocabulary; kinds are open labels.
pub const STARTER_EVIDENCE_KINDS: [&str; 8] = [
    "ci-logs",
    "test-additions",
    "coverage-delta",
    "static-analysis-report",
    "adversarial-test-report",
    "expert-review-report",
    "human-review-report",
    "manual-review-notes",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct AcceptanceThreshold {
    pub description: String,
    /// Numeric pass bar in [0, 1], where the regime has one.
    pub pass_bar: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationRegime {
    pub regime_id: RegimeId,
    pub task_class: String,
    pub properties_assessed: BTreeSet<Property>,
    pub required_evidence: BTreeSet<String>,
    pub acceptance_threshold: AcceptanceThreshold,
    pub strength: StrengthLevel,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegimeViolation {
    #[error("properties_assessed is empty")]
    EmptyProperties,
    #[error("strength {strength} regimes must not require {kind:?}")]
    EvidenceStrengthMismatch { strength: StrengthLevel, kind: String },
    #[error("strength {0} regimes must require at least one human-produced evidence kind")]
    MissingHumanEvidence(StrengthLevel),
    #[error("malformed regime id {0:?}")]
    MalformedId(String),
    #[error("malformed task class {0:?}")]
    MalformedTaskClass(String),
    #[error("malformed evidence kind {0:?}")]
    MalformedEvidenceKind(String),
    #[error("threshold value {0} is outside [0, 1]")]
    ThresholdOutOfRange(f64),
    #[error("threshold description spans multiple lines")]
    MultilineThreshold,
}

impl VerificationRegime {
    /// Every violated regime invariant; empty means valid.
    pub fn validate(&self) -> Vec<RegimeViolation> {
        let mut out = Vec::new();
        if !self.regime_id.is_well_formed() {
            out.push(RegimeViolation::MalformedId(self.regime_id.to_string()));
        }
        if check_label(&self.task_class).is_err() {
            out.push(RegimeViolation::MalformedTaskClass(self.task_class.clone()));
        }
        if self.properties_assessed.is_empty() {
            out.push(RegimeViolation::EmptyProperties);
        }
        for kind in &self.required_evidence {
            if check_label(kind).is_err() {
                out.push(RegimeViolation::MalformedEvidenceKind(kind.clone()));
            }
        }
        match self.strength {
            StrengthLevel::StaticAnalysis | StrengthLevel::AutomatedTestExecution => {
                if self.required_evidence.contains("expert-review-report") {
                    out.push(RegimeViolation::EvidenceStrengthMismatch {
                        strength: self.strength,
                        kind: "expert-review-report".to_string(),
                    });
                }
            }
            StrengthLevel::IndependentHumanReview | StrengthLevel::ExpertAdversarialReview => {
                let has_human = HUMAN_EVIDENCE_KINDS
                    .iter()
                    .any(|k| self.required_evidence.contains(*k));
                if !has_human {
                    out.push(RegimeViolation::MissingHumanEvidence(self.strength));
                }
            }
        }
        if let Some(bar) = self.acceptance_threshold.pass_bar {
            if !(0.0..=1.0).contains(&bar) {
                out.push(RegimeViolation::ThresholdOutOfRange(bar));
            }
        }
        if self.acceptance_threshold.description.contains(['\n', '\r']) {
            out.push(RegimeViolation::MultilineThreshold);
        }
        out
    }

    /// True iff every required evidence kind is in `provided`.
    pub fn satisfies(&self, provided: &BTreeSet<String>) -> bool {
        self.required_evidence.is_subset(provided)
    }

    /// Renders the regime in the document format accepted by [`parse_regime`].
    pub fn to_document(&self) -> String {
        let join = |items: Vec<String>| items.join(", ");
        let mut doc = String::new();
        doc.push_str(&format!("id: {}\n", self.regime_id));
        doc.push_str(&format!("task_class: {}\n", self.task_class));
        doc.push_str(&format!(
            "properties: {}\n",
            join(self.properties_assessed.iter().map(|p| p.to_string()).collect())
        ));
        doc.push_str(&format!(
            "required_evidence: {}\n",
            join(self.required_evidence.iter().cloned().collect())
        ));
        if !self.acceptance_threshold.description.is_empty() {
            doc.push_str(&format!("threshold: {}\n", self.acceptance_threshold.description));
        }
        if let Some(bar) = self.acceptance_threshold.pass_bar {
            doc.push_str(&format!("threshold_value: {bar}\n"));
        }
        doc.push_str(&format!("strength: {}\n", self.strength.label()));
        doc
    }
}

/// Free-function form of [`VerificationRegime::satisfies`].
pub fn satisfies(provided: &BTreeSet<String>, regime: &VerificationRegime) -> bool {
    regime.satisfies(provided)
}

pub fn validate_regime(regime: &VerificationRegime) -> Vec<RegimeViolation> {
    regime.validate()
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegimeParseError {
    #[error("{line}:{col}: syntax error: {message}")]
    SyntaxError { line: usize, col: usize, message: String },
    #[error("{line}:{col}: unknown field {name:?}")]
    UnknownField { name: String, line: usize, col: usize },
    #[error("{line}:{col}: duplicate field {name:?}")]
    DuplicateField { name: String, line: usize, col: usize },
    #[error("missing field {0:?}")]
    MissingField(&'static str),
    #[error("{line}:{col}: invalid strength label {label:?}")]
    InvalidStrengthLabel { label: String, line: usize, col: usize },
    #[error("{line}:{col}: invalid value for {field}: {message}")]
    InvalidValue {
        field: &'static str,
        line: usize,
        col: usize,
        message: String,
    },
    #[error("invalid regime: {0}")]
    Invalid(RegimeViolation),
}

const REGIME_KEYS: [&str; 7] = [
    "id",
    "task_class",
    "properties",
    "required_evidence",
    "threshold",
    "threshold_value",
    "strength",
];

/// Parses one regime document. Returns every error found, never a
/// partially valid regime.
pub fn parse_regime(document: &str) -> Result<VerificationRegime, Vec<RegimeParseError>> {
    let blocks = kv::parse_blocks(document).map_err(|errs| {
        errs.into_iter()
            .map(|e| RegimeParseError::SyntaxError {
                line: e.line,
                col: e.col,
                message: e.message,
            })
            .collect::<Vec<_>>()
    })?;

    let mut errors = Vec::new();
    for block in blocks.iter().skip(1) {
        errors.push(RegimeParseError::SyntaxError {
            line: block.line,
            col: 1,
            message: "block headers are not allowed in regime documents".to_string(),
        });
    }

    let mut fields: BTreeMap<&'static str, &Entry> = BTreeMap::new();
    for entry in &blocks[0].entries {
        match REGIME_KEYS.iter().find(|k| **k == entry.key) {
            None => errors.push(RegimeParseError::UnknownField {
                name: entry.key.clone(),
                line: entry.line,
                col: entry.col,
            }),
            Some(key) => {
                if fields.insert(key, entry).is_some() {
                    errors.push(RegimeParseError::DuplicateField {
                        name: entry.key.clone(),
                        line: entry.line,
                        col: entry.col,
                    });
                }
            }
        }
    }

    let mut require = |name: &'static str| -> Option<&Entry> {
        let found = fields.get(name).copied();
        if found.is_none() {
            errors.push(RegimeParseError::MissingField(name));
        }
        found
    };
    let id = require("id");
    let task_class = require("task_class");
    let properties = require("properties");
    let strength = require("strength");

    let regime_id = id.map(|e| RegimeId::new(e.value.clone()).map_err(|_| e));
    let strength = strength.map(|e| StrengthLevel::from_label(&e.value).ok_or(e));
    let properties = properties.map(|e| {
        let mut set = BTreeSet::new();
        let mut bad = Vec::new();
        for item in kv::split_list(&e.value) {
            match item.parse::<Property>() {
                Ok(p) => {
                    set.insert(p);
                }
                Err(msg) => bad.push(msg),
            }
        }
        (e, set, bad)
    });
    let threshold_value = fields.get("threshold_value").map(|e| {
        e.value
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or(*e)
    });

    if let Some(Err(e)) = &regime_id { errors.push(RegimeParseError::InvalidValue {
        field: "id",
        line: e.line,
        col: e.col,
        message: format!("malformed identifier {:?}", e.value),
    }) }
    if let Some(Err(e)) = &strength {
        errors.push(RegimeParseError::InvalidStrengthLabel {
            label: e.value.clone(),
            line: e.line,
            col: e.col,
        });
    }
    if let Some((e, _, bad)) = &properties {
        for message in bad {
            errors.push(RegimeParseError::InvalidValue {
                field: "properties",
                line: e.line,
                col: e.col,
                message: message.clone(),
            });
        }
    }
    if let Some(Err(e)) = &threshold_value {
        errors.push(RegimeParseError::InvalidValue {
            field: "threshold_value",
            line: e.line,
            col: e.col,
            message: format!("not a number: {:?}", e.value),
        });
    }

    if !errors.is_empty() {
        return Err(errors);
    }

    let regime = VerificationRegime {
        regime_id: regime_id.expect("checked").expect("checked"),
        task_class: task_class.expect("checked").value.clone(),
        properties_assessed: properties.expect("checked").1,
        required_evidence: fields
            .get("required_evidence")
            .map(|e| kv::split_list(&e.value).into_iter().collect())
            .unwrap_or_default(),
        acceptance_threshold: AcceptanceThreshold {
            description: fields
                .get("threshold")
                .map(|e| e.value.clone())
                .unwrap_or_default(),
            pass_bar: threshold_value.map(|r| r.expect("checked")),
        },
        strength: strength.expect("checked").expect("checked"),
    };

    let violations = regime.validate();
    if violations.is_empty() {
        Ok(regime)
    } else {
        Err(violations.into_iter().map(RegimeParseError::Invalid).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CatalogError {
    #[error("regime id {0} is already registered")]
    DuplicateRegimeId(RegimeId),
    #[error("invalid regime {id}: {violations:?}")]
    InvalidRegime {
        id: RegimeId,
        violations: Vec<RegimeViolation>,
    },
    #[error("{path}: {errors:?}")]
    Parse {
        path: String,
        errors: Vec<RegimeParseError>,
    },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

/// Registered regimes keyed by id. Built once, then shared read-only.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RegimeCatalog {
    regimes: BTreeMap<RegimeId, VerificationRegime>,
}

impl RegimeCatalog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, regime: VerificationRegime) -> Result<(), CatalogError> {
        let violations = regime.validate();
        if !violations.is_empty() {
            return Err(CatalogError::InvalidRegime {
                id: regime.regime_id.clone(),
                violations,
            });
        }
        if self.regimes.contains_key(&regime.regime_id) {
            return Err(CatalogError::DuplicateRegimeId(regime.regime_id));
        }
        self.regimes.insert(regime.regime_id.clone(), regime);
        Ok(())
    }

    pub fn lookup(&self, id: &RegimeId) -> Option<&VerificationRegime> {
        self.regimes.get(id)
    }

    pub fn len(&self) -> usize {
        self.regimes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regimes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &VerificationRegime> {
        self.regimes.values()
    }

    /// The shipped corpus of example regimes.
    pub fn starter() -> Self {
        let mut catalog = Self::new();
        for (name, doc) in STARTER_REGIMES {
            let regime = parse_regime(doc)
                .unwrap_or_else(|e| panic!("shipped regime {name} must parse: {e:?}"));
            catalog
                .register(regime)
                .unwrap_or_else(|e| panic!("shipped regime {name} must register: {e}"));
        }
        catalog
    }

    /// Registers every `*.regime` file in `dir`, in file-name order.
    pub fn load_dir(&mut self, dir: &Path) -> Result<usize, CatalogError> {
        let io = |path: &Path, e: std::io::Error| CatalogError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        };
        let mut paths: Vec<_> = std::fs::read_dir(dir)
            .map_err(|e| io(dir, e))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|ext| ext == "regime"))
            .collect();
        paths.sort();
        for path in &paths {
            let text = std::fs::read_to_string(path).map_err(|e| io(path, e))?;
            let regime = parse_regime(&text).map_err(|errors| CatalogError::Parse {
                path: path.display().to_string(),
                errors,
            })?;
            self.register(regime)?;
        }
        Ok(paths.len())
    }
}

/// The regime documents shipped in `regimes/` at the repository root.
pub const STARTER_REGIMES: [(&str, &str); 6] = [
    ("debugging-static", include_str!("../../../regimes/debugging-static.regime")),
    ("debugging-ci", include_str!("../../../regimes/debugging-ci.regime")),
    ("patch-ci", include_str!("../../../regimes/patch-ci.regime")),
    ("patch-review", include_str!("../../../regimes/patch-review.regime")),
    ("security-scanner", include_str!("../../../regimes/security-scanner.regime")),
    ("security-expert", include_str!("../../../regimes/security-expert.regime")),
];
