use std::collections::BTreeSet;

use agentrep_core::regimes::{
    parse_regime, satisfies, AcceptanceThreshold, Property, RegimeCatalog, RegimeParseError,
    RegimeViolation, StrengthLevel, VerificationRegime, HUMAN_EVIDENCE_KINDS, STARTER_EVIDENCE_KINDS,
    STARTER_REGIMES,
};
use agentrep_core::RegimeId;
use proptest::prelude::*;

fn arb_property() -> impl Strategy<Value = Property> {
    prop_oneof![
        Just(Property::Correctness),
        Just(Property::Performance),
        Just(Property::Security),
        Just(Property::Maintainability),
        "[a-z][a-z0-9-]{0,8}".prop_map(Property::Other),
    ]
}

fn arb_kind() -> impl Strategy<Value = String> {
    prop_oneof![
        prop::sample::select(STARTER_EVIDENCE_KINDS.to_vec()).prop_map(str::to_string),
        "[a-z][a-z0-9-]{0,12}",
    ]
}

/// Regimes that satisfy every structural invariant.
fn arb_regime() -> impl Strategy<Value = VerificationRegime> {
    (
        "[a-z][a-z0-9-]{0,15}",
        "[a-z][a-z0-9-]{0,15}",
        prop::collection::btree_set(arb_property(), 1..4),
        prop::collection::btree_set(arb_kind(), 0..5),
        prop::option::of("[a-z][a-z0-9 ]{0,30}[a-z0-9]"),
        prop::option::of(0.0f64..=1.0),
        1u8..=4,
        prop::sample::select(HUMAN_EVIDENCE_KINDS.to_vec()),
    )
        .prop_map(|(id, class, props, mut kinds, desc, bar, level, human)| {
            let strength = StrengthLevel::from_level(level).unwrap();
            if strength >= StrengthLevel::IndependentHumanReview {
                kinds.insert(human.to_string());
            } else {
                kinds.remove("expert-review-report");
            }
            VerificationRegime {
                regime_id: RegimeId::new(id).unwrap(),
                task_class: class,
                properties_assessed: props,
                required_evidence: kinds,
                acceptance_threshold: AcceptanceThreshold {
                    description: desc.unwrap_or_default(),
                    pass_bar: bar,
                },
                strength,
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 300, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn documents_round_trip(regime in arb_regime()) {
        prop_assert!(regime.validate().is_empty(), "{:?}", regime.validate());
        let doc = regime.to_document();
        let parsed = parse_regime(&doc).unwrap();
        prop_assert_eq!(&parsed, &regime);
        prop_assert_eq!(parsed.to_document(), doc);
    }

    #[test]
    fn satisfaction_is_monotone_under_supersets(
        regime in arb_regime(),
        provided in prop::collection::btree_set(arb_kind(), 0..6),
        extra in prop::collection::btree_set(arb_kind(), 0..6),
    ) {
        let bigger: BTreeSet<String> = provided.union(&extra).cloned().collect();
        if satisfies(&provided, &regime) {
            prop_assert!(satisfies(&bigger, &regime));
        }
        prop_assert!(satisfies(&regime.required_evidence, &regime));
        let brute = regime.required_evidence.iter().all(|k| provided.contains(k));
        prop_assert_eq!(satisfies(&provided, &regime), brute);
    }

    #[test]
    fn dropping_every_human_kind_invalidates_high_strength(regime in arb_regime()) {
        let mut r = regime;
        r.strength = StrengthLevel::from_level(3 + u8::from(r.strength.level() % 2 == 0)).unwrap();
        for k in HUMAN_EVIDENCE_KINDS {
            r.required_evidence.remove(k);
        }
        prop_assert!(r.validate().contains(&RegimeViolation::MissingHumanEvidence(r.strength)));
    }

    #[test]
    fn low_strength_never_requires_expert_reports(regime in arb_regime(), level in 1u8..=2) {
        let mut r = regime;
        r.strength = StrengthLevel::from_level(level).unwrap();
        r.required_evidence.insert("expert-review-report".into());
        let flagged = r.validate().iter().any(|v| matches!(v, RegimeViolation::EvidenceStrengthMismatch { .. }));
        prop_assert!(flagged);
    }
}

#[test]
fn shipped_corpus_validates_and_registers() {
    let catalog = RegimeCatalog::starter();
    assert_eq!(catalog.len(), STARTER_REGIMES.len());
    for r in catalog.iter() {
        assert!(r.validate().is_empty(), "{:?}", r.regime_id);
        assert_eq!(parse_regime(&r.to_document()).unwrap(), *r);
    }
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../regimes");
    let mut loaded = RegimeCatalog::new();
    assert_eq!(loaded.load_dir(&dir).unwrap(), STARTER_REGIMES.len());
    assert_eq!(loaded, catalog);
}

#[test]
fn duplicate_ids_are_refused() {
    let mut catalog = RegimeCatalog::starter();
    let again = catalog.iter().next().unwrap().clone();
    assert!(catalog.register(again).is_err());
}

#[test]
fn unknown_keys_and_missing_fields_are_reported() {
    let errs = parse_regime("id: x\ncolour: blue\n").unwrap_err();
    assert!(errs.len() >= 2, "{errs:?}");
    assert!(errs.iter().all(|e| !matches!(e, RegimeParseError::Invalid(_))));
}
