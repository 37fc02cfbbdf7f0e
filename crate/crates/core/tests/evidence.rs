mod common;

use std::collections::BTreeSet;

use agentrep_core::evidence::{
    canonical_bytes, decode_canonical, event_id, validate_event, EventFilter, EvidenceStore,
    StoreError, Verdict, Violation,
};
use agentrep_core::hash::HashAlgorithm;
use agentrep_core::ids::{AgentId, RegimeId};
use agentrep_core::regimes::StrengthLevel;
use common::*;
use proptest::prelude::*;

fn arb_filter() -> impl Strategy<Value = EventFilter> {
    (
        prop::option::of(0..AGENTS.len()),
        prop::option::of(0..REGIMES.len()),
        prop::option::of(0..REGIMES.len()),
        prop::option::of(1u8..=4),
        prop::option::of(any::<bool>()),
        prop::option::of((0u64..400 * DAY, 0u64..400 * DAY)),
    )
        .prop_map(|(agent, class, regime, strength, verdict, range)| EventFilter {
            agent: agent.map(|a| AgentId::new(AGENTS[a]).unwrap()),
            task_class: class.map(|c| REGIMES[c].1.to_string()),
            regime_id: regime.map(|r| RegimeId::new(REGIMES[r].0).unwrap()),
            min_strength: strength.and_then(StrengthLevel::from_level),
            verdict: verdict.map(|ok| if ok { Verdict::Success } else { Verdict::Failure }),
            time_range: range.map(|(a, b)| (NOW - a.max(b), NOW - a.min(b))),
        })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 300, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn canonical_encoding_round_trips(spec in arb_spec(), detail in prop::option::of("[a-z ]{0,20}")) {
        let mut e = build_event(&spec);
        e.outcome.detail = detail;
        let decoded = decode_canonical(&canonical_bytes(&e)).unwrap();
        let mut projected = e.clone();
        projected.outcome.detail = None;
        projected.integrity.dispute_time = None;
        prop_assert_eq!(&decoded, &projected);
        prop_assert_eq!(event_id(&decoded), event_id(&e));
    }

    #[test]
    fn truncated_encodings_are_rejected(spec in arb_spec(), cut in 0usize..1000) {
        let bytes = canonical_bytes(&build_event(&spec));
        let cut = cut % bytes.len();
        prop_assert!(decode_canonical(&bytes[..cut]).is_err());
    }

    #[test]
    fn query_matches_brute_force(events in arb_events(40), filter in arb_filter()) {
        let mut store = EvidenceStore::in_memory();
        for e in &events {
            store.append(e.clone()).unwrap();
        }
        let got: Vec<u64> = store.query(&filter).events.iter().map(|(s, _)| *s).collect();
        let want: Vec<u64> = events
            .iter()
            .enumerate()
            .filter(|(_, e)| {
                filter.agent.as_ref().is_none_or(|a| *a == e.agent)
                    && filter.task_class.as_ref().is_none_or(|c| *c == e.context.task_class)
                    && filter.regime_id.as_ref().is_none_or(|r| *r == e.regime_id)
                    && filter.min_strength.is_none_or(|s| e.strength.level() >= s.level())
                    && filter.verdict.is_none_or(|v| v == e.outcome.verdict)
                    && filter.time_range.is_none_or(|(lo, hi)| lo <= e.timestamp && e.timestamp <= hi)
            })
            .map(|(i, _)| i as u64)
            .collect();
        prop_assert_eq!(store.query(&filter).count, want.len());
        prop_assert_eq!(got, want);
    }

    #[test]
    fn appends_are_dense_and_idempotence_is_refused(events in arb_events(30)) {
        let mut store = EvidenceStore::in_memory();
        for (i, e) in events.iter().enumerate() {
            let r = store.append(e.clone()).unwrap();
            prop_assert_eq!(r.sequence_number, i as u64);
            prop_assert_eq!(r.event_id, e.id());
            prop_assert_eq!(store.sequence_of(&e.id()), Some(i as u64));
        }
        if let Some(e) = events.first() {
            prop_assert!(matches!(store.append(e.clone()), Err(StoreError::DuplicateEvent(_))));
            prop_assert_eq!(store.len(), events.len());
        }
    }

    #[test]
    fn validation_rejects_each_broken_invariant(spec in arb_spec(), which in 0u8..4) {
        let mut e = build_event(&spec);
        let cat = catalog();
        match which {
            0 => e.regime_id = RegimeId::new("no-such-regime").unwrap(),
            1 => e.strength = StrengthLevel::from_level(e.strength.level() % 4 + 1).unwrap(),
            2 => e.evidence_kinds = BTreeSet::new(),
            _ => e.timestamp = NOW + 1,
        }
        let errs = validate_event(e, &cat, NOW).unwrap_err();
        let expected = errs.iter().any(|v| match which {
            0 => matches!(v, Violation::UnknownRegime(_)),
            1 => matches!(v, Violation::StrengthMismatch { .. }),
            2 => matches!(v, Violation::MissingEvidenceKind(_)),
            _ => matches!(v, Violation::FutureTimestamp { .. }),
        });
        prop_assert!(expected, "{:?}", errs);
    }

    #[test]
    fn generated_events_validate_and_hash_per_algorithm(spec in arb_spec()) {
        let e = build_event(&spec);
        let v = validate_event(e.clone(), &catalog(), NOW).unwrap();
        prop_assert_eq!(v.id(), HashAlgorithm::Sha256.digest(&canonical_bytes(&e)));
    }
}

#[test]
fn jsonl_store_survives_reopen() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("events.jsonl");
    let specs: Vec<EventSpec> = (0..12)
        .map(|i| EventSpec {
            agent: i % 3,
            regime: i % 6,
            subdomain: None,
            success: i % 2 == 0,
            age: i as u64 * DAY,
            verifier: i % 4,
            integrity: 0,
            task: i as u8,
        })
        .collect();
    let events = validated_unique(&specs);
    {
        let mut store = EvidenceStore::open(&path, HashAlgorithm::Sha256).unwrap();
        for e in &events {
            store.append(e.clone()).unwrap();
        }
    }
    let store = EvidenceStore::open(&path, HashAlgorithm::Sha256).unwrap();
    assert_eq!(store.len(), events.len());
    for (a, b) in store.events().iter().zip(&events) {
        assert_eq!(a.id(), b.id());
        assert_eq!(**a, **b);
    }
}
