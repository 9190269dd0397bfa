use std::collections::BTreeMap;

use epb_core::corpus::{
    bio_spans, parse_ep_json_bytes, write_ep_json, Arity, LabeledExample, Labeling, Sentence, Span, TaskSchema,
};
use epb_core::embedstore::{PooledSet, Target};
use epb_core::mdl::data_codelength;
use epb_core::memaudit::{audit, mem_exact, mem_freq, HeuristicKind, MemorizationIndex, Query, SpanKey, UniformSpace};
use epb_core::metrics::compute_metrics;
use epb_core::probes::{softmax, ProbeConfig, ProbeKind, ProbeModel};
use proptest::prelude::*;

const LABELS: [&str; 4] = ["A", "B", "C", "D"];

fn schema(arity: Arity, labeling: Labeling) -> TaskSchema {
    TaskSchema::new("t", arity, labeling, LABELS.iter().map(|s| s.to_string()).collect()).unwrap()
}

fn arb_span(n: usize) -> impl Strategy<Value = Span> {
    (0..n).prop_flat_map(move |s| (Just(s), s + 1..=n)).prop_map(|(s, e)| Span::new(s, e))
}

/// One sentence with its examples; targets are numbered in order.
fn arb_sentence(id: u64, two_span: bool, multi: bool) -> impl Strategy<Value = (Sentence, Vec<LabeledExample>)> {
    (1usize..8).prop_flat_map(move |n| {
        let tokens = proptest::collection::vec("[a-z]{1,4}", n);
        let gold = if multi {
            proptest::sample::subsequence(LABELS.to_vec(), 1..=4).boxed()
        } else {
            proptest::sample::select(LABELS.to_vec()).prop_map(|l| vec![l]).boxed()
        };
        let span2 = if two_span { arb_span(n).prop_map(Some).boxed() } else { Just(None).boxed() };
        let ex = (arb_span(n), span2, gold);
        (tokens, proptest::collection::vec(ex, 1..4)).prop_map(move |(tokens, exs)| {
            let examples = exs
                .into_iter()
                .enumerate()
                .map(|(t, (span1, span2, gold))| LabeledExample {
                    sentence_id: id,
                    target: t as u32,
                    span1,
                    span2,
                    gold: gold.into_iter().map(str::to_string).collect(),
                })
                .collect();
            (Sentence { id, tokens }, examples)
        })
    })
}

fn arb_index_and_queries() -> impl Strategy<Value = (MemorizationIndex, Vec<Query>)> {
    let pair = (0u8..10, 0u32..4);
    (
        proptest::collection::vec(pair.clone(), 0..60),
        proptest::collection::vec(pair, 1..60),
    )
        .prop_map(|(train, test)| {
            let key = |k: u8| SpanKey::One(format!("w{k}"));
            let mut index = MemorizationIndex::default();
            for (k, l) in train {
                index.insert(key(k), vec![l]);
            }
            let queries = test
                .into_iter()
                .enumerate()
                .map(|(i, (k, l))| Query {
                    key: key(k),
                    gold: vec![l],
                    stream: [i as u64, 0],
                })
                .collect();
            (index, queries)
        })
}

fn arb_targets(classes: u32) -> impl Strategy<Value = (Vec<Target>, Vec<Target>)> {
    proptest::collection::vec((0..classes, 0..classes), 1..200).prop_map(|v| {
        v.into_iter().map(|(g, p)| (Target::Single(g), Target::Single(p))).unzip()
    })
}

proptest! {
    #[test]
    fn ep_json_round_trips(
        (two_span, multi, docs) in (any::<bool>(), any::<bool>()).prop_flat_map(|(two, multi)| {
            (Just(two), Just(multi), (
                arb_sentence(0, two, multi),
                arb_sentence(1, two, multi),
                arb_sentence(7, two, multi),
            ))
        })
    ) {
        let arity = if two_span { Arity::TwoSpan } else { Arity::OneSpan };
        let labeling = if multi { Labeling::MultiLabel } else { Labeling::SingleLabel };
        let mut sentences = BTreeMap::new();
        let mut examples = Vec::new();
        for (s, ex) in [docs.0, docs.1, docs.2] {
            sentences.insert(s.id, s);
            examples.extend(ex);
        }
        let mut buf = Vec::new();
        write_ep_json(&mut buf, &sentences, &examples, labeling).unwrap();
        prop_assert_eq!(String::from_utf8(buf.clone()).unwrap().lines().count(), 3);
        let mut s = schema(arity, labeling);
        let part = parse_ep_json_bytes(&buf, &mut s).unwrap();
        prop_assert_eq!(&part.examples, &examples);
        prop_assert_eq!(part.sentences, sentences.into_values().collect::<Vec<_>>());
    }

    #[test]
    fn bio_spans_tile_the_sentence(tags in proptest::collection::vec(
        prop_oneof![Just("O"), Just("B-X"), Just("I-X"), Just("B-Y"), Just("I-Y")], 0..40)
    ) {
        let spans = bio_spans(&tags).unwrap();
        let mut next = 0;
        for (span, label) in &spans {
            prop_assert_eq!(span.start, next);
            prop_assert!(span.end > span.start && span.end <= tags.len());
            if label == "O" {
                prop_assert_eq!(span.len(), 1);
            }
            next = span.end;
        }
        prop_assert_eq!(next, tags.len());
    }

    #[test]
    fn bio_spans_reject_malformed_tags(
        prefix in proptest::collection::vec(prop_oneof![Just("O"), Just("B-X")], 0..5),
        bad in prop_oneof![Just("X"), Just("B-"), Just("E-X"), Just("")],
    ) {
        let mut tags = prefix.clone();
        tags.push(bad);
        prop_assert!(bio_spans(&tags).is_err());
    }

    #[test]
    fn exact_hits_are_freq_hits((index, queries) in arb_index_and_queries()) {
        for q in &queries {
            let e = mem_exact(&index, q);
            let f = mem_freq(&index, q);
            if e.classifiable {
                prop_assert!(f.prediction.classifiable);
            }
            if e.outcome.is_some() {
                prop_assert_eq!(&e.outcome, &f.prediction.outcome);
            }
        }
    }

    #[test]
    fn audit_ignores_test_order((index, queries) in arb_index_and_queries(), seed in any::<u64>()) {
        let a = audit(&index, &queries, seed, UniformSpace::Key).unwrap();
        let mut rev = queries.clone();
        rev.reverse();
        let b = audit(&index, &rev, seed, UniformSpace::Key).unwrap();
        for (x, y) in a.scores.iter().zip(&b.scores) {
            prop_assert_eq!(x.classifiable, y.classifiable);
            prop_assert_eq!(x.covered, y.covered);
            match (x.expected_accuracy, y.expected_accuracy) {
                (Some(p), Some(q)) => prop_assert!((p - q).abs() < 1e-9),
                (p, q) => prop_assert_eq!(p, q),
            }
        }
    }

    #[test]
    fn mcc_is_symmetric((gold, pred) in arb_targets(5)) {
        let a = compute_metrics(&gold, &pred, 5, false).unwrap();
        let b = compute_metrics(&pred, &gold, 5, false).unwrap();
        prop_assert!((a.mcc - b.mcc).abs() < 1e-12);
        prop_assert!((-1.0..=1.0).contains(&a.mcc));
        prop_assert_eq!(a.accuracy, b.accuracy);
    }

    #[test]
    fn macro_equals_weighted_under_equal_support(
        per_class in 1usize..20,
        preds in proptest::collection::vec(0u32..3, 60),
    ) {
        let gold: Vec<Target> = (0..3 * per_class).map(|i| Target::Single((i % 3) as u32)).collect();
        let pred: Vec<Target> = gold.iter().zip(preds.iter().cycle()).map(|(_, &p)| Target::Single(p)).collect();
        let r = compute_metrics(&gold, &pred, 3, false).unwrap();
        prop_assert!((r.macro_recall - r.weighted_recall).abs() < 1e-9);
        prop_assert!((r.macro_precision - r.weighted_precision).abs() < 1e-9);
        prop_assert!((r.macro_f1 - r.weighted_f1).abs() < 1e-9);
    }

    #[test]
    fn softmax_is_a_distribution(z in proptest::collection::vec(-500.0f64..500.0, 1..12)) {
        let p = softmax(&z);
        prop_assert!(p.iter().all(|v| v.is_finite() && *v >= 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn codelength_grows_with_data(
        rows in proptest::collection::vec((proptest::collection::vec(-3.0f32..3.0, 4), 0u32..3), 2..40),
        seed in 0u64..50,
    ) {
        let mut config = ProbeConfig::new(ProbeKind::Linear, 4, 3, Labeling::SingleLabel);
        config.seed = seed;
        let model = ProbeModel::<f64>::init(&config, 0).unwrap();
        let mut all = PooledSet::empty(4);
        for (v, c) in &rows {
            all.push(v, Target::Single(*c));
        }
        let half: Vec<usize> = (0..rows.len() / 2).collect();
        let part = all.subset(&half);
        let a = data_codelength(&model, &part).unwrap();
        let b = data_codelength(&model, &all).unwrap();
        prop_assert!(a >= 0.0);
        prop_assert!(b >= a);
    }
}

#[test]
fn mem_uniform_draws_average_to_their_expectation() {
    let mut index = MemorizationIndex::default();
    let key = |k: u32| SpanKey::One(format!("w{k}"));
    for k in 0..20u32 {
        for l in 0..=(k % 4) {
            index.insert(key(k), vec![l]);
        }
    }
    let queries: Vec<Query> = (0..40u32)
        .map(|i| Query {
            key: key(i % 25),
            gold: vec![i % 3],
            stream: [i as u64, 1],
        })
        .collect();
    let seeds = 2000u64;
    let mut sum = 0.0;
    let mut expected = None;
    for seed in 0..seeds {
        let r = audit(&index, &queries, seed, UniformSpace::Key).unwrap();
        let s = r.score(HeuristicKind::MemUniform);
        sum += s.accuracy;
        expected = s.expected_accuracy;
    }
    let mean = sum / seeds as f64;
    let expected = expected.unwrap();
    assert!((mean - expected).abs() < 1.0, "mean {mean} vs expected {expected}");
}
