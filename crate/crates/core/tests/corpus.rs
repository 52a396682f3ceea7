//! Corpus round trips, the prepare oracle and split properties.

use std::collections::{BTreeMap, BTreeSet};

use metablocks::corpus::{
    generate_synthetic, load_corpus, prepare_subset, read_corpus, save_corpus, split, Dataset, Message, Provenance,
    SplitSpec, SynthConfig, SynthMode,
};
use metablocks::nn::init::seeded_rng;
use proptest::prelude::*;
use rand::Rng;

#[test]
fn synthetic_corpus_round_trips_through_jsonl() {
    let mut ds = generate_synthetic(&SynthConfig::new(3, 250, 4, SynthMode::Conflict)).unwrap();
    assert_eq!(ds.len(), 1000);
    let mut rng = seeded_rng(9);
    for m in ds.messages.iter_mut().step_by(3) {
        m.enums.insert("stars".into(), rng.random_range(1..=5).to_string());
        m.numerics.insert("score".into(), rng.random_range(-1e3..1e3));
        m.affiliation = Some("dept-ä".into());
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("corpus.jsonl");
    save_corpus(&ds, &path).unwrap();
    let (back, report) = load_corpus(&path).unwrap();
    assert_eq!(report.rejected.len(), 0);
    assert_eq!(back.messages, ds.messages);
    assert_eq!(back.label_set, ds.label_set);
}

#[test]
fn reader_reports_bad_lines_and_keeps_order() {
    let text = "{\"text\":\"a\",\"label\":\"y\"}\nnot json\n{\"text\":\"b\",\"label\":\"x\"}\n";
    let (ds, report) = read_corpus(text.as_bytes()).unwrap();
    assert_eq!(
        ds.messages.iter().map(|m| m.text.as_str()).collect::<Vec<_>>(),
        ["a", "b"]
    );
    assert_eq!(ds.label_set, ["x", "y"]);
    assert_eq!(report.rejected.len(), 1);
    assert_eq!(report.rejected[0].line, 2);
}

fn random_corpus(seed: u64, n: usize) -> Dataset {
    let mut rng = seeded_rng(seed);
    let messages = (0..n)
        .map(|i| {
            let len = if rng.random_bool(0.1) {
                0
            } else {
                rng.random_range(1..12)
            };
            let text: String = (0..len).map(|_| if rng.random_bool(0.2) { 'é' } else { 'a' }).collect();
            Message::new(format!("m{i}"), text, format!("c{}", rng.random_range(0..5)))
        })
        .collect();
    Dataset::new(messages, Provenance::default())
}

/// Stable sort by length descending within each capped class, take the top k,
/// then restore corpus order.
fn prepare_oracle(ds: &Dataset, cap: usize, keep: usize) -> Vec<String> {
    let mut per_class: BTreeMap<&str, Vec<&Message>> = BTreeMap::new();
    for m in &ds.messages {
        per_class.entry(&m.label).or_default().push(m);
    }
    let mut kept = BTreeSet::new();
    for msgs in per_class.values() {
        let mut pool: Vec<(usize, &Message)> = msgs
            .iter()
            .take(cap)
            .filter(|m| !m.text.is_empty())
            .map(|m| (m.id[1..].parse().unwrap(), *m))
            .collect();
        pool.sort_by(|a, b| b.1.text.chars().count().cmp(&a.1.text.chars().count()));
        kept.extend(pool.into_iter().take(keep).map(|(i, _)| i));
    }
    kept.into_iter().map(|i| format!("m{i}")).collect()
}

#[test]
fn prepare_matches_sort_oracle() {
    for seed in 0..5 {
        let ds = random_corpus(seed, 500);
        for (cap, keep) in [(80, 30), (200, 200), (10, 1)] {
            let (out, _) = prepare_subset(&ds, cap, keep).unwrap();
            let ids: Vec<String> = out.messages.iter().map(|m| m.id.clone()).collect();
            assert_eq!(
                ids,
                prepare_oracle(&ds, cap, keep),
                "seed {seed}, cap {cap}, keep {keep}"
            );
        }
    }
}

proptest! {
    #[test]
    fn prepare_never_grows_classes_or_keeps_empty_text(seed in 0u64..1000, cap in 1usize..60, keep in 1usize..60) {
        prop_assume!(cap >= keep);
        let ds = random_corpus(seed, 120);
        let (out, _) = prepare_subset(&ds, cap, keep).unwrap();
        let before = ds.class_counts();
        for (label, n) in out.class_counts() {
            prop_assert!(n <= before[&label]);
            prop_assert!(n <= keep);
        }
        prop_assert!(out.messages.iter().all(|m| !m.text.is_empty()));
    }

    #[test]
    fn splits_partition_the_dataset(seed in 0u64..1000, n in 10usize..200, train in 0.3f64..0.8) {
        let val = (1.0 - train) / 2.0;
        let ds = random_corpus(seed, n);
        let spec = SplitSpec::new(train, val, 1.0 - train - val, seed).unwrap();
        let Ok(s) = split(&ds, &spec) else { return Ok(()) };
        prop_assert_eq!(s.train.len() + s.val.len() + s.test.len(), ds.len());
        let ids: BTreeSet<&str> = [&s.train, &s.val, &s.test]
            .iter()
            .flat_map(|d| d.messages.iter().map(|m| m.id.as_str()))
            .collect();
        prop_assert_eq!(ids.len(), ds.len());
        for part in [&s.train, &s.val, &s.test] {
            prop_assert_eq!(&part.label_set, &ds.label_set);
            prop_assert!(part.label_set.windows(2).all(|w| w[0] < w[1]));
        }
    }
}
