//! Acceptance criteria, one test each. Every test writes a single
//! `[PASS]`/`[FAIL]` line to stderr (bypassing output capture) and then
//! asserts the verdict.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::{Duration, Instant};

use chrono::{Datelike, TimeZone, Timelike, Utc};
use metablocks::blocks::{
    batch_gradient, example_loss, AverageOf, BlockNetwork, Combine, EncodedInput, Example, MetaBlock, ModelConfig,
    TextBlock, TokenSequence,
};
use metablocks::corpus::{generate_synthetic, Dataset, Message, Provenance, SynthConfig, SynthMode};
use metablocks::featurizer::{self, affiliation_of, FeaturizerConfig, SliceKind};
use metablocks::forest::{gini, DecisionTree, ForestParams};
use metablocks::harness::{
    compare_all, run_method, Checkpoint, Experiment, ExperimentConfig, MethodRegistry, TrainedModel, METHOD_GRID,
};
use metablocks::nn::gradcheck::check_gradients;
use metablocks::nn::init::seeded_rng;
use metablocks::nn::{named_params, Parameterized};
use rand::Rng;

fn verdict(id: u8, title: &str, pass: bool, detail: impl AsRef<str>, elapsed: Duration) {
    let line = format!(
        "[{}] acceptance {id}: {title} ({}; {:.1}s)",
        if pass { "PASS" } else { "FAIL" },
        detail.as_ref(),
        elapsed.as_secs_f64()
    );
    let _ = writeln!(std::io::stderr(), "{line}");
    assert!(pass, "{line}");
}

fn all_zero_under<P: Parameterized>(p: &P, prefix: &str) -> bool {
    named_params(p)
        .into_iter()
        .filter(|(n, _)| n.starts_with(&format!("{prefix}.")))
        .all(|(_, t)| t.as_slice().iter().all(|&v| v == 0.0))
}

fn any_nonzero_under<P: Parameterized>(p: &P, prefix: &str) -> bool {
    !all_zero_under(p, prefix)
}

// ---------------------------------------------------------------- 1

#[test]
fn acceptance_1_gradient_integrity() {
    let started = Instant::now();
    const V: usize = 20;
    const F: usize = 12;
    const C: usize = 3;
    let cfg = ModelConfig {
        d_model: 8,
        n_layers: 1,
        n_heads: 2,
        d_ff: 16,
        max_len: 6,
        vocab_size: V,
        combine_hidden: None,
        average_of: AverageOf::Logits,
    };
    let mut rng = seeded_rng(2024);
    let batch: Vec<Example<EncodedInput>> = (0..4)
        .map(|i| {
            let real = 2 + i;
            let ids = (0..cfg.max_len)
                .map(|t| {
                    if t == 0 {
                        2
                    } else if t < real {
                        rng.random_range(3..V as u32)
                    } else {
                        0
                    }
                })
                .collect();
            let pad_mask = (0..cfg.max_len).map(|t| t >= real).collect();
            let features = (0..F).map(|_| rng.random_range(-1.0..1.0)).collect();
            Example::new(
                EncodedInput {
                    tokens: TokenSequence { ids, pad_mask },
                    features,
                },
                i % C,
            )
        })
        .collect();

    let mut worst = 0.0f64;
    let mut worst_where = String::new();
    let mut n_checked = 0;
    for (k, combine) in [Combine::weighted_concat(2, C, None, &mut rng), Combine::average()]
        .into_iter()
        .enumerate()
    {
        let mut init = seeded_rng(300 + k as u64);
        let text = TextBlock::init(&cfg, V, C, &mut init).unwrap();
        let meta = MetaBlock::init(F, C, &mut init);
        let net = BlockNetwork::new(text, meta, combine).unwrap();
        let refs: Vec<_> = batch.iter().collect();
        let (_, grads) = batch_gradient(&net, &refs).unwrap();
        let report = check_gradients(&net, &grads, 1e-4, |m| {
            batch.iter().map(|ex| example_loss(m, ex).unwrap()).sum::<f64>() / batch.len() as f64
        });
        n_checked += report.n_checked;
        if report.max_rel_error > worst {
            worst = report.max_rel_error;
            worst_where = format!("{}[{}]", report.worst_param, report.worst_index);
        }
    }
    let elapsed = started.elapsed();
    verdict(
        1,
        "gradient integrity",
        worst < 1e-4 && elapsed < Duration::from_secs(30),
        format!("max rel error {worst:.2e} at {worst_where} over {n_checked} parameters; limit 1e-4, 30s"),
        elapsed,
    );
}

// ---------------------------------------------------------------- 2

fn random_message(rng: &mut impl Rng, i: usize) -> Message {
    let mut m = Message::new(format!("m{i}"), "body", "x");
    if rng.random_bool(0.85) {
        let user = rng.random_range(0..400);
        let org = rng.random_range(0..200);
        m.sender = Some(format!("u{user}@org{org}.example"));
    }
    if rng.random_bool(0.2) {
        m.affiliation = Some(format!("dept{}", rng.random_range(0..30)));
    }
    if rng.random_bool(0.8) {
        let secs = rng.random_range(0..(365 * 86_400i64));
        m.timestamp = Some(Utc.timestamp_opt(1_262_304_000 + secs, 0).unwrap());
    }
    if rng.random_bool(0.7) {
        let opts = ["email", "web", "mobile", "fax"];
        m.enums
            .insert("channel".into(), opts[rng.random_range(0..opts.len())].into());
    }
    if rng.random_bool(0.6) {
        m.numerics.insert("size".into(), rng.random_range(0.0..100.0));
    }
    m
}

fn top_k(counts: &BTreeMap<String, usize>, k: usize) -> Vec<String> {
    let mut v: Vec<(&String, &usize)> = counts.iter().collect();
    v.sort_by(|a, b| b.1.cmp(a.1).then(a.0.cmp(b.0)));
    v.into_iter().take(k).map(|(s, _)| s.clone()).collect()
}

#[test]
fn acceptance_2_featurizer_conformance() {
    let started = Instant::now();
    let mut rng = seeded_rng(77);
    let messages: Vec<Message> = (0..1000).map(|i| random_message(&mut rng, i)).collect();
    let ds = Dataset::new(messages.clone(), Provenance::default());
    let model = featurizer::fit(&ds, &FeaturizerConfig::default()).unwrap();
    let layout = model.layout();

    let mut failures: Vec<String> = Vec::new();
    let dims: Vec<usize> = layout.slices.iter().take(6).map(|s| s.range.len()).collect();
    if dims != [120, 120, 1, 7, 1, 50] {
        failures.push(format!("base layout {dims:?}"));
    }
    let base: usize = dims.iter().sum();
    if base != 299 || model.feature_dim() != 299 + 4 + 1 {
        failures.push(format!("dims base {base}, total {}", model.feature_dim()));
    }

    let mut senders = BTreeMap::new();
    let mut affiliations = BTreeMap::new();
    for m in &messages {
        if let Some(s) = &m.sender {
            *senders.entry(s.clone()).or_insert(0) += 1;
        }
        if let Some(a) = affiliation_of(m) {
            *affiliations.entry(a).or_insert(0) += 1;
        }
    }
    let top_s = top_k(&senders, 120);
    let top_a = top_k(&affiliations, 120);
    let slice = |name: &str| layout.get(name).unwrap().clone();

    for m in &messages {
        let v = model.transform(m).values;
        if v.len() != model.feature_dim() || v.iter().any(|x| !x.is_finite()) {
            failures.push(format!("{}: bad vector", m.id));
            continue;
        }
        for s in &layout.slices {
            let part = &v[s.range.clone()];
            if s.kind == SliceKind::OneHot {
                let hot = part.iter().filter(|&&x| x == 1.0).count();
                if part.iter().any(|&x| x != 0.0 && x != 1.0) || hot > 1 {
                    failures.push(format!("{}: slice {} not one-hot", m.id, s.name));
                }
            }
        }
        let expect_hot = |name: &str, idx: Option<usize>, failures: &mut Vec<String>| {
            let part = &v[slice(name).range];
            let got = part.iter().position(|&x| x == 1.0);
            if got != idx {
                failures.push(format!("{}: {name} hot at {got:?}, expected {idx:?}", m.id));
            }
        };
        let s_idx = m.sender.as_ref().and_then(|s| top_s.iter().position(|t| t == s));
        expect_hot("senders", s_idx, &mut failures);
        let a_idx = affiliation_of(m).and_then(|a| top_a.iter().position(|t| *t == a));
        expect_hot("affiliations", a_idx, &mut failures);

        let freq = v[slice("sender_freq").range.start];
        let want_freq = m.sender.as_ref().map_or(0.0, |s| senders[s] as f64 / 1000.0);
        if (freq - want_freq).abs() > 1e-12 {
            failures.push(format!("{}: sender_freq {freq} vs {want_freq}", m.id));
        }

        let ts = m.timestamp;
        expect_hot(
            "day",
            ts.map(|t| t.weekday().num_days_from_monday() as usize),
            &mut failures,
        );
        expect_hot(
            "rush",
            ts.map(|t| (t.num_seconds_from_midnight() as usize) / 1728),
            &mut failures,
        );
        let wh = v[slice("working_hours").range.start];
        let want_wh = ts.is_some_and(|t| t.weekday().num_days_from_monday() < 5 && (9..18).contains(&t.hour()));
        if wh != f64::from(u8::from(want_wh)) {
            failures.push(format!("{}: working_hours {wh}", m.id));
        }
        let ch = slice("enum:channel");
        let opts = ["email", "fax", "mobile", "web"];
        expect_hot(
            "enum:channel",
            m.enums
                .get("channel")
                .map(|c| opts.iter().position(|o| o == c).unwrap()),
            &mut failures,
        );
        debug_assert_eq!(ch.range.len(), 4);
        let num = v[slice("numeric:size").range.start];
        if !m.numerics.contains_key("size") && num != 0.0 {
            failures.push(format!("{}: absent numeric gives {num}", m.id));
        }
    }
    let elapsed = started.elapsed();
    verdict(
        2,
        "featurizer conformance",
        failures.is_empty() && elapsed < Duration::from_secs(5),
        format!(
            "layout 120|120|1|7|1|50 = 299, 1000 messages, {} violations{}; limit 5s",
            failures.len(),
            failures.first().map(|f| format!(", first: {f}")).unwrap_or_default()
        ),
        elapsed,
    );
}

// ---------------------------------------------------------------- 3

#[test]
fn acceptance_3_joint_training_distinction() {
    let started = Instant::now();
    let ds = generate_synthetic(&SynthConfig::new(7, 500, 4, SynthMode::MetadataOnly)).unwrap();
    assert_eq!(ds.len(), 2000);
    let exp = Experiment::new("metadata_only", &ds, ExperimentConfig::default(), 7).unwrap();
    let registry = MethodRegistry::standard();
    let (m5, _) = run_method(&exp, registry.get("5").unwrap()).unwrap();
    let (m10, _) = run_method(&exp, registry.get("10").unwrap()).unwrap();
    let elapsed = started.elapsed();
    verdict(
        3,
        "joint-training distinction",
        m10.accuracy >= 0.90 && m5.accuracy <= 0.60 && elapsed < Duration::from_secs(600),
        format!(
            "method 10 = {:.4} (need >= 0.90), method 5 = {:.4} (need <= 0.60); limit 600s",
            m10.accuracy, m5.accuracy
        ),
        elapsed,
    );
}

// ---------------------------------------------------------------- 4

#[test]
fn acceptance_4_conflict_reproduction() {
    let started = Instant::now();
    let registry = MethodRegistry::standard();
    let mut details = Vec::new();
    let mut wins = 0;
    for seed in [1u64, 2, 3] {
        let ds = generate_synthetic(&SynthConfig::new(seed, 500, 4, SynthMode::Conflict)).unwrap();
        let exp = Experiment::new("conflict", &ds, ExperimentConfig::default(), seed).unwrap();
        let acc = |key: &str| run_method(&exp, registry.get(key).unwrap()).unwrap().0.accuracy;
        let (a3, a7, a10) = (acc("3"), acc("7"), acc("10"));
        if a10 >= a3.max(a7) {
            wins += 1;
        }
        details.push(format!("seed {seed}: m10 {a10:.4} vs m3 {a3:.4}, m7 {a7:.4}"));
    }
    verdict(
        4,
        "conflict reproduction",
        wins == 3,
        format!("{wins}/3 seeds with m10 >= max(m3, m7); {}", details.join("; ")),
        started.elapsed(),
    );
}

// ---------------------------------------------------------------- 5

/// Recursive tree using exhaustive (feature, midpoint) enumeration at every
/// node; returns the predicted class of each training sample.
fn oracle_tree(x: &[Vec<f64>], y: &[usize], idx: &[usize], n_classes: usize, out: &mut [usize]) {
    let mut counts = vec![0usize; n_classes];
    idx.iter().for_each(|&i| counts[y[i]] += 1);
    let majority = (0..n_classes).fold(0, |b, c| if counts[c] > counts[b] { c } else { b });
    let leaf = |out: &mut [usize]| idx.iter().for_each(|&i| out[i] = majority);
    if counts.iter().filter(|&&c| c > 0).count() <= 1 {
        return leaf(out);
    }
    let n = idx.len() as f64;
    let parent = gini(&counts);
    let mut best: Option<(usize, f64, f64)> = None;
    for f in 0..x[0].len() {
        let mut vals: Vec<f64> = idx.iter().map(|&i| x[i][f]).collect();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let mut l = vec![0usize; n_classes];
            let mut r = vec![0usize; n_classes];
            for &i in idx {
                if x[i][f] <= t {
                    l[y[i]] += 1
                } else {
                    r[y[i]] += 1
                }
            }
            let nl: usize = l.iter().sum();
            let nr: usize = r.iter().sum();
            let dec = parent - (nl as f64 * gini(&l) + nr as f64 * gini(&r)) / n;
            if best.is_none_or(|b| dec > b.2 + 1e-12) {
                best = Some((f, t, dec));
            }
        }
    }
    let Some((f, t, _)) = best else {
        return leaf(out);
    };
    let (left, right): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| x[i][f] <= t);
    oracle_tree(x, y, &left, n_classes, out);
    oracle_tree(x, y, &right, n_classes, out);
}

#[test]
fn acceptance_5_forest_oracle() {
    let started = Instant::now();
    let gini_ok = gini(&[7, 0]) == 0.0 && gini(&[3, 3]) == 0.5 && gini(&[1, 2]) == 4.0 / 9.0;
    let mut mismatches = 0;
    let instances = 20;
    for inst in 0..instances {
        let mut rng = seeded_rng(500 + inst);
        let d = rng.random_range(2..6);
        let n_classes = rng.random_range(2..5);
        let levels = rng.random_range(3..12);
        let x: Vec<Vec<f64>> = (0..100)
            .map(|_| (0..d).map(|_| rng.random_range(0..levels) as f64 / 4.0).collect())
            .collect();
        let y: Vec<usize> = (0..100).map(|_| rng.random_range(0..n_classes)).collect();
        let params = ForestParams {
            n_trees: 1,
            bootstrap: false,
            max_features: Some(d),
            ..Default::default()
        };
        let tree = DecisionTree::fit(&x, &y, n_classes, &params, inst).unwrap();
        let mut want = vec![0; 100];
        oracle_tree(&x, &y, &(0..100).collect::<Vec<_>>(), n_classes, &mut want);
        mismatches += x.iter().zip(&want).filter(|(row, &w)| tree.predict(row) != w).count();
    }
    verdict(
        5,
        "forest oracle",
        gini_ok && mismatches == 0,
        format!("gini 0/0.5/4/9 exact: {gini_ok}; {mismatches} prediction mismatches over {instances} x 100 samples"),
        started.elapsed(),
    );
}

// ---------------------------------------------------------------- 6-8 share a small setup

fn small_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.model = ModelConfig {
        d_model: 16,
        n_layers: 1,
        n_heads: 2,
        d_ff: 32,
        max_len: 20,
        vocab_size: 300,
        ..ModelConfig::default()
    };
    cfg.training.epochs = 3;
    cfg.forest.n_trees = 25;
    cfg
}

fn small_corpus(seed: u64) -> Dataset {
    generate_synthetic(&SynthConfig::new(seed, 60, 4, SynthMode::MetadataOnly)).unwrap()
}

#[test]
fn acceptance_6_grid_integrity_and_determinism() {
    let started = Instant::now();
    let ds = small_corpus(11);
    let registry = MethodRegistry::standard();
    let run = || {
        let exp = Experiment::new("small", &ds, small_config(), 11).unwrap();
        compare_all(&exp, &registry).unwrap()
    };
    let a = run();
    let b = run();
    let ids: Vec<u8> = a.rows.iter().map(|r| r.method.id).collect();
    let grid_ok = a.rows.len() == 10 && a.rows.iter().zip(METHOD_GRID.iter()).all(|(r, m)| r.method == *m);
    let csv_rows = a.to_csv().unwrap().lines().count() - 1;
    let bits = |t: &metablocks::harness::ResultsTable| t.rows.iter().map(|r| r.accuracy.to_bits()).collect::<Vec<_>>();
    let same = bits(&a) == bits(&b);
    verdict(
        6,
        "grid integrity and determinism",
        grid_ok && csv_rows == 10 && same,
        format!("rows {ids:?}, csv rows {csv_rows}, rerun bit-identical: {same}"),
        started.elapsed(),
    );
}

#[test]
fn acceptance_7_frozen_vs_joint_gradients() {
    let started = Instant::now();
    let ds = small_corpus(12);
    let exp = Experiment::new("small", &ds, small_config(), 12).unwrap();
    let registry = MethodRegistry::standard();
    let batch: Vec<_> = exp.train.iter().take(16).collect();

    let fitted7 = registry.get("7").unwrap().fit(&exp).unwrap();
    let TrainedModel::Dense { classifier } = fitted7.model else {
        panic!("method 7 is a dense head")
    };
    let (_, g7) = batch_gradient(&classifier, &batch).unwrap();
    let m7_encoder_zero = all_zero_under(&g7, "encoder");
    let m7_head_live = any_nonzero_under(&g7, "head");
    let encoder_untouched = classifier.encoder == exp.finetuned_text_block().unwrap().0;

    let fitted10 = registry.get("10").unwrap().fit(&exp).unwrap();
    let TrainedModel::Blocks { network } = fitted10.model else {
        panic!("method 10 is a block model")
    };
    let (_, g10) = batch_gradient(&network, &batch).unwrap();
    let m10_text = any_nonzero_under(&g10, "text");
    let m10_meta = any_nonzero_under(&g10, "meta");

    verdict(
        7,
        "frozen-vs-joint gradient contrast",
        m7_encoder_zero && m7_head_live && encoder_untouched && m10_text && m10_meta,
        format!(
            "method 7: encoder grads all zero {m7_encoder_zero}, head nonzero {m7_head_live}, encoder unchanged {encoder_untouched}; \
             method 10: text nonzero {m10_text}, meta nonzero {m10_meta}"
        ),
        started.elapsed(),
    );
}

#[test]
fn acceptance_8_checkpoint_round_trip() {
    let started = Instant::now();
    let ds = small_corpus(13);
    let cfg = small_config();
    let exp = Experiment::new("small", &ds, cfg.clone(), 13).unwrap();
    let registry = MethodRegistry::standard();
    let dir = tempfile::tempdir().unwrap();
    let mut mismatches = 0;
    let mut checked = Vec::new();
    for key in ["10", "2"] {
        let method = registry.get(key).unwrap();
        let (_, model) = run_method(&exp, method).unwrap();
        let ck = Checkpoint::new(
            method.spec(),
            exp.classes.clone(),
            exp.encoder.clone(),
            cfg.clone(),
            13,
            model,
        );
        let path = dir.path().join(format!("m{key}.json"));
        ck.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        for m in ds.messages.iter().take(100) {
            let (p, q) = (ck.predict(m).unwrap(), back.predict(m).unwrap());
            let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            if p.label != q.label || bits(&p.probs) != bits(&q.probs) {
                mismatches += 1;
            }
        }
        checked.push(format!("method {key}"));
    }
    verdict(
        8,
        "serialization round-trip",
        mismatches == 0,
        format!(
            "{} x 100 messages, {mismatches} non-identical predictions",
            checked.join(" and ")
        ),
        started.elapsed(),
    );
}
