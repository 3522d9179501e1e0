//! Finite-difference gradient checks over every network in the system, on
//! small randomly drawn shapes.

use acrostic_core::corpus::{Poem, SourceTag, Vocabulary};
use acrostic_core::embed::EmbeddingTable;
use acrostic_core::net::{
    grad_check, softmax_masked, Direction, GradCheckConfig, GradCheckReport, Linear, LstmStack,
    ParameterStore,
};
use acrostic_core::poemlm::{LmConfig, PoemLm};
use acrostic_core::rhymer::{RhymeExample, RhymerConfig, RhymerModel};
use acrostic_core::seed::{rng_for, Rng};
use acrostic_core::topics::{TopicClassifier, TopicConfig, TopicLabels};
use rand::Rng as _;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub seed: u64,
    pub checked: usize,
    pub max_rel_error: f64,
    pub passed: bool,
}

impl CheckResult {
    fn new(name: &'static str, seed: u64, r: &GradCheckReport) -> Self {
        CheckResult {
            name,
            seed,
            checked: r.checked,
            max_rel_error: r.max_rel_error,
            passed: r.passed(),
        }
    }
}

fn vecs(rng: &mut Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect()
}

fn lstm(seed: u64, direction: Direction) -> GradCheckReport {
    let mut rng = rng_for(seed, "gc-lstm");
    let (input, stat, hidden) = (rng.gen_range(1..=4), rng.gen_range(0..=3), rng.gen_range(1..=8));
    let len = rng.gen_range(1..=5);
    let mut store = ParameterStore::new(seed);
    let stack = LstmStack::new(&mut store, "gc", input, stat, hidden, 2, direction, 0.0);
    let xs = vecs(&mut rng, len, input);
    let s = vecs(&mut rng, 1, stat).remove(0);
    let st = (stat > 0).then_some(s.as_slice());
    let w = vecs(&mut rng, len, stack.output_dim());
    let loss = |store: &ParameterStore| {
        let tr = stack.forward(store, &xs, st, None).expect("shapes");
        tr.outputs
            .iter()
            .zip(&w)
            .map(|(h, w)| h.iter().zip(w).map(|(a, b)| a * b).sum::<f64>())
            .sum()
    };
    let mut g = store.zero_gradients();
    let tr = stack.forward(&store, &xs, st, None).expect("shapes");
    stack.backward(&store, &mut g, &tr, &w);
    grad_check(&mut store, loss, &g, &GradCheckConfig::default())
}

fn masked_ce(seed: u64) -> GradCheckReport {
    let mut rng = rng_for(seed, "gc-softmax");
    let (input, classes) = (rng.gen_range(1..=6), rng.gen_range(2..=8));
    let mut store = ParameterStore::new(seed);
    let lin = Linear::new(&mut store, "gc", input, classes);
    store.get_mut(lin.weight()).iter_mut().for_each(|w| *w = rng.gen_range(-1.0..1.0));
    let x = vecs(&mut rng, 1, input).remove(0);
    let target = rng.gen_range(0..classes);
    let mask: Vec<bool> = (0..classes).map(|c| c == target || rng.gen_bool(0.6)).collect();
    let loss = |s: &ParameterStore| -> f64 {
        let p = softmax_masked(&lin.forward(s, &x), &mask).expect("target is unmasked");
        -p[target].ln()
    };
    let p = softmax_masked(&lin.forward(&store, &x), &mask).expect("target is unmasked");
    let mut d = p.clone();
    d[target] -= 1.0;
    let mut g = store.zero_gradients();
    lin.backward(&store, &mut g, &x, &d);
    grad_check(&mut store, loss, &g, &GradCheckConfig::default())
}

fn word(rng: &mut Rng, max: usize) -> String {
    let n = rng.gen_range(1..=max);
    (0..n).map(|_| rng.gen_range(b'a'..=b'z') as char).collect()
}

fn rhymer(seed: u64) -> GradCheckReport {
    let mut rng = rng_for(seed, "gc-rhymer");
    let m = RhymerModel::new(RhymerConfig {
        char_dim: rng.gen_range(2..=4),
        word_hidden: rng.gen_range(1..=8),
        poem_hidden: rng.gen_range(1..=8),
        decoder_hidden: rng.gen_range(1..=8),
        max_context_chars: Some(5),
        max_word_len: 5,
        seed,
    });
    let ex = m.encode_example(&RhymeExample {
        a: word(&mut rng, 5),
        b: word(&mut rng, 5),
        c: word(&mut rng, 4),
    });
    let mut g = m.store.zero_gradients();
    m.loss_and_grad(&ex, &mut g).expect("valid example");
    let mut store = m.store.clone();
    let mut probe = m.clone();
    let loss = |s: &ParameterStore| {
        probe.store = s.clone();
        probe.loss(&ex).expect("valid example")
    };
    grad_check(&mut store, loss, &g, &GradCheckConfig::default())
}

fn fixture(rng: &mut Rng, dim: usize) -> (Vocabulary, EmbeddingTable, Vec<String>) {
    let words: Vec<String> = (0..6).map(|i| format!("{}{}", word(rng, 3), i)).collect();
    let vocab = Vocabulary::from_tokens(words.clone());
    let mut t = EmbeddingTable::new(dim);
    for w in &words {
        t.insert(w, (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()).expect("dim");
    }
    (vocab, t, words)
}

fn topics(seed: u64) -> GradCheckReport {
    let mut rng = rng_for(seed, "gc-topics");
    let dim = rng.gen_range(2..=4);
    let (vocab, table, words) = fixture(&mut rng, dim);
    let labels = TopicLabels::from_names(["a".to_string(), "b".to_string(), "c".to_string()]);
    let cfg = TopicConfig {
        embed_dim: dim,
        hidden: rng.gen_range(1..=8),
        seed,
    };
    let m = TopicClassifier::new(cfg, labels, vocab, &table).expect("dims match");
    let line: Vec<String> = (0..3).map(|_| words[rng.gen_range(0..words.len())].clone()).collect();
    let poem = Poem::new(vec![line], Some("b".into()), SourceTag::KnownTopic);
    let ex = m.example(&poem).expect("encodes").expect("labelled");
    let mut g = m.store.zero_gradients();
    m.loss_and_grad(&ex, &mut g).expect("valid");
    let mut store = m.store.clone();
    let mut probe = m.clone();
    let loss = |s: &ParameterStore| {
        probe.store = s.clone();
        probe.loss(&ex).expect("valid")
    };
    grad_check(&mut store, loss, &g, &GradCheckConfig::default())
}

fn lm(seed: u64) -> GradCheckReport {
    let mut rng = rng_for(seed, "gc-lm");
    let dim = rng.gen_range(2..=4);
    let (vocab, table, words) = fixture(&mut rng, dim);
    let cfg = LmConfig {
        embed_dim: dim,
        topic_channel: rng.gen_bool(0.5),
        hidden: rng.gen_range(1..=8),
        n_layers: 2,
        dropout: 0.0,
        seed,
    };
    let m = PoemLm::new(cfg, vocab, &table).expect("dims match");
    let line: Vec<String> = (0..3).map(|_| words[rng.gen_range(0..words.len())].clone()).collect();
    let poem = Poem::new(vec![line], Some(words[0].clone()), SourceTag::KnownTopic);
    let ex = m.example(&poem, &table).expect("encodes");
    let mut g = m.store.zero_gradients();
    m.loss_and_grad(&ex, &mut g, None).expect("valid");
    let mut store = m.store.clone();
    let mut probe = m.clone();
    let loss = |s: &ParameterStore| {
        probe.store = s.clone();
        probe.loss(&ex, None).expect("valid")
    };
    grad_check(&mut store, loss, &g, &GradCheckConfig::default())
}

/// Runs every check for each seed.
pub fn gradcheck_suite(seeds: impl IntoIterator<Item = u64>) -> Vec<CheckResult> {
    let mut out = Vec::new();
    for seed in seeds {
        out.push(CheckResult::new("lstm-forward", seed, &lstm(seed, Direction::Forward)));
        out.push(CheckResult::new("lstm-bidirectional", seed, &lstm(seed, Direction::Bidirectional)));
        out.push(CheckResult::new("masked-softmax-ce", seed, &masked_ce(seed)));
        out.push(CheckResult::new("rhymer", seed, &rhymer(seed)));
        out.push(CheckResult::new("topics", seed, &topics(seed)));
        out.push(CheckResult::new("lm", seed, &lm(seed)));
    }
    out
}
