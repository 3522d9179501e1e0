//! Character-level rhyming-word model.
//!
//! The word to rhyme with is encoded by a bidirectional char LSTM (final
//! forward and backward states concatenated), the poem so far by a
//! unidirectional char LSTM (final state). A char LSTM decoder conditioned on
//! both encodings emits the rhyming word, decoded with beam search.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::corpus::{tokenize, RawDocument, TokenId};
use crate::net::{
    fit, log_softmax, Direction, Gradients, Linear, LstmStack, Objective, ParamId, ParameterStore, StackState,
    TrainConfig, TrainLog, Trainable,
};
use crate::seed::{derive_seed, rng_for, Rng};
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Character set
// ---------------------------------------------------------------------------

pub const CHAR_BOS: usize = 0;
pub const CHAR_EOS: usize = 1;
pub const CHAR_UNK: usize = 2;
const PLAIN_CHARS: &str = " \nabcdefghijklmnopqrstuvwxyz0123456789.,;:!?'\"-()";
const FIRST_PLAIN: usize = 3;

pub fn n_chars() -> usize {
    FIRST_PLAIN + PLAIN_CHARS.chars().count()
}

pub fn char_id(c: char) -> usize {
    PLAIN_CHARS
        .chars()
        .position(|p| p == c)
        .map_or(CHAR_UNK, |i| i + FIRST_PLAIN)
}

pub fn id_char(id: usize) -> Option<char> {
    id.checked_sub(FIRST_PLAIN).and_then(|i| PLAIN_CHARS.chars().nth(i))
}

/// Characters a generated rhyme word may contain.
fn is_word_char_id(id: usize) -> bool {
    id_char(id).is_some_and(|c| c.is_ascii_lowercase() || c == '\'' || c == '-')
}

pub fn encode_chars(s: &str) -> Vec<usize> {
    s.chars().flat_map(char::to_lowercase).map(char_id).collect()
}

// ---------------------------------------------------------------------------
// Rhyme pairs
// ---------------------------------------------------------------------------

pub const SONNET_SCHEME: &str = "ABABCDCDEFEFGG";

/// `(partner, slot)` pairs, 0-indexed: every repeated scheme letter is paired
/// with its previous occurrence.
pub fn rhyme_pairs(scheme: &str) -> Vec<(usize, usize)> {
    let letters: Vec<char> = scheme.chars().collect();
    let mut pairs = Vec::new();
    for (j, &c) in letters.iter().enumerate() {
        if let Some(i) = letters[..j].iter().rposition(|&p| p == c) {
            pairs.push((i, j));
        }
    }
    pairs
}

/// A token that can carry a rhyme: starts with a letter and is not a
/// split-off clitic.
pub fn is_word_token(t: &str) -> bool {
    t.chars().next().is_some_and(char::is_alphabetic) && t != "n't"
}

/// Index of the last word token of a line, falling back to the last token.
pub fn last_word_index(line: &[String]) -> Option<usize> {
    line.iter()
        .rposition(|t| is_word_token(t))
        .or_else(|| line.len().checked_sub(1))
}

/// The poem text before token `word_idx` of line `line_idx`: earlier lines
/// joined with newlines, then the line's preceding tokens and a space.
pub fn poem_prefix(lines: &[Vec<String>], line_idx: usize, word_idx: usize) -> String {
    let mut b = String::new();
    for line in &lines[..line_idx] {
        b.push_str(&line.join(" "));
        b.push('\n');
    }
    let head = &lines[line_idx][..word_idx];
    if !head.is_empty() {
        b.push_str(&head.join(" "));
        b.push(' ');
    }
    b
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RhymeExample {
    pub a: String,
    pub b: String,
    pub c: String,
}

/// Rhyme examples from 14-line sonnets under the Shakespearean scheme. Other
/// documents are skipped with a warning.
pub fn extract_rhyme_pairs(sonnets: &[RawDocument]) -> Vec<RhymeExample> {
    let pairs = rhyme_pairs(SONNET_SCHEME);
    let mut out = Vec::new();
    for (n, doc) in sonnets.iter().enumerate() {
        let lines: Vec<Vec<String>> = doc
            .lines
            .iter()
            .map(|l| tokenize(l))
            .filter(|l| !l.is_empty())
            .collect();
        if lines.len() != SONNET_SCHEME.len() {
            log::warn!("sonnet {n}: {} lines instead of 14, skipped", lines.len());
            continue;
        }
        for &(i, j) in &pairs {
            let (Some(ai), Some(cj)) = (last_word_index(&lines[i]), last_word_index(&lines[j])) else {
                continue;
            };
            out.push(RhymeExample {
                a: lines[i][ai].clone(),
                b: poem_prefix(&lines, j, cj),
                c: lines[j][cj].clone(),
            });
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Beam search
// ---------------------------------------------------------------------------

/// A left-to-right character model for beam search.
pub trait CharScorer {
    type State: Clone;

    /// State after the start symbol.
    fn start(&self) -> Self::State;
    /// Log-probabilities of the next symbol; `-inf` marks symbols that may
    /// not be emitted.
    fn log_probs(&self, state: &Self::State) -> Vec<f64>;
    fn advance(&self, state: &Self::State, symbol: usize) -> Self::State;
    fn eos(&self) -> usize;
}

fn rank(a: &(Vec<usize>, f64), b: &(Vec<usize>, f64)) -> Ordering {
    match b.1.total_cmp(&a.1) {
        Ordering::Equal => a.0.cmp(&b.0),
        o => o,
    }
}

/// Beam search returning up to `width` non-empty completed strings, best
/// first, scored by summed log-probability including the end symbol.
///
/// Live hypotheses and completed ones are kept apart: each step every live
/// hypothesis is completed with the end symbol, and the best `width`
/// non-end extensions stay live. Strings reaching `max_len` are completed.
/// Search stops early once no live hypothesis can beat the `width`-th
/// completion.
pub fn beam_search<S: CharScorer>(scorer: &S, width: usize, max_len: usize) -> Result<Vec<(Vec<usize>, f64)>> {
    let eos = scorer.eos();
    let width = width.max(1);
    let mut live: Vec<(Vec<usize>, f64, S::State)> = vec![(Vec::new(), 0.0, scorer.start())];
    let mut finished: Vec<(Vec<usize>, f64)> = Vec::new();
    for _ in 0..max_len {
        let mut cand: Vec<(Vec<usize>, f64, usize)> = Vec::new();
        let mut dists = Vec::with_capacity(live.len());
        for (k, (seq, score, state)) in live.iter().enumerate() {
            let lp = scorer.log_probs(state);
            if !seq.is_empty() && lp[eos].is_finite() {
                finished.push((seq.clone(), score + lp[eos]));
            }
            for (c, &l) in lp.iter().enumerate() {
                if c != eos && l.is_finite() {
                    let mut s = seq.clone();
                    s.push(c);
                    cand.push((s, score + l, k));
                }
            }
            dists.push(lp);
        }
        cand.sort_by(|a, b| match b.1.total_cmp(&a.1) {
            Ordering::Equal => a.0.cmp(&b.0),
            o => o,
        });
        cand.truncate(width);
        live = cand
            .into_iter()
            .map(|(seq, score, k)| {
                let st = scorer.advance(&live[k].2, *seq.last().expect("extension is non-empty"));
                (seq, score, st)
            })
            .collect();
        finished.sort_by(rank);
        finished.truncate(width);
        let bound = live.iter().map(|l| l.1).fold(f64::NEG_INFINITY, f64::max);
        if live.is_empty() || (finished.len() == width && bound < finished[width - 1].1) {
            live.clear();
            break;
        }
    }
    for (seq, score, state) in &live {
        let lp = scorer.log_probs(state);
        if lp[eos].is_finite() {
            finished.push((seq.clone(), score + lp[eos]));
        }
    }
    finished.sort_by(rank);
    finished.truncate(width);
    if finished.is_empty() {
        return Err(Error::DegenerateBeams);
    }
    Ok(finished)
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhymerConfig {
    pub char_dim: usize,
    pub word_hidden: usize,
    pub poem_hidden: usize,
    pub decoder_hidden: usize,
    /// Only the last this-many characters of the poem prefix are encoded.
    pub max_context_chars: Option<usize>,
    pub max_word_len: usize,
    pub seed: u64,
}

impl RhymerConfig {
    pub fn paper_scale() -> Self {
        RhymerConfig {
            char_dim: 32,
            word_hidden: 256,
            poem_hidden: 512,
            decoder_hidden: 256,
            max_context_chars: None,
            max_word_len: 20,
            seed: 0,
        }
    }

    pub fn word_encoding_dim(&self) -> usize {
        2 * self.word_hidden
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RhymerModel {
    pub config: RhymerConfig,
    pub store: ParameterStore,
    char_emb: ParamId,
    word_enc: LstmStack,
    poem_enc: LstmStack,
    decoder: LstmStack,
    out: Linear,
}

/// Encoded example ready for the network.
#[derive(Debug, Clone, PartialEq)]
pub struct CharExample {
    a: Vec<usize>,
    b: Vec<usize>,
    c: Vec<usize>,
}

struct Encodings {
    context: Vec<f64>,
    word_trace: crate::net::StackTrace,
    poem_trace: Option<crate::net::StackTrace>,
}

impl RhymerModel {
    pub fn new(config: RhymerConfig) -> Self {
        let mut store = ParameterStore::new(derive_seed(config.seed, "rhymer-init"));
        let mut rng = rng_for(config.seed, "rhymer-char-embeddings");
        let nc = n_chars();
        let emb: Vec<f64> = (0..nc * config.char_dim).map(|_| rng.gen_range(-0.08..0.08)).collect();
        let char_emb = store.add_fixed("rhymer.char_emb", &[nc, config.char_dim], emb);
        let word_enc = LstmStack::new(
            &mut store,
            "rhymer.word",
            config.char_dim,
            0,
            config.word_hidden,
            1,
            Direction::Bidirectional,
            0.0,
        );
        let poem_enc = LstmStack::new(
            &mut store,
            "rhymer.poem",
            config.char_dim,
            0,
            config.poem_hidden,
            1,
            Direction::Forward,
            0.0,
        );
        let decoder = LstmStack::new(
            &mut store,
            "rhymer.dec",
            config.char_dim,
            config.word_encoding_dim() + config.poem_hidden,
            config.decoder_hidden,
            1,
            Direction::Forward,
            0.0,
        );
        let out = Linear::new(&mut store, "rhymer.out", config.decoder_hidden, nc);
        RhymerModel {
            config,
            store,
            char_emb,
            word_enc,
            poem_enc,
            decoder,
            out,
        }
    }

    pub fn word_encoder_output_dim(&self) -> usize {
        self.word_enc.output_dim()
    }

    fn emb(&self, id: usize) -> Vec<f64> {
        let d = self.config.char_dim;
        self.store.get(self.char_emb)[id * d..(id + 1) * d].to_vec()
    }

    pub fn encode_example(&self, ex: &RhymeExample) -> CharExample {
        CharExample {
            a: encode_chars(&ex.a),
            b: self.context_chars(&ex.b),
            c: encode_chars(&ex.c),
        }
    }

    fn context_chars(&self, b: &str) -> Vec<usize> {
        let mut ids = encode_chars(b);
        if let Some(cap) = self.config.max_context_chars {
            if ids.len() > cap {
                ids.drain(..ids.len() - cap);
            }
        }
        ids
    }

    fn encode(&self, a: &[usize], b: &[usize]) -> Result<Encodings> {
        if a.is_empty() {
            return Err(Error::Config("rhyme source word is empty".into()));
        }
        let hw = self.config.word_hidden;
        let xa: Vec<Vec<f64>> = a.iter().map(|&c| self.emb(c)).collect();
        let word_trace = self.word_enc.forward(&self.store, &xa, None, None)?;
        let last = word_trace.outputs.len() - 1;
        let mut context = Vec::with_capacity(2 * hw + self.config.poem_hidden);
        context.extend_from_slice(&word_trace.outputs[last][..hw]);
        context.extend_from_slice(&word_trace.outputs[0][hw..]);
        let poem_trace = if b.is_empty() {
            context.extend(core::iter::repeat_n(0.0, self.config.poem_hidden));
            None
        } else {
            let xb: Vec<Vec<f64>> = b.iter().map(|&c| self.emb(c)).collect();
            let tr = self.poem_enc.forward(&self.store, &xb, None, None)?;
            context.extend_from_slice(tr.outputs.last().expect("non-empty"));
            Some(tr)
        };
        Ok(Encodings {
            context,
            word_trace,
            poem_trace,
        })
    }

    fn example_nll(&self, ex: &CharExample, grads: Option<&mut Gradients>) -> Result<(f64, usize)> {
        let enc = self.encode(&ex.a, &ex.b)?;
        let mut inputs = vec![self.emb(CHAR_BOS)];
        inputs.extend(ex.c.iter().map(|&c| self.emb(c)));
        let mut targets = ex.c.clone();
        targets.push(CHAR_EOS);
        let trace = self.decoder.forward(&self.store, &inputs, Some(&enc.context), None)?;
        let mut nll = 0.0;
        let mut d_out = Vec::new();
        let mut grads = grads;
        for (h, &t) in trace.outputs.iter().zip(&targets) {
            let logp = log_softmax(&self.out.forward(&self.store, h));
            nll -= logp[t];
            if let Some(g) = grads.as_deref_mut() {
                let mut d: Vec<f64> = logp.iter().map(|&l| libm::exp(l)).collect();
                d[t] -= 1.0;
                d_out.push(self.out.backward(&self.store, g, h, &d));
            }
        }
        if let Some(g) = grads {
            let (_, d_ctx) = self.decoder.backward(&self.store, g, &trace, &d_out);
            let d_ctx = d_ctx.expect("decoder has a static input");
            let hw = self.config.word_hidden;
            let n = ex.a.len();
            let mut dw = vec![vec![0.0; 2 * hw]; n];
            for k in 0..hw {
                dw[n - 1][k] += d_ctx[k];
                dw[0][hw + k] += d_ctx[hw + k];
            }
            self.word_enc.backward(&self.store, g, &enc.word_trace, &dw);
            if let Some(tr) = &enc.poem_trace {
                let m = tr.outputs.len();
                let mut dp = vec![vec![0.0; self.config.poem_hidden]; m];
                dp[m - 1].copy_from_slice(&d_ctx[2 * hw..]);
                self.poem_enc.backward(&self.store, g, tr, &dp);
            }
        }
        Ok((nll, targets.len()))
    }

    pub fn loss(&self, ex: &CharExample) -> Result<f64> {
        Ok(self.example_nll(ex, None)?.0)
    }

    pub fn loss_and_grad(&self, ex: &CharExample, grads: &mut Gradients) -> Result<f64> {
        Ok(self.example_nll(ex, Some(grads))?.0)
    }

    /// Mean per-character NLL (targets include the end symbol).
    pub fn mean_char_nll(&self, data: &[CharExample]) -> Result<f64> {
        let (mut s, mut n) = (0.0, 0usize);
        for ex in data {
            let (l, c) = self.example_nll(ex, None)?;
            s += l;
            n += c;
        }
        if n == 0 {
            return Err(Error::EmptyDataset("rhymer evaluation set"));
        }
        Ok(s / n as f64)
    }

    pub fn scorer(&self, a: &str, b: &str) -> Result<RhymerScorer<'_>> {
        let enc = self.encode(&encode_chars(a), &self.context_chars(b))?;
        let start = self.decoder.start(&self.store, Some(&enc.context))?;
        Ok(RhymerScorer { model: self, start })
    }

    /// Up to `width` candidate rhyme words with log scores, best first.
    pub fn rhyme_candidates(&self, a: &str, b: &str, width: usize) -> Result<Vec<(String, f64)>> {
        let scorer = self.scorer(a, b)?;
        let beams = beam_search(&scorer, width, self.config.max_word_len)?;
        Ok(beams
            .into_iter()
            .map(|(ids, s)| (ids.into_iter().filter_map(id_char).collect(), s))
            .collect())
    }
}

impl Trainable for RhymerModel {
    type Example = CharExample;

    fn store(&self) -> &ParameterStore {
        &self.store
    }

    fn store_mut(&mut self) -> &mut ParameterStore {
        &mut self.store
    }

    fn accumulate(&self, ex: &CharExample, grads: &mut Gradients, _rng: &mut Rng) -> Result<(f64, usize)> {
        self.example_nll(ex, Some(grads))
    }
}

#[derive(Debug, Clone)]
pub struct ScorerState {
    stack: StackState,
    logp: Vec<f64>,
}

/// The decoder of a [`RhymerModel`] primed with one `(a, b)` encoding.
pub struct RhymerScorer<'m> {
    model: &'m RhymerModel,
    start: StackState,
}

impl RhymerScorer<'_> {
    fn feed(&self, mut stack: StackState, c: usize) -> ScorerState {
        let m = self.model;
        let h = m
            .decoder
            .step(&m.store, &mut stack, &m.emb(c))
            .expect("decoder dimensions are fixed at construction");
        let mut logp = log_softmax(&m.out.forward(&m.store, &h));
        for (id, l) in logp.iter_mut().enumerate() {
            if id != CHAR_EOS && !is_word_char_id(id) {
                *l = f64::NEG_INFINITY;
            }
        }
        ScorerState { stack, logp }
    }
}

impl CharScorer for RhymerScorer<'_> {
    type State = ScorerState;

    fn start(&self) -> ScorerState {
        self.feed(self.start.clone(), CHAR_BOS)
    }

    fn log_probs(&self, state: &ScorerState) -> Vec<f64> {
        state.logp.clone()
    }

    fn advance(&self, state: &ScorerState, symbol: usize) -> ScorerState {
        self.feed(state.stack.clone(), symbol)
    }

    fn eos(&self) -> usize {
        CHAR_EOS
    }
}

/// Trains a rhymer on extracted examples; early stopping on dev per-char NLL.
pub fn train_rhymer(
    config: RhymerConfig,
    train: &[RhymeExample],
    dev: &[RhymeExample],
    hyper: &TrainConfig,
    observer: &mut dyn FnMut(&crate::net::EpochRecord),
) -> Result<(RhymerModel, TrainLog)> {
    if train.is_empty() {
        return Err(Error::MissingCorpus("sonnet rhyme pairs"));
    }
    let mut model = RhymerModel::new(config);
    let tr: Vec<CharExample> = train.iter().map(|e| model.encode_example(e)).collect();
    let dv: Vec<CharExample> = if dev.is_empty() {
        tr.clone()
    } else {
        dev.iter().map(|e| model.encode_example(e)).collect()
    };
    let log = fit(
        &mut model,
        &tr,
        hyper,
        Objective::Minimize,
        |m: &RhymerModel| m.mean_char_nll(&dv),
        observer,
    )?;
    Ok((model, log))
}

/// Picks the candidate with the highest LM score. `lm_score` returns `None`
/// for candidates outside the LM vocabulary. Ties go to the higher rhymer
/// score. If no candidate is scorable, the rhymer's best candidate wins.
pub fn choose_rhyme<F>(candidates: &[(String, f64)], mut lm_score: F) -> Result<String>
where
    F: FnMut(&str) -> Option<f64>,
{
    if candidates.is_empty() {
        return Err(Error::DegenerateBeams);
    }
    let mut best: Option<(usize, f64)> = None;
    for (i, (w, rs)) in candidates.iter().enumerate() {
        let Some(s) = lm_score(w) else { continue };
        let better = match best {
            None => true,
            Some((j, bs)) => s > bs || (s == bs && *rs > candidates[j].1),
        };
        if better {
            best = Some((i, s));
        }
    }
    match best {
        Some((i, _)) => Ok(candidates[i].0.clone()),
        None => {
            let top = candidates
                .iter()
                .max_by(|a, b| a.1.total_cmp(&b.1).then_with(|| b.0.cmp(&a.0)))
                .expect("non-empty");
            log::warn!("no rhyme candidate is in the LM vocabulary; using rhymer top candidate {:?}", top.0);
            Ok(top.0.clone())
        }
    }
}

/// LM token id for a rhyme word, if in vocabulary.
pub fn lm_token(vocab: &crate::corpus::Vocabulary, word: &str) -> Option<TokenId> {
    vocab.id(word)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::SourceTag;
    use crate::net::{grad_check, GradCheckConfig};
    use alloc::format;
    use alloc::string::ToString;

    fn sonnet() -> RawDocument {
        let ends = ["day", "night", "way", "light", "tree", "sea", "free", "me", "old", "cold", "gold", "bold", "done", "sun"];
        RawDocument {
            lines: ends.iter().enumerate().map(|(i, e)| format!("line {i} ends with {e},")).collect(),
            topic: None,
            source_tag: SourceTag::Sonnet,
        }
    }

    #[test]
    fn sonnet_pairs() {
        let pairs = rhyme_pairs(SONNET_SCHEME);
        let one_based: Vec<(usize, usize)> = pairs.iter().map(|&(i, j)| (i + 1, j + 1)).collect();
        assert_eq!(one_based, [(1, 3), (2, 4), (5, 7), (6, 8), (9, 11), (10, 12), (13, 14)]);
        let ex = extract_rhyme_pairs(&[sonnet()]);
        assert_eq!(ex.len(), 7);
        assert_eq!((ex[0].a.as_str(), ex[0].c.as_str()), ("day", "way"));
        let last = &ex[6];
        assert_eq!((last.a.as_str(), last.c.as_str()), ("done", "sun"));
        assert!(last.b.ends_with("line 13 ends with "));
        assert_eq!(last.b.matches('\n').count(), 13);
    }

    #[test]
    fn short_documents_are_skipped() {
        let mut d = sonnet();
        d.lines.pop();
        assert!(extract_rhyme_pairs(&[d]).is_empty());
    }

    #[test]
    fn last_word_skips_punctuation() {
        let line: Vec<String> = ["the", "end", ",", "'s", "."].iter().map(|s| s.to_string()).collect();
        assert_eq!(last_word_index(&line), Some(1));
        let punct: Vec<String> = [",", "."].iter().map(|s| s.to_string()).collect();
        assert_eq!(last_word_index(&punct), Some(1));
    }

    #[test]
    fn char_set_round_trip() {
        for c in "abc xyz\n09.,'-".chars() {
            assert_eq!(id_char(char_id(c)), Some(c));
        }
        assert_eq!(char_id('é'), CHAR_UNK);
        assert_eq!(id_char(CHAR_EOS), None);
    }

    fn small() -> RhymerModel {
        RhymerModel::new(RhymerConfig {
            char_dim: 3,
            word_hidden: 3,
            poem_hidden: 4,
            decoder_hidden: 4,
            max_context_chars: Some(12),
            max_word_len: 6,
            seed: 3,
        })
    }

    #[test]
    fn word_encoding_is_two_final_states() {
        let m = RhymerModel::new(RhymerConfig { seed: 1, ..RhymerConfig::paper_scale() });
        assert_eq!(m.word_encoder_output_dim(), 2 * 256);
        assert_eq!(m.config.word_encoding_dim(), 512);
    }

    #[test]
    fn rhymer_passes_gradient_check() {
        let m = small();
        let ex = m.encode_example(&RhymeExample { a: "cat".into(), b: "a b\nc ".into(), c: "hat".into() });
        let mut g = m.store.zero_gradients();
        m.loss_and_grad(&ex, &mut g).unwrap();
        let mut store = m.store.clone();
        let r = grad_check(
            &mut store,
            |s| RhymerModel { store: s.clone(), ..m.clone() }.loss(&ex).unwrap(),
            &g,
            &GradCheckConfig { max_per_param: Some(30), ..GradCheckConfig::default() },
        );
        assert!(r.passed(), "{:?}", r.worst);
    }

    #[test]
    fn candidates_are_sorted_and_width_bounded() {
        let m = small();
        let c = m.rhyme_candidates("cat", "the cat sat\non the ", 5).unwrap();
        assert!(!c.is_empty() && c.len() <= 5);
        assert!(c.windows(2).all(|w| w[0].1 >= w[1].1));
        assert!(c.iter().all(|(w, _)| !w.is_empty() && w.chars().count() <= 6));
    }

    #[test]
    fn choose_rhyme_contract() {
        let one = [("hat".to_string(), -1.0)];
        assert_eq!(choose_rhyme(&one, |_| Some(-3.0)).unwrap(), "hat");
        let two = [("bat".to_string(), -1.0), ("hat".to_string(), -0.5)];
        assert_eq!(choose_rhyme(&two, |_| Some(-2.0)).unwrap(), "hat");
        assert_eq!(choose_rhyme(&two, |w| (w == "bat").then_some(-9.0)).unwrap(), "bat");
        assert_eq!(choose_rhyme(&two, |_| None).unwrap(), "hat");
        assert!(choose_rhyme(&[], |_| None).is_err());
    }

    /// Position-dependent toy model: the next-symbol distribution depends
    /// only on the prefix length.
    struct Positional {
        table: Vec<Vec<f64>>,
    }

    impl CharScorer for Positional {
        type State = usize;
        fn start(&self) -> usize {
            0
        }
        fn log_probs(&self, t: &usize) -> Vec<f64> {
            self.table[*t].clone()
        }
        fn advance(&self, t: &usize, _: usize) -> usize {
            t + 1
        }
        fn eos(&self) -> usize {
            0
        }
    }

    fn exhaustive(m: &Positional, max_len: usize, width: usize) -> Vec<(Vec<usize>, f64)> {
        let n = m.table[0].len();
        let mut all = Vec::new();
        let mut frontier: Vec<(Vec<usize>, f64)> = vec![(Vec::new(), 0.0)];
        for _ in 0..max_len {
            let mut next = Vec::new();
            for (seq, s) in &frontier {
                for c in 1..n {
                    let mut q = seq.clone();
                    q.push(c);
                    let sc = s + m.table[seq.len()][c];
                    all.push((q.clone(), sc + m.table[q.len()][0]));
                    next.push((q, sc));
                }
            }
            frontier = next;
        }
        all.sort_by(rank);
        all.truncate(width);
        all
    }

    fn toy(seed: u64, symbols: usize, max_len: usize) -> Positional {
        let mut rng = rng_for(seed, "toy");
        let table = (0..=max_len)
            .map(|_| {
                let raw: Vec<f64> = (0..symbols).map(|_| rng.gen_range(-3.0..3.0)).collect();
                log_softmax(&raw)
            })
            .collect();
        Positional { table }
    }

    proptest::proptest! {
        #[test]
        fn beam_matches_exhaustive_on_positional_models(seed in 0u64..1000, width in 1usize..6) {
            let m = toy(seed, 4, 4);
            let got = beam_search(&m, width, 4).unwrap();
            let want = exhaustive(&m, 4, width);
            proptest::prop_assert_eq!(got, want);
        }
    }

    #[test]
    fn width_one_follows_greedy_path() {
        for seed in 0..50 {
            let m = toy(seed, 5, 5);
            let got = beam_search(&m, 1, 5).unwrap();
            let mut best: Option<(Vec<usize>, f64)> = None;
            let (mut seq, mut s) = (Vec::new(), 0.0);
            for t in 0..5 {
                let lp = &m.table[t];
                let c = (1..lp.len()).max_by(|&a, &b| lp[a].total_cmp(&lp[b])).unwrap();
                seq.push(c);
                s += lp[c];
                let done = s + m.table[t + 1][0];
                if best.as_ref().is_none_or(|b| done > b.1) {
                    best = Some((seq.clone(), done));
                }
            }
            assert_eq!(got, vec![best.unwrap()]);
        }
    }
}
