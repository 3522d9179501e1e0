//! Constrained acrostic generation: line-initial masking, first-word topic
//! steering, line-count forcing, rhyme substitution and terminal cleanup.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::corpus::{TokenId, Vocabulary, BOS, EOL, EOS, MAX_LINES, MIN_LINES, PAD, SPECIALS, UNK};
use crate::embed::{char_onehot_block, knn_with_initial, normalize_word, EmbeddingTable};
use crate::net::{log_softmax, softmax_masked};
use crate::poemlm::{Condition, LmSession, PoemLm};
use crate::rhymer::{choose_rhyme, last_word_index, poem_prefix, rhyme_pairs, RhymerModel};
use crate::seed::{rng_for, Rng};
use crate::{Error, Result};

pub const DEFAULT_MAX_TOKENS_PER_LINE: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flags {
    /// Topic steering of first words through nearest neighbours.
    pub st: bool,
    /// Acrostic masking of first words.
    pub ac: bool,
    /// Rhyme substitution.
    pub rh: bool,
    /// Topic vector fed to the LM.
    pub tp: bool,
}

impl Flags {
    pub const ALL: Flags = Flags {
        st: true,
        ac: true,
        rh: true,
        tp: true,
    };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub k: usize,
    pub m1: f64,
    pub m2: f64,
    pub beam_width: usize,
    pub flags: Flags,
    pub seed: u64,
    pub temperature: f64,
    pub max_tokens_per_line: usize,
    /// Generate with a zero topic vector when the word has no embedding
    /// instead of failing.
    pub allow_oov_topic: bool,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            k: 5,
            m1: 0.7,
            m2: 0.3,
            beam_width: 5,
            flags: Flags::ALL,
            seed: 0,
            temperature: 1.0,
            max_tokens_per_line: DEFAULT_MAX_TOKENS_PER_LINE,
            allow_oov_topic: false,
        }
    }
}

impl GenerationConfig {
    /// Named system configurations: `neuralpoet`, `-st`, `-st-ac`,
    /// `-st-rh`, `-st-tp`.
    pub fn ablation(name: &str) -> Option<Self> {
        let mut c = GenerationConfig::default();
        let key = name.to_ascii_lowercase();
        let key = key.trim_start_matches("neuralpoet");
        match key {
            "" => {}
            "-st" | "-st-ac" | "-st-rh" | "-st-tp" => {
                c.m1 = 0.0;
                c.m2 = 1.0;
                c.flags.st = false;
                match key {
                    "-st-ac" => c.flags.ac = false,
                    "-st-rh" => c.flags.rh = false,
                    "-st-tp" => c.flags.tp = false,
                    _ => {}
                }
            }
            _ => return None,
        }
        Some(c)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name: &'static str, reason: &'static str| Err(Error::Param { name: name.into(), reason: reason.into() });
        if !(0.0..=1.0).contains(&self.m1) || !(0.0..=1.0).contains(&self.m2) {
            return bad("m1/m2", "must lie in [0, 1]");
        }
        if (self.m1 + self.m2 - 1.0).abs() > 1e-9 {
            return bad("m1/m2", "must sum to 1");
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return bad("temperature", "must be positive");
        }
        if self.max_tokens_per_line == 0 {
            return bad("max_tokens_per_line", "must be at least 1");
        }
        if self.beam_width == 0 {
            return bad("beam_width", "must be at least 1");
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Rhyme schemes
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RhymeScheme {
    pub letters: String,
}

impl RhymeScheme {
    /// `(partner, slot)` line pairs, 1-indexed.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        rhyme_pairs(&self.letters).into_iter().map(|(a, b)| (a + 1, b + 1)).collect()
    }

    /// Lines whose last word is substituted, 1-indexed.
    pub fn substitution_slots(&self) -> Vec<usize> {
        self.pairs().into_iter().map(|p| p.1).collect()
    }

    pub fn partner(&self, slot: usize) -> Option<usize> {
        self.pairs().into_iter().find(|p| p.1 == slot).map(|p| p.0)
    }
}

pub fn scheme_for(n_lines: usize) -> Result<RhymeScheme> {
    let letters = match n_lines {
        4 => "ABAB",
        5 => "ABABC",
        6 => "ABABCC",
        7 => "ABABCDC",
        8 => "ABABCDCD",
        n => return Err(Error::LineCount(n)),
    };
    Ok(RhymeScheme {
        letters: letters.to_string(),
    })
}

// ---------------------------------------------------------------------------
// Line boundaries
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    EndLine,
    EndPoem,
}

impl Boundary {
    pub fn token(self) -> TokenId {
        match self {
            Boundary::EndLine => EOL,
            Boundary::EndPoem => EOS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    /// Keep the token in the current line.
    Emit,
    /// The token is, or is replaced by, this boundary.
    Close(Boundary),
    /// Boundary that would leave an empty line; dropped.
    Drop,
}

/// Tracks line and token counts and decides what each sampled token becomes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundaryMachine {
    pub target_lines: usize,
    pub max_tokens_per_line: usize,
    pub lines_done: usize,
    pub tokens_in_line: usize,
}

impl BoundaryMachine {
    pub fn new(target_lines: usize, max_tokens_per_line: usize) -> Self {
        BoundaryMachine {
            target_lines,
            max_tokens_per_line,
            lines_done: 0,
            tokens_in_line: 0,
        }
    }

    pub fn finished(&self) -> bool {
        self.lines_done >= self.target_lines
    }

    fn close(&mut self) -> Step {
        self.lines_done += 1;
        self.tokens_in_line = 0;
        Step::Close(if self.lines_done < self.target_lines {
            Boundary::EndLine
        } else {
            Boundary::EndPoem
        })
    }

    pub fn push(&mut self, is_boundary: bool) -> Step {
        if is_boundary {
            if self.tokens_in_line == 0 {
                Step::Drop
            } else {
                self.close()
            }
        } else if self.tokens_in_line >= self.max_tokens_per_line {
            self.close()
        } else {
            self.tokens_in_line += 1;
            Step::Emit
        }
    }
}

pub fn is_boundary_token(t: &str) -> bool {
    t == SPECIALS[EOL] || t == SPECIALS[EOS]
}

/// Rewrites a trailing "," or ";" to ".".
pub fn terminal_rewrite(line: &mut [String]) -> bool {
    match line.last_mut() {
        Some(t) if t == "," || t == ";" => {
            *t = ".".into();
            true
        }
        _ => false,
    }
}

/// Applies the line-count rules to a sampled token stream: end-of-poem
/// before the last line becomes end-of-line, end-of-line on the last line
/// becomes end-of-poem, over-long lines are closed, boundaries that would
/// open an empty line are dropped, and a trailing "," or ";" of a finished
/// poem becomes ".". Output stops at the end-of-poem token.
pub fn force_line_boundaries(stream: &[String], target_lines: usize, max_tokens_per_line: usize) -> Vec<String> {
    let mut m = BoundaryMachine::new(target_lines, max_tokens_per_line);
    let mut out: Vec<String> = Vec::new();
    let mut line_start = 0;
    for t in stream {
        if m.finished() {
            break;
        }
        match m.push(is_boundary_token(t)) {
            Step::Emit => out.push(t.clone()),
            Step::Drop => {}
            Step::Close(b) => {
                if b == Boundary::EndPoem {
                    terminal_rewrite(&mut out[line_start..]);
                }
                out.push(SPECIALS[b.token()].to_string());
                line_start = out.len();
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Generation
// ---------------------------------------------------------------------------

pub struct Models<'a> {
    pub lm: &'a PoemLm,
    pub table: &'a EmbeddingTable,
    pub rhymer: Option<&'a RhymerModel>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FirstWordBranch {
    Knn,
    Masked,
    Free,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineTrace {
    pub coin: f64,
    pub branch: FirstWordBranch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedPoem {
    pub word: String,
    pub lines: Vec<Vec<String>>,
    /// 1-indexed lines whose last word went through the rhymer.
    pub rhyme_slots_filled: Vec<usize>,
    pub rhymer_calls: usize,
    pub trace: Vec<LineTrace>,
}

impl GeneratedPoem {
    pub fn render(&self) -> String {
        render(&self.lines)
    }
}

/// Validates an acrostic word: a–z only, 4 to 8 letters.
pub fn validate_word(word: &str) -> Result<String> {
    let w = normalize_word(word, MIN_LINES)?;
    if w.chars().count() > MAX_LINES {
        return Err(Error::InvalidWord {
            word: word.to_string(),
            reason: "longer than 8 letters",
        });
    }
    Ok(w)
}

struct Temp(f64);

impl Temp {
    fn apply(&self, logits: &[f64]) -> Vec<f64> {
        logits.iter().map(|l| l / self.0).collect()
    }
}

fn sample(probs: &[f64], rng: &mut Rng) -> TokenId {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

/// Vocabulary mask of non-special tokens starting with `letter`.
pub fn initial_mask(vocab: &Vocabulary, letter: char) -> Vec<bool> {
    vocab
        .tokens()
        .iter()
        .enumerate()
        .map(|(id, t)| !Vocabulary::is_special(id) && t.starts_with(letter))
        .collect()
}

/// The next-step mask: never BOS/PAD/UNK; boundaries only when allowed.
fn step_mask(v: usize, allow_boundary: bool) -> Vec<bool> {
    (0..v)
        .map(|id| match id {
            BOS | PAD | UNK => false,
            EOL | EOS => allow_boundary,
            _ => true,
        })
        .collect()
}

/// Chooses the first word of a line for `letter`. Returns the token and
/// the branch taken. `coin` selects the kNN branch when below `m1`.
#[allow(clippy::too_many_arguments)]
pub fn first_word(
    letter: char,
    topic: Option<&str>,
    logits: &[f64],
    lm_vocab: &Vocabulary,
    table: &EmbeddingTable,
    cfg: &GenerationConfig,
    coin: f64,
    rng: &mut Rng,
) -> Result<(TokenId, FirstWordBranch)> {
    let mask = initial_mask(lm_vocab, letter);
    if !mask.iter().any(|&m| m) {
        return Err(Error::NoTokenForLetter(letter));
    }
    if cfg.flags.st && coin < cfg.m1 {
        if let Some(topic) = topic {
            let cands = knn_with_initial(topic, letter, cfg.k, lm_vocab, table)?;
            let logp = log_softmax(logits);
            let mut best: Option<(TokenId, f64)> = None;
            for (tok, _) in &cands {
                let Some(id) = lm_vocab.id(tok) else { continue };
                if best.is_none_or(|b| logp[id] > b.1) {
                    best = Some((id, logp[id]));
                }
            }
            if let Some((id, _)) = best {
                return Ok((id, FirstWordBranch::Knn));
            }
        }
    }
    let probs = softmax_masked(&Temp(cfg.temperature).apply(logits), &mask)?;
    Ok((sample(&probs, rng), FirstWordBranch::Masked))
}

struct Line<'m> {
    ids: Vec<TokenId>,
    /// LM session and next-token logits before each token was fed.
    before: Vec<(LmSession<'m>, Vec<f64>)>,
}

/// Generates an acrostic poem for `word`.
pub fn generate_poem(word: &str, cfg: &GenerationConfig, models: &Models<'_>) -> Result<GeneratedPoem> {
    cfg.validate()?;
    let word = validate_word(word)?;
    let lm = models.lm;
    let vocab = &lm.vocab;
    let letters: Vec<char> = word.chars().collect();
    let n = letters.len();
    let scheme = scheme_for(n)?;
    let slots = if cfg.flags.rh { scheme.substitution_slots() } else { Vec::new() };
    let rhymer = match (cfg.flags.rh, models.rhymer) {
        (true, None) => return Err(Error::Config("rhyme substitution needs a rhymer model".into())),
        (_, r) => r,
    };

    let known = models.table.get(&word).map(<[f64]>::to_vec);
    let topic_vec = match (&known, cfg.flags.tp) {
        (Some(v), true) => v.clone(),
        (None, true) if !cfg.allow_oov_topic => return Err(Error::MissingEmbedding(word)),
        (None, true) => {
            log::warn!("no embedding for {word:?}; using a zero topic vector");
            vec![0.0; lm.config.embed_dim]
        }
        (_, false) => vec![0.0; lm.config.embed_dim],
    };
    let knn_topic = known.as_ref().map(|_| word.as_str());
    let cond = Condition::new(topic_vec, char_onehot_block(&word)?, n);

    let mut coin_rng = rng_for(cfg.seed, "decode-coin");
    let mut rng = rng_for(cfg.seed, "decode-sample");
    let temp = Temp(cfg.temperature);
    let mut session = lm.session(&cond)?;
    let mut logits = session.feed(BOS)?;
    let mut machine = BoundaryMachine::new(n, cfg.max_tokens_per_line);
    let mut lines: Vec<Vec<String>> = Vec::with_capacity(n);
    let mut trace = Vec::with_capacity(n);
    let mut filled = Vec::new();
    let mut rhymer_calls = 0;

    for (i, &letter) in letters.iter().enumerate() {
        let coin: f64 = coin_rng.gen();
        let (first, branch) = if cfg.flags.ac {
            first_word(letter, knn_topic, &logits, vocab, models.table, cfg, coin, &mut rng)?
        } else {
            let probs = softmax_masked(&temp.apply(&logits), &step_mask(vocab.len(), false))?;
            (sample(&probs, &mut rng), FirstWordBranch::Free)
        };
        trace.push(LineTrace { coin, branch });
        let mut line = Line {
            ids: Vec::new(),
            before: Vec::new(),
        };
        let mut next = Some(first);
        let boundary = loop {
            let id = match next.take() {
                Some(id) => id,
                None => {
                    let no_boundary = branch == FirstWordBranch::Knn && line.ids.len() == 1;
                    let mask = step_mask(vocab.len(), !no_boundary);
                    sample(&softmax_masked(&temp.apply(&logits), &mask)?, &mut rng)
                }
            };
            match machine.push(id == EOL || id == EOS) {
                Step::Emit => {
                    line.before.push((session.clone(), logits.clone()));
                    line.ids.push(id);
                    logits = session.feed(id)?;
                }
                Step::Drop => {}
                Step::Close(b) => break b,
            }
        };
        let mut tokens: Vec<String> = line.ids.iter().map(|&id| vocab.token(id).to_string()).collect();

        let slot = i + 1;
        if let (Some(rhymer), true) = (rhymer, slots.contains(&slot)) {
            let partner = scheme.partner(slot).expect("slot has a partner") - 1;
            let p_line = &lines[partner];
            let a = &p_line[last_word_index(p_line).expect("lines are non-empty")];
            let idx = last_word_index(&tokens).expect("lines are non-empty");
            let b = poem_prefix(&{
                let mut all = lines.clone();
                all.push(tokens.clone());
                all
            }, i, idx);
            let mut cands = rhymer.rhyme_candidates(a, &b, cfg.beam_width)?;
            rhymer_calls += 1;
            filled.push(slot);
            if cfg.flags.ac && idx == 0 {
                cands.retain(|(w, _)| w.starts_with(letter));
            }
            if !cands.is_empty() {
                let lp = log_softmax(&line.before[idx].1);
                let chosen = choose_rhyme(&cands, |w| vocab.id(w).map(|id| lp[id]))?;
                if let Some(new_id) = vocab.id(&chosen).filter(|&id| id != line.ids[idx]) {
                    line.ids[idx] = new_id;
                    tokens[idx] = chosen;
                    session = line.before[idx].0.clone();
                    for &id in &line.ids[idx..] {
                        logits = session.feed(id)?;
                    }
                } else if vocab.id(&chosen).is_none() {
                    log::warn!("rhyme {chosen:?} is outside the LM vocabulary; kept {:?}", tokens[idx]);
                }
            }
        }

        if boundary == Boundary::EndPoem {
            terminal_rewrite(&mut tokens);
        } else {
            logits = session.feed(boundary.token())?;
        }
        lines.push(tokens);
    }

    Ok(GeneratedPoem {
        word,
        lines,
        rhyme_slots_filled: filled,
        rhymer_calls,
        trace,
    })
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

fn attaches_left(t: &str) -> bool {
    matches!(t, "." | "," | ";" | ":" | "!" | "?" | ")" | "]" | "}" | "n't")
        || t.chars().all(|c| c == '.') && !t.is_empty()
        || (t.starts_with('\'') && t.len() > 1)
}

fn attaches_right(t: &str) -> bool {
    matches!(t, "(" | "[" | "{" | "`")
}

/// Joins tokens with spaces, re-attaching punctuation and clitics.
pub fn detokenize(tokens: &[String]) -> String {
    let mut s = String::new();
    let mut glue = true;
    for t in tokens {
        if !glue && !attaches_left(t) {
            s.push(' ');
        }
        s.push_str(t);
        glue = attaches_right(t);
    }
    s
}

/// Display form: detokenized lines, first letter uppercased.
pub fn render(lines: &[Vec<String>]) -> String {
    lines
        .iter()
        .map(|l| {
            let text = detokenize(l);
            let mut ch = text.chars();
            match ch.next() {
                Some(c) => c.to_uppercase().chain(ch).collect(),
                None => String::new(),
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_vocabulary, split_into_training_poems, Poem};
    use crate::poemlm::LmConfig;
    use crate::rhymer::RhymerConfig;
    use crate::synth::{generate, Fixture, SynthConfig};
    use alloc::format;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    struct Kit {
        fixture: Fixture,
        lm: PoemLm,
        rhymer: RhymerModel,
    }

    fn kit() -> Kit {
        let fixture = generate(&SynthConfig {
            poems_per_topic: 20,
            sonnets: 2,
            plain_docs: 0,
            ..SynthConfig::default()
        });
        let poems: Vec<Poem> = fixture.known.iter().flat_map(split_into_training_poems).collect();
        let vocab = build_vocabulary(&poems, 1000);
        let lm = PoemLm::new(
            LmConfig {
                embed_dim: 16,
                topic_channel: true,
                hidden: 8,
                n_layers: 1,
                dropout: 0.0,
                seed: 1,
            },
            vocab,
            &fixture.table,
        )
        .unwrap();
        let rhymer = RhymerModel::new(RhymerConfig {
            char_dim: 4,
            word_hidden: 4,
            poem_hidden: 4,
            decoder_hidden: 4,
            max_context_chars: Some(20),
            max_word_len: 8,
            seed: 1,
        });
        Kit { fixture, lm, rhymer }
    }

    fn models(k: &Kit) -> Models<'_> {
        Models {
            lm: &k.lm,
            table: &k.fixture.table,
            rhymer: Some(&k.rhymer),
        }
    }

    #[test]
    fn schemes_and_slots() {
        assert_eq!(scheme_for(4).unwrap().substitution_slots(), [3, 4]);
        assert_eq!(scheme_for(5).unwrap().substitution_slots(), [3, 4]);
        assert_eq!(scheme_for(8).unwrap().substitution_slots(), [3, 4, 7, 8]);
        assert_eq!(scheme_for(6).unwrap().letters, "ABABCC");
        assert!(scheme_for(3).is_err() && scheme_for(9).is_err());
    }

    #[test]
    fn boundary_examples() {
        let out = force_line_boundaries(&toks("a </s> b <eol> c <eol> d <eol> e"), 4, 15);
        assert_eq!(out, toks("a <eol> b <eol> c <eol> d </s>"));
        let out = force_line_boundaries(&toks("<eol> a , <eol> b ;  <eol>"), 2, 15);
        assert_eq!(out, toks("a , <eol> b . </s>"));
        let out = force_line_boundaries(&toks("a a a a b"), 2, 3);
        assert_eq!(out, toks("a a a <eol> b"));
    }

    #[test]
    fn invalid_words() {
        let k = kit();
        let cfg = GenerationConfig::default();
        for w in ["po3t", "cat", "abcdefghi", ""] {
            assert!(matches!(generate_poem(w, &cfg, &models(&k)), Err(Error::InvalidWord { .. })), "{w}");
        }
    }

    #[test]
    fn acrostic_and_rhyme_contract() {
        let k = kit();
        let cfg = GenerationConfig {
            allow_oov_topic: true,
            ..GenerationConfig::default()
        };
        for (i, w) in ["poet", "nature", "sea", "fire", "seaside", "walkers"].iter().enumerate() {
            let cfg = GenerationConfig { seed: i as u64, ..cfg.clone() };
            let Ok(p) = generate_poem(w, &cfg, &models(&k)) else {
                assert_eq!(w.len(), 3);
                continue;
            };
            assert_eq!(p.lines.len(), w.len());
            for (line, c) in p.lines.iter().zip(w.chars()) {
                assert!(line[0].starts_with(c), "{line:?} {c}");
                assert!(line.len() <= cfg.max_tokens_per_line);
            }
            let last = p.lines.last().unwrap().last().unwrap();
            assert!(last != "," && last != ";");
            assert_eq!(p.rhymer_calls, scheme_for(w.len()).unwrap().substitution_slots().len());
            assert_eq!(p, generate_poem(w, &cfg, &models(&k)).unwrap());
        }
        let cfg = GenerationConfig {
            allow_oov_topic: true,
            flags: Flags { rh: false, ..Flags::ALL },
            ..GenerationConfig::default()
        };
        assert_eq!(generate_poem("cake", &cfg, &models(&k)).unwrap().rhymer_calls, 0);
    }

    #[test]
    fn oov_topic_needs_opt_in() {
        let k = kit();
        let r = generate_poem("zzzz", &GenerationConfig::default(), &models(&k));
        assert!(matches!(r, Err(Error::MissingEmbedding(_))));
    }

    #[test]
    fn m2_branch_isolated_from_m1() {
        let k = kit();
        let base = GenerationConfig::default();
        let m0 = GenerationConfig { m1: 0.0, m2: 1.0, ..base.clone() };
        let mut matched = 0;
        for seed in 0..200 {
            let a = generate_poem("fire", &GenerationConfig { seed, ..base.clone() }, &models(&k)).unwrap();
            if a.trace.iter().all(|t| t.branch == FirstWordBranch::Masked) {
                let b = generate_poem("fire", &GenerationConfig { seed, ..m0.clone() }, &models(&k)).unwrap();
                assert_eq!(a.lines, b.lines);
                matched += 1;
            }
        }
        assert!(matched > 0);
    }

    #[test]
    fn first_word_policies() {
        let k = kit();
        let vocab = &k.lm.vocab;
        let cond = Condition::new(k.fixture.table.get("sea").unwrap().to_vec(), char_onehot_block("sand").unwrap(), 4);
        let mut s = k.lm.session(&cond).unwrap();
        let logits = s.feed(BOS).unwrap();
        let mut rng = rng_for(0, "t");
        let one = GenerationConfig { k: 1, m1: 1.0, m2: 0.0, ..Default::default() };
        let knn = knn_with_initial("sea", 's', 1, vocab, &k.fixture.table).unwrap();
        let (id, br) = first_word('s', Some("sea"), &logits, vocab, &k.fixture.table, &one, 0.5, &mut rng).unwrap();
        assert_eq!((vocab.token(id), br), (knn[0].0.as_str(), FirstWordBranch::Knn));

        let five = GenerationConfig { m1: 1.0, m2: 0.0, ..Default::default() };
        let probs = k.lm.lm_forward(&[BOS], &cond).unwrap();
        let cands = knn_with_initial("sea", 's', 5, vocab, &k.fixture.table).unwrap();
        let mut best = (0, f64::NEG_INFINITY);
        for (t, _) in &cands {
            let id = vocab.id(t).unwrap();
            if probs[id] > best.1 {
                best = (id, probs[id]);
            }
        }
        let (id, _) = first_word('s', Some("sea"), &logits, vocab, &k.fixture.table, &five, 0.1, &mut rng).unwrap();
        assert_eq!(id, best.0);

        let m0 = GenerationConfig { m1: 0.0, m2: 1.0, ..Default::default() };
        for _ in 0..1000 {
            let (id, _) = first_word('t', Some("sea"), &logits, vocab, &k.fixture.table, &m0, 0.0, &mut rng).unwrap();
            assert!(vocab.token(id).starts_with('t'));
        }
        let r = first_word('q', None, &logits, &Vocabulary::from_tokens(Vec::new()), &k.fixture.table, &m0, 0.0, &mut rng);
        assert!(matches!(r, Err(Error::NoTokenForLetter('q'))));
    }

    #[test]
    fn rendering() {
        assert_eq!(detokenize(&toks("my heart , it is n't ( yours ) .")), "my heart, it isn't (yours).");
        assert_eq!(render(&[toks("oh the sea ."), toks("we 're here !")]), "Oh the sea.\nWe're here!");
        assert_eq!(format!("{}", detokenize(&[])), "");
    }

    #[test]
    fn ablation_names() {
        let st = GenerationConfig::ablation("NeuralPoet-ST-AC").unwrap();
        assert_eq!((st.m1, st.m2, st.flags.st, st.flags.ac, st.flags.rh), (0.0, 1.0, false, false, true));
        assert_eq!(GenerationConfig::ablation("neuralpoet").unwrap(), GenerationConfig::default());
        assert!(GenerationConfig::ablation("other").is_none());
    }
}
