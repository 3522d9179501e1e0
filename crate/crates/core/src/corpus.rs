//! Corpus handling: tokenization, stanza/sentence splitting into 4–8 line
//! training poems, vocabulary construction and per-poem acrostic targets.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::embed::CharBlock;
use crate::seed::rng_for;

pub const MIN_LINES: usize = 4;
pub const MAX_LINES: usize = 8;
pub const DEFAULT_VOCAB_SIZE: usize = 50_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceTag {
    KnownTopic,
    UnknownTopic,
    Sonnet,
    PlainText,
}

/// One raw input document as read from a corpus file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawDocument {
    pub lines: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topic: Option<String>,
    #[serde(rename = "source")]
    pub source_tag: SourceTag,
}

impl RawDocument {
    /// Gold topics belong to known-topic documents only.
    pub fn is_consistent(&self) -> bool {
        self.topic.is_some() == (self.source_tag == SourceTag::KnownTopic)
    }
}

/// A tokenized training poem of 4–8 lines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Poem {
    pub lines: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topic: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topic_confidence: Option<f64>,
    pub source: SourceTag,
}

impl Poem {
    pub fn new(lines: Vec<Vec<String>>, topic: Option<String>, source: SourceTag) -> Self {
        Poem {
            lines,
            topic,
            topic_confidence: None,
            source,
        }
    }

    pub fn n_lines(&self) -> usize {
        self.lines.len()
    }

    pub fn token_count(&self) -> usize {
        self.lines.iter().map(Vec::len).sum()
    }
}

// ---------------------------------------------------------------------------
// Tokenizer
// ---------------------------------------------------------------------------

const CLITICS: [&str; 7] = ["n't", "'s", "'re", "'ve", "'ll", "'d", "'m"];

fn always_isolated(c: char) -> bool {
    matches!(c, ';' | '!' | '?' | '"' | '(' | ')' | '[' | ']' | '{' | '}')
}

fn is_leading(c: char) -> bool {
    matches!(c, '"' | '(' | '[' | '{' | '`')
}

fn is_trailing(c: char) -> bool {
    matches!(c, '.' | ',' | ';' | ':' | '!' | '?' | ')' | ']' | '}' | '"')
}

/// Treebank-style tokenizer subset.
///
/// Rules, in order: lowercase; curly apostrophes become `'`; `; ! ? " ( ) [
/// ] { }` are always their own tokens; `,` and `:` are their own tokens unless
/// they sit between two digits; leading brackets/quotes and trailing
/// punctuation are peeled off every whitespace chunk (runs of `.` stay one
/// token); clitics `n't 's 're 've 'll 'd 'm` split off the end of a word.
pub fn tokenize(text: &str) -> Vec<String> {
    let lowered = text.to_lowercase().replace(['\u{2019}', '\u{2018}'], "'");
    let chars: Vec<char> = lowered.chars().collect();
    let mut padded = String::with_capacity(lowered.len() + 8);
    for (i, &c) in chars.iter().enumerate() {
        let between_digits = i > 0
            && i + 1 < chars.len()
            && chars[i - 1].is_ascii_digit()
            && chars[i + 1].is_ascii_digit();
        if always_isolated(c) || (matches!(c, ',' | ':') && !between_digits) {
            padded.push(' ');
            padded.push(c);
            padded.push(' ');
        } else {
            padded.push(c);
        }
    }
    let mut out = Vec::new();
    for chunk in padded.split_whitespace() {
        split_chunk(chunk, &mut out);
    }
    out
}

fn split_chunk(chunk: &str, out: &mut Vec<String>) {
    let mut rest = chunk;
    while let Some(c) = rest.chars().next() {
        if is_leading(c) && rest.len() > c.len_utf8() {
            out.push(c.to_string());
            rest = &rest[c.len_utf8()..];
        } else {
            break;
        }
    }
    let mut trailing: Vec<String> = Vec::new();
    loop {
        let Some(c) = rest.chars().next_back() else {
            break;
        };
        if !is_trailing(c) {
            break;
        }
        if c == '.' {
            let core = rest.trim_end_matches('.');
            trailing.push(rest[core.len()..].to_string());
            rest = core;
        } else {
            trailing.push(c.to_string());
            rest = &rest[..rest.len() - c.len_utf8()];
        }
    }
    if !rest.is_empty() {
        split_clitics(rest, out);
    }
    out.extend(trailing.into_iter().rev());
}

fn split_clitics(word: &str, out: &mut Vec<String>) {
    for clitic in CLITICS {
        if word.len() > clitic.len() && word.ends_with(clitic) {
            let head = &word[..word.len() - clitic.len()];
            split_chunk(head, out);
            out.push(clitic.to_string());
            return;
        }
    }
    out.push(word.to_string());
}

// ---------------------------------------------------------------------------
// Splitting
// ---------------------------------------------------------------------------

/// Tokens that mark a sentence boundary at the end of a line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub sentence_end_tokens: Vec<String>,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            sentence_end_tokens: vec![".".to_string()],
        }
    }
}

/// Splits a document into stanzas on empty lines and tokenizes each line.
pub fn stanzas(doc: &RawDocument) -> Vec<Vec<Vec<String>>> {
    let mut out = Vec::new();
    let mut current: Vec<Vec<String>> = Vec::new();
    for line in &doc.lines {
        let toks = tokenize(line);
        if toks.is_empty() {
            if !current.is_empty() {
                out.push(core::mem::take(&mut current));
            }
        } else {
            current.push(toks);
        }
    }
    if !current.is_empty() {
        out.push(current);
    }
    out
}

pub fn split_into_training_poems(doc: &RawDocument) -> Vec<Poem> {
    split_with_config(doc, &SplitConfig::default())
}

/// Stanzas of 4–8 lines pass through. Longer stanzas contribute every prefix
/// of 4–8 lines whose last line ends in a sentence-end token. Shorter stanzas
/// are dropped.
pub fn split_with_config(doc: &RawDocument, cfg: &SplitConfig) -> Vec<Poem> {
    let ends_sentence = |line: &Vec<String>| {
        line.last()
            .is_some_and(|t| cfg.sentence_end_tokens.iter().any(|e| e == t))
    };
    let mut poems = Vec::new();
    for stanza in stanzas(doc) {
        let n = stanza.len();
        if n < MIN_LINES {
            continue;
        }
        if n <= MAX_LINES {
            poems.push(Poem::new(stanza, doc.topic.clone(), doc.source_tag));
            continue;
        }
        for len in MIN_LINES..=MAX_LINES {
            if ends_sentence(&stanza[len - 1]) {
                poems.push(Poem::new(
                    stanza[..len].to_vec(),
                    doc.topic.clone(),
                    doc.source_tag,
                ));
            }
        }
    }
    poems
}

/// Line-count histogram over 4..=8 lines (index 0 counts 4-line poems).
pub fn line_count_histogram(poems: &[Poem]) -> [usize; 5] {
    let mut hist = [0usize; 5];
    for p in poems {
        if (MIN_LINES..=MAX_LINES).contains(&p.n_lines()) {
            hist[p.n_lines() - MIN_LINES] += 1;
        }
    }
    hist
}

/// Deterministic 80/10/10 train/dev/test split.
pub fn split_dataset<T: Clone>(items: &[T], seed: u64) -> (Vec<T>, Vec<T>, Vec<T>) {
    let mut idx: Vec<usize> = (0..items.len()).collect();
    idx.shuffle(&mut rng_for(seed, "dataset-split"));
    let n_train = items.len() * 8 / 10;
    let n_dev = items.len() / 10;
    let pick = |r: &[usize]| r.iter().map(|&i| items[i].clone()).collect::<Vec<_>>();
    (
        pick(&idx[..n_train]),
        pick(&idx[n_train..n_train + n_dev]),
        pick(&idx[n_train + n_dev..]),
    )
}

// ---------------------------------------------------------------------------
// Vocabulary
// ---------------------------------------------------------------------------

pub type TokenId = usize;

pub const PAD: TokenId = 0;
pub const BOS: TokenId = 1;
pub const EOS: TokenId = 2;
pub const EOL: TokenId = 3;
pub const UNK: TokenId = 4;
pub const SPECIALS: [&str; 5] = ["<pad>", "<s>", "</s>", "<eol>", "<unk>"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "VocabRepr", into = "VocabRepr")]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: BTreeMap<String, TokenId>,
}

#[derive(Serialize, Deserialize)]
struct VocabRepr {
    tokens: Vec<String>,
}

impl TryFrom<VocabRepr> for Vocabulary {
    type Error = crate::Error;
    fn try_from(r: VocabRepr) -> crate::Result<Self> {
        if r.tokens.len() < SPECIALS.len()
            || r.tokens.iter().zip(SPECIALS).any(|(a, b)| a != b)
        {
            return Err(crate::Error::Config(
                "vocabulary must start with the special tokens".into(),
            ));
        }
        Ok(Vocabulary::from_tokens(r.tokens[SPECIALS.len()..].iter().cloned()))
    }
}

impl From<Vocabulary> for VocabRepr {
    fn from(v: Vocabulary) -> Self {
        VocabRepr { tokens: v.tokens }
    }
}

impl Vocabulary {
    /// Specials first, then the given tokens in order (duplicates and special
    /// spellings skipped).
    pub fn from_tokens<I: IntoIterator<Item = String>>(tokens: I) -> Self {
        let mut v = Vocabulary {
            tokens: Vec::new(),
            index: BTreeMap::new(),
        };
        for s in SPECIALS {
            v.push(s.to_string());
        }
        for t in tokens {
            if !v.index.contains_key(&t) {
                v.push(t);
            }
        }
        v
    }

    fn push(&mut self, t: String) {
        self.index.insert(t.clone(), self.tokens.len());
        self.tokens.push(t);
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn non_special_len(&self) -> usize {
        self.tokens.len() - SPECIALS.len()
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    pub fn encode(&self, token: &str) -> TokenId {
        self.id(token).unwrap_or(UNK)
    }

    pub fn token(&self, id: TokenId) -> &str {
        &self.tokens[id]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn is_special(id: TokenId) -> bool {
        id < SPECIALS.len()
    }

    /// BOS, line tokens separated by EOL, final EOS.
    pub fn encode_poem(&self, lines: &[Vec<String>]) -> Vec<TokenId> {
        let mut ids = vec![BOS];
        for (i, line) in lines.iter().enumerate() {
            ids.extend(line.iter().map(|t| self.encode(t)));
            ids.push(if i + 1 == lines.len() { EOS } else { EOL });
        }
        if lines.is_empty() {
            ids.push(EOS);
        }
        ids
    }
}

pub fn build_vocabulary(poems: &[Poem], max_size: usize) -> Vocabulary {
    build_vocabulary_from_lines(poems.iter().flat_map(|p| p.lines.iter()), max_size)
}

/// Keeps the `max_size` most frequent tokens; ties go to the
/// lexicographically smaller token.
pub fn build_vocabulary_from_lines<'a, I>(lines: I, max_size: usize) -> Vocabulary
where
    I: IntoIterator<Item = &'a Vec<String>>,
{
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for line in lines {
        for t in line {
            if !SPECIALS.contains(&t.as_str()) {
                *counts.entry(t.as_str()).or_insert(0) += 1;
            }
        }
    }
    let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked.truncate(max_size);
    Vocabulary::from_tokens(ranked.into_iter().map(|(t, _)| t.to_string()))
}

// ---------------------------------------------------------------------------
// Acrostic conditioning
// ---------------------------------------------------------------------------

/// Per-line required initials and line count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AcrosticSpec {
    /// One entry per line; `None` is the pad row.
    pub initials: Vec<Option<char>>,
    pub n_lines: usize,
}

impl AcrosticSpec {
    /// The target word, if every line has a letter initial.
    pub fn word(&self) -> Option<String> {
        self.initials.iter().copied().collect()
    }

    pub fn block(&self) -> CharBlock {
        CharBlock::from_initials(&self.initials)
    }
}

/// First a–z letter of a token if its first alphabetic character is a–z.
pub fn token_initial(token: &str) -> Option<char> {
    token
        .chars()
        .find(|c| c.is_alphabetic())
        .filter(char::is_ascii_lowercase)
}

pub fn derive_training_condition(poem: &Poem) -> AcrosticSpec {
    let initials = poem
        .lines
        .iter()
        .take(MAX_LINES)
        .map(|l| l.first().and_then(|t| token_initial(t)))
        .collect();
    AcrosticSpec {
        initials,
        n_lines: poem.n_lines(),
    }
}
