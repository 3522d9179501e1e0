//! Synthetic corpora for tests and desk-scale runs.
//!
//! Poems are built from pseudo-words: each topic owns words for every
//! initial letter (a topic-specific ending keeps the sets disjoint), all
//! topics share function words, and line endings come from rhyme families
//! so sonnets follow their scheme. Embeddings cluster topic words around a
//! per-topic centre.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::corpus::{RawDocument, SourceTag};
use crate::embed::EmbeddingTable;
use crate::seed::{rng_for, Rng};

const VOWELS: [&str; 6] = ["a", "e", "i", "o", "u", "ou"];
const CODAS: [&str; 8] = ["l", "n", "r", "s", "m", "v", "th", "nd"];
const ENDINGS: [&str; 4] = ["en", "ar", "ith", "om"];
const FUNCTION: [&str; 12] = ["the", "a", "of", "and", "in", "my", "your", "with", "to", "is", "was", "all"];
const RHYME_SUFFIXES: [&str; 8] = ["ay", "ight", "ee", "one", "ell", "ore", "ind", "ust"];
const ONSETS: [&str; 8] = ["b", "d", "f", "g", "l", "m", "s", "t"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub topics: Vec<String>,
    pub poems_per_topic: usize,
    pub unknown_per_topic: usize,
    pub sonnets: usize,
    pub plain_docs: usize,
    pub words_per_letter: usize,
    pub embed_dim: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            topics: ["sea", "fire"].iter().map(|s| s.to_string()).collect(),
            poems_per_topic: 100,
            unknown_per_topic: 20,
            sonnets: 30,
            plain_docs: 200,
            words_per_letter: 2,
            embed_dim: 16,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    /// Per topic, per letter a–z.
    pub topic_words: Vec<Vec<Vec<String>>>,
    pub families: Vec<Vec<String>>,
}

impl Lexicon {
    fn build(cfg: &SynthConfig, rng: &mut Rng) -> Self {
        let mut seen = BTreeSet::new();
        let mut topic_words = Vec::new();
        for t in 0..cfg.topics.len() {
            let ending = ENDINGS[t % ENDINGS.len()];
            let extra = "abcdefghijklmnopqrstuvwxyz".chars().nth(t / ENDINGS.len()).filter(|_| t >= ENDINGS.len());
            let mut per_letter = Vec::new();
            for letter in 'a'..='z' {
                let mut words = Vec::new();
                while words.len() < cfg.words_per_letter {
                    let mut w = format!("{letter}{}{}{ending}", VOWELS.choose(rng).unwrap(), CODAS.choose(rng).unwrap());
                    if let Some(e) = extra {
                        w.push(e);
                    }
                    if seen.insert(w.clone()) {
                        words.push(w);
                    }
                }
                per_letter.push(words);
            }
            topic_words.push(per_letter);
        }
        let families = RHYME_SUFFIXES
            .iter()
            .map(|s| ONSETS.iter().map(|o| format!("{o}{s}")).collect())
            .collect();
        Lexicon { topic_words, families }
    }

    fn topic_word(&self, t: usize, rng: &mut Rng) -> &str {
        let letter = rng.gen_range(0..26);
        self.topic_words[t][letter].choose(rng).unwrap()
    }

    /// All words of topic `t`.
    pub fn words_of(&self, t: usize) -> impl Iterator<Item = &str> {
        self.topic_words[t].iter().flatten().map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fixture {
    pub config: SynthConfig,
    pub lexicon: Lexicon,
    pub known: Vec<RawDocument>,
    pub unknown: Vec<RawDocument>,
    pub sonnets: Vec<RawDocument>,
    pub plain: Vec<RawDocument>,
    pub table: EmbeddingTable,
}

/// One line: topic word, alternating function/topic words, a rhyme word
/// from `family`, and trailing punctuation.
fn line(lex: &Lexicon, topic: Option<usize>, family: usize, punct: &str, rng: &mut Rng) -> String {
    let n_topics = lex.topic_words.len();
    let pick = |rng: &mut Rng| {
        let t = topic.unwrap_or_else(|| rng.gen_range(0..n_topics));
        lex.topic_word(t, rng).to_string()
    };
    let mut toks = alloc::vec![pick(rng)];
    for _ in 0..rng.gen_range(1..=2) {
        toks.push(FUNCTION.choose(rng).unwrap().to_string());
        toks.push(pick(rng));
    }
    toks.push(FUNCTION.choose(rng).unwrap().to_string());
    toks.push(lex.families[family].choose(rng).unwrap().clone());
    let mut s = toks.join(" ");
    s.push_str(punct);
    s
}

/// Family index per line for a scheme like "ABAB".
fn families_for(scheme: &[u8], rng: &mut Rng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..RHYME_SUFFIXES.len()).collect();
    order.shuffle(rng);
    scheme.iter().map(|&c| order[((c - b'A') as usize) % order.len()]).collect()
}

fn stanza(lex: &Lexicon, topic: Option<usize>, n: usize, rng: &mut Rng) -> Vec<String> {
    const SCHEME: &[u8] = b"ABABCDCDEFEFGG";
    let fam = families_for(&SCHEME[..n], rng);
    (0..n)
        .map(|i| {
            let punct = if i + 1 == n {
                "."
            } else if rng.gen_bool(0.2) {
                ";"
            } else {
                ","
            };
            line(lex, topic, fam[i], punct, rng)
        })
        .collect()
}

fn embeddings(cfg: &SynthConfig, lex: &Lexicon, rng: &mut Rng) -> EmbeddingTable {
    let d = cfg.embed_dim;
    let mut table = EmbeddingTable::new(d);
    let unit = |rng: &mut Rng| -> Vec<f64> { (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect() };
    for (t, name) in cfg.topics.iter().enumerate() {
        let centre = unit(rng);
        table.insert(name, centre.clone()).expect("dimension fixed");
        for w in lex.words_of(t) {
            let v = centre.iter().map(|c| c + 0.3 * rng.gen_range(-1.0..1.0)).collect();
            table.insert(w, v).expect("dimension fixed");
        }
    }
    for w in FUNCTION.iter().copied().chain(lex.families.iter().flatten().map(String::as_str)) {
        let v = unit(rng);
        table.insert(w, v).expect("dimension fixed");
    }
    for p in [",", ";", "."] {
        let v = unit(rng);
        table.insert(p, v).expect("dimension fixed");
    }
    table
}

pub fn generate(cfg: &SynthConfig) -> Fixture {
    let mut rng = rng_for(cfg.seed, "synth");
    let lexicon = Lexicon::build(cfg, &mut rng);
    let mut known = Vec::new();
    let mut unknown = Vec::new();
    for t in 0..cfg.topics.len() {
        for _ in 0..cfg.poems_per_topic {
            let n = rng.gen_range(4..=8);
            known.push(RawDocument {
                lines: stanza(&lexicon, Some(t), n, &mut rng),
                topic: Some(cfg.topics[t].clone()),
                source_tag: SourceTag::KnownTopic,
            });
        }
        for _ in 0..cfg.unknown_per_topic {
            let n = rng.gen_range(4..=8);
            unknown.push(RawDocument {
                lines: stanza(&lexicon, Some(t), n, &mut rng),
                topic: None,
                source_tag: SourceTag::UnknownTopic,
            });
        }
    }
    known.shuffle(&mut rng);
    unknown.shuffle(&mut rng);
    let sonnets = (0..cfg.sonnets)
        .map(|_| {
            let t = rng.gen_range(0..cfg.topics.len());
            RawDocument {
                lines: stanza(&lexicon, Some(t), 14, &mut rng),
                topic: None,
                source_tag: SourceTag::Sonnet,
            }
        })
        .collect();
    let plain = (0..cfg.plain_docs)
        .map(|_| {
            let n = rng.gen_range(4..=8);
            RawDocument {
                lines: stanza(&lexicon, None, n, &mut rng),
                topic: None,
                source_tag: SourceTag::PlainText,
            }
        })
        .collect();
    let table = embeddings(cfg, &lexicon, &mut rng);
    Fixture {
        config: cfg.clone(),
        lexicon,
        known,
        unknown,
        sonnets,
        plain,
        table,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_vocabulary, split_into_training_poems};
    use crate::rhymer::extract_rhyme_pairs;

    #[test]
    fn fixture_shape() {
        let f = generate(&SynthConfig::default());
        assert_eq!(f.known.len(), 200);
        let poems: Vec<_> = f.known.iter().flat_map(split_into_training_poems).collect();
        assert_eq!(poems.len(), 200);
        assert!(build_vocabulary(&poems, 50_000).len() <= 500);
        assert_eq!(extract_rhyme_pairs(&f.sonnets).len(), 7 * f.sonnets.len());
        let sea: BTreeSet<&str> = f.lexicon.words_of(0).collect();
        assert!(f.lexicon.words_of(1).all(|w| !sea.contains(w)));
        assert_eq!(f, generate(&SynthConfig::default()));
    }

    #[test]
    fn rhyme_pairs_share_suffix() {
        let f = generate(&SynthConfig::default());
        for ex in extract_rhyme_pairs(&f.sonnets) {
            assert_eq!(ex.a[1..], ex.c[1..], "{ex:?}");
        }
    }
}
