//! Fixed pretrained word vectors and character one-hot blocks.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::corpus::{Vocabulary, MAX_LINES};
use crate::{Error, Result};

/// 26 letters plus the pad row.
pub const ALPHABET: usize = 27;
pub const PAD_INDEX: usize = 26;
pub const BLOCK_LEN: usize = MAX_LINES * ALPHABET;

/// The 8×27 one-hot acrostic matrix, one row per line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CharBlock([[u8; ALPHABET]; MAX_LINES]);

impl CharBlock {
    pub fn from_initials(initials: &[Option<char>]) -> Self {
        let mut rows = [[0u8; ALPHABET]; MAX_LINES];
        for (r, row) in rows.iter_mut().enumerate() {
            let idx = initials
                .get(r)
                .copied()
                .flatten()
                .filter(char::is_ascii_lowercase)
                .map_or(PAD_INDEX, |c| (c as u8 - b'a') as usize);
            row[idx] = 1;
        }
        CharBlock(rows)
    }

    pub fn all_pad() -> Self {
        Self::from_initials(&[])
    }

    pub fn rows(&self) -> &[[u8; ALPHABET]; MAX_LINES] {
        &self.0
    }

    pub fn is_pad(&self, row: usize) -> bool {
        self.0[row][PAD_INDEX] == 1
    }

    /// Row-major flattening to 216 reals.
    pub fn flatten(&self) -> Vec<f64> {
        self.0
            .iter()
            .flat_map(|r| r.iter().map(|&b| f64::from(b)))
            .collect()
    }
}

/// Validates an acrostic word (1–8 letters, case-insensitive) and returns it
/// lowercased.
pub fn normalize_word(word: &str, min_len: usize) -> Result<String> {
    let lower = word.to_lowercase();
    let invalid = |reason| Error::InvalidWord {
        word: word.to_string(),
        reason,
    };
    let n = lower.chars().count();
    if n < min_len || n > MAX_LINES {
        return Err(invalid(if min_len > 1 {
            "length must be 4..=8"
        } else {
            "length must be 1..=8"
        }));
    }
    if !lower.chars().all(|c| c.is_ascii_lowercase()) {
        return Err(invalid("only letters a-z are allowed"));
    }
    Ok(lower)
}

pub fn char_onehot_block(word: &str) -> Result<CharBlock> {
    let w = normalize_word(word, 1)?;
    let initials: Vec<Option<char>> = w.chars().map(Some).collect();
    Ok(CharBlock::from_initials(&initials))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: BTreeMap<String, Vec<f64>>,
}

/// Counts from parsing an embedding file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub entries: usize,
    pub duplicates: Vec<(usize, String)>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        EmbeddingTable {
            dim,
            vectors: BTreeMap::new(),
        }
    }

    /// Parses `token v1 ... v_dim` lines. Blank lines are skipped, keys are
    /// lowercased, and a repeated token keeps its last vector.
    pub fn parse(text: &str, expected_dim: usize) -> Result<(Self, LoadReport)> {
        let mut table = EmbeddingTable::new(expected_dim);
        let mut report = LoadReport::default();
        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            let mut parts = line.split_whitespace();
            let Some(token) = parts.next() else { continue };
            let values: Vec<&str> = parts.collect();
            if values.len() != expected_dim {
                return Err(Error::EmbeddingLine {
                    line: lineno,
                    expected: expected_dim,
                    actual: values.len(),
                });
            }
            let mut v = Vec::with_capacity(expected_dim);
            for s in values {
                let x: f64 = s.parse().map_err(|_| Error::EmbeddingValue {
                    line: lineno,
                    value: s.to_string(),
                })?;
                if !x.is_finite() {
                    return Err(Error::EmbeddingValue {
                        line: lineno,
                        value: s.to_string(),
                    });
                }
                v.push(x);
            }
            let key = token.to_lowercase();
            if table.vectors.insert(key.clone(), v).is_some() {
                log::warn!("embedding line {lineno}: duplicate token {key:?}, keeping the later vector");
                report.duplicates.push((lineno, key));
            }
        }
        report.entries = table.vectors.len();
        Ok((table, report))
    }

    pub fn insert(&mut self, token: &str, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::Dimension {
                context: "embedding insert",
                expected: self.dim,
                actual: vector.len(),
            });
        }
        self.vectors.insert(token.to_lowercase(), vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        match self.vectors.get(token) {
            Some(v) => Some(v),
            None => self.vectors.get(&token.to_lowercase()).map(Vec::as_slice),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.vectors.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    /// Text serialization in the same `token v1 ... v_dim` format.
    pub fn to_text(&self) -> String {
        use core::fmt::Write;
        let mut s = String::new();
        for (k, v) in &self.vectors {
            s.push_str(k);
            for x in v {
                let _ = write!(s, " {x}");
            }
            s.push('\n');
        }
        s
    }
}

/// Fixed input-embedding matrix (`vocab.len() × table.dim()`, row-major).
/// Tokens found in the table use their vector; PAD is zero; other specials
/// and out-of-table tokens get seeded uniform(-0.5, 0.5) vectors.
pub fn embedding_matrix(vocab: &Vocabulary, table: &EmbeddingTable, seed: u64) -> Vec<f64> {
    use rand::Rng as _;
    let dim = table.dim();
    let mut rng = crate::seed::rng_for(seed, "oov-embeddings");
    let mut m = Vec::with_capacity(vocab.len() * dim);
    for (id, tok) in vocab.tokens().iter().enumerate() {
        let fallback: Vec<f64> = (0..dim).map(|_| rng.gen_range(-0.5..0.5)).collect();
        if id == crate::corpus::PAD {
            m.extend(core::iter::repeat_n(0.0, dim));
        } else if let (false, Some(v)) = (Vocabulary::is_special(id), table.get(tok)) {
            m.extend_from_slice(v);
        } else {
            m.extend(fallback);
        }
    }
    m
}

/// Embedding of a (possibly multiword) topic label: the vector of its first
/// token present in the table.
pub fn topic_vector(topic: &str, table: &EmbeddingTable) -> Option<Vec<f64>> {
    crate::corpus::tokenize(topic)
        .iter()
        .find_map(|t| table.get(t))
        .map(<[f64]>::to_vec)
}

fn norm(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|x| x * x).sum())
}

fn cosine_vectors(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    (dot / (norm(a) * norm(b))).clamp(-1.0, 1.0)
}

pub fn cosine(x: &str, u: &str, table: &EmbeddingTable) -> Result<f64> {
    let get = |t: &str| {
        let v = table
            .get(t)
            .ok_or_else(|| Error::MissingEmbedding(t.to_string()))?;
        if norm(v) == 0.0 {
            return Err(Error::ZeroNorm(t.to_string()));
        }
        Ok(v)
    };
    let (a, b) = (get(x)?, get(u)?);
    Ok(cosine_vectors(a, b))
}

/// Top-`k` vocabulary tokens starting with `letter`, by cosine similarity to
/// `topic`. Candidates must have a non-zero vector in the table. Ties go to
/// the lexicographically smaller token.
pub fn knn_with_initial(
    topic: &str,
    letter: char,
    k: usize,
    restrict_to: &Vocabulary,
    table: &EmbeddingTable,
) -> Result<Vec<(String, f64)>> {
    let tv = table
        .get(topic)
        .ok_or_else(|| Error::MissingEmbedding(topic.to_string()))?;
    if norm(tv) == 0.0 {
        return Err(Error::ZeroNorm(topic.to_string()));
    }
    let letter = letter.to_ascii_lowercase();
    let mut scored: Vec<(String, f64)> = restrict_to
        .tokens()
        .iter()
        .enumerate()
        .filter(|(id, t)| !Vocabulary::is_special(*id) && t.starts_with(letter))
        .filter_map(|(_, t)| {
            let v = table.get(t)?;
            (norm(v) > 0.0).then(|| (t.clone(), cosine_vectors(tv, v)))
        })
        .collect();
    scored.sort_by(|a, b| match b.1.total_cmp(&a.1) {
        Ordering::Equal => a.0.cmp(&b.0),
        o => o,
    });
    scored.truncate(k);
    Ok(scored)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn table(entries: &[(&str, &[f64])]) -> EmbeddingTable {
        let mut t = EmbeddingTable::new(entries[0].1.len());
        for (k, v) in entries {
            t.insert(k, v.to_vec()).unwrap();
        }
        t
    }

    #[test]
    fn parse_table_and_errors() {
        let (t, r) = EmbeddingTable::parse("a 1 2 3\nb 4 5 6\n", 3).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(r.entries, 2);
        let err = EmbeddingTable::parse("a 1 2 3\nb 1 2 3 4\n", 3).unwrap_err();
        assert_eq!(err, Error::EmbeddingLine { line: 2, expected: 3, actual: 4 });
        assert!(matches!(
            EmbeddingTable::parse("a 1 x 3", 3),
            Err(Error::EmbeddingValue { line: 1, .. })
        ));
    }

    #[test]
    fn duplicate_token_keeps_last() {
        let (t, r) = EmbeddingTable::parse("a 1 0\nb 0 1\nA 2 2\n", 2).unwrap();
        assert_eq!(t.get("a"), Some(&[2.0, 2.0][..]));
        assert_eq!(r.duplicates, vec![(3, "a".to_string())]);
    }

    #[test]
    fn cosine_examples() {
        let t = table(&[("x", &[1.0, 0.0]), ("y", &[0.0, 2.0]), ("z", &[1.0, 1.0]), ("o", &[0.0, 0.0])]);
        assert!((cosine("x", "x", &t).unwrap() - 1.0).abs() < 1e-9);
        assert!(cosine("x", "y", &t).unwrap().abs() < 1e-9);
        assert!((cosine("x", "z", &t).unwrap() - 0.707_106_78).abs() < 1e-6);
        assert!(matches!(cosine("x", "q", &t), Err(Error::MissingEmbedding(_))));
        assert!(matches!(cosine("x", "o", &t), Err(Error::ZeroNorm(_))));
        assert!((cosine("X", "Z", &t).unwrap() - 0.707_106_78).abs() < 1e-6);
    }

    #[test]
    fn knn_edge_cases() {
        let t = table(&[
            ("sea", &[1.0, 0.0]),
            ("salt", &[0.9, 0.1]),
            ("sand", &[0.5, 0.5]),
            ("tide", &[1.0, 0.0]),
        ]);
        let vocab = Vocabulary::from_tokens(["salt", "sand", "tide", "sky"].map(String::from));
        // sky has no vector, so only two candidates exist
        let got = knn_with_initial("sea", 's', 5, &vocab, &t).unwrap();
        let names: Vec<&str> = got.iter().map(|(s, _)| s.as_str()).collect();
        assert_eq!(names, ["salt", "sand"]);
        assert!(knn_with_initial("sea", 'q', 5, &vocab, &t).unwrap().is_empty());
        assert!(knn_with_initial("moon", 's', 5, &vocab, &t).is_err());
    }

    #[test]
    fn onehot_block_examples() {
        let b = char_onehot_block("poet").unwrap();
        for (r, c) in "poet".chars().enumerate() {
            assert_eq!(b.rows()[r][(c as u8 - b'a') as usize], 1);
        }
        assert!((4..8).all(|r| b.is_pad(r)));
        let full = char_onehot_block("abcdefgh").unwrap();
        assert!((0..8).all(|r| !full.is_pad(r)));
        assert!(char_onehot_block("po3t").is_err());
        assert!(char_onehot_block("").is_err());
        assert!(char_onehot_block("abcdefghi").is_err());
        let flat = b.flatten();
        assert_eq!(flat.len(), BLOCK_LEN);
        assert_eq!(flat.iter().sum::<f64>(), 8.0);
    }
}
