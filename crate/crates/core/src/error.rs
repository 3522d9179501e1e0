use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("embedding line {line}: expected {expected} values, found {actual}")]
    EmbeddingLine {
        line: usize,
        expected: usize,
        actual: usize,
    },
    #[error("embedding line {line}: unparseable value {value:?}")]
    EmbeddingValue { line: usize, value: String },
    #[error("token {0:?} has no embedding")]
    MissingEmbedding(String),
    #[error("token {0:?} has a zero-norm embedding")]
    ZeroNorm(String),
    #[error("invalid acrostic word {word:?}: {reason}")]
    InvalidWord { word: String, reason: &'static str },
    #[error("mask excludes every entry")]
    EmptyMask,
    #[error("no vocabulary token starts with {0:?}")]
    NoTokenForLetter(char),
    #[error("token id {id} out of range for vocabulary of size {size}")]
    TokenOutOfRange { id: usize, size: usize },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("line count {0} outside 4..=8")]
    LineCount(usize),
    #[error("empty dataset: {0}")]
    EmptyDataset(&'static str),
    #[error("missing corpus: {0}")]
    MissingCorpus(&'static str),
    #[error("topic corpus has {0} distinct topic(s); at least 2 are required")]
    DegenerateTopics(usize),
    #[error("poem has no lines")]
    EmptyPoem,
    #[error("beam search produced no non-empty candidate")]
    DegenerateBeams,
    #[error("parameter {name:?}: {reason}")]
    Param { name: String, reason: String },
    #[error("invalid configuration: {0}")]
    Config(String),
}
