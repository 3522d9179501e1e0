//! Acrostic poem generation under three simultaneous constraints: line
//! initials spell a word, content follows that word's topic, and line-final
//! words rhyme according to a fixed scheme.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, checkpoints
//! and the command line live in the companion `acrostic` crate.
//!
//! Pipeline overview:
//!
//! - [`corpus`]: tokenization, splitting long poems into 4–8 line training
//!   poems, vocabulary, per-poem acrostic conditioning.
//! - [`embed`]: fixed word vectors, cosine similarity, initial-filtered kNN,
//!   character one-hot blocks.
//! - [`net`]: the small neural substrate (LSTM stacks, linear layers, masked
//!   softmax, Adam, early stopping, finite-difference gradient checks).
//! - [`poemlm`]: the conditional poem language model.
//! - [`rhymer`]: the character-level rhyming-word model and its beam search.
//! - [`topics`]: the topic classifier used for silver labeling.
//! - [`decode`]: the constrained generation engine.
//! - [`synth`]: deterministic synthetic corpora and embeddings for desk runs.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod corpus;
pub mod decode;
pub mod embed;
mod error;
pub mod net;
pub mod poemlm;
pub mod rhymer;
pub mod seed;
pub mod synth;
pub mod topics;

pub use error::{Error, Result};
