//! Model checkpoints.
//!
//! Layout: the 8-byte magic `ACRCKPT1`, a little-endian `u64` header length,
//! a JSON header (model kind, config, vocabulary, labels, metadata, array
//! names and shapes), then every array as raw little-endian `f64` in header
//! order. Values round-trip bit-exactly.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use acrostic_core::corpus::Vocabulary;
use acrostic_core::net::ParameterStore;
use acrostic_core::poemlm::{LmConfig, PoemLm};
use acrostic_core::rhymer::{RhymerConfig, RhymerModel};
use acrostic_core::topics::{TopicClassifier, TopicConfig, TopicLabels};
use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const MAGIC: &[u8; 8] = b"ACRCKPT1";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Lm,
    Rhymer,
    Topics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArraySpec {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub format_version: u32,
    pub kind: ModelKind,
    pub config: Value,
    pub vocab: Option<Vocabulary>,
    pub labels: Option<TopicLabels>,
    pub metadata: BTreeMap<String, Value>,
    pub optimizer_step: u64,
    pub arrays: Vec<ArraySpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: Header,
    pub data: Vec<Vec<f64>>,
}

fn capture(
    kind: ModelKind,
    config: Value,
    vocab: Option<Vocabulary>,
    labels: Option<TopicLabels>,
    store: &ParameterStore,
    metadata: BTreeMap<String, Value>,
) -> Checkpoint {
    let mut arrays = Vec::new();
    let mut data = Vec::new();
    for id in store.ids() {
        let info = store.info(id);
        arrays.push(ArraySpec {
            name: info.name.clone(),
            shape: info.shape.clone(),
        });
        data.push(store.get(id).to_vec());
    }
    Checkpoint {
        header: Header {
            format_version: FORMAT_VERSION,
            kind,
            config,
            vocab,
            labels,
            metadata,
            optimizer_step: store.step(),
            arrays,
        },
        data,
    }
}

impl Checkpoint {
    pub fn from_lm(m: &PoemLm, metadata: BTreeMap<String, Value>) -> Self {
        let cfg = serde_json::to_value(&m.config).expect("config serializes");
        capture(ModelKind::Lm, cfg, Some(m.vocab.clone()), None, &m.store, metadata)
    }

    pub fn from_rhymer(m: &RhymerModel, metadata: BTreeMap<String, Value>) -> Self {
        let cfg = serde_json::to_value(&m.config).expect("config serializes");
        capture(ModelKind::Rhymer, cfg, None, None, &m.store, metadata)
    }

    pub fn from_topics(m: &TopicClassifier, metadata: BTreeMap<String, Value>) -> Self {
        let cfg = serde_json::to_value(&m.config).expect("config serializes");
        capture(
            ModelKind::Topics,
            cfg,
            Some(m.vocab.clone()),
            Some(m.labels.clone()),
            &m.store,
            metadata,
        )
    }

    fn expect_kind(&self, kind: ModelKind) -> Result<()> {
        ensure!(
            self.header.kind == kind,
            "checkpoint holds a {:?} model, expected {:?}",
            self.header.kind,
            kind
        );
        Ok(())
    }

    fn fill(&self, store: &mut ParameterStore) -> Result<()> {
        ensure!(
            self.header.arrays.len() == store.len(),
            "checkpoint has {} arrays, model expects {}",
            self.header.arrays.len(),
            store.len()
        );
        for (spec, values) in self.header.arrays.iter().zip(&self.data) {
            store
                .load(&spec.name, &spec.shape, values)
                .with_context(|| format!("loading array {}", spec.name))?;
        }
        store.set_step(self.header.optimizer_step);
        Ok(())
    }

    fn vocab(&self) -> Result<Vocabulary> {
        self.header.vocab.clone().context("checkpoint has no vocabulary")
    }

    pub fn into_lm(&self) -> Result<PoemLm> {
        self.expect_kind(ModelKind::Lm)?;
        let cfg: LmConfig = serde_json::from_value(self.header.config.clone())?;
        let mut m = PoemLm::skeleton(cfg, self.vocab()?);
        self.fill(&mut m.store)?;
        Ok(m)
    }

    pub fn into_rhymer(&self) -> Result<RhymerModel> {
        self.expect_kind(ModelKind::Rhymer)?;
        let cfg: RhymerConfig = serde_json::from_value(self.header.config.clone())?;
        let mut m = RhymerModel::new(cfg);
        self.fill(&mut m.store)?;
        Ok(m)
    }

    pub fn into_topics(&self) -> Result<TopicClassifier> {
        self.expect_kind(ModelKind::Topics)?;
        let cfg: TopicConfig = serde_json::from_value(self.header.config.clone())?;
        let labels = self.header.labels.clone().context("checkpoint has no label map")?;
        let mut m = TopicClassifier::skeleton(cfg, labels, self.vocab()?);
        self.fill(&mut m.store)?;
        Ok(m)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = serde_json::to_vec(&self.header).expect("header serializes");
        let n: usize = self.data.iter().map(Vec::len).sum();
        let mut out = Vec::with_capacity(16 + header.len() + 8 * n);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for a in &self.data {
            for x in a {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        ensure!(bytes.len() >= 16 && &bytes[..8] == MAGIC, "not a checkpoint file");
        let hlen = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
        let body = &bytes[16..];
        ensure!(body.len() >= hlen, "truncated checkpoint header");
        let header: Header = serde_json::from_slice(&body[..hlen]).context("bad checkpoint header")?;
        if header.format_version != FORMAT_VERSION {
            bail!("unsupported checkpoint version {}", header.format_version);
        }
        let mut rest = &body[hlen..];
        let mut data = Vec::with_capacity(header.arrays.len());
        for spec in &header.arrays {
            let n: usize = spec.shape.iter().product();
            ensure!(rest.len() >= 8 * n, "truncated data for array {}", spec.name);
            let (chunk, tail) = rest.split_at(8 * n);
            data.push(
                chunk
                    .chunks_exact(8)
                    .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
                    .collect(),
            );
            rest = tail;
        }
        ensure!(rest.is_empty(), "{} trailing bytes after checkpoint data", rest.len());
        Ok(Checkpoint { header, data })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).with_context(|| format!("cannot write checkpoint {}", path.display()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).with_context(|| format!("cannot read checkpoint {}", path.display()))?;
        Self::from_bytes(&bytes).with_context(|| format!("{}: invalid checkpoint", path.display()))
    }
}
