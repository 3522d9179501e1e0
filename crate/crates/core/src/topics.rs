//! Topic classifier (bidirectional word LSTM) and silver labeling.

use alloc::collections::BTreeMap;
use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::{Poem, TokenId, Vocabulary, EOL};
use crate::embed::{embedding_matrix, EmbeddingTable};
use crate::net::{
    fit, log_softmax, softmax, Direction, EpochRecord, Gradients, Linear, LstmStack, Objective, ParamId,
    ParameterStore, TrainConfig, TrainLog, Trainable,
};
use crate::seed::{derive_seed, Rng};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicLabel {
    pub id: usize,
    pub name: String,
}

/// Dense label map, ids ordered by topic name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicLabels {
    names: Vec<String>,
}

impl TopicLabels {
    pub fn from_names<I: IntoIterator<Item = String>>(names: I) -> Self {
        let set: BTreeSet<String> = names.into_iter().collect();
        TopicLabels {
            names: set.into_iter().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.names.binary_search_by(|n| n.as_str().cmp(name)).ok()
    }

    pub fn name(&self, id: usize) -> &str {
        &self.names[id]
    }

    pub fn labels(&self) -> impl Iterator<Item = TopicLabel> + '_ {
        self.names.iter().enumerate().map(|(id, n)| TopicLabel { id, name: n.clone() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicConfig {
    pub embed_dim: usize,
    pub hidden: usize,
    pub seed: u64,
}

impl TopicConfig {
    pub fn paper_scale(embed_dim: usize) -> Self {
        TopicConfig {
            embed_dim,
            hidden: 1024,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicExample {
    pub ids: Vec<TokenId>,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicClassifier {
    pub config: TopicConfig,
    pub labels: TopicLabels,
    pub vocab: Vocabulary,
    pub store: ParameterStore,
    embedding: ParamId,
    encoder: LstmStack,
    head: Linear,
}

impl TopicClassifier {
    pub fn new(config: TopicConfig, labels: TopicLabels, vocab: Vocabulary, table: &EmbeddingTable) -> Result<Self> {
        if table.dim() != config.embed_dim {
            return Err(Error::Dimension {
                context: "topic embedding table",
                expected: config.embed_dim,
                actual: table.dim(),
            });
        }
        let matrix = embedding_matrix(&vocab, table, derive_seed(config.seed, "topics-oov"));
        Ok(Self::with_matrix(config, labels, vocab, matrix))
    }

    /// Same shapes as a trained model, for loading stored arrays into.
    pub fn skeleton(config: TopicConfig, labels: TopicLabels, vocab: Vocabulary) -> Self {
        let n = vocab.len() * config.embed_dim;
        Self::with_matrix(config, labels, vocab, vec![0.0; n])
    }

    fn with_matrix(config: TopicConfig, labels: TopicLabels, vocab: Vocabulary, matrix: Vec<f64>) -> Self {
        let mut store = ParameterStore::new(derive_seed(config.seed, "topics-init"));
        let embedding = store.add_fixed("topics.embedding", &[vocab.len(), config.embed_dim], matrix);
        let encoder = LstmStack::new(
            &mut store,
            "topics.lstm",
            config.embed_dim,
            0,
            config.hidden,
            1,
            Direction::Bidirectional,
            0.0,
        );
        let head = Linear::new(&mut store, "topics.head", 2 * config.hidden, labels.len());
        TopicClassifier {
            config,
            labels,
            vocab,
            store,
            embedding,
            encoder,
            head,
        }
    }

    /// BOS, line tokens separated by EOL, EOS.
    pub fn encode(&self, poem: &Poem) -> Result<Vec<TokenId>> {
        if poem.token_count() == 0 {
            return Err(Error::EmptyPoem);
        }
        let ids = self.vocab.encode_poem(&poem.lines);
        debug_assert!(ids.iter().filter(|&&i| i == EOL).count() + 1 == poem.n_lines());
        Ok(ids)
    }

    pub fn example(&self, poem: &Poem) -> Result<Option<TopicExample>> {
        let Some(label) = poem.topic.as_deref().and_then(|t| self.labels.id(t)) else {
            return Ok(None);
        };
        Ok(Some(TopicExample {
            ids: self.encode(poem)?,
            label,
        }))
    }

    fn inputs(&self, ids: &[TokenId]) -> Result<Vec<Vec<f64>>> {
        let d = self.config.embed_dim;
        let m = self.store.get(self.embedding);
        ids.iter()
            .map(|&id| {
                if id >= self.vocab.len() {
                    return Err(Error::TokenOutOfRange {
                        id,
                        size: self.vocab.len(),
                    });
                }
                Ok(m[id * d..(id + 1) * d].to_vec())
            })
            .collect()
    }

    fn logits(&self, ids: &[TokenId]) -> Result<(crate::net::StackTrace, Vec<f64>, Vec<f64>)> {
        let trace = self.encoder.forward(&self.store, &self.inputs(ids)?, None, None)?;
        let h = self.config.hidden;
        let last = trace.outputs.len() - 1;
        let mut feat = trace.outputs[last][..h].to_vec();
        feat.extend_from_slice(&trace.outputs[0][h..]);
        let logits = self.head.forward(&self.store, &feat);
        Ok((trace, feat, logits))
    }

    pub fn distribution(&self, ids: &[TokenId]) -> Result<Vec<f64>> {
        if ids.is_empty() {
            return Err(Error::EmptyPoem);
        }
        Ok(softmax(&self.logits(ids)?.2))
    }

    fn nll(&self, ex: &TopicExample, grads: Option<&mut Gradients>) -> Result<f64> {
        let (trace, feat, logits) = self.logits(&ex.ids)?;
        let logp = log_softmax(&logits);
        if let Some(g) = grads {
            let mut d: Vec<f64> = logp.iter().map(|&l| libm::exp(l)).collect();
            d[ex.label] -= 1.0;
            let df = self.head.backward(&self.store, g, &feat, &d);
            let h = self.config.hidden;
            let n = trace.outputs.len();
            let mut dout = vec![vec![0.0; 2 * h]; n];
            for k in 0..h {
                dout[n - 1][k] += df[k];
                dout[0][h + k] += df[h + k];
            }
            self.encoder.backward(&self.store, g, &trace, &dout);
        }
        Ok(-logp[ex.label])
    }

    pub fn loss(&self, ex: &TopicExample) -> Result<f64> {
        self.nll(ex, None)
    }

    pub fn loss_and_grad(&self, ex: &TopicExample, grads: &mut Gradients) -> Result<f64> {
        self.nll(ex, Some(grads))
    }

    pub fn accuracy(&self, data: &[TopicExample]) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::EmptyDataset("topic evaluation set"));
        }
        let mut hits = 0usize;
        for ex in data {
            if argmax(&self.distribution(&ex.ids)?) == ex.label {
                hits += 1;
            }
        }
        Ok(hits as f64 / data.len() as f64)
    }

    /// Topic distribution for a poem.
    pub fn predict_topic(&self, poem: &Poem) -> Result<Vec<f64>> {
        self.distribution(&self.encode(poem)?)
    }

    /// Argmax topic name and its probability.
    pub fn predict_label(&self, poem: &Poem) -> Result<(&str, f64)> {
        let p = self.predict_topic(poem)?;
        let i = argmax(&p);
        Ok((self.labels.name(i), p[i]))
    }

    /// Attaches the argmax topic and its confidence to every poem. Poems
    /// without tokens keep no topic and are counted under `skipped`.
    pub fn label_corpus(&self, poems: &[Poem]) -> LabelingReport {
        let mut out = Vec::with_capacity(poems.len());
        let mut counts: BTreeMap<String, usize> = self.labels.names.iter().map(|n| (n.clone(), 0)).collect();
        let mut skipped = 0;
        for poem in poems {
            let mut p = poem.clone();
            match self.predict_label(poem) {
                Ok((name, conf)) => {
                    *counts.get_mut(name).expect("closed label set") += 1;
                    p.topic = Some(name.into());
                    p.topic_confidence = Some(conf);
                }
                Err(e) => {
                    log::warn!("poem left unlabeled: {e}");
                    skipped += 1;
                }
            }
            out.push(p);
        }
        LabelingReport {
            poems: out,
            counts,
            skipped,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelingReport {
    pub poems: Vec<Poem>,
    pub counts: BTreeMap<String, usize>,
    pub skipped: usize,
}

/// First index of the maximum.
pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in p.iter().enumerate() {
        if x > p[best] {
            best = i;
        }
    }
    best
}

impl Trainable for TopicClassifier {
    type Example = TopicExample;

    fn store(&self) -> &ParameterStore {
        &self.store
    }

    fn store_mut(&mut self) -> &mut ParameterStore {
        &mut self.store
    }

    fn accumulate(&self, ex: &TopicExample, grads: &mut Gradients, _rng: &mut Rng) -> Result<(f64, usize)> {
        Ok((self.nll(ex, Some(grads))?, 1))
    }
}

/// Trains the classifier on gold-labelled poems, keeping the weights with
/// the best dev accuracy.
pub fn train_topic_model(
    config: TopicConfig,
    vocab: Vocabulary,
    table: &EmbeddingTable,
    train: &[Poem],
    dev: &[Poem],
    hyper: &TrainConfig,
    observer: &mut dyn FnMut(&EpochRecord),
) -> Result<(TopicClassifier, TrainLog)> {
    if train.is_empty() {
        return Err(Error::MissingCorpus("gold-labelled poems"));
    }
    let mut names = Vec::with_capacity(train.len());
    for (i, p) in train.iter().enumerate() {
        match &p.topic {
            Some(t) => names.push(t.clone()),
            None => return Err(Error::Config(format!("training poem {i} has no gold topic"))),
        }
    }
    let labels = TopicLabels::from_names(names);
    if labels.len() < 2 {
        return Err(Error::DegenerateTopics(labels.len()));
    }
    let mut model = TopicClassifier::new(config, labels, vocab, table)?;
    let tr = collect(&model, train)?;
    let mut dv = collect(&model, dev)?;
    if dv.is_empty() {
        log::warn!("no usable dev poems; selecting on training accuracy");
        dv = tr.clone();
    }
    let log = fit(
        &mut model,
        &tr,
        hyper,
        Objective::Maximize,
        |m: &TopicClassifier| m.accuracy(&dv),
        observer,
    )?;
    Ok((model, log))
}

fn collect(model: &TopicClassifier, poems: &[Poem]) -> Result<Vec<TopicExample>> {
    let mut out = Vec::new();
    for p in poems {
        match model.example(p)? {
            Some(ex) => out.push(ex),
            None => log::warn!("poem with topic {:?} outside the label set skipped", p.topic),
        }
    }
    Ok(out)
}
