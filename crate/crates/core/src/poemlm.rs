//! The conditional poem language model: a unidirectional LSTM stack over
//! fixed word embeddings, fed at every step with the topic vector, the 8×27
//! acrostic block and the target line count.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::{derive_training_condition, Poem, RawDocument, TokenId, Vocabulary, BOS, EOL, EOS, MAX_LINES};
use crate::embed::{embedding_matrix, topic_vector, CharBlock, EmbeddingTable, BLOCK_LEN};
use crate::net::{
    fit, log_softmax, softmax, Direction, Gradients, Linear, LstmStack, Objective, ParamId, ParameterStore,
    StackState, TrainConfig, TrainLog, Trainable,
};
use crate::seed::{derive_seed, Rng};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmConfig {
    /// Word-embedding width; the topic vector has the same width.
    pub embed_dim: usize,
    pub topic_channel: bool,
    pub hidden: usize,
    pub n_layers: usize,
    pub dropout: f64,
    pub seed: u64,
}

impl LmConfig {
    /// Reference sizes: 3×1024, dropout 0.4, 100-dim embeddings.
    pub fn paper_scale(topic_channel: bool) -> Self {
        LmConfig {
            embed_dim: 100,
            topic_channel,
            hidden: 1024,
            n_layers: 3,
            dropout: 0.4,
            seed: 0,
        }
    }

    pub fn condition_dim(&self) -> usize {
        self.topic_dim() + BLOCK_LEN + 1
    }

    pub fn topic_dim(&self) -> usize {
        if self.topic_channel {
            self.embed_dim
        } else {
            0
        }
    }

    pub fn input_dim(&self) -> usize {
        self.embed_dim + self.condition_dim()
    }
}

/// The per-poem conditioning channels (`u`, `v`, `w`). They are constant
/// over all steps of one poem.
#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub topic: Vec<f64>,
    pub acrostic: CharBlock,
    pub line_count: f64,
    /// All channels zero (plain-text pretraining).
    pub blank: bool,
}

impl Condition {
    pub fn new(topic: Vec<f64>, acrostic: CharBlock, line_count: usize) -> Self {
        Condition {
            topic,
            acrostic,
            line_count: line_count as f64,
            blank: false,
        }
    }

    pub fn blank(embed_dim: usize) -> Self {
        Condition {
            topic: vec![0.0; embed_dim],
            acrostic: CharBlock::all_pad(),
            line_count: 0.0,
            blank: true,
        }
    }

    /// Training-time condition: gold/silver topic embedding (zero when the
    /// label has no in-table token), actual line initials, line count.
    pub fn for_poem(poem: &Poem, table: &EmbeddingTable) -> Self {
        let topic = poem
            .topic
            .as_deref()
            .and_then(|t| topic_vector(t, table))
            .unwrap_or_else(|| vec![0.0; table.dim()]);
        let spec = derive_training_condition(poem);
        Condition::new(topic, spec.block(), spec.n_lines)
    }
}

/// LM variant: pretraining, finetuning corpus and topic channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LmVariant {
    pub pretrain: Pretrain,
    pub finetune_corpus: FinetuneCorpus,
    pub topic_channel: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pretrain {
    None,
    PlainText,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinetuneCorpus {
    GoldOnly,
    GoldPlusSilver,
}

impl LmVariant {
    pub const ALL: [&'static str; 6] = ["gold+", "gold-", "pred/gold+", "pred/gold-", "wiki+", "wiki-"];

    pub fn parse(name: &str) -> Option<Self> {
        let lower = name.to_ascii_lowercase();
        let (base, sign) = lower.split_at(lower.len().checked_sub(1)?);
        let topic_channel = match sign {
            "+" => true,
            "-" => false,
            _ => return None,
        };
        let (pretrain, finetune_corpus) = match base {
            "gold" => (Pretrain::None, FinetuneCorpus::GoldOnly),
            "pred/gold" | "pred-gold" => (Pretrain::None, FinetuneCorpus::GoldPlusSilver),
            "wiki" => (Pretrain::PlainText, FinetuneCorpus::GoldPlusSilver),
            _ => return None,
        };
        Some(LmVariant {
            pretrain,
            finetune_corpus,
            topic_channel,
        })
    }

    pub fn name(&self) -> String {
        let base = match (self.pretrain, self.finetune_corpus) {
            (Pretrain::PlainText, _) => "WIKI",
            (Pretrain::None, FinetuneCorpus::GoldOnly) => "GOLD",
            (Pretrain::None, FinetuneCorpus::GoldPlusSilver) => "PRED/GOLD",
        };
        let mut s = base.to_string();
        s.push(if self.topic_channel { '+' } else { '-' });
        s
    }
}

/// One training sequence: BOS-initial token ids and its static condition
/// vector.
#[derive(Debug, Clone, PartialEq)]
pub struct LmExample {
    pub ids: Vec<TokenId>,
    pub condition: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoemLm {
    pub config: LmConfig,
    pub vocab: Vocabulary,
    pub store: ParameterStore,
    embedding: ParamId,
    stack: LstmStack,
    output: Linear,
}

impl PoemLm {
    /// Builds an untrained model whose fixed input embeddings come from
    /// `table` (dimension must equal `config.embed_dim`).
    pub fn new(config: LmConfig, vocab: Vocabulary, table: &EmbeddingTable) -> Result<Self> {
        if table.dim() != config.embed_dim {
            return Err(Error::Dimension {
                context: "lm embedding table",
                expected: config.embed_dim,
                actual: table.dim(),
            });
        }
        let matrix = embedding_matrix(&vocab, table, derive_seed(config.seed, "lm-oov"));
        Ok(Self::with_embedding_matrix(config, vocab, matrix))
    }

    fn with_embedding_matrix(config: LmConfig, vocab: Vocabulary, matrix: Vec<f64>) -> Self {
        let mut store = ParameterStore::new(derive_seed(config.seed, "lm-init"));
        let v = vocab.len();
        let embedding = store.add_fixed("lm.embedding", &[v, config.embed_dim], matrix);
        let stack = LstmStack::new(
            &mut store,
            "lm.lstm",
            config.embed_dim,
            config.condition_dim(),
            config.hidden,
            config.n_layers,
            Direction::Forward,
            config.dropout,
        );
        let output = Linear::new(&mut store, "lm.out", config.hidden, v);
        PoemLm {
            config,
            vocab,
            store,
            embedding,
            stack,
            output,
        }
    }

    /// Skeleton for loading a checkpoint: same shapes, embedding zeroed until
    /// the stored arrays are loaded.
    pub fn skeleton(config: LmConfig, vocab: Vocabulary) -> Self {
        let n = vocab.len() * config.embed_dim;
        Self::with_embedding_matrix(config, vocab, vec![0.0; n])
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    /// Zeroes the output layer so every next-token distribution is uniform.
    pub fn zero_output(&mut self) {
        self.store.get_mut(self.output.weight()).fill(0.0);
        self.store.get_mut(self.output.bias()).fill(0.0);
    }

    fn embed(&self, id: TokenId) -> Result<&[f64]> {
        if id >= self.vocab.len() {
            return Err(Error::TokenOutOfRange {
                id,
                size: self.vocab.len(),
            });
        }
        let d = self.config.embed_dim;
        Ok(&self.store.get(self.embedding)[id * d..(id + 1) * d])
    }

    /// Static condition vector `[u; v; w]`. The topic part is omitted when
    /// the topic channel is off.
    pub fn condition_vector(&self, cond: &Condition) -> Result<Vec<f64>> {
        let mut s = Vec::with_capacity(self.config.condition_dim());
        if self.config.topic_channel {
            if cond.topic.len() != self.config.embed_dim {
                return Err(Error::Dimension {
                    context: "topic vector",
                    expected: self.config.embed_dim,
                    actual: cond.topic.len(),
                });
            }
            if cond.blank {
                s.extend(core::iter::repeat_n(0.0, self.config.embed_dim));
            } else {
                s.extend_from_slice(&cond.topic);
            }
        }
        if cond.blank {
            s.extend(core::iter::repeat_n(0.0, BLOCK_LEN + 1));
        } else {
            s.extend(cond.acrostic.flatten());
            s.push(cond.line_count);
        }
        Ok(s)
    }

    pub fn example(&self, poem: &Poem, table: &EmbeddingTable) -> Result<LmExample> {
        Ok(LmExample {
            ids: self.vocab.encode_poem(&poem.lines),
            condition: self.condition_vector(&Condition::for_poem(poem, table))?,
        })
    }

    /// Plain-text documents as blank-conditioned sequences of at most 8
    /// lines each.
    pub fn plain_examples(&self, docs: &[RawDocument]) -> Result<Vec<LmExample>> {
        let cond = self.condition_vector(&Condition::blank(self.config.embed_dim))?;
        let mut out = Vec::new();
        for doc in docs {
            let lines: Vec<Vec<String>> = doc
                .lines
                .iter()
                .map(|l| crate::corpus::tokenize(l))
                .filter(|l| !l.is_empty())
                .collect();
            for chunk in lines.chunks(MAX_LINES) {
                out.push(LmExample {
                    ids: self.vocab.encode_poem(chunk),
                    condition: cond.clone(),
                });
            }
        }
        Ok(out)
    }

    /// Sum of target NLL over one sequence, optionally accumulating
    /// gradients (with dropout when `rng` is given).
    fn sequence_nll(
        &self,
        ex: &LmExample,
        grads: Option<&mut Gradients>,
        rng: Option<&mut Rng>,
    ) -> Result<(f64, usize)> {
        if ex.ids.len() < 2 {
            return Ok((0.0, 0));
        }
        let inputs: Vec<Vec<f64>> = ex.ids[..ex.ids.len() - 1]
            .iter()
            .map(|&id| self.embed(id).map(<[f64]>::to_vec))
            .collect::<Result<_>>()?;
        let targets = &ex.ids[1..];
        let trace = self.stack.forward(&self.store, &inputs, Some(&ex.condition), rng)?;
        let mut nll = 0.0;
        let mut d_out = Vec::with_capacity(targets.len());
        let want_grad = grads.is_some();
        let mut grads = grads;
        for (h, &t) in trace.outputs.iter().zip(targets) {
            if t >= self.vocab.len() {
                return Err(Error::TokenOutOfRange {
                    id: t,
                    size: self.vocab.len(),
                });
            }
            let logits = self.output.forward(&self.store, h);
            let logp = log_softmax(&logits);
            nll -= logp[t];
            if let Some(g) = grads.as_deref_mut() {
                let mut dlogits: Vec<f64> = logp.iter().map(|&l| libm::exp(l)).collect();
                dlogits[t] -= 1.0;
                d_out.push(self.output.backward(&self.store, g, h, &dlogits));
            }
        }
        if want_grad {
            if let Some(g) = grads {
                self.stack.backward(&self.store, g, &trace, &d_out);
            }
        }
        Ok((nll, targets.len()))
    }

    /// Per-sequence NLL and its gradient; exposed for gradient checking.
    pub fn loss_and_grad(&self, ex: &LmExample, grads: &mut Gradients, rng: Option<&mut Rng>) -> Result<f64> {
        Ok(self.sequence_nll(ex, Some(grads), rng)?.0)
    }

    pub fn loss(&self, ex: &LmExample, rng: Option<&mut Rng>) -> Result<f64> {
        Ok(self.sequence_nll(ex, None, rng)?.0)
    }

    pub fn session(&self, cond: &Condition) -> Result<LmSession<'_>> {
        let s = self.condition_vector(cond)?;
        Ok(LmSession {
            model: self,
            state: self.stack.start(&self.store, Some(&s))?,
        })
    }

    /// Next-token distribution after `prefix` (which must start with BOS).
    pub fn lm_forward(&self, prefix: &[TokenId], cond: &Condition) -> Result<Vec<f64>> {
        if prefix.first() != Some(&BOS) {
            return Err(Error::Config("prefix must start with BOS".into()));
        }
        let mut s = self.session(cond)?;
        let mut logits = Vec::new();
        for &id in prefix {
            logits = s.feed(id)?;
        }
        Ok(softmax(&logits))
    }

    /// `log p(poem)`: summed token log-probabilities including every EOL and
    /// the final EOS.
    pub fn poem_log_prob(&self, poem: &Poem, cond: &Condition) -> Result<f64> {
        let ex = LmExample {
            ids: self.vocab.encode_poem(&poem.lines),
            condition: self.condition_vector(cond)?,
        };
        Ok(-self.sequence_nll(&ex, None, None)?.0)
    }

    /// `exp(total NLL / total targets)`; targets include EOL/EOS, exclude BOS.
    pub fn perplexity(&self, data: &[LmExample]) -> Result<f64> {
        let (mut nll, mut n) = (0.0, 0usize);
        for ex in data {
            let (l, c) = self.sequence_nll(ex, None, None)?;
            nll += l;
            n += c;
        }
        if n == 0 {
            return Err(Error::EmptyDataset("perplexity needs at least one target token"));
        }
        Ok(libm::exp(nll / n as f64))
    }
}

impl Trainable for PoemLm {
    type Example = LmExample;

    fn store(&self) -> &ParameterStore {
        &self.store
    }

    fn store_mut(&mut self) -> &mut ParameterStore {
        &mut self.store
    }

    fn accumulate(&self, ex: &LmExample, grads: &mut Gradients, rng: &mut Rng) -> Result<(f64, usize)> {
        self.sequence_nll(ex, Some(grads), Some(rng))
    }
}

/// Step-by-step inference state for one poem.
#[derive(Debug, Clone)]
pub struct LmSession<'m> {
    model: &'m PoemLm,
    state: StackState,
}

impl LmSession<'_> {
    /// Feeds one token and returns next-token logits.
    pub fn feed(&mut self, id: TokenId) -> Result<Vec<f64>> {
        let x = self.model.embed(id)?.to_vec();
        let h = self.model.stack.step(&self.model.store, &mut self.state, &x)?;
        Ok(self.model.output.forward(&self.model.store, &h))
    }

    pub fn model(&self) -> &PoemLm {
        self.model
    }
}

/// Corpora available to [`train_variant`].
#[derive(Debug, Clone, Default)]
pub struct LmCorpora<'a> {
    pub known_train: &'a [Poem],
    pub known_dev: &'a [Poem],
    /// Unknown-topic poems carrying silver labels.
    pub silver: &'a [Poem],
    pub plain_text: &'a [RawDocument],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmHyper {
    pub train: TrainConfig,
    pub pretrain: TrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantLog {
    pub variant: String,
    pub pretrain: Option<TrainLog>,
    pub finetune: TrainLog,
}

fn check_prerequisites(variant: &LmVariant, corpora: &LmCorpora<'_>) -> Result<()> {
    if corpora.known_train.is_empty() {
        return Err(Error::MissingCorpus("known-topic training poems"));
    }
    if corpora.known_dev.is_empty() {
        return Err(Error::MissingCorpus("known-topic development poems"));
    }
    if variant.finetune_corpus == FinetuneCorpus::GoldPlusSilver
        && (corpora.silver.is_empty() || corpora.silver.iter().any(|p| p.topic.is_none()))
    {
        return Err(Error::MissingCorpus("silver-labeled unknown-topic poems (run label first)"));
    }
    if variant.pretrain == Pretrain::PlainText && corpora.plain_text.is_empty() {
        return Err(Error::MissingCorpus("plain-text pretraining corpus"));
    }
    Ok(())
}

/// Trains one LM variant end to end. Prerequisites are checked before any
/// training starts. Early stopping uses development-set perplexity.
pub fn train_variant(
    variant: LmVariant,
    base: &LmConfig,
    corpora: &LmCorpora<'_>,
    vocab: &Vocabulary,
    table: &EmbeddingTable,
    hyper: &LmHyper,
    observer: &mut dyn FnMut(&str, &crate::net::EpochRecord),
) -> Result<(PoemLm, VariantLog)> {
    check_prerequisites(&variant, corpora)?;
    let config = LmConfig {
        topic_channel: variant.topic_channel,
        ..base.clone()
    };
    let mut model = PoemLm::new(config, vocab.clone(), table)?;
    let dev: Vec<LmExample> = corpora
        .known_dev
        .iter()
        .map(|p| model.example(p, table))
        .collect::<Result<_>>()?;
    let eval = |m: &PoemLm| m.perplexity(&dev);

    let pretrain_log = if variant.pretrain == Pretrain::PlainText {
        let plain = model.plain_examples(corpora.plain_text)?;
        let log = fit(&mut model, &plain, &hyper.pretrain, Objective::Minimize, eval, &mut |r| {
            observer("pretrain", r)
        })?;
        model.store.reset_optimizer();
        Some(log)
    } else {
        None
    };

    let mut train: Vec<LmExample> = corpora
        .known_train
        .iter()
        .map(|p| model.example(p, table))
        .collect::<Result<_>>()?;
    if variant.finetune_corpus == FinetuneCorpus::GoldPlusSilver {
        for p in corpora.silver {
            train.push(model.example(p, table)?);
        }
    }
    let finetune = fit(&mut model, &train, &hyper.train, Objective::Minimize, eval, &mut |r| {
        observer("train", r)
    })?;
    let log = VariantLog {
        variant: variant.name(),
        pretrain: pretrain_log,
        finetune,
    };
    Ok((model, log))
}

/// Ids of the tokens on a poem line boundary.
pub fn is_boundary(id: TokenId) -> bool {
    id == EOL || id == EOS
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::SourceTag;
    use crate::net::{grad_check, GradCheckConfig};
    use rand::SeedableRng;

    fn toks(line: &str) -> Vec<String> {
        line.split(' ').map(String::from).collect()
    }

    fn tiny_table(dim: usize) -> EmbeddingTable {
        let mut t = EmbeddingTable::new(dim);
        for (i, w) in ["sea", "salt", "wave", "fire", "ash", "burn", "the", "."].iter().enumerate() {
            let v = (0..dim).map(|j| libm::sin((i * 7 + j) as f64)).collect();
            t.insert(w, v).unwrap();
        }
        t
    }

    fn tiny_model(topic: bool, hidden: usize, layers: usize) -> (PoemLm, EmbeddingTable) {
        let table = tiny_table(4);
        let vocab = Vocabulary::from_tokens(["sea", "salt", "wave", "fire", "ash", "burn", "the", "."].map(String::from));
        let cfg = LmConfig {
            embed_dim: 4,
            topic_channel: topic,
            hidden,
            n_layers: layers,
            dropout: 0.3,
            seed: 1,
        };
        (PoemLm::new(cfg, vocab, &table).unwrap(), table)
    }

    fn poem(topic: &str) -> Poem {
        Poem::new(
            vec![toks("the sea"), toks("salt wave ."), toks("sea"), toks("wave .")],
            Some(topic.to_string()),
            SourceTag::KnownTopic,
        )
    }

    #[test]
    fn input_dimension_formula() {
        let (m, _) = tiny_model(true, 3, 1);
        assert_eq!(m.config.input_dim(), 4 + 4 + 216 + 1);
        let (m, _) = tiny_model(false, 3, 1);
        assert_eq!(m.config.input_dim(), 4 + 216 + 1);
    }

    #[test]
    fn zeroed_output_is_uniform() {
        let (mut m, table) = tiny_model(true, 3, 2);
        m.zero_output();
        let p = poem("sea");
        let cond = Condition::for_poem(&p, &table);
        let dist = m.lm_forward(&[BOS, 5, 6], &cond).unwrap();
        let v = m.vocab_size() as f64;
        assert!(dist.iter().all(|&x| (x - 1.0 / v).abs() < 1e-12));
        let lp = m.poem_log_prob(&p, &cond).unwrap();
        let n = m.vocab.encode_poem(&p.lines).len() - 1;
        assert!((lp + n as f64 * libm::log(v)).abs() < 1e-9);
        let ex = m.example(&p, &table).unwrap();
        assert!((m.perplexity(&[ex]).unwrap() - v).abs() < 1e-6);
    }

    #[test]
    fn log_prob_matches_stepwise_accumulation() {
        let (m, table) = tiny_model(true, 5, 2);
        let p = poem("fire");
        let cond = Condition::for_poem(&p, &table);
        let ids = m.vocab.encode_poem(&p.lines);
        let mut s = m.session(&cond).unwrap();
        let mut acc = 0.0;
        for w in ids.windows(2) {
            let logits = s.feed(w[0]).unwrap();
            acc += log_softmax(&logits)[w[1]];
        }
        let direct = m.poem_log_prob(&p, &cond).unwrap();
        assert!((acc - direct).abs() < 1e-10);
        let dist = m.lm_forward(&ids[..3], &cond).unwrap();
        assert!((dist.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert_eq!(dist, m.lm_forward(&ids[..3], &cond).unwrap());
    }

    #[test]
    fn forward_rejects_bad_ids() {
        let (m, table) = tiny_model(true, 3, 1);
        let cond = Condition::for_poem(&poem("sea"), &table);
        assert!(matches!(m.lm_forward(&[BOS, 99], &cond), Err(Error::TokenOutOfRange { .. })));
        assert!(m.lm_forward(&[5], &cond).is_err());
    }

    #[test]
    fn topic_off_ignores_topic() {
        let (m, table) = tiny_model(false, 4, 1);
        let a = m.example(&poem("sea"), &table).unwrap();
        let b = m.example(&poem("fire"), &table).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn lm_passes_gradient_check() {
        for seed in 0..2 {
            let (m, table) = tiny_model(true, 4, 2);
            let ex = m.example(&poem("sea"), &table).unwrap();
            let mut grads = m.store.zero_gradients();
            m.loss_and_grad(&ex, &mut grads, Some(&mut Rng::seed_from_u64(seed))).unwrap();
            let mut store = m.store.clone();
            let report = grad_check(
                &mut store,
                |s| {
                    let mm = PoemLm { store: s.clone(), ..m.clone() };
                    mm.loss(&ex, Some(&mut Rng::seed_from_u64(seed))).unwrap()
                },
                &grads,
                &GradCheckConfig { max_per_param: Some(40), ..GradCheckConfig::default() },
            );
            assert!(report.passed(), "{:?}", report.worst);
        }
    }

    #[test]
    fn variant_names_round_trip() {
        for name in LmVariant::ALL {
            let v = LmVariant::parse(name).unwrap();
            assert_eq!(v.name().to_ascii_lowercase(), name);
        }
        assert!(LmVariant::parse("gold").is_none());
        assert!(LmVariant::parse("bronze+").is_none());
    }

    #[test]
    fn missing_prerequisites_fail_before_training() {
        let (_, table) = tiny_model(true, 3, 1);
        let vocab = Vocabulary::from_tokens(["sea", "salt", "wave", "."].map(String::from));
        let p = [poem("sea")];
        let corpora = LmCorpora {
            known_train: &p,
            known_dev: &p,
            ..LmCorpora::default()
        };
        let base = LmConfig { embed_dim: 4, hidden: 3, n_layers: 1, ..LmConfig::paper_scale(true) };
        let hyper = LmHyper { train: TrainConfig::default(), pretrain: TrainConfig::default() };
        for name in ["pred/gold+", "wiki-"] {
            let err = train_variant(LmVariant::parse(name).unwrap(), &base, &corpora, &vocab, &table, &hyper, &mut |_, _| {})
                .unwrap_err();
            assert!(matches!(err, Error::MissingCorpus(_)), "{name}: {err:?}");
        }
    }
}
