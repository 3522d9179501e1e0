//! File-level steps of the experiment: prepare, train, label, evaluate and
//! generate. The CLI is a thin layer over these.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use acrostic_core::corpus::{
    build_vocabulary_from_lines, line_count_histogram, split_dataset, split_into_training_poems, tokenize, Poem,
    RawDocument, SourceTag, Vocabulary,
};
use acrostic_core::decode::{generate_poem, GeneratedPoem, GenerationConfig, Models};
use acrostic_core::embed::EmbeddingTable;
use acrostic_core::net::EpochRecord;
use acrostic_core::poemlm::{train_variant, LmCorpora, LmHyper, LmVariant, PoemLm};
use acrostic_core::rhymer::{extract_rhyme_pairs, train_rhymer, RhymerModel};
use acrostic_core::topics::{train_topic_model, TopicClassifier};
use acrostic_core::Error as CoreError;
use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::checkpoint::Checkpoint;
use crate::config::RunConfig;
use crate::io::{read_embeddings, read_json, read_jsonl, write_json, write_jsonl};

pub const KNOWN_TRAIN: &str = "known_train.jsonl";
pub const KNOWN_DEV: &str = "known_dev.jsonl";
pub const KNOWN_TEST: &str = "known_test.jsonl";
pub const UNKNOWN: &str = "unknown.jsonl";
pub const SILVER: &str = "silver.jsonl";
pub const SONNETS: &str = "sonnets.jsonl";
pub const PLAIN: &str = "plain.jsonl";
pub const VOCAB: &str = "vocab.json";
pub const EMBEDDINGS: &str = "embeddings.txt";
pub const STATS: &str = "stats.json";

/// A failure the user can fix by changing the invocation (exit code 2).
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

// ---------------------------------------------------------------------------
// prepare
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitStats {
    pub poems: usize,
    /// Poems with 4, 5, 6, 7 and 8 lines.
    pub histogram: [usize; 5],
}

impl SplitStats {
    fn of(poems: &[Poem]) -> Self {
        SplitStats {
            poems: poems.len(),
            histogram: line_count_histogram(poems),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepareReport {
    pub documents: usize,
    pub skipped_documents: usize,
    pub known_train: SplitStats,
    pub known_dev: SplitStats,
    pub known_test: SplitStats,
    pub unknown: SplitStats,
    pub sonnets: usize,
    pub plain_documents: usize,
    pub vocab_size: usize,
}

impl PrepareReport {
    /// Line-count table: one row per poem length, one column per dataset.
    pub fn table(&self) -> String {
        let mut s = String::from("lines  known_train  known_dev  known_test  unknown\n");
        for i in 0..5 {
            s.push_str(&format!(
                "{:>5}  {:>11}  {:>9}  {:>10}  {:>7}\n",
                i + 4,
                self.known_train.histogram[i],
                self.known_dev.histogram[i],
                self.known_test.histogram[i],
                self.unknown.histogram[i]
            ));
        }
        s.push_str(&format!(
            "total  {:>11}  {:>9}  {:>10}  {:>7}\n",
            self.known_train.poems, self.known_dev.poems, self.known_test.poems, self.unknown.poems
        ));
        s
    }
}

/// Reads raw documents, splits them into training poems and writes the
/// prepared corpus, vocabulary and statistics to `out`.
pub fn prepare(
    inputs: &[PathBuf],
    out: &Path,
    embeddings: Option<&Path>,
    vocab_size: usize,
    seed: u64,
) -> Result<PrepareReport> {
    let mut docs: Vec<RawDocument> = Vec::new();
    for p in inputs {
        docs.extend(read_jsonl::<RawDocument>(p)?);
    }
    if docs.is_empty() {
        log::warn!("no input documents; writing an empty corpus");
    }
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let mut skipped = 0;
    let (mut known, mut unknown, mut sonnets, mut plain) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (i, d) in docs.iter().enumerate() {
        if !d.is_consistent() {
            log::warn!("document {i}: topic field does not match source {:?}; skipped", d.source_tag);
            skipped += 1;
            continue;
        }
        match d.source_tag {
            SourceTag::KnownTopic => known.extend(split_into_training_poems(d)),
            SourceTag::UnknownTopic => unknown.extend(split_into_training_poems(d)),
            SourceTag::Sonnet => sonnets.push(d.clone()),
            SourceTag::PlainText => plain.push(d.clone()),
        }
    }
    let (train, dev, test) = split_dataset(&known, seed);

    let plain_lines: Vec<Vec<String>> = plain.iter().flat_map(|d| d.lines.iter().map(|l| tokenize(l))).collect();
    let vocab = build_vocabulary_from_lines(
        train
            .iter()
            .chain(&unknown)
            .flat_map(|p| p.lines.iter())
            .chain(plain_lines.iter()),
        vocab_size,
    );

    write_jsonl(&out.join(KNOWN_TRAIN), &train)?;
    write_jsonl(&out.join(KNOWN_DEV), &dev)?;
    write_jsonl(&out.join(KNOWN_TEST), &test)?;
    write_jsonl(&out.join(UNKNOWN), &unknown)?;
    write_jsonl(&out.join(SONNETS), &sonnets)?;
    write_jsonl(&out.join(PLAIN), &plain)?;
    write_json(&out.join(VOCAB), &vocab)?;
    if let Some(e) = embeddings {
        read_embeddings(e, None)?;
        fs::copy(e, out.join(EMBEDDINGS)).with_context(|| format!("cannot copy {}", e.display()))?;
    }
    let report = PrepareReport {
        documents: docs.len(),
        skipped_documents: skipped,
        known_train: SplitStats::of(&train),
        known_dev: SplitStats::of(&dev),
        known_test: SplitStats::of(&test),
        unknown: SplitStats::of(&unknown),
        sonnets: sonnets.len(),
        plain_documents: plain.len(),
        vocab_size: vocab.len(),
    };
    write_json(&out.join(STATS), &report)?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// Loading prepared data
// ---------------------------------------------------------------------------

fn need(path: &Path, hint: &str) -> Result<PathBuf> {
    if path.exists() {
        Ok(path.to_path_buf())
    } else {
        Err(UsageError(format!("{} not found; {hint}", path.display())).into())
    }
}

pub fn load_poems(cfg: &RunConfig, name: &str) -> Result<Vec<Poem>> {
    read_jsonl(&need(&cfg.paths.data_dir.join(name), "run `acrostic prepare` first")?)
}

pub fn load_docs(cfg: &RunConfig, name: &str) -> Result<Vec<RawDocument>> {
    read_jsonl(&need(&cfg.paths.data_dir.join(name), "run `acrostic prepare` first")?)
}

pub fn load_vocab(cfg: &RunConfig) -> Result<Vocabulary> {
    read_json(&need(&cfg.paths.data_dir.join(VOCAB), "run `acrostic prepare` first")?)
}

pub fn load_table(cfg: &RunConfig) -> Result<EmbeddingTable> {
    let p = cfg.embeddings_path();
    let p = need(&p, "pass --embeddings or run `acrostic prepare --embeddings`")?;
    Ok(read_embeddings(&p, None)?.0)
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub model: String,
    pub checkpoint: PathBuf,
    pub seed: u64,
    pub wall_time_secs: f64,
    pub log: Value,
}

pub fn variant_slug(v: &LmVariant) -> String {
    v.name().to_ascii_lowercase().replace('/', "-")
}

pub fn lm_checkpoint_path(cfg: &RunConfig, v: &LmVariant) -> PathBuf {
    cfg.paths.output_dir.join(format!("lm-{}.ckpt", variant_slug(v)))
}

pub fn rhymer_checkpoint_path(cfg: &RunConfig) -> PathBuf {
    cfg.paths.output_dir.join("rhymer.ckpt")
}

pub fn topics_checkpoint_path(cfg: &RunConfig) -> PathBuf {
    cfg.paths.output_dir.join("topics.ckpt")
}

fn meta(cfg: &RunConfig, extra: &[(&str, Value)]) -> BTreeMap<String, Value> {
    let mut m = BTreeMap::new();
    m.insert("root_seed".into(), json!(cfg.seed));
    m.insert("profile".into(), serde_json::to_value(cfg.profile).expect("serializes"));
    for (k, v) in extra {
        m.insert((*k).into(), v.clone());
    }
    m
}

fn finish(cfg: &RunConfig, model: &str, ckpt: &Checkpoint, path: PathBuf, start: Instant, log: Value) -> Result<TrainReport> {
    fs::create_dir_all(&cfg.paths.output_dir)
        .with_context(|| format!("cannot create {}", cfg.paths.output_dir.display()))?;
    ckpt.save(&path)?;
    let report = TrainReport {
        model: model.into(),
        checkpoint: path.clone(),
        seed: cfg.seed,
        wall_time_secs: start.elapsed().as_secs_f64(),
        log,
    };
    write_json(&path.with_extension("log.json"), &report)?;
    Ok(report)
}

fn print_epoch(phase: &str, r: &EpochRecord) {
    match r.train_loss {
        Some(l) => log::info!("{phase} epoch {:>3}  train {l:.4}  dev {:.4}", r.epoch, r.dev_metric),
        None => log::info!("{phase} epoch {:>3}  dev {:.4}", r.epoch, r.dev_metric),
    }
}

fn core_err(e: CoreError) -> anyhow::Error {
    match e {
        CoreError::MissingCorpus(what) => UsageError(format!("missing prerequisite: {what}")).into(),
        other => other.into(),
    }
}

pub fn train_lm(cfg: &RunConfig, variant: LmVariant) -> Result<TrainReport> {
    let start = Instant::now();
    let vocab = load_vocab(cfg)?;
    let table = load_table(cfg)?;
    let train = load_poems(cfg, KNOWN_TRAIN)?;
    let dev = load_poems(cfg, KNOWN_DEV)?;
    let silver_path = cfg.paths.data_dir.join(SILVER);
    let silver = if silver_path.exists() { read_jsonl(&silver_path)? } else { Vec::new() };
    let plain_path = cfg.paths.data_dir.join(PLAIN);
    let plain = if plain_path.exists() { read_jsonl(&plain_path)? } else { Vec::new() };
    let corpora = LmCorpora {
        known_train: &train,
        known_dev: &dev,
        silver: &silver,
        plain_text: &plain,
    };
    let hyper = LmHyper {
        train: cfg.lm_train.to_train_config(cfg.component_seed("lm-train")),
        pretrain: cfg.pretrain.to_train_config(cfg.component_seed("lm-pretrain")),
    };
    let base = cfg.lm_config(table.dim(), variant.topic_channel);
    let (model, log) = train_variant(variant, &base, &corpora, &vocab, &table, &hyper, &mut print_epoch)
        .map_err(core_err)?;
    let ckpt = Checkpoint::from_lm(&model, meta(cfg, &[("variant", json!(variant.name()))]));
    finish(cfg, &variant.name(), &ckpt, lm_checkpoint_path(cfg, &variant), start, serde_json::to_value(&log)?)
}

pub fn train_rhymer_cmd(cfg: &RunConfig) -> Result<TrainReport> {
    let start = Instant::now();
    let sonnets = load_docs(cfg, SONNETS)?;
    let pairs = extract_rhyme_pairs(&sonnets);
    if pairs.is_empty() {
        bail!(UsageError("no rhyme pairs: the prepared corpus has no 14-line sonnets".into()));
    }
    let (mut tr, dev, test) = split_dataset(&pairs, cfg.component_seed("rhymer-split"));
    tr.extend(test);
    let hyper = cfg.rhymer_train.to_train_config(cfg.component_seed("rhymer-train"));
    let (model, log) =
        train_rhymer(cfg.rhymer_config(), &tr, &dev, &hyper, &mut |r| print_epoch("rhymer", r)).map_err(core_err)?;
    let ckpt = Checkpoint::from_rhymer(&model, meta(cfg, &[("pairs", json!(pairs.len()))]));
    finish(cfg, "rhymer", &ckpt, rhymer_checkpoint_path(cfg), start, serde_json::to_value(&log)?)
}

pub fn train_topics_cmd(cfg: &RunConfig) -> Result<TrainReport> {
    let start = Instant::now();
    let vocab = load_vocab(cfg)?;
    let table = load_table(cfg)?;
    let train = load_poems(cfg, KNOWN_TRAIN)?;
    let dev = load_poems(cfg, KNOWN_DEV)?;
    let hyper = cfg.topics_train.to_train_config(cfg.component_seed("topics-train"));
    let (model, log) = train_topic_model(
        cfg.topic_config(table.dim()),
        vocab,
        &table,
        &train,
        &dev,
        &hyper,
        &mut |r| print_epoch("topics", r),
    )
    .map_err(core_err)?;
    let ckpt = Checkpoint::from_topics(&model, meta(cfg, &[]));
    finish(cfg, "topics", &ckpt, topics_checkpoint_path(cfg), start, serde_json::to_value(&log)?)
}

// ---------------------------------------------------------------------------
// Labeling and evaluation
// ---------------------------------------------------------------------------

pub fn load_topics(path: &Path) -> Result<TopicClassifier> {
    Checkpoint::load(&need(path, "run `acrostic train topics` first")?)?.into_topics()
}

pub fn load_lm(path: &Path) -> Result<PoemLm> {
    Checkpoint::load(&need(path, "run `acrostic train lm` first")?)?.into_lm()
}

pub fn load_rhymer(path: &Path) -> Result<RhymerModel> {
    Checkpoint::load(&need(path, "run `acrostic train rhymer` first")?)?.into_rhymer()
}

/// Labels the unknown-topic poems and writes them as silver data.
pub fn label(cfg: &RunConfig, topics: &Path) -> Result<BTreeMap<String, usize>> {
    let model = load_topics(topics)?;
    let poems = load_poems(cfg, UNKNOWN)?;
    let report = model.label_corpus(&poems);
    let labeled: Vec<Poem> = report.poems.into_iter().filter(|p| p.topic.is_some()).collect();
    write_jsonl(&cfg.paths.data_dir.join(SILVER), &labeled)?;
    Ok(report.counts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PplRow {
    pub model: String,
    pub perplexity: f64,
}

/// Perplexity of one LM checkpoint on a poem corpus. The checkpoint's
/// vocabulary must equal the prepared vocabulary when one is given.
pub fn eval_ppl(ckpt: &Path, corpus: &Path, vocab: Option<&Vocabulary>, table: &EmbeddingTable) -> Result<PplRow> {
    let c = Checkpoint::load(ckpt)?;
    let lm = c.into_lm()?;
    if let Some(v) = vocab {
        if v != &lm.vocab {
            bail!(UsageError(format!(
                "vocabulary mismatch: checkpoint {} has {} tokens, corpus vocabulary has {}",
                ckpt.display(),
                lm.vocab.len(),
                v.len()
            )));
        }
    }
    let poems: Vec<Poem> = read_jsonl(corpus)?;
    let data = poems
        .iter()
        .map(|p| lm.example(p, table))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let name = c
        .header
        .metadata
        .get("variant")
        .and_then(Value::as_str)
        .map_or_else(|| ckpt.display().to_string(), String::from);
    Ok(PplRow {
        model: name,
        perplexity: lm.perplexity(&data).map_err(core_err)?,
    })
}

pub fn ppl_table(rows: &[PplRow]) -> String {
    let w = rows.iter().map(|r| r.model.len()).max().unwrap_or(5).max(5);
    let mut s = format!("{:<w$}  perplexity\n", "model");
    for r in rows {
        s.push_str(&format!("{:<w$}  {:.2}\n", r.model, r.perplexity));
    }
    s
}

// ---------------------------------------------------------------------------
// Generation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoemRecord {
    pub word: String,
    pub flags: acrostic_core::decode::Flags,
    pub seed: u64,
    pub lines: Vec<Vec<String>>,
    pub rhyme_slots_filled: Vec<usize>,
    pub rendered: String,
}

impl PoemRecord {
    pub fn new(p: &GeneratedPoem, cfg: &GenerationConfig) -> Self {
        PoemRecord {
            word: p.word.clone(),
            flags: cfg.flags,
            seed: cfg.seed,
            lines: p.lines.clone(),
            rhyme_slots_filled: p.rhyme_slots_filled.clone(),
            rendered: p.render(),
        }
    }
}

pub fn generate(
    word: &str,
    gen: &GenerationConfig,
    lm: &PoemLm,
    table: &EmbeddingTable,
    rhymer: Option<&RhymerModel>,
) -> Result<GeneratedPoem> {
    let models = Models { lm, table, rhymer };
    generate_poem(word, gen, &models).map_err(|e| match e {
        CoreError::InvalidWord { .. } | CoreError::MissingEmbedding(_) => UsageError(e.to_string()).into(),
        other => other.into(),
    })
}
