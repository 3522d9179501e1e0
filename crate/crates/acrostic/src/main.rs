use std::path::PathBuf;
use std::process::ExitCode;

use acrostic::config::{Overrides, Profile, RunConfig};
use acrostic::diagnostics::gradcheck_suite;
use acrostic::io::{read_json, write_embeddings, write_json, write_jsonl};
use acrostic::pipeline::{self, PoemRecord, UsageError};
use acrostic_core::decode::{validate_word, GenerationConfig};
use acrostic_core::poemlm::LmVariant;
use acrostic_core::synth::{self, SynthConfig};
use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "acrostic", version, about = "Acrostic poem generation with topic, rhyme and line constraints")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    profile: Option<Profile>,
    /// Root seed; every component seed is derived from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    data_dir: Option<PathBuf>,
    /// Also settable through ACROSTIC_OUTPUT_DIR.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    embeddings: Option<PathBuf>,
    /// Caps the epochs of every training stage.
    #[arg(long, global = true)]
    max_epochs: Option<usize>,
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic raw corpus and embedding file.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        poems_per_topic: usize,
        #[arg(long, default_value_t = 30)]
        sonnets: usize,
        #[arg(long, default_value_t = 200)]
        plain_docs: usize,
    },
    /// Split and tokenize raw JSONL documents into the data directory.
    Prepare {
        #[arg(long, num_args = 1.., required = true)]
        input: Vec<PathBuf>,
    },
    /// Train a model.
    Train {
        #[command(subcommand)]
        model: TrainModel,
    },
    /// Attach predicted topics to the unknown-topic poems.
    Label {
        #[arg(long)]
        topics: Option<PathBuf>,
    },
    /// Perplexity of LM checkpoints on a poem corpus.
    EvalPpl {
        /// Defaults to every trained variant in the output directory.
        #[arg(long)]
        checkpoint: Vec<PathBuf>,
        /// Defaults to the known-topic test split.
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
    /// Generate acrostic poems.
    Generate {
        #[arg(required = true)]
        words: Vec<String>,
        /// neuralpoet, -st, -st-ac, -st-rh or -st-tp.
        #[arg(long, default_value = "neuralpoet", allow_hyphen_values = true)]
        system: String,
        #[arg(long)]
        no_steer: bool,
        #[arg(long)]
        no_acrostic: bool,
        #[arg(long)]
        no_rhyme: bool,
        #[arg(long)]
        no_topic: bool,
        #[arg(long, default_value = "gold+")]
        variant: String,
        #[arg(long)]
        lm: Option<PathBuf>,
        #[arg(long)]
        rhymer: Option<PathBuf>,
        /// Zero topic vector for words without an embedding.
        #[arg(long)]
        allow_oov_topic: bool,
        /// Write the JSON records here as well.
        #[arg(long)]
        json_out: Option<PathBuf>,
    },
    /// Finite-difference gradient checks of every network.
    Gradcheck {
        #[arg(long, default_value_t = 10)]
        seeds: u64,
    },
}

#[derive(Subcommand)]
enum TrainModel {
    Lm {
        #[arg(long)]
        variant: String,
    },
    Rhymer,
    Topics,
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    let ov = Overrides {
        profile: g.profile,
        seed: g.seed,
        data_dir: g.data_dir.clone(),
        output_dir: g.output_dir.clone(),
        embeddings: g.embeddings.clone(),
        max_epochs: g.max_epochs,
    };
    let cfg = RunConfig::resolve(g.config.as_deref(), &ov).map_err(|e| usage(format!("{e:#}")))?;
    log::debug!("run config: {cfg:?}");
    match cli.command {
        Command::Synth {
            out,
            poems_per_topic,
            sonnets,
            plain_docs,
        } => {
            let f = synth::generate(&SynthConfig {
                poems_per_topic,
                sonnets,
                plain_docs,
                seed: cfg.component_seed("synth"),
                ..SynthConfig::default()
            });
            std::fs::create_dir_all(&out).with_context(|| format!("cannot create {}", out.display()))?;
            write_jsonl(&out.join("known.jsonl"), &f.known)?;
            write_jsonl(&out.join("unknown.jsonl"), &f.unknown)?;
            write_jsonl(&out.join("sonnets.jsonl"), &f.sonnets)?;
            write_jsonl(&out.join("plain.jsonl"), &f.plain)?;
            write_embeddings(&out.join("embeddings.txt"), &f.table)?;
            println!("wrote synthetic corpus to {}", out.display());
        }
        Command::Prepare { input } => {
            let report = pipeline::prepare(
                &input,
                &cfg.paths.data_dir,
                cfg.paths.embeddings.as_deref(),
                cfg.lm.vocab_size,
                cfg.component_seed("prepare"),
            )?;
            print!("{}", report.table());
            println!("vocabulary: {} tokens; sonnets: {}; plain-text documents: {}", report.vocab_size, report.sonnets, report.plain_documents);
        }
        Command::Train { model } => {
            let report = match model {
                TrainModel::Lm { variant } => {
                    let v = LmVariant::parse(&variant).ok_or_else(|| {
                        usage(format!("unknown variant {variant:?}; expected one of {}", LmVariant::ALL.join(", ")))
                    })?;
                    pipeline::train_lm(&cfg, v)?
                }
                TrainModel::Rhymer => pipeline::train_rhymer_cmd(&cfg)?,
                TrainModel::Topics => pipeline::train_topics_cmd(&cfg)?,
            };
            println!(
                "{}: checkpoint {} ({:.1}s)",
                report.model,
                report.checkpoint.display(),
                report.wall_time_secs
            );
        }
        Command::Label { topics } => {
            let path = topics.unwrap_or_else(|| pipeline::topics_checkpoint_path(&cfg));
            let counts = pipeline::label(&cfg, &path)?;
            for (topic, n) in &counts {
                println!("{topic}\t{n}");
            }
        }
        Command::EvalPpl { checkpoint, corpus } => {
            let ckpts = if checkpoint.is_empty() {
                let found: Vec<PathBuf> = LmVariant::ALL
                    .iter()
                    .filter_map(|n| LmVariant::parse(n))
                    .map(|v| pipeline::lm_checkpoint_path(&cfg, &v))
                    .filter(|p| p.exists())
                    .collect();
                if found.is_empty() {
                    return Err(usage("no LM checkpoints found; run `acrostic train lm` first"));
                }
                found
            } else {
                checkpoint
            };
            let corpus = corpus.unwrap_or_else(|| cfg.paths.data_dir.join(pipeline::KNOWN_TEST));
            let vocab_path = cfg.paths.data_dir.join(pipeline::VOCAB);
            let vocab = if vocab_path.exists() { Some(read_json(&vocab_path)?) } else { None };
            let table = pipeline::load_table(&cfg)?;
            let rows = ckpts
                .iter()
                .map(|c| pipeline::eval_ppl(c, &corpus, vocab.as_ref(), &table))
                .collect::<Result<Vec<_>>>()?;
            print!("{}", pipeline::ppl_table(&rows));
            std::fs::create_dir_all(&cfg.paths.output_dir)?;
            write_json(&cfg.paths.output_dir.join("ppl.json"), &rows)?;
        }
        Command::Generate {
            words,
            system,
            no_steer,
            no_acrostic,
            no_rhyme,
            no_topic,
            variant,
            lm,
            rhymer,
            allow_oov_topic,
            json_out,
        } => {
            for w in &words {
                validate_word(w).map_err(|e| usage(e.to_string()))?;
            }
            let base = GenerationConfig::ablation(&system).ok_or_else(|| usage(format!("unknown system {system:?}")))?;
            let mut gen = cfg.generation_config(cfg.component_seed("generate"));
            gen.flags = base.flags;
            if !base.flags.st {
                gen.m1 = 0.0;
                gen.m2 = 1.0;
            }
            if no_steer {
                gen.flags.st = false;
                gen.m1 = 0.0;
                gen.m2 = 1.0;
            }
            gen.flags.ac &= !no_acrostic;
            gen.flags.rh &= !no_rhyme;
            gen.flags.tp &= !no_topic;
            gen.allow_oov_topic = allow_oov_topic;
            let lm_path = match lm {
                Some(p) => p,
                None => {
                    let v = LmVariant::parse(&variant).ok_or_else(|| usage(format!("unknown variant {variant:?}")))?;
                    pipeline::lm_checkpoint_path(&cfg, &v)
                }
            };
            let model = pipeline::load_lm(&lm_path)?;
            let rh = if gen.flags.rh {
                Some(pipeline::load_rhymer(&rhymer.unwrap_or_else(|| pipeline::rhymer_checkpoint_path(&cfg)))?)
            } else {
                None
            };
            let table = pipeline::load_table(&cfg)?;
            let mut records = Vec::new();
            for w in &words {
                let p = pipeline::generate(w, &gen, &model, &table, rh.as_ref())?;
                let rec = PoemRecord::new(&p, &gen);
                println!("{}\n", rec.rendered);
                println!("{}", serde_json::to_string(&rec)?);
                records.push(rec);
            }
            if let Some(path) = json_out {
                write_jsonl(&path, &records)?;
            }
        }
        Command::Gradcheck { seeds } => {
            let results = gradcheck_suite(0..seeds);
            let mut failed = 0;
            for r in &results {
                println!(
                    "{:<20} seed {:>3}  entries {:>5}  max rel {:.2e}  {}",
                    r.name,
                    r.seed,
                    r.checked,
                    r.max_rel_error,
                    if r.passed { "ok" } else { "FAIL" }
                );
                failed += usize::from(!r.passed);
            }
            if failed > 0 {
                anyhow::bail!("{failed} gradient checks failed");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.chain().any(|c| c.is::<UsageError>()) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
