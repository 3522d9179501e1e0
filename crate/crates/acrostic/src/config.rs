//! Run configuration: profile defaults, TOML file, then command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use acrostic_core::corpus::DEFAULT_VOCAB_SIZE;
use acrostic_core::decode::{GenerationConfig, DEFAULT_MAX_TOKENS_PER_LINE};
use acrostic_core::net::{AdamConfig, TrainConfig};
use acrostic_core::poemlm::LmConfig;
use acrostic_core::rhymer::RhymerConfig;
use acrostic_core::seed::derive_seed;
use acrostic_core::topics::TopicConfig;
use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

pub const OUTPUT_DIR_ENV: &str = "ACROSTIC_OUTPUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Profile {
    PaperScale,
    DeskScale,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSettings {
    pub max_epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub patience: usize,
    pub clip_norm: f64,
}

impl TrainSettings {
    pub fn to_train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            max_epochs: self.max_epochs,
            batch_size: self.batch_size,
            adam: AdamConfig {
                lr: self.lr,
                ..AdamConfig::default()
            },
            clip_norm: self.clip_norm,
            patience: self.patience,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub data_dir: PathBuf,
    pub output_dir: PathBuf,
    /// Defaults to `embeddings.txt` in the data directory.
    pub embeddings: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LmSettings {
    pub hidden: usize,
    pub layers: usize,
    pub dropout: f64,
    pub vocab_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RhymerSettings {
    pub char_dim: usize,
    pub word_hidden: usize,
    pub poem_hidden: usize,
    pub decoder_hidden: usize,
    pub max_context_chars: Option<usize>,
    pub max_word_len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopicSettings {
    pub hidden: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateSettings {
    pub k: usize,
    pub m1: f64,
    pub beam_width: usize,
    pub temperature: f64,
    pub max_tokens_per_line: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub profile: Profile,
    pub seed: u64,
    pub paths: Paths,
    pub lm: LmSettings,
    pub lm_train: TrainSettings,
    pub pretrain: TrainSettings,
    pub rhymer: RhymerSettings,
    pub rhymer_train: TrainSettings,
    pub topics: TopicSettings,
    pub topics_train: TrainSettings,
    pub generate: GenerateSettings,
}

/// Flags that override file and profile values.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub profile: Option<Profile>,
    pub seed: Option<u64>,
    pub data_dir: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub max_epochs: Option<usize>,
}

impl RunConfig {
    pub fn profile_defaults(profile: Profile) -> Self {
        let paths = Paths {
            data_dir: PathBuf::from("data"),
            output_dir: PathBuf::from("out"),
            embeddings: None,
        };
        let generate = GenerateSettings {
            k: 5,
            m1: 0.7,
            beam_width: 5,
            temperature: 1.0,
            max_tokens_per_line: DEFAULT_MAX_TOKENS_PER_LINE,
        };
        match profile {
            Profile::PaperScale => {
                let train = |batch_size| TrainSettings {
                    max_epochs: 200,
                    batch_size,
                    lr: 0.0005,
                    patience: 25,
                    clip_norm: 5.0,
                };
                let r = RhymerConfig::paper_scale();
                RunConfig {
                    profile,
                    seed: 0,
                    paths,
                    lm: LmSettings {
                        hidden: 1024,
                        layers: 3,
                        dropout: 0.4,
                        vocab_size: DEFAULT_VOCAB_SIZE,
                    },
                    lm_train: train(128),
                    pretrain: train(128),
                    rhymer: RhymerSettings {
                        char_dim: r.char_dim,
                        word_hidden: r.word_hidden,
                        poem_hidden: r.poem_hidden,
                        decoder_hidden: r.decoder_hidden,
                        max_context_chars: r.max_context_chars,
                        max_word_len: r.max_word_len,
                    },
                    rhymer_train: train(64),
                    topics: TopicSettings { hidden: 1024 },
                    topics_train: train(128),
                    generate,
                }
            }
            Profile::DeskScale => {
                let train = |max_epochs| TrainSettings {
                    max_epochs,
                    batch_size: 16,
                    lr: 0.005,
                    patience: 5,
                    clip_norm: 5.0,
                };
                RunConfig {
                    profile,
                    seed: 0,
                    paths,
                    lm: LmSettings {
                        hidden: 64,
                        layers: 2,
                        dropout: 0.2,
                        vocab_size: 500,
                    },
                    lm_train: train(30),
                    pretrain: train(10),
                    rhymer: RhymerSettings {
                        char_dim: 16,
                        word_hidden: 32,
                        poem_hidden: 32,
                        decoder_hidden: 64,
                        max_context_chars: Some(60),
                        max_word_len: 20,
                    },
                    rhymer_train: train(15),
                    topics: TopicSettings { hidden: 16 },
                    topics_train: train(15),
                    generate,
                }
            }
        }
    }

    /// Profile defaults, overlaid with the optional TOML file, then flags.
    /// The output directory may also come from `ACROSTIC_OUTPUT_DIR`, which
    /// ranks between the file and the flag.
    pub fn resolve(file: Option<&Path>, ov: &Overrides) -> Result<Self> {
        let file_table: Option<toml::Table> = match file {
            Some(p) => {
                let text = fs::read_to_string(p).with_context(|| format!("cannot read config {}", p.display()))?;
                Some(toml::from_str(&text).with_context(|| format!("{}: invalid TOML", p.display()))?)
            }
            None => None,
        };
        let file_profile = match file_table.as_ref().and_then(|t| t.get("profile")) {
            Some(v) => Some(v.clone().try_into::<Profile>().context("config: unknown profile")?),
            None => None,
        };
        let profile = ov.profile.or(file_profile).unwrap_or(Profile::DeskScale);
        let mut base = toml::Table::try_from(Self::profile_defaults(profile))?;
        if let Some(t) = file_table {
            merge(&mut base, t);
        }
        base.insert("profile".into(), toml::Value::try_from(profile)?);
        let mut cfg: RunConfig = base.try_into().context("config: invalid settings")?;
        if let Ok(dir) = std::env::var(OUTPUT_DIR_ENV) {
            if !dir.is_empty() {
                cfg.paths.output_dir = dir.into();
            }
        }
        if let Some(s) = ov.seed {
            cfg.seed = s;
        }
        if let Some(d) = &ov.data_dir {
            cfg.paths.data_dir = d.clone();
        }
        if let Some(d) = &ov.output_dir {
            cfg.paths.output_dir = d.clone();
        }
        if let Some(e) = &ov.embeddings {
            cfg.paths.embeddings = Some(e.clone());
        }
        if let Some(n) = ov.max_epochs {
            for t in [
                &mut cfg.lm_train,
                &mut cfg.pretrain,
                &mut cfg.rhymer_train,
                &mut cfg.topics_train,
            ] {
                t.max_epochs = n;
            }
        }
        Ok(cfg)
    }

    pub fn embeddings_path(&self) -> PathBuf {
        self.paths
            .embeddings
            .clone()
            .unwrap_or_else(|| self.paths.data_dir.join("embeddings.txt"))
    }

    pub fn component_seed(&self, label: &str) -> u64 {
        derive_seed(self.seed, label)
    }

    pub fn lm_config(&self, embed_dim: usize, topic_channel: bool) -> LmConfig {
        LmConfig {
            embed_dim,
            topic_channel,
            hidden: self.lm.hidden,
            n_layers: self.lm.layers,
            dropout: self.lm.dropout,
            seed: self.component_seed("lm"),
        }
    }

    pub fn rhymer_config(&self) -> RhymerConfig {
        let r = &self.rhymer;
        RhymerConfig {
            char_dim: r.char_dim,
            word_hidden: r.word_hidden,
            poem_hidden: r.poem_hidden,
            decoder_hidden: r.decoder_hidden,
            max_context_chars: r.max_context_chars,
            max_word_len: r.max_word_len,
            seed: self.component_seed("rhymer"),
        }
    }

    pub fn topic_config(&self, embed_dim: usize) -> TopicConfig {
        TopicConfig {
            embed_dim,
            hidden: self.topics.hidden,
            seed: self.component_seed("topics"),
        }
    }

    pub fn generation_config(&self, seed: u64) -> GenerationConfig {
        let g = &self.generate;
        GenerationConfig {
            k: g.k,
            m1: g.m1,
            m2: 1.0 - g.m1,
            beam_width: g.beam_width,
            temperature: g.temperature,
            max_tokens_per_line: g.max_tokens_per_line,
            seed,
            ..GenerationConfig::default()
        }
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_profile_pins_hyperparameters() {
        let c = RunConfig::profile_defaults(Profile::PaperScale);
        assert_eq!((c.lm.hidden, c.lm.layers, c.lm.dropout), (1024, 3, 0.4));
        assert_eq!((c.lm_train.lr, c.lm_train.patience, c.lm_train.batch_size), (0.0005, 25, 128));
        assert_eq!(c.rhymer_train.batch_size, 64);
        assert_eq!((c.rhymer.word_hidden, c.rhymer.poem_hidden, c.topics.hidden), (256, 512, 1024));
    }

    #[test]
    fn precedence() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.toml");
        fs::write(&p, "seed = 3\n[lm]\nhidden = 12\n[lm_train]\nmax_epochs = 4\n").unwrap();
        let c = RunConfig::resolve(Some(&p), &Overrides::default()).unwrap();
        assert_eq!((c.seed, c.lm.hidden, c.lm.layers, c.lm_train.max_epochs), (3, 12, 2, 4));
        let ov = Overrides {
            seed: Some(9),
            max_epochs: Some(2),
            profile: Some(Profile::PaperScale),
            ..Overrides::default()
        };
        let c = RunConfig::resolve(Some(&p), &ov).unwrap();
        assert_eq!((c.seed, c.lm.hidden, c.lm.layers, c.lm_train.max_epochs), (9, 12, 3, 2));
        fs::write(&p, "[lm]\nwidth = 1\n").unwrap();
        assert!(RunConfig::resolve(Some(&p), &Overrides::default()).is_err());
    }

    #[test]
    fn toml_round_trip() {
        let c = RunConfig::profile_defaults(Profile::DeskScale);
        let text = toml::to_string(&c).unwrap();
        assert_eq!(toml::from_str::<RunConfig>(&text).unwrap(), c);
    }
}
