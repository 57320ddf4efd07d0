//! Run settings: built-in defaults, overridden by a key-value config file,
//! overridden by command-line `--set key=value` pairs.
//!
//! File syntax is one `key = value` per line with `#` comments. Keys are
//! namespaced: `model.*`, `train.*`, `features.*`, `autoencoder.*`,
//! `decode.*`, `vocab.*`, `classes.*`, plus `seed` and the repeatable
//! `stop_phrase`. The first `stop_phrase` from a source replaces the list
//! inherited from the previous source.

use std::fmt;
use std::fs;
use std::path::Path;

use uisum_core::baselines::AutoencoderConfig;
use uisum_core::corpus::DEFAULT_STOP_PHRASES;
use uisum_core::features::{ClassVocab, FeatureConfig};
use uisum_core::model::ModelConfig;
use uisum_core::train::TrainConfig;
use uisum_core::vocab::DEFAULT_MAX_SIZE;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Default,
    File,
    Cli,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Default => "default",
            Source::File => "file",
            Source::Cli => "cli",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecodeConfig {
    pub beam_size: usize,
    /// Length-normalization exponent; 0 ranks by raw log-probability.
    pub alpha: f64,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig {
            beam_size: 5,
            alpha: 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub features: FeatureConfig,
    pub autoencoder: AutoencoderConfig,
    pub decode: DecodeConfig,
    pub vocab_size: usize,
    pub class_top_k: usize,
    pub stop_phrases: Vec<String>,
    pub seed: u64,
    /// Every key that was set, with its final value and where it came from.
    overrides: Vec<(String, String, Source)>,
    phrases_source: Source,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            features: FeatureConfig::default(),
            autoencoder: AutoencoderConfig::default(),
            decode: DecodeConfig::default(),
            vocab_size: DEFAULT_MAX_SIZE,
            class_top_k: ClassVocab::DEFAULT_TOP_K,
            stop_phrases: DEFAULT_STOP_PHRASES.iter().map(|s| s.to_string()).collect(),
            seed: 0,
            overrides: Vec::new(),
            phrases_source: Source::Default,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::Model(uisum_core::Error::Config(format!("invalid value {v:?} for {key}"))))
}

fn unknown(key: &str) -> Error {
    Error::Model(uisum_core::Error::Config(format!("unknown setting {key:?}")))
}

impl RunConfig {
    /// Applies one setting.
    pub fn set(&mut self, key: &str, value: &str, source: Source) -> Result<()> {
        let key = key.trim();
        let value = value.trim();
        if key == "stop_phrase" {
            if self.phrases_source != source {
                self.stop_phrases.clear();
                self.phrases_source = source;
            }
            if !value.is_empty() {
                self.stop_phrases.push(value.to_string());
            }
        } else if key == "seed" {
            self.seed = parse(key, value)?;
        } else if let Some((section, name)) = key.split_once('.') {
            match section {
                "model" => self.model.set(name, value)?,
                "train" => self.train.set(name, value)?,
                "features" => match name {
                    "num_buckets" => self.features.num_buckets = parse(key, value)?,
                    "max_position" => self.features.max_position = parse(key, value)?,
                    "max_elements" => self.features.max_elements = parse(key, value)?,
                    "include_invisible" => self.features.include_invisible = parse(key, value)?,
                    _ => return Err(unknown(key)),
                },
                "autoencoder" => match name {
                    "input_size" => self.autoencoder.input_size = parse(key, value)?,
                    "latent" => self.autoencoder.latent = parse(key, value)?,
                    "lr" => self.autoencoder.adam.lr = parse(key, value)?,
                    "batch_size" => self.autoencoder.batch_size = parse(key, value)?,
                    "epochs" => self.autoencoder.epochs = parse(key, value)?,
                    "filters" => {
                        let f: Vec<usize> = value
                            .split(',')
                            .map(|v| parse(key, v))
                            .collect::<Result<_>>()?;
                        self.autoencoder.filters = f.try_into().map_err(|_| {
                            Error::Model(uisum_core::Error::Config(
                                "autoencoder.filters needs three comma-separated sizes".into(),
                            ))
                        })?;
                    }
                    _ => return Err(unknown(key)),
                },
                "decode" => match name {
                    "beam_size" => self.decode.beam_size = parse(key, value)?,
                    "alpha" => self.decode.alpha = parse(key, value)?,
                    _ => return Err(unknown(key)),
                },
                "vocab" if name == "max_size" => self.vocab_size = parse(key, value)?,
                "classes" if name == "top_k" => self.class_top_k = parse(key, value)?,
                _ => return Err(unknown(key)),
            }
        } else {
            return Err(unknown(key));
        }
        self.overrides.retain(|(k, _, _)| k != key || key == "stop_phrase");
        self.overrides
            .push((key.to_string(), value.to_string(), source));
        Ok(())
    }

    /// Applies the settings of a config file.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::format(path, format!("line {}: expected `key = value`", i + 1))
            })?;
            self.set(k, v, Source::File)
                .map_err(|e| Error::format(path, format!("line {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    /// Applies `key=value` pairs from the command line.
    pub fn apply_cli<S: AsRef<str>>(&mut self, pairs: &[S]) -> Result<()> {
        for p in pairs {
            let (k, v) = p.as_ref().split_once('=').ok_or_else(|| {
                Error::Model(uisum_core::Error::Config(format!(
                    "--set expects key=value, got {:?}",
                    p.as_ref()
                )))
            })?;
            self.set(k, v, Source::Cli)?;
        }
        Ok(())
    }

    /// Seeds every component from the run seed unless a component seed was
    /// given explicitly.
    pub fn propagate_seed(&mut self) {
        let explicit = |k: &str| self.overrides.iter().any(|(key, _, _)| key == k);
        if !explicit("train.seed") {
            self.train.seed = self.seed;
        }
        self.autoencoder.seed = self.seed;
    }

    /// Resolved settings, one `key = value  (source)` line each.
    pub fn describe(&self) -> String {
        let mut lines = vec![format!("seed = {}", self.seed)];
        for (k, v) in self.model.to_pairs() {
            lines.push(format!("model.{k} = {v}"));
        }
        let t = &self.train;
        for (k, v) in [
            ("batch_size", t.batch_size.to_string()),
            ("lr", t.adam.lr.to_string()),
            ("beta1", t.adam.beta1.to_string()),
            ("beta2", t.adam.beta2.to_string()),
            ("eps", t.adam.eps.to_string()),
            ("warmup_steps", t.adam.warmup_steps.to_string()),
            ("max_epochs", t.max_epochs.to_string()),
            ("patience", t.patience.to_string()),
            ("max_steps", t.max_steps.map_or("none".into(), |m| m.to_string())),
            ("bn_momentum", t.bn_momentum.to_string()),
            ("seed", t.seed.to_string()),
        ] {
            lines.push(format!("train.{k} = {v}"));
        }
        let f = &self.features;
        lines.push(format!("features.num_buckets = {}", f.num_buckets));
        lines.push(format!("features.max_position = {}", f.max_position));
        lines.push(format!("features.max_elements = {}", f.max_elements));
        lines.push(format!("features.include_invisible = {}", f.include_invisible));
        let a = &self.autoencoder;
        lines.push(format!("autoencoder.input_size = {}", a.input_size));
        lines.push(format!(
            "autoencoder.filters = {},{},{}",
            a.filters[0], a.filters[1], a.filters[2]
        ));
        lines.push(format!("autoencoder.latent = {}", a.latent));
        lines.push(format!("autoencoder.lr = {}", a.adam.lr));
        lines.push(format!("autoencoder.batch_size = {}", a.batch_size));
        lines.push(format!("autoencoder.epochs = {}", a.epochs));
        lines.push(format!("decode.beam_size = {}", self.decode.beam_size));
        lines.push(format!("decode.alpha = {}", self.decode.alpha));
        lines.push(format!("vocab.max_size = {}", self.vocab_size));
        lines.push(format!("classes.top_k = {}", self.class_top_k));
        for p in &self.stop_phrases {
            lines.push(format!("stop_phrase = {p}"));
        }
        lines
            .into_iter()
            .map(|l| {
                let key = l.split(" = ").next().unwrap_or("");
                let src = if key == "stop_phrase" {
                    self.phrases_source
                } else {
                    self.overrides
                        .iter()
                        .rev()
                        .find(|(k, _, _)| k == key)
                        .map_or(Source::Default, |o| o.2)
                };
                format!("{l}  ({src})\n")
            })
            .collect()
    }

    pub fn source_of(&self, key: &str) -> Source {
        self.overrides
            .iter()
            .rev()
            .find(|(k, _, _)| k == key)
            .map_or(Source::Default, |o| o.2)
    }
}
