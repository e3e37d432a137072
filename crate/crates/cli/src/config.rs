//! Run configuration: defaults, flat `key = value` files, flag overrides.

use std::path::{Path, PathBuf};

use botlstm_core::data::Granularity;
use botlstm_core::nn::ModelConfig;
use botlstm_core::train::TrainingConfig;

use crate::error::{CliError, Result};

pub const THREADS_ENV: &str = "BOTLSTM_THREADS";

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub training: TrainingConfig,
    pub hidden: usize,
    pub layers: usize,
    /// Expected GloVe dimension; inferred from the file when unset.
    pub embed_dim: Option<usize>,
    pub glove: Option<PathBuf>,
    pub accounts: Option<PathBuf>,
    pub tweets: Option<PathBuf>,
    /// Plain text, one tweet per line (build-vocab only).
    pub corpus: Option<PathBuf>,
    pub vocab: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub granularity: Granularity,
    pub stopwords: bool,
    pub rt_token: bool,
    pub top_k: usize,
    /// Upper bound on worker threads; further capped by `BOTLSTM_THREADS`.
    pub threads: Option<usize>,
    pub per_class: usize,
    pub filler_words: usize,
    /// Fraction of generated accounts written to the held-out files.
    pub holdout: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let m = ModelConfig::default();
        RunConfig {
            training: TrainingConfig::default(),
            hidden: m.hidden,
            layers: m.layers,
            embed_dim: None,
            glove: None,
            accounts: None,
            tweets: None,
            corpus: None,
            vocab: None,
            checkpoint: None,
            output_dir: PathBuf::from("."),
            granularity: Granularity::PerTweet,
            stopwords: true,
            rt_token: true,
            top_k: 50,
            threads: None,
            per_class: 50,
            filler_words: 40,
            holdout: 0.3,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| CliError::Usage(format!("invalid value {value:?} for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(CliError::Usage(format!(
            "invalid boolean {value:?} for {key}"
        ))),
    }
}

impl RunConfig {
    /// Sets one field by name. Dashes and underscores are interchangeable.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let value = value.trim();
        let path = || Some(PathBuf::from(value));
        let t = &mut self.training;
        match key.as_str() {
            "lr" | "learning_rate" => t.learning_rate = parse(&key, value)?,
            "momentum" => t.momentum = parse(&key, value)?,
            "batch_size" => t.batch_size = parse(&key, value)?,
            "epochs" => t.epochs = parse(&key, value)?,
            "dropout_start" => t.dropout_start = parse(&key, value)?,
            "dropout_end" => t.dropout_end = parse(&key, value)?,
            "seed" => t.seed = parse(&key, value)?,
            "max_seq_len" => t.max_seq_len = parse(&key, value)?,
            "hidden" => self.hidden = parse(&key, value)?,
            "layers" => self.layers = parse(&key, value)?,
            "embed_dim" => self.embed_dim = Some(parse(&key, value)?),
            "glove" => self.glove = path(),
            "accounts" => self.accounts = path(),
            "tweets" => self.tweets = path(),
            "corpus" => self.corpus = path(),
            "vocab" => self.vocab = path(),
            "checkpoint" => self.checkpoint = path(),
            "output_dir" => self.output_dir = PathBuf::from(value),
            "granularity" => {
                self.granularity = Granularity::parse(value).ok_or_else(|| {
                    CliError::Usage(format!(
                        "granularity must be per_tweet or per_account, got {value:?}"
                    ))
                })?
            }
            "stopwords" => self.stopwords = parse_bool(&key, value)?,
            "rt_token" => self.rt_token = parse_bool(&key, value)?,
            "top_k" => self.top_k = parse(&key, value)?,
            "threads" => self.threads = Some(parse(&key, value)?),
            "per_class" => self.per_class = parse(&key, value)?,
            "filler_words" => self.filler_words = parse(&key, value)?,
            "holdout" => self.holdout = parse(&key, value)?,
            _ => return Err(CliError::Usage(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Applies a `key = value` file. `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Usage(format!("config line {}: expected key = value", i + 1))
            })?;
            self.set(key, value)
                .map_err(|e| CliError::Usage(format!("config line {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = crate::io::read_text(path)?;
        self.apply_text(&text)
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            hidden: self.hidden,
            layers: self.layers,
            max_seq_len: self.training.max_seq_len,
        }
    }

    /// Worker count: `threads` (or the machine's parallelism), capped by the
    /// environment variable, at least 1.
    pub fn workers(&self) -> usize {
        let wanted = self
            .threads
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
        let cap = std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .unwrap_or(usize::MAX);
        wanted.min(cap).max(1)
    }

    pub fn require<'a>(&self, value: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
        value
            .as_deref()
            .ok_or_else(|| CliError::Usage(format!("missing required setting {key}")))
    }

    pub fn tokenizer(&self) -> botlstm_core::text::Tokenizer {
        botlstm_core::text::Tokenizer {
            map_retweet: self.rt_token,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_published_hyperparameters() {
        let c = RunConfig::default();
        assert_eq!(c.training.learning_rate, 0.01);
        assert_eq!(c.training.momentum, 0.9);
        assert_eq!(c.training.batch_size, 64);
        assert_eq!(c.training.epochs, 30);
        assert_eq!(c.training.dropout_start, 0.5);
        assert_eq!(c.training.dropout_end, 0.1);
        assert_eq!((c.hidden, c.layers), (200, 3));
    }

    #[test]
    fn file_then_override() {
        let mut c = RunConfig::default();
        c.apply_text("# comment\nlr = 0.05\nhidden=32  # inline\n\ngranularity = per_account\nrt-token = false\n")
            .unwrap();
        c.set("hidden", "16").unwrap();
        assert_eq!(c.training.learning_rate, 0.05);
        assert_eq!(c.hidden, 16);
        assert_eq!(c.granularity, Granularity::PerAccount);
        assert!(!c.rt_token);
    }

    #[test]
    fn bad_lines_name_the_line() {
        let mut c = RunConfig::default();
        let err = c.apply_text("lr = 0.1\nepochs\n").unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
        let err = c.apply_text("bogus = 1\n").unwrap_err().to_string();
        assert!(err.contains("bogus"), "{err}");
        let err = c.apply_text("epochs = many\n").unwrap_err();
        assert_eq!(err.exit_code(), crate::error::EXIT_USAGE);
    }

    #[test]
    fn explicit_threads_cap_workers() {
        let c = RunConfig {
            threads: Some(1),
            ..RunConfig::default()
        };
        assert_eq!(c.workers(), 1);
    }
}
