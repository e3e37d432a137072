//! Argument parsing and dispatch.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands;
use crate::config::RunConfig;
use crate::error::{CliError, Result, EXIT_OK, EXIT_USAGE};

#[derive(Debug, Parser)]
#[command(
    name = "botlstm",
    version,
    about = "BiLSTM bot/human classifier for tweet text"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the vocabulary (corpus words that have a GloVe vector).
    BuildVocab(RunArgs),
    /// Train a model and write a checkpoint plus history.csv.
    Train(RunArgs),
    /// Score a labeled set and write metrics.json.
    Evaluate(RunArgs),
    /// Write per-account bot probabilities to predictions.csv.
    Predict(RunArgs),
    /// Per-class token frequency tables and their divergence.
    Stats(RunArgs),
    /// Write a synthetic corpus and matching toy GloVe file.
    Generate(RunArgs),
}

/// Every setting can come from `--config`, `--set key=value` or its own flag,
/// applied in that order.
#[derive(Debug, Args, Default)]
pub struct RunArgs {
    /// Flat `key = value` config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Extra `key=value` overrides.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long)]
    pub lr: Option<String>,
    #[arg(long)]
    pub momentum: Option<String>,
    #[arg(long)]
    pub batch_size: Option<String>,
    #[arg(long)]
    pub epochs: Option<String>,
    #[arg(long)]
    pub dropout_start: Option<String>,
    #[arg(long)]
    pub dropout_end: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub max_seq_len: Option<String>,
    #[arg(long)]
    pub hidden: Option<String>,
    #[arg(long)]
    pub layers: Option<String>,
    #[arg(long)]
    pub embed_dim: Option<String>,
    #[arg(long)]
    pub glove: Option<String>,
    #[arg(long)]
    pub accounts: Option<String>,
    #[arg(long)]
    pub tweets: Option<String>,
    #[arg(long)]
    pub corpus: Option<String>,
    #[arg(long)]
    pub vocab: Option<String>,
    #[arg(long)]
    pub checkpoint: Option<String>,
    #[arg(long)]
    pub output_dir: Option<String>,
    /// per_tweet or per_account.
    #[arg(long)]
    pub granularity: Option<String>,
    #[arg(long)]
    pub stopwords: Option<String>,
    #[arg(long)]
    pub rt_token: Option<String>,
    #[arg(long)]
    pub top_k: Option<String>,
    #[arg(long)]
    pub threads: Option<String>,
    #[arg(long)]
    pub per_class: Option<String>,
    #[arg(long)]
    pub filler_words: Option<String>,
    #[arg(long)]
    pub holdout: Option<String>,
}

impl RunArgs {
    fn flags(&self) -> [(&'static str, &Option<String>); 26] {
        [
            ("lr", &self.lr),
            ("momentum", &self.momentum),
            ("batch_size", &self.batch_size),
            ("epochs", &self.epochs),
            ("dropout_start", &self.dropout_start),
            ("dropout_end", &self.dropout_end),
            ("seed", &self.seed),
            ("max_seq_len", &self.max_seq_len),
            ("hidden", &self.hidden),
            ("layers", &self.layers),
            ("embed_dim", &self.embed_dim),
            ("glove", &self.glove),
            ("accounts", &self.accounts),
            ("tweets", &self.tweets),
            ("corpus", &self.corpus),
            ("vocab", &self.vocab),
            ("checkpoint", &self.checkpoint),
            ("output_dir", &self.output_dir),
            ("granularity", &self.granularity),
            ("stopwords", &self.stopwords),
            ("rt_token", &self.rt_token),
            ("top_k", &self.top_k),
            ("threads", &self.threads),
            ("per_class", &self.per_class),
            ("filler_words", &self.filler_words),
            ("holdout", &self.holdout),
        ]
    }

    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(p) = &self.config {
            cfg.apply_file(p)?;
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got {kv:?}")))?;
            cfg.set(k, v)?;
        }
        for (key, value) in self.flags() {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        Ok(cfg)
    }
}

fn execute(command: &Command) -> Result<()> {
    match command {
        Command::BuildVocab(a) => {
            let s = commands::cmd_build_vocab(&a.resolve()?)?;
            for w in &s.warnings {
                eprintln!("warning: {w}");
            }
            println!("corpus tokens: {}", s.tokens);
            println!("vocabulary size: {}", s.vocab_size);
            println!("oov rate: {:.6}", s.oov_rate());
            println!("wrote {}", s.path.display());
        }
        Command::Train(a) => {
            let s = commands::cmd_train(&a.resolve()?)?;
            println!("sequences: {} (dropped {})", s.sequences, s.dropped);
            println!("wrote {}", s.checkpoint.display());
            println!("wrote {}", s.history_path.display());
        }
        Command::Evaluate(a) => {
            let s = commands::cmd_evaluate(&a.resolve()?)?;
            if s.evaluation.ties > 0 {
                eprintln!(
                    "warning: {} accounts scored exactly 0.5 and were called bot",
                    s.evaluation.ties
                );
            }
            println!("{}", s.json);
        }
        Command::Predict(a) => {
            let s = commands::cmd_predict(&a.resolve()?)?;
            print!("{}", s.csv);
        }
        Command::Stats(a) => {
            let s = commands::cmd_stats(&a.resolve()?)?;
            for f in &s.files {
                println!("wrote {}", f.display());
            }
        }
        Command::Generate(a) => {
            let s = commands::cmd_generate(&a.resolve()?)?;
            println!("accounts: {}", s.accounts);
            println!("oov rate: {:.6}", s.stats.oov_rate());
            println!("url-rule accuracy: {:.4}", s.url_rule_floor);
            for f in &s.files {
                println!("wrote {}", f.display());
            }
        }
    }
    Ok(())
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
