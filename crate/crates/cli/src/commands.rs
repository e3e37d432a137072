//! Subcommand implementations. Each returns a summary; files are written
//! under the configured paths and progress goes to stderr.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use botlstm_core::data::{
    make_examples, split_accounts, synthetic_with, url_rule_accuracy, SyntheticConfig,
    SyntheticStats,
};
use botlstm_core::embedding::{build_table, GloveVectors};
use botlstm_core::metrics::MetricsReport;
use botlstm_core::nn::init_params;
use botlstm_core::stats::{compare_tables, token_frequencies, FrequencyTable};
use botlstm_core::text::{build_vocabulary, encode, Tokenizer, RESERVED};
use botlstm_core::train::{
    evaluation_from_scores, train_with, EpochRecord, Evaluation, TrainHistory,
};
use botlstm_core::{Account, Class, Token, TokenId, Vocabulary};

use crate::checkpoint::Checkpoint;
use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::io;
use crate::parallel::{score_accounts_parallel, Threaded, WallClock};

pub const VOCAB_FILE: &str = "vocab.tsv";
pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const HISTORY_FILE: &str = "history.csv";
pub const METRICS_FILE: &str = "metrics.json";
pub const PREDICTIONS_FILE: &str = "predictions.csv";
pub const BOT_FREQ_FILE: &str = "bot_frequencies.csv";
pub const HUMAN_FREQ_FILE: &str = "human_frequencies.csv";
pub const DIVERGENCE_FILE: &str = "divergence.json";

fn out_path(cfg: &RunConfig, explicit: &Option<PathBuf>, default: &str) -> PathBuf {
    explicit
        .clone()
        .unwrap_or_else(|| cfg.output_dir.join(default))
}

fn tokenize_all<'a>(texts: impl Iterator<Item = &'a str>, tok: &Tokenizer) -> Vec<Vec<Token>> {
    texts.map(|t| tok.tokenize(t)).collect()
}

fn word_set(corpus: &[Vec<Token>]) -> BTreeSet<String> {
    corpus
        .iter()
        .flatten()
        .filter(|t| !t.is_special())
        .map(|t| t.as_str().to_string())
        .collect()
}

/// Corpus ∩ GloVe vocabulary for `texts`.
fn vocabulary_for<'a>(
    cfg: &RunConfig,
    texts: impl Iterator<Item = &'a str>,
) -> Result<(Vocabulary, Vec<Vec<Token>>, GloveVectors)> {
    let glove_path = cfg.require(&cfg.glove, "glove")?;
    let corpus = tokenize_all(texts, &cfg.tokenizer());
    let glove = io::read_glove(glove_path, cfg.embed_dim, Some(word_set(&corpus)))?;
    let vocab = build_vocabulary(corpus.iter().map(Vec::as_slice), &glove);
    Ok((vocab, corpus, glove))
}

#[derive(Debug, Clone, PartialEq)]
pub struct VocabSummary {
    pub path: PathBuf,
    pub tokens: usize,
    pub oov_tokens: usize,
    pub vocab_size: usize,
    pub warnings: Vec<String>,
}

impl VocabSummary {
    pub fn oov_rate(&self) -> f64 {
        if self.tokens == 0 {
            0.0
        } else {
            self.oov_tokens as f64 / self.tokens as f64
        }
    }
}

/// Builds the vocabulary from `corpus` (one tweet per line) or, failing
/// that, the `tweets` CSV.
pub fn cmd_build_vocab(cfg: &RunConfig) -> Result<VocabSummary> {
    let texts: Vec<String> = match (&cfg.corpus, &cfg.tweets) {
        (Some(p), _) => io::read_corpus_lines(p)?,
        (None, Some(p)) => io::read_tweets(p)?.into_iter().map(|(_, t)| t).collect(),
        (None, None) => return Err(CliError::Usage("build-vocab needs corpus or tweets".into())),
    };
    let (vocab, corpus, _) = vocabulary_for(cfg, texts.iter().map(String::as_str))?;
    let mut tokens = 0;
    let mut oov_tokens = 0;
    for tweet in &corpus {
        tokens += tweet.len();
        oov_tokens += encode(tweet, &vocab)
            .iter()
            .filter(|&&id| id == TokenId::OOV)
            .count();
    }
    let mut warnings = Vec::new();
    if vocab.len() == RESERVED.len() {
        warnings.push(
            "no corpus word has a pretrained vector; vocabulary holds only the reserved tokens"
                .to_string(),
        );
    }
    let path = out_path(cfg, &cfg.vocab, VOCAB_FILE);
    io::write_vocab(&path, &vocab)?;
    Ok(VocabSummary {
        path,
        tokens,
        oov_tokens,
        vocab_size: vocab.len(),
        warnings,
    })
}

fn load_labeled(cfg: &RunConfig) -> Result<Vec<Account>> {
    let accounts = cfg.require(&cfg.accounts, "accounts")?;
    let tweets = cfg.require(&cfg.tweets, "tweets")?;
    io::load_dataset(accounts, tweets)
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub checkpoint: PathBuf,
    pub history_path: PathBuf,
    pub history: TrainHistory,
    pub sequences: usize,
    pub dropped: usize,
    pub vocab_size: usize,
}

/// Trains from scratch and writes the checkpoint and history CSV.
pub fn cmd_train_with(
    cfg: &RunConfig,
    on_epoch: &mut dyn FnMut(&EpochRecord),
) -> Result<TrainSummary> {
    cfg.training.validate()?;
    let dataset = load_labeled(cfg)?;
    let tokenizer = cfg.tokenizer();
    let glove_path = cfg.require(&cfg.glove, "glove")?;
    let (vocab, glove) = match &cfg.vocab {
        Some(p) => {
            let vocab = io::read_vocab(p)?;
            let keep: BTreeSet<String> = vocab
                .surfaces()
                .skip(RESERVED.len())
                .map(String::from)
                .collect();
            let glove = io::read_glove(glove_path, cfg.embed_dim, Some(keep))?;
            (vocab, glove)
        }
        None => {
            let (vocab, _, glove) = vocabulary_for(
                cfg,
                dataset
                    .iter()
                    .flat_map(|a| a.tweets.iter().map(String::as_str)),
            )?;
            (vocab, glove)
        }
    };
    let table =
        build_table(&vocab, &glove, cfg.training.seed).map_err(|e| CliError::at(glove_path, e))?;
    let mut model = init_params(cfg.model_config(), table, cfg.training.seed.wrapping_add(1))?;
    let examples = make_examples(
        &dataset,
        &vocab,
        &tokenizer,
        cfg.granularity,
        cfg.training.max_seq_len,
    );
    let history = train_with(
        &mut model,
        &examples.sequences,
        &cfg.training,
        &Threaded {
            workers: cfg.workers(),
        },
        &mut WallClock::new(),
        on_epoch,
    )?;
    let checkpoint = out_path(cfg, &cfg.checkpoint, CHECKPOINT_FILE);
    let vocab_size = vocab.len();
    Checkpoint {
        vocab,
        model,
        rt_token: cfg.rt_token,
    }
    .save(&checkpoint)?;
    let history_path = cfg.output_dir.join(HISTORY_FILE);
    io::write_file(&history_path, history.to_csv())?;
    Ok(TrainSummary {
        checkpoint,
        history_path,
        history,
        sequences: examples.sequences.len(),
        dropped: examples.dropped,
        vocab_size,
    })
}

pub fn cmd_train(cfg: &RunConfig) -> Result<TrainSummary> {
    cmd_train_with(cfg, &mut |r| {
        eprintln!(
            "epoch {:>3}  loss {:.6}  accuracy {:.4}  dropout {:.4}  {:.1}s",
            r.epoch, r.loss, r.accuracy, r.dropout, r.seconds
        )
    })
}

fn checkpoint_path(cfg: &RunConfig) -> PathBuf {
    out_path(cfg, &cfg.checkpoint, CHECKPOINT_FILE)
}

fn score(
    cfg: &RunConfig,
    ck: &Checkpoint,
    accounts: &[Account],
) -> Result<Vec<botlstm_core::train::AccountScore>> {
    let tokenizer = Tokenizer {
        map_retweet: ck.rt_token,
    };
    Ok(score_accounts_parallel(
        &ck.model,
        &ck.vocab,
        &tokenizer,
        accounts,
        cfg.granularity,
        cfg.workers(),
    )?)
}

/// The six metrics plus the four counts, keyed by name.
pub fn metrics_json(e: &Evaluation) -> Value {
    let MetricsReport {
        precision,
        recall,
        specificity,
        accuracy,
        f_measure,
        mcc,
        undefined: u,
    } = e.report;
    let undefined: Vec<&str> = [
        ("precision", u.precision),
        ("recall", u.recall),
        ("specificity", u.specificity),
        ("f_measure", u.f_measure),
        ("mcc", u.mcc),
    ]
    .into_iter()
    .filter_map(|(n, f)| f.then_some(n))
    .collect();
    json!({
        "precision": precision,
        "recall": recall,
        "specificity": specificity,
        "accuracy": accuracy,
        "f_measure": f_measure,
        "mcc": mcc,
        "tp": e.counts.tp,
        "tn": e.counts.tn,
        "fp": e.counts.fp,
        "fn": e.counts.fn_,
        "accounts": e.scores.len(),
        "ties": e.ties,
        "undefined": undefined,
    })
}

#[derive(Debug, Clone)]
pub struct EvalSummary {
    pub path: PathBuf,
    pub json: String,
    pub evaluation: Evaluation,
}

/// Scores every labeled account once and writes the metrics JSON.
pub fn cmd_evaluate(cfg: &RunConfig) -> Result<EvalSummary> {
    let accounts = load_labeled(cfg)?;
    let ck = Checkpoint::load(&checkpoint_path(cfg))?;
    if accounts.is_empty() {
        return Err(botlstm_core::Error::EmptyDataset.into());
    }
    let scores = score(cfg, &ck, &accounts)?;
    let evaluation = evaluation_from_scores(&accounts, scores)?;
    let json = serde_json::to_string_pretty(&metrics_json(&evaluation))
        .map_err(|e| CliError::Internal(e.to_string()))?;
    let path = cfg.output_dir.join(METRICS_FILE);
    io::write_file(&path, format!("{json}\n"))?;
    Ok(EvalSummary {
        path,
        json,
        evaluation,
    })
}

#[derive(Debug, Clone)]
pub struct PredictSummary {
    pub path: PathBuf,
    pub csv: String,
}

/// Per-account `p(bot)`. With an accounts file, accounts that have no
/// tweets still get a row (flagged `empty`).
pub fn cmd_predict(cfg: &RunConfig) -> Result<PredictSummary> {
    let accounts = match &cfg.accounts {
        Some(_) => load_labeled(cfg)?,
        None => io::accounts_from_tweets(io::read_tweets(cfg.require(&cfg.tweets, "tweets")?)?),
    };
    let ck = Checkpoint::load(&checkpoint_path(cfg))?;
    let scores = score(cfg, &ck, &accounts)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::Internal(e.to_string());
    w.write_record(["account_id", "p_bot", "predicted_label", "flag"])
        .map_err(csv_err)?;
    for (a, s) in accounts.iter().zip(&scores) {
        let flag = if s.sequences == 0 { "empty" } else { "" };
        w.write_record([
            a.id.as_str(),
            &s.p_bot.to_string(),
            s.predicted.as_str(),
            flag,
        ])
        .map_err(csv_err)?;
    }
    let csv = String::from_utf8(
        w.into_inner()
            .map_err(|e| CliError::Internal(e.to_string()))?,
    )
    .map_err(|e| CliError::Internal(e.to_string()))?;
    let path = cfg.output_dir.join(PREDICTIONS_FILE);
    io::write_file(&path, &csv)?;
    Ok(PredictSummary { path, csv })
}

#[derive(Debug, Clone)]
pub struct StatsSummary {
    pub bots: FrequencyTable,
    pub humans: FrequencyTable,
    pub report: Value,
    pub files: [PathBuf; 3],
}

/// Per-class frequency tables and their divergence report.
pub fn cmd_stats(cfg: &RunConfig) -> Result<StatsSummary> {
    let accounts = load_labeled(cfg)?;
    let tokenizer = cfg.tokenizer();
    let (bots, humans): (Vec<Account>, Vec<Account>) =
        accounts.into_iter().partition(|a| a.label == Class::Bot);
    let bot_table = token_frequencies(&bots, &tokenizer, cfg.top_k, cfg.stopwords);
    let human_table = token_frequencies(&humans, &tokenizer, cfg.top_k, cfg.stopwords);
    let d = compare_tables(&bot_table, &human_table, cfg.top_k);
    let specials = |t: &FrequencyTable| -> Value {
        t.specials
            .iter()
            .map(|(k, v)| (k.clone(), json!(v)))
            .collect::<serde_json::Map<_, _>>()
            .into()
    };
    let report = json!({
        "top_k": cfg.top_k,
        "only_in_bot": d.only_in_a,
        "only_in_human": d.only_in_b,
        "shared": d.shared.iter().map(|r| json!({
            "token": r.token,
            "rank_bot": r.rank_a,
            "rank_human": r.rank_b,
            "delta": r.delta,
        })).collect::<Vec<_>>(),
        "special_tokens": { "bot": specials(&bot_table), "human": specials(&human_table) },
    });
    let files = [
        cfg.output_dir.join(BOT_FREQ_FILE),
        cfg.output_dir.join(HUMAN_FREQ_FILE),
        cfg.output_dir.join(DIVERGENCE_FILE),
    ];
    io::write_file(&files[0], bot_table.to_csv())?;
    io::write_file(&files[1], human_table.to_csv())?;
    let text =
        serde_json::to_string_pretty(&report).map_err(|e| CliError::Internal(e.to_string()))?;
    io::write_file(&files[2], format!("{text}\n"))?;
    Ok(StatsSummary {
        bots: bot_table,
        humans: human_table,
        report,
        files,
    })
}

#[derive(Debug, Clone)]
pub struct GenerateSummary {
    pub files: Vec<PathBuf>,
    pub stats: SyntheticStats,
    pub accounts: usize,
    /// URL-rule accuracy on the held-out accounts (all accounts without a split).
    pub url_rule_floor: f64,
}

fn write_split(
    dir: &Path,
    prefix: &str,
    accounts: &[Account],
    files: &mut Vec<PathBuf>,
) -> Result<()> {
    let a = dir.join(format!("{prefix}accounts.csv"));
    let t = dir.join(format!("{prefix}tweets.csv"));
    io::write_accounts(&a, accounts)?;
    io::write_tweets(&t, accounts)?;
    files.extend([a, t]);
    Ok(())
}

/// Writes a synthetic corpus: `glove.txt`, `accounts.csv`, `tweets.csv`
/// and, when `holdout` is in (0, 1), `train_*` / `test_*` splits.
pub fn cmd_generate(cfg: &RunConfig) -> Result<GenerateSummary> {
    if !(0.0..1.0).contains(&cfg.holdout) {
        return Err(CliError::Usage(format!(
            "holdout must be in [0, 1), got {}",
            cfg.holdout
        )));
    }
    let defaults = SyntheticConfig::default();
    let corpus = synthetic_with(&SyntheticConfig {
        seed: cfg.training.seed,
        per_class: cfg.per_class,
        filler_words: cfg.filler_words,
        embed_dim: cfg.embed_dim.unwrap_or(defaults.embed_dim),
        ..defaults
    })?;
    let dir = &cfg.output_dir;
    let glove = dir.join("glove.txt");
    io::write_file(&glove, corpus.glove.to_text())?;
    let mut files = vec![glove];
    write_split(dir, "", &corpus.accounts, &mut files)?;
    let tokenizer = cfg.tokenizer();
    let mut url_rule_floor = url_rule_accuracy(&corpus.accounts, &tokenizer);
    if cfg.holdout > 0.0 {
        let (train, test) = split_accounts(&corpus.accounts, 1.0 - cfg.holdout, cfg.training.seed);
        write_split(dir, "train_", &train, &mut files)?;
        write_split(dir, "test_", &test, &mut files)?;
        url_rule_floor = url_rule_accuracy(&test, &tokenizer);
    }
    Ok(GenerateSummary {
        files,
        stats: corpus.stats,
        accounts: corpus.accounts.len(),
        url_rule_floor,
    })
}
