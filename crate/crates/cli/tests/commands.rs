use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use botlstm::checkpoint::Checkpoint;
use botlstm::commands::{
    cmd_build_vocab, cmd_evaluate, cmd_generate, cmd_predict, cmd_stats, cmd_train_with,
};
use botlstm::io::{load_dataset, write_accounts, write_tweets};
use botlstm::RunConfig;
use botlstm_core::data::synthetic;
use botlstm_core::nn::{init_params, ModelConfig};
use botlstm_core::Class;

fn generated(dir: &Path, per_class: usize) -> RunConfig {
    let mut cfg = RunConfig {
        output_dir: dir.to_path_buf(),
        per_class,
        threads: Some(1),
        ..RunConfig::default()
    };
    cfg.training.seed = 7;
    cmd_generate(&cfg).unwrap();
    cfg.glove = Some(dir.join("glove.txt"));
    cfg
}

fn with_split(cfg: &RunConfig, split: &str) -> RunConfig {
    let mut c = cfg.clone();
    c.accounts = Some(cfg.output_dir.join(format!("{split}accounts.csv")));
    c.tweets = Some(cfg.output_dir.join(format!("{split}tweets.csv")));
    c
}

fn quick_train(cfg: &RunConfig) -> RunConfig {
    let mut c = with_split(cfg, "train_");
    c.hidden = 8;
    c.layers = 1;
    c.training.epochs = 8;
    c.training.batch_size = 16;
    cmd_train_with(&c, &mut |_| {}).unwrap();
    c
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_botlstm"))
}

#[test]
fn build_vocab_oov_rate_matches_generator_bookkeeping() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = with_split(&generated(dir.path(), 10), "");
    let c = synthetic(7, 10, cfg.filler_words).unwrap();
    cfg.vocab = Some(dir.path().join("v.tsv"));
    let s = cmd_build_vocab(&cfg).unwrap();
    assert_eq!(s.tokens, c.stats.tokens);
    assert_eq!(s.oov_tokens, c.stats.oov_tokens);
    assert_eq!(s.oov_rate(), c.stats.oov_rate());
    assert_eq!(s.vocab_size, c.vocab.len());
    assert!(s.warnings.is_empty());
    assert_eq!(botlstm::io::read_vocab(&s.path).unwrap(), c.vocab);
}

#[test]
fn empty_corpus_gives_reserved_vocabulary_with_warning() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = generated(dir.path(), 2);
    let corpus = dir.path().join("empty.txt");
    fs::write(&corpus, "").unwrap();
    let s = cmd_build_vocab(&RunConfig {
        corpus: Some(corpus),
        ..cfg
    })
    .unwrap();
    assert_eq!(s.vocab_size, 6);
    assert_eq!(s.tokens, 0);
    assert_eq!(s.warnings.len(), 1);
}

#[test]
fn train_evaluate_predict_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = generated(dir.path(), 20);
    let trained = quick_train(&cfg);
    let history = fs::read_to_string(dir.path().join("history.csv")).unwrap();
    assert_eq!(history.lines().count(), 1 + 8);
    assert!(history.starts_with("epoch,loss,accuracy,dropout,seconds\n"));

    let eval_cfg = RunConfig {
        accounts: Some(dir.path().join("test_accounts.csv")),
        tweets: Some(dir.path().join("test_tweets.csv")),
        ..trained.clone()
    };
    let e = cmd_evaluate(&eval_cfg).unwrap();
    assert_eq!(e.evaluation.report.accuracy, 1.0);
    assert_eq!(e.evaluation.report.mcc, 1.0);
    let json: serde_json::Value = serde_json::from_str(&e.json).unwrap();
    for key in [
        "precision",
        "recall",
        "specificity",
        "accuracy",
        "f_measure",
        "mcc",
        "tp",
        "tn",
        "fp",
        "fn",
    ] {
        assert!(json.get(key).is_some(), "{key}");
    }
    assert_eq!(
        json["tp"].as_u64().unwrap() + json["tn"].as_u64().unwrap(),
        12
    );

    let p = cmd_predict(&eval_cfg).unwrap();
    let accounts = load_dataset(
        eval_cfg.accounts.as_deref().unwrap(),
        eval_cfg.tweets.as_deref().unwrap(),
    )
    .unwrap();
    let rows: Vec<&str> = p.csv.lines().collect();
    assert_eq!(rows[0], "account_id,p_bot,predicted_label,flag");
    assert_eq!(rows.len(), accounts.len() + 1);
    for (row, account) in rows[1..].iter().zip(&accounts) {
        let fields: Vec<&str> = row.split(',').collect();
        let p: f64 = fields[1].parse().unwrap();
        assert_eq!(fields[0], account.id);
        assert_eq!(p > 0.5, account.label == Class::Bot, "{row}");
    }
}

#[test]
fn label_shuffled_evaluation_is_near_chance() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = generated(dir.path(), 100);
    let trained = quick_train(&cfg);
    let mut accounts = load_dataset(
        &dir.path().join("accounts.csv"),
        &dir.path().join("tweets.csv"),
    )
    .unwrap();
    let mut labels: Vec<Class> = accounts.iter().map(|a| a.label).collect();
    labels.shuffle(&mut ChaCha8Rng::seed_from_u64(99));
    for (a, l) in accounts.iter_mut().zip(labels) {
        a.label = l;
    }
    let (ap, tp) = (dir.path().join("shuf_a.csv"), dir.path().join("shuf_t.csv"));
    write_accounts(&ap, &accounts).unwrap();
    write_tweets(&tp, &accounts).unwrap();
    let e = cmd_evaluate(&RunConfig {
        accounts: Some(ap),
        tweets: Some(tp),
        ..trained
    })
    .unwrap();
    assert!(
        e.evaluation.report.mcc.abs() <= 0.2,
        "{}",
        e.evaluation.report.mcc
    );
}

#[test]
fn zeroed_softmax_predicts_one_half() {
    let dir = tempfile::tempdir().unwrap();
    let c = synthetic(1, 2, 4).unwrap();
    let mut model = init_params(
        ModelConfig {
            hidden: 3,
            layers: 1,
            max_seq_len: 8,
        },
        c.table,
        0,
    )
    .unwrap();
    model.softmax_w.as_mut_slice().fill(0.0);
    model.softmax_b.fill(0.0);
    let ck_path = dir.path().join("zero.ckpt");
    Checkpoint {
        vocab: c.vocab,
        model,
        rt_token: true,
    }
    .save(&ck_path)
    .unwrap();
    let tweets = dir.path().join("t.csv");
    fs::write(&tweets, "account_id,tweet_text\na,x\nb,x\n").unwrap();
    let accounts = dir.path().join("a.csv");
    fs::write(&accounts, "account_id,label\na,human\nb,human\nc,bot\n").unwrap();
    let p = cmd_predict(&RunConfig {
        checkpoint: Some(ck_path),
        tweets: Some(tweets),
        accounts: Some(accounts),
        output_dir: dir.path().to_path_buf(),
        ..RunConfig::default()
    })
    .unwrap();
    let rows: Vec<&str> = p.csv.lines().collect();
    assert_eq!(rows[1], "a,0.5,bot,");
    assert_eq!(rows[2], "b,0.5,bot,");
    assert_eq!(rows[3], "c,0.5,bot,empty");
}

fn stats_dir(dir: &Path, bot_tweets: &[&str], human_tweets: &[&str]) -> RunConfig {
    let (a, t) = (dir.join("a.csv"), dir.join("t.csv"));
    let mut body = String::from("account_id,tweet_text\n");
    for tw in bot_tweets {
        body.push_str(&format!("b,\"{tw}\"\n"));
    }
    for tw in human_tweets {
        body.push_str(&format!("h,\"{tw}\"\n"));
    }
    fs::write(&a, "account_id,label\nb,bot\nh,human\n").unwrap();
    fs::write(&t, body).unwrap();
    RunConfig {
        accounts: Some(a),
        tweets: Some(t),
        output_dir: dir.to_path_buf(),
        top_k: 5,
        ..RunConfig::default()
    }
}

#[test]
fn stats_on_identical_corpora_has_no_divergence() {
    let dir = tempfile::tempdir().unwrap();
    let tweets = ["buy cheap stuff http://t.co/a", "the cheap deal"];
    let s = cmd_stats(&stats_dir(dir.path(), &tweets, &tweets)).unwrap();
    assert!(s.report["only_in_bot"].as_array().unwrap().is_empty());
    assert!(s.report["only_in_human"].as_array().unwrap().is_empty());
    assert!(s.report["shared"]
        .as_array()
        .unwrap()
        .iter()
        .all(|r| r["delta"] == 0));
    for f in &s.files {
        assert!(f.exists());
    }
    let csv = fs::read_to_string(&s.files[0]).unwrap();
    assert!(csv.starts_with("token,count,relative_frequency\n"));
    let parsed: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&s.files[2]).unwrap()).unwrap();
    assert_eq!(parsed["special_tokens"]["bot"]["<URL>"], 1);
}

#[test]
fn stats_human_fixture_leads_with_social_words() {
    let dir = tempfile::tempdir().unwrap();
    let s = cmd_stats(&stats_dir(
        dir.path(),
        &[
            "win a free iphone http://t.co/z",
            "free offer http://t.co/y",
        ],
        &[
            "love you, thank you!",
            "happy birthday love",
            "thank you so much haha love",
        ],
    ))
    .unwrap();
    assert_eq!(s.humans.entries[0].token, "love");
    assert_eq!(s.humans.entries[1].token, "thank");
    assert_eq!(s.bots.entries[0].token, "free");
}

#[test]
fn stats_on_synthetic_corpus_separates_promo_and_social_words() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = with_split(&generated(dir.path(), 20), "");
    let s = cmd_stats(&RunConfig { top_k: 100, ..cfg }).unwrap();
    let rank =
        |t: &botlstm_core::stats::FrequencyTable, w: &str| t.rank_of(w).unwrap_or(usize::MAX);
    for (promo, social) in botlstm_core::data::PROMO_WORDS
        .iter()
        .zip(botlstm_core::data::SOCIAL_WORDS)
    {
        assert!(rank(&s.bots, promo) < rank(&s.bots, social));
        assert!(rank(&s.humans, social) < rank(&s.humans, promo));
    }
}

fn run_bin(args: &[&str]) -> (i32, String, String) {
    let out = bin().args(args).output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn missing_glove_exits_with_data_error_naming_path() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c.txt");
    fs::write(&corpus, "hello world\n").unwrap();
    let missing = dir.path().join("nope").join("glove.txt");
    let (code, _, err) = run_bin(&[
        "build-vocab",
        "--corpus",
        p(&corpus),
        "--glove",
        p(&missing),
    ]);
    assert_eq!(code, 2);
    assert!(err.contains(p(&missing)), "{err}");
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run_bin(&["train", "--no-such-flag"]).0, 1);
    assert_eq!(run_bin(&["frobnicate"]).0, 1);
    assert_eq!(run_bin(&["train", "--epochs", "many"]).0, 1);
    assert_eq!(run_bin(&["evaluate"]).0, 1);
    assert_eq!(run_bin(&["--help"]).0, 0);
}

#[test]
fn binary_pipeline_with_config_file_and_corrupt_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = |name: &str| -> PathBuf { d.join(name) };
    let (code, stdout, _) = run_bin(&[
        "generate",
        "--output-dir",
        p(d),
        "--per-class",
        "6",
        "--seed",
        "3",
    ]);
    assert_eq!(code, 0);
    assert!(stdout.contains("accounts: 12"));
    let conf = out("run.conf");
    fs::write(
        &conf,
        format!(
            "# tiny run\nhidden = 4\nlayers = 1\nepochs = 1\nbatch_size = 8\nthreads = 1\nglove = {}\noutput_dir = {}\n",
            p(&out("glove.txt")),
            p(d)
        ),
    )
    .unwrap();
    let (train_a, train_t) = (out("train_accounts.csv"), out("train_tweets.csv"));
    let data = ["--accounts", p(&train_a), "--tweets", p(&train_t)];
    let mut args = vec!["train", "--config", p(&conf)];
    args.extend(data);
    let (code, _, err) = run_bin(&args);
    assert_eq!(code, 0, "{err}");
    let history = fs::read_to_string(out("history.csv")).unwrap();
    assert_eq!(history.lines().count(), 2);

    let mut eval = vec!["evaluate", "--config", p(&conf)];
    eval.extend(data);
    let (code, stdout, _) = run_bin(&eval);
    assert_eq!(code, 0);
    assert!(stdout.contains("\"mcc\""));

    let ck = out("model.ckpt");
    let bytes = fs::read(&ck).unwrap();
    fs::write(&ck, &bytes[..bytes.len() - 9]).unwrap();
    let (code, _, err) = run_bin(&eval);
    assert_eq!(code, 2);
    assert!(err.contains("corrupt checkpoint"), "{err}");
}
