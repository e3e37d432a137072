use std::collections::BTreeSet;

use num_rational::Ratio;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use botlstm_core::data::{make_examples, synthetic, Granularity, LabeledSequence};
use botlstm_core::linalg::softmax;
use botlstm_core::metrics::{compute_metrics, ConfusionCounts};
use botlstm_core::nn::{backward, bilstm_forward, init_params, ModelConfig, ModelParams};
use botlstm_core::stats::token_frequencies;
use botlstm_core::text::{build_vocabulary, decode, encode, normalize_token, tokenize, RESERVED};
use botlstm_core::train::{mean_loss, sgd_momentum_step, train, TrainingConfig};
use botlstm_core::{Account, Class, Token, TokenId};

fn tweet_strategy() -> impl Strategy<Value = String> {
    let piece = prop_oneof![
        "[a-zA-Z]{1,6}",
        "#[a-z0-9_]{1,5}",
        "@[a-z_]{1,5}",
        "https?://t\\.co/[a-z]{1,4}",
        Just("RT".to_string()),
        "[.,!?;:\"'()\\[\\]]{1,3}",
        "\\PC{1,3}",
    ];
    prop::collection::vec(
        (
            piece,
            prop_oneof![Just(" "), Just("\t"), Just("\u{3000}"), Just("")],
        ),
        0..8,
    )
    .prop_map(|v| {
        v.into_iter()
            .flat_map(|(a, b)| [a, b.to_string()])
            .collect()
    })
}

fn small_model(seed: u64) -> (ModelParams, botlstm_core::data::SyntheticCorpus) {
    let c = synthetic(seed, 2, 6).unwrap();
    let m = init_params(
        ModelConfig {
            hidden: 3,
            layers: 2,
            max_seq_len: 12,
        },
        c.table.clone(),
        seed,
    )
    .unwrap();
    (m, c)
}

proptest! {
    #[test]
    fn tokenizer_is_deterministic_and_well_formed(tweet in tweet_strategy()) {
        let a = tokenize(&tweet);
        prop_assert_eq!(&a, &tokenize(&tweet));
        for t in &a {
            prop_assert!(!t.as_str().is_empty());
            prop_assert!(!t.as_str().chars().any(char::is_whitespace));
        }
    }

    #[test]
    fn special_tokens_normalize_to_themselves(i in 0usize..RESERVED.len()) {
        let t = normalize_token(RESERVED[i]).unwrap();
        prop_assert_eq!(t.as_str(), RESERVED[i]);
    }

    #[test]
    fn encode_preserves_length_and_round_trips(tweets in prop::collection::vec(tweet_strategy(), 0..6), keep in 0u8..4) {
        let corpus: Vec<Vec<Token>> = tweets.iter().map(|t| tokenize(t)).collect();
        let keep = keep as usize;
        let glove: BTreeSet<String> = corpus
            .iter()
            .flatten()
            .enumerate()
            .filter(|(i, _)| i % (keep + 1) == 0)
            .map(|(_, t)| t.as_str().to_string())
            .collect();
        let vocab = build_vocabulary(corpus.iter().map(Vec::as_slice), &glove);
        let all: BTreeSet<&str> = corpus.iter().flatten().map(Token::as_str).collect();
        for (id, s) in vocab.surfaces().enumerate() {
            prop_assert_eq!(vocab.id(s), Some(TokenId(id as u32)));
            if id >= RESERVED.len() {
                prop_assert!(all.contains(s) && glove.contains(s));
            }
        }
        for tweet in &corpus {
            let ids = encode(tweet, &vocab);
            prop_assert_eq!(ids.len(), tweet.len());
            prop_assert!(ids.iter().all(|id| id.index() < vocab.len()));
            for (tok, back) in tweet.iter().zip(decode(&ids, &vocab)) {
                if vocab.id(tok.as_str()).is_some() {
                    prop_assert_eq!(back, Some(tok.as_str()));
                } else {
                    prop_assert_eq!(back, Some("<OOV>"));
                }
            }
        }
    }

    #[test]
    fn softmax_normalizes(logits in prop::collection::vec(-700.0f64..700.0, 1..6)) {
        let p = softmax(&logits);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(p.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }

    #[test]
    fn metrics_invariants(tp in 0u64..30, tn in 0u64..30, fp in 0u64..30, fn_ in 0u64..30) {
        prop_assume!(tp + tn + fp + fn_ > 0);
        let c = ConfusionCounts { tp, tn, fp, fn_ };
        let r = compute_metrics(&c).unwrap();
        for x in [r.precision, r.recall, r.specificity, r.accuracy, r.f_measure] {
            prop_assert!((0.0..=1.0).contains(&x));
        }
        prop_assert!((-1.0..=1.0).contains(&r.mcc));
        let acc = Ratio::new((tp + tn) as i64, c.total() as i64);
        prop_assert_eq!(acc * Ratio::from_integer(c.total() as i64), Ratio::from_integer((tp + tn) as i64));
        prop_assert!((r.accuracy * c.total() as f64 - (tp + tn) as f64).abs() < 1e-9);
        if !r.undefined.f_measure {
            let lo = r.precision.min(r.recall);
            let hi = r.precision.max(r.recall);
            prop_assert!(r.f_measure >= lo - 1e-15 && r.f_measure <= hi + 1e-15);
        }
        let swapped = compute_metrics(&ConfusionCounts { tp: tn, tn: tp, fp: fn_, fn_: fp }).unwrap();
        prop_assert!((swapped.accuracy - r.accuracy).abs() < 1e-15);
        prop_assert!((swapped.mcc.abs() - r.mcc.abs()).abs() < 1e-12);
        let npv = if tn + fn_ == 0 { 0.0 } else { tn as f64 / (tn + fn_) as f64 };
        prop_assert!((swapped.precision - npv).abs() < 1e-15);
    }

    #[test]
    fn frequency_table_is_permutation_invariant(
        tweets in prop::collection::vec("[a-e]( [a-e]){0,5}", 1..10),
        seed in any::<u64>(),
    ) {
        let tok = botlstm_core::text::Tokenizer::default();
        let mut a = Account::new("a", Class::Human);
        a.tweets = tweets.clone();
        let mut shuffled = tweets;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rand::seq::SliceRandom::shuffle(&mut shuffled[..], &mut rng);
        let mut b = Account::new("a", Class::Human);
        b.tweets = shuffled;
        let ta = token_frequencies(&[a], &tok, 10, false);
        prop_assert_eq!(&ta, &token_frequencies(&[b], &tok, 10, false));
        let sum: u64 = ta.entries.iter().map(|e| e.count).sum();
        prop_assert_eq!(sum, ta.retained_tokens);
        let rel: f64 = ta.entries.iter().map(|e| e.relative).sum();
        prop_assert!((rel - 1.0).abs() < 1e-9);
        prop_assert!(ta.entries.windows(2).all(|w| w[0].count > w[1].count
            || (w[0].count == w[1].count && w[0].token < w[1].token)));
    }

    #[test]
    fn adding_an_occurrence_never_lowers_rank(
        tweets in prop::collection::vec("[a-e]( [a-e]){0,5}", 1..8),
        extra in "[a-e]",
    ) {
        let tok = botlstm_core::text::Tokenizer::default();
        let mut a = Account::new("a", Class::Human);
        a.tweets = tweets;
        let before = token_frequencies(std::slice::from_ref(&a), &tok, 10, false).rank_of(&extra);
        a.tweets.push(extra.clone());
        let after = token_frequencies(&[a], &tok, 10, false).rank_of(&extra).unwrap();
        if let Some(b) = before {
            prop_assert!(after <= b);
        }
    }

    #[test]
    fn plain_sgd_step_goes_downhill(seed in 0u64..50) {
        let (mut m, c) = small_model(seed);
        let ex = make_examples(&c.accounts, &c.vocab, &botlstm_core::text::Tokenizer::default(), Granularity::PerTweet, 12);
        let s = &ex.sequences[seed as usize % ex.sequences.len()];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let trace = bilstm_forward(&m, &s.ids, 0.0, &mut rng, false).unwrap();
        let g = backward(&m, &trace, s.label).unwrap();
        let before: Vec<Vec<f64>> = m.trainable_tensors().into_iter().map(|(_, t)| t.to_vec()).collect();
        let mut v = botlstm_core::nn::Gradients::zeros_like(&m);
        sgd_momentum_step(&mut m, &g, &mut v, 0.01, 0.0).unwrap();
        let mut inner = 0.0;
        for ((old, (_, new)), (_, grad)) in before.iter().zip(m.trainable_tensors()).zip(g.tensors()) {
            for ((a, b), d) in old.iter().zip(new).zip(grad) {
                inner += (b - a) * d;
            }
        }
        prop_assert!(inner <= 0.0);
    }
}

#[test]
fn single_example_loss_decreases() {
    let (mut m, c) = small_model(3);
    let ex = make_examples(
        &c.accounts,
        &c.vocab,
        &botlstm_core::text::Tokenizer::default(),
        Granularity::PerTweet,
        12,
    );
    let data: Vec<LabeledSequence> = ex.sequences.into_iter().take(1).collect();
    let mut lr = 0.01;
    let before = mean_loss(&m, &data).unwrap();
    loop {
        let mut trial = m.clone();
        let cfg = TrainingConfig {
            learning_rate: lr,
            momentum: 0.0,
            batch_size: 1,
            epochs: 1,
            dropout_start: 0.0,
            dropout_end: 0.0,
            ..TrainingConfig::default()
        };
        train(&mut trial, &data, &cfg).unwrap();
        let after = mean_loss(&trial, &data).unwrap();
        if after <= before + 1e-9 {
            m = trial;
            assert!(mean_loss(&m, &data).unwrap() <= before + 1e-9);
            break;
        }
        lr /= 2.0;
        assert!(lr > 1e-6, "no descent even at tiny learning rates");
    }
}

#[test]
fn separable_toy_set_is_learned() {
    let c = synthetic(7, 10, 10).unwrap();
    let tok = botlstm_core::text::Tokenizer::default();
    let ex = make_examples(&c.accounts, &c.vocab, &tok, Granularity::PerTweet, 32);
    let mut m = init_params(
        ModelConfig {
            hidden: 8,
            layers: 1,
            max_seq_len: 32,
        },
        c.table.clone(),
        1,
    )
    .unwrap();
    let cfg = TrainingConfig {
        batch_size: 16,
        ..TrainingConfig::default()
    };
    let history = train(&mut m, &ex.sequences, &cfg).unwrap();
    assert_eq!(history.epochs.len(), 30);
    let eval =
        botlstm_core::train::evaluate(&m, &c.vocab, &tok, &c.accounts, Granularity::PerTweet)
            .unwrap();
    assert_eq!(eval.report.accuracy, 1.0);
}

#[test]
fn seeded_training_is_bit_reproducible() {
    let (m, c) = small_model(9);
    let ex = make_examples(
        &c.accounts,
        &c.vocab,
        &botlstm_core::text::Tokenizer::default(),
        Granularity::PerTweet,
        12,
    );
    let cfg = TrainingConfig {
        epochs: 2,
        batch_size: 4,
        seed: 5,
        ..TrainingConfig::default()
    };
    let (mut a, mut b) = (m.clone(), m);
    let ha = train(&mut a, &ex.sequences, &cfg).unwrap();
    let hb = train(&mut b, &ex.sequences, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(ha, hb);
}

#[test]
fn trainable_rows_start_small() {
    let (m, _) = small_model(1);
    for id in 1..6 {
        assert!(m
            .embedding
            .row(TokenId(id))
            .unwrap()
            .iter()
            .all(|x| x.abs() <= botlstm_core::embedding::TRAINABLE_INIT_RANGE));
    }
}
