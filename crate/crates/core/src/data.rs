//! Accounts, labeled sequences, mixed test sets and the synthetic corpus.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::embedding::{build_table, EmbeddingTable, GloveVectors};
use crate::text::{build_vocabulary, encode, Token, TokenId, Tokenizer, Vocabulary, URL};
use crate::{Error, Result};

/// Account label. `Bot` is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Class {
    Bot,
    Human,
}

impl Class {
    /// Output-row index in the softmax layer.
    pub fn index(self) -> usize {
        match self {
            Class::Bot => 0,
            Class::Human => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Class::Bot => "bot",
            Class::Human => "human",
        }
    }

    /// Accepts `bot` / `human` in any case.
    pub fn parse(s: &str) -> Option<Class> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("bot") {
            Some(Class::Bot)
        } else if s.eq_ignore_ascii_case("human") {
            Some(Class::Human)
        } else {
            None
        }
    }
}

impl fmt::Display for Class {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Account {
    pub id: String,
    pub label: Class,
    /// Oldest first.
    pub tweets: Vec<String>,
}

impl Account {
    pub fn new(id: impl Into<String>, label: Class) -> Self {
        Account {
            id: id.into(),
            label,
            tweets: Vec::new(),
        }
    }
}

/// Ids of accounts that have no tweets.
pub fn empty_accounts(accounts: &[Account]) -> Vec<&str> {
    accounts
        .iter()
        .filter(|a| a.tweets.is_empty())
        .map(|a| a.id.as_str())
        .collect()
}

/// Attaches `(account_id, text)` rows to their accounts, preserving row order.
/// Every unknown id is reported in one error.
pub fn join_tweets<I, A, B>(accounts: Vec<(String, Class)>, tweets: I) -> Result<Vec<Account>>
where
    I: IntoIterator<Item = (A, B)>,
    A: AsRef<str>,
    B: Into<String>,
{
    let mut index = BTreeMap::new();
    let mut out = Vec::with_capacity(accounts.len());
    for (id, label) in accounts {
        if index.insert(id.clone(), out.len()).is_some() {
            return Err(Error::DuplicateAccount(id));
        }
        out.push(Account::new(id, label));
    }
    let mut unknown: Vec<String> = Vec::new();
    for (id, text) in tweets {
        match index.get(id.as_ref()) {
            Some(&i) => out[i].tweets.push(text.into()),
            None => {
                if !unknown.iter().any(|u| u == id.as_ref()) {
                    unknown.push(id.as_ref().to_string());
                }
            }
        }
    }
    if unknown.is_empty() {
        Ok(out)
    } else {
        Err(Error::UnknownAccounts(unknown))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub humans_available: usize,
    pub bots_available: usize,
    pub per_class: usize,
    pub seed: u64,
}

/// Balanced human/bot sample in shuffled order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MixedTestSet {
    pub accounts: Vec<Account>,
    pub provenance: Provenance,
}

/// Samples `per_class` accounts without replacement from each side.
pub fn compose_test_set(
    humans: &[Account],
    bots: &[Account],
    per_class: usize,
    seed: u64,
) -> Result<MixedTestSet> {
    let available = humans.len().min(bots.len());
    if per_class > available {
        return Err(Error::NotEnoughAccounts {
            requested: per_class,
            available,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut accounts = Vec::with_capacity(2 * per_class);
    for side in [humans, bots] {
        let picked = rand::seq::index::sample(&mut rng, side.len(), per_class);
        accounts.extend(picked.into_iter().map(|i| side[i].clone()));
    }
    accounts.shuffle(&mut rng);
    Ok(MixedTestSet {
        accounts,
        provenance: Provenance {
            humans_available: humans.len(),
            bots_available: bots.len(),
            per_class,
            seed,
        },
    })
}

/// Stratified, seeded split of accounts into `(train, held_out)`.
pub fn split_accounts(
    accounts: &[Account],
    train_fraction: f64,
    seed: u64,
) -> (Vec<Account>, Vec<Account>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in [Class::Bot, Class::Human] {
        let mut side: Vec<&Account> = accounts.iter().filter(|a| a.label == class).collect();
        side.shuffle(&mut rng);
        let n_train = libm::round(side.len() as f64 * train_fraction) as usize;
        train.extend(side[..n_train].iter().map(|a| (*a).clone()));
        test.extend(side[n_train..].iter().map(|a| (*a).clone()));
    }
    train.shuffle(&mut rng);
    test.shuffle(&mut rng);
    (train, test)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Granularity {
    /// One sequence per tweet.
    #[default]
    PerTweet,
    /// One sequence per account: tweets newest-first, `<PAD>`-separated.
    PerAccount,
}

impl Granularity {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "per_tweet" | "per-tweet" | "tweet" => Some(Granularity::PerTweet),
            "per_account" | "per-account" | "account" => Some(Granularity::PerAccount),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Granularity::PerTweet => "per_tweet",
            Granularity::PerAccount => "per_account",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledSequence {
    pub ids: Vec<TokenId>,
    pub label: Class,
    /// Index of the source account in the slice given to [`make_examples`].
    pub account: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Examples {
    pub sequences: Vec<LabeledSequence>,
    /// Sequences that came out empty and were skipped.
    pub dropped: usize,
}

pub fn make_examples(
    accounts: &[Account],
    vocab: &Vocabulary,
    tokenizer: &Tokenizer,
    mode: Granularity,
    max_seq_len: usize,
) -> Examples {
    let mut out = Examples::default();
    for (a, account) in accounts.iter().enumerate() {
        let encoded = account
            .tweets
            .iter()
            .map(|t| encode(&tokenizer.tokenize(t), vocab));
        match mode {
            Granularity::PerTweet => {
                if account.tweets.is_empty() {
                    out.dropped += 1;
                }
                for mut ids in encoded {
                    if ids.is_empty() {
                        out.dropped += 1;
                        continue;
                    }
                    ids.truncate(max_seq_len);
                    out.sequences.push(LabeledSequence {
                        ids,
                        label: account.label,
                        account: a,
                    });
                }
            }
            Granularity::PerAccount => {
                let tweets: Vec<Vec<TokenId>> = encoded.filter(|ids| !ids.is_empty()).collect();
                let mut ids = Vec::new();
                for tweet in tweets.iter().rev() {
                    if ids.len() >= max_seq_len {
                        break;
                    }
                    if !ids.is_empty() {
                        ids.push(TokenId::PAD);
                    }
                    ids.extend_from_slice(tweet);
                }
                ids.truncate(max_seq_len);
                if ids.is_empty() {
                    out.dropped += 1;
                } else {
                    out.sequences.push(LabeledSequence {
                        ids,
                        label: account.label,
                        account: a,
                    });
                }
            }
        }
    }
    out
}

pub const PROMO_WORDS: [&str; 12] = [
    "deal", "sale", "buy", "free", "discount", "offer", "win", "cheap", "shop", "price", "order",
    "save",
];
pub const SOCIAL_WORDS: [&str; 12] = [
    "love", "thank", "thanks", "haha", "birthday", "happy", "friend", "family", "miss", "fun",
    "tonight", "lol",
];
const FILLER_SEED: [&str; 20] = [
    "the", "a", "to", "and", "is", "in", "it", "of", "for", "on", "this", "that", "with", "you",
    "my", "just", "so", "at", "be", "now",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub seed: u64,
    pub per_class: usize,
    /// Number of neutral filler words shared by both classes.
    pub filler_words: usize,
    pub min_tweets: usize,
    pub max_tweets: usize,
    pub embed_dim: usize,
    /// Chance that a filler slot is replaced by a word with no vector.
    pub noise_rate: f64,
    /// Chance of a URL (and promo words) in a bot tweet.
    pub bot_url_rate: f64,
    /// Chance of a URL in a human tweet.
    pub human_url_rate: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            seed: 7,
            per_class: 50,
            filler_words: 40,
            min_tweets: 16,
            max_tweets: 24,
            embed_dim: 25,
            noise_rate: 0.05,
            bot_url_rate: 0.9,
            human_url_rate: 0.1,
        }
    }
}

/// Generator bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SyntheticStats {
    pub tweets: usize,
    /// Every generated word becomes exactly one token.
    pub tokens: usize,
    /// Words deliberately left out of the embedding list.
    pub oov_tokens: usize,
}

impl SyntheticStats {
    pub fn oov_rate(&self) -> f64 {
        if self.tokens == 0 {
            0.0
        } else {
            self.oov_tokens as f64 / self.tokens as f64
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub accounts: Vec<Account>,
    pub vocab: Vocabulary,
    pub table: EmbeddingTable,
    /// Word vectors the table was built from (a toy GloVe file).
    pub glove: GloveVectors,
    pub stats: SyntheticStats,
}

/// Desk-scale corpus with [`SyntheticConfig::default`] apart from the
/// arguments. `vocab_size` is the number of filler words.
pub fn synthetic(seed: u64, per_class: usize, vocab_size: usize) -> Result<SyntheticCorpus> {
    synthetic_with(&SyntheticConfig {
        seed,
        per_class,
        filler_words: vocab_size,
        ..SyntheticConfig::default()
    })
}

fn random_string(rng: &mut ChaCha8Rng, alphabet: &[u8], len: usize) -> String {
    (0..len)
        .map(|_| alphabet[rng.gen_range(0..alphabet.len())] as char)
        .collect()
}

/// Bots post links with promotional words; humans post social words and
/// rarely link. Deterministic per seed.
pub fn synthetic_with(cfg: &SyntheticConfig) -> Result<SyntheticCorpus> {
    if cfg.per_class == 0
        || cfg.min_tweets == 0
        || cfg.min_tweets > cfg.max_tweets
        || cfg.embed_dim == 0
    {
        return Err(Error::Config(format!("invalid synthetic config {cfg:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let filler: Vec<String> = (0..cfg.filler_words)
        .map(|i| match FILLER_SEED.get(i) {
            Some(w) => w.to_string(),
            None => format!("word{i}"),
        })
        .collect();
    let lower = b"abcdefghijklmnopqrstuvwxyz";
    let alnum = b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";

    let mut stats = SyntheticStats::default();
    let mut accounts = Vec::with_capacity(2 * cfg.per_class);
    for class in [Class::Human, Class::Bot] {
        for n in 0..cfg.per_class {
            let mut account = Account::new(format!("{}-{:04}", class.as_str(), n), class);
            let n_tweets = rng.gen_range(cfg.min_tweets..=cfg.max_tweets);
            for _ in 0..n_tweets {
                let mut words: Vec<String> = Vec::new();
                for _ in 0..rng.gen_range(4..=9) {
                    if !filler.is_empty() && rng.gen::<f64>() >= cfg.noise_rate {
                        words.push(filler[rng.gen_range(0..filler.len())].clone());
                    } else {
                        words.push(format!("zq{}", random_string(&mut rng, lower, 4)));
                        stats.oov_tokens += 1;
                    }
                }
                let url = format!("http://t.co/{}", random_string(&mut rng, alnum, 7));
                match class {
                    Class::Bot => {
                        if rng.gen::<f64>() < cfg.bot_url_rate {
                            words.push(url);
                            for _ in 0..rng.gen_range(1..=3) {
                                words.push(PROMO_WORDS[rng.gen_range(0..PROMO_WORDS.len())].into());
                            }
                        }
                        if rng.gen::<f64>() < 0.3 {
                            words.push(format!(
                                "#{}",
                                PROMO_WORDS[rng.gen_range(0..PROMO_WORDS.len())]
                            ));
                        }
                    }
                    Class::Human => {
                        if rng.gen::<f64>() < cfg.human_url_rate {
                            words.push(url);
                        }
                        for _ in 0..rng.gen_range(1..=3) {
                            words.push(SOCIAL_WORDS[rng.gen_range(0..SOCIAL_WORDS.len())].into());
                        }
                        if rng.gen::<f64>() < 0.4 {
                            words.push(format!("@{}", random_string(&mut rng, lower, 6)));
                        }
                    }
                }
                words.shuffle(&mut rng);
                stats.tokens += words.len();
                stats.tweets += 1;
                account.tweets.push(words.join(" "));
            }
            accounts.push(account);
        }
    }
    accounts.shuffle(&mut rng);

    let mut listed: Vec<String> = filler;
    listed.extend(
        PROMO_WORDS
            .iter()
            .chain(SOCIAL_WORDS.iter())
            .map(|w| w.to_string()),
    );
    let rows: Vec<(String, Vec<f64>)> = listed
        .into_iter()
        .map(|w| {
            let v = (0..cfg.embed_dim)
                .map(|_| rng.gen_range(-0.5..0.5))
                .collect();
            (w, v)
        })
        .collect();
    let glove = GloveVectors::from_rows(cfg.embed_dim, rows)?;

    let tokenizer = Tokenizer::default();
    let corpus: Vec<Vec<Token>> = accounts
        .iter()
        .flat_map(|a| a.tweets.iter().map(|t| tokenizer.tokenize(t)))
        .collect();
    let vocab = build_vocabulary(corpus.iter().map(Vec::as_slice), &glove);
    let table = build_table(&vocab, &glove, cfg.seed ^ 0x5eed)?;
    Ok(SyntheticCorpus {
        accounts,
        vocab,
        table,
        glove,
        stats,
    })
}

/// Accuracy of the rule "bot iff more than half of the account's tweets
/// contain a URL". Accounts without tweets count as errors.
pub fn url_rule_accuracy(accounts: &[Account], tokenizer: &Tokenizer) -> f64 {
    if accounts.is_empty() {
        return 0.0;
    }
    let correct = accounts
        .iter()
        .filter(|a| {
            if a.tweets.is_empty() {
                return false;
            }
            let with_url = a
                .tweets
                .iter()
                .filter(|t| tokenizer.tokenize(t).iter().any(|tok| tok.as_str() == URL))
                .count();
            let predicted = if 2 * with_url > a.tweets.len() {
                Class::Bot
            } else {
                Class::Human
            };
            predicted == a.label
        })
        .count();
    correct as f64 / accounts.len() as f64
}

/// Placeholder accounts with no tweets, for composition checks.
pub fn blank_accounts(prefix: &str, label: Class, n: usize) -> Vec<Account> {
    (0..n)
        .map(|i| Account::new(format!("{prefix}{i}"), label))
        .collect()
}
