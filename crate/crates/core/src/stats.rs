//! Token-frequency tables for comparing what each class talks about.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use crate::data::Account;
use crate::text::Tokenizer;

/// Common English words dropped when stopword removal is on.
pub const STOPWORDS: &[&str] = &[
    "a",
    "about",
    "above",
    "after",
    "again",
    "against",
    "all",
    "am",
    "an",
    "and",
    "any",
    "are",
    "as",
    "at",
    "be",
    "because",
    "been",
    "before",
    "being",
    "below",
    "between",
    "both",
    "but",
    "by",
    "can",
    "could",
    "did",
    "do",
    "does",
    "doing",
    "down",
    "during",
    "each",
    "few",
    "for",
    "from",
    "further",
    "had",
    "has",
    "have",
    "having",
    "he",
    "her",
    "here",
    "hers",
    "herself",
    "him",
    "himself",
    "his",
    "how",
    "i",
    "if",
    "in",
    "into",
    "is",
    "it",
    "its",
    "itself",
    "just",
    "me",
    "more",
    "most",
    "my",
    "myself",
    "no",
    "nor",
    "not",
    "now",
    "of",
    "off",
    "on",
    "once",
    "only",
    "or",
    "other",
    "our",
    "ours",
    "ourselves",
    "out",
    "over",
    "own",
    "same",
    "she",
    "should",
    "so",
    "some",
    "such",
    "than",
    "that",
    "the",
    "their",
    "theirs",
    "them",
    "themselves",
    "then",
    "there",
    "these",
    "they",
    "this",
    "those",
    "through",
    "to",
    "too",
    "under",
    "until",
    "up",
    "very",
    "was",
    "we",
    "were",
    "what",
    "when",
    "where",
    "which",
    "while",
    "who",
    "whom",
    "why",
    "will",
    "with",
    "would",
    "you",
    "your",
    "yours",
    "yourself",
    "yourselves",
];

pub fn is_stopword(word: &str) -> bool {
    STOPWORDS.binary_search(&word).is_ok()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyEntry {
    pub token: String,
    pub count: u64,
    /// Share of all retained tokens, not only of the listed top entries.
    pub relative: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrequencyTable {
    /// Count descending, ties by token.
    pub entries: Vec<FrequencyEntry>,
    /// Special tokens (`<URL>` etc.), same ordering, counted separately.
    pub specials: Vec<(String, u64)>,
    pub retained_tokens: u64,
}

impl FrequencyTable {
    pub fn rank_of(&self, token: &str) -> Option<usize> {
        self.entries
            .iter()
            .position(|e| e.token == token)
            .map(|i| i + 1)
    }

    /// `token,count,relative_frequency` with a header row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("token,count,relative_frequency\n");
        for e in &self.entries {
            let _ = writeln!(out, "{},{},{}", csv_field(&e.token), e.count, e.relative);
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        let mut q = String::from("\"");
        q.push_str(&s.replace('"', "\"\""));
        q.push('"');
        q
    } else {
        s.to_string()
    }
}

fn sorted(counts: BTreeMap<String, u64>) -> Vec<(String, u64)> {
    let mut v: Vec<(String, u64)> = counts.into_iter().collect();
    v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    v
}

/// Counts words across every tweet. Punctuation is ignored, special tokens go
/// to the sidecar list, and with `drop_stopwords` the built-in list is
/// removed before relative frequencies are computed.
pub fn token_frequencies(
    accounts: &[Account],
    tokenizer: &Tokenizer,
    top_k: usize,
    drop_stopwords: bool,
) -> FrequencyTable {
    let mut words: BTreeMap<String, u64> = BTreeMap::new();
    let mut specials: BTreeMap<String, u64> = BTreeMap::new();
    for tweet in accounts.iter().flat_map(|a| &a.tweets) {
        for tok in tokenizer.tokenize(tweet) {
            if tok.is_special() {
                *specials.entry(tok.as_str().to_string()).or_default() += 1;
            } else if !tok.is_punctuation() && !(drop_stopwords && is_stopword(tok.as_str())) {
                *words.entry(tok.as_str().to_string()).or_default() += 1;
            }
        }
    }
    let retained: u64 = words.values().sum();
    let entries = sorted(words)
        .into_iter()
        .take(top_k)
        .map(|(token, count)| FrequencyEntry {
            token,
            count,
            relative: count as f64 / retained as f64,
        })
        .collect();
    FrequencyTable {
        entries,
        specials: sorted(specials),
        retained_tokens: retained,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankDelta {
    pub token: String,
    pub rank_a: usize,
    pub rank_b: usize,
    /// `rank_b - rank_a`.
    pub delta: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DivergenceReport {
    pub only_in_a: Vec<String>,
    pub only_in_b: Vec<String>,
    /// Shared tokens in `a`'s rank order.
    pub shared: Vec<RankDelta>,
}

/// Compares the top `top_k` entries of two tables (ranks are 1-based).
pub fn compare_tables(a: &FrequencyTable, b: &FrequencyTable, top_k: usize) -> DivergenceReport {
    let top = |t: &FrequencyTable| -> Vec<String> {
        t.entries
            .iter()
            .take(top_k)
            .map(|e| e.token.clone())
            .collect()
    };
    let (ta, tb) = (top(a), top(b));
    let mut report = DivergenceReport::default();
    for (i, tok) in ta.iter().enumerate() {
        match tb.iter().position(|t| t == tok) {
            Some(j) => report.shared.push(RankDelta {
                token: tok.clone(),
                rank_a: i + 1,
                rank_b: j + 1,
                delta: j as i64 - i as i64,
            }),
            None => report.only_in_a.push(tok.clone()),
        }
    }
    report.only_in_b = tb.into_iter().filter(|t| !ta.contains(t)).collect();
    report
}
