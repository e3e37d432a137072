//! File formats: GloVe text, account/tweet CSVs, vocabulary TSV.

use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{BufRead, BufReader};
use std::path::Path;

use botlstm_core::data::join_tweets;
use botlstm_core::embedding::{GloveBuilder, GloveVectors};
use botlstm_core::{Account, Class, Error as CoreError, Vocabulary};

use crate::error::{CliError, Result};

pub const ACCOUNTS_HEADER: [&str; 2] = ["account_id", "label"];
pub const TWEETS_HEADER: [&str; 2] = ["account_id", "tweet_text"];

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| CliError::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

/// Writes `contents`, creating parent directories as needed.
pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

/// Streams a GloVe file. With `keep`, vectors are stored only for those
/// words, which keeps memory bounded on large files.
pub fn read_glove(
    path: &Path,
    expected_dim: Option<usize>,
    keep: Option<BTreeSet<String>>,
) -> Result<GloveVectors> {
    let mut builder = GloveBuilder::new(expected_dim);
    if let Some(words) = keep {
        builder = builder.retain_only(words);
    }
    for line in BufReader::new(open(path)?).lines() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        builder
            .push_line(&line)
            .map_err(|e| CliError::at(path, e))?;
    }
    builder.finish().map_err(|e| CliError::at(path, e))
}

/// One tweet per line; blank lines are kept as empty tweets.
pub fn read_corpus_lines(path: &Path) -> Result<Vec<String>> {
    BufReader::new(open(path)?)
        .lines()
        .map(|l| l.map_err(|e| CliError::io(path, e)))
        .collect()
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    let line = e.position().map_or(0, |p| p.line());
    CliError::Csv {
        path: path.to_path_buf(),
        line,
        message: e.to_string(),
    }
}

fn read_pairs(path: &Path, header: [&str; 2]) -> Result<Vec<(u64, String, String)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(open(path)?);
    let found = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if found.len() != 2 || found.iter().zip(header).any(|(a, b)| a.trim() != b) {
        return Err(CliError::Csv {
            path: path.to_path_buf(),
            line: 1,
            message: format!(
                "expected header {:?}, found {:?}",
                header.join(","),
                found.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        rows.push((line, record[0].to_string(), record[1].to_string()));
    }
    Ok(rows)
}

/// `account_id,label` rows in file order.
pub fn read_accounts(path: &Path) -> Result<Vec<(String, Class)>> {
    read_pairs(path, ACCOUNTS_HEADER)?
        .into_iter()
        .map(|(line, id, label)| match Class::parse(label.trim()) {
            Some(class) => Ok((id, class)),
            None => Err(CliError::at(
                path,
                CoreError::UnknownLabel {
                    line: line as usize,
                    value: label,
                },
            )),
        })
        .collect()
}

/// `account_id,tweet_text` rows in file order.
pub fn read_tweets(path: &Path) -> Result<Vec<(String, String)>> {
    Ok(read_pairs(path, TWEETS_HEADER)?
        .into_iter()
        .map(|(_, id, text)| (id, text))
        .collect())
}

/// Joins the two CSVs. Accounts without tweets are kept with an empty list.
pub fn load_dataset(accounts: &Path, tweets: &Path) -> Result<Vec<Account>> {
    let labels = read_accounts(accounts)?;
    let rows = read_tweets(tweets)?;
    join_tweets(labels, rows).map_err(|e| CliError::at(tweets, e))
}

/// Accounts built from a tweets CSV alone, in first-appearance order. The
/// label is a placeholder.
pub fn accounts_from_tweets(rows: Vec<(String, String)>) -> Vec<Account> {
    let mut accounts: Vec<Account> = Vec::new();
    let mut index = std::collections::HashMap::new();
    for (id, text) in rows {
        let slot = *index.entry(id.clone()).or_insert_with(|| {
            accounts.push(Account::new(id, Class::Human));
            accounts.len() - 1
        });
        accounts[slot].tweets.push(text);
    }
    accounts
}

pub fn write_accounts(path: &Path, accounts: &[Account]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut rows = vec![ACCOUNTS_HEADER.map(String::from)];
    rows.extend(
        accounts
            .iter()
            .map(|a| [a.id.clone(), a.label.as_str().to_string()]),
    );
    for row in rows {
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    write_file(
        path,
        w.into_inner()
            .map_err(|e| CliError::Internal(e.to_string()))?,
    )
}

pub fn write_tweets(path: &Path, accounts: &[Account]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TWEETS_HEADER)
        .map_err(|e| csv_error(path, e))?;
    for a in accounts {
        for t in &a.tweets {
            w.write_record([a.id.as_str(), t.as_str()])
                .map_err(|e| csv_error(path, e))?;
        }
    }
    write_file(
        path,
        w.into_inner()
            .map_err(|e| CliError::Internal(e.to_string()))?,
    )
}

pub fn write_vocab(path: &Path, vocab: &Vocabulary) -> Result<()> {
    write_file(path, vocab.to_tsv())
}

pub fn read_vocab(path: &Path) -> Result<Vocabulary> {
    Vocabulary::from_tsv(&read_text(path)?).map_err(|e| CliError::at(path, e))
}
