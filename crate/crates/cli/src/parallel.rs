//! Thread-pool implementations of the core's batch and scoring hooks.

use std::thread;
use std::time::Instant;

use botlstm_core::data::Granularity;
use botlstm_core::nn::ModelParams;
use botlstm_core::text::Tokenizer;
use botlstm_core::train::{
    score_accounts, AccountScore, BatchItem, BatchOutcome, BatchRunner, Clock, Serial,
};
use botlstm_core::{Account, Vocabulary};

/// Splits each batch into `workers` contiguous chunks and sums the chunk
/// gradients in chunk order. Results depend on the worker count but not on
/// scheduling; one worker matches [`Serial`] bit for bit.
#[derive(Debug, Clone, Copy)]
pub struct Threaded {
    pub workers: usize,
}

impl BatchRunner for Threaded {
    fn run(
        &self,
        model: &ModelParams,
        items: &[BatchItem<'_>],
        dropout: f64,
    ) -> botlstm_core::Result<BatchOutcome> {
        if self.workers <= 1 || items.len() < 2 {
            return Serial.run(model, items, dropout);
        }
        let chunk = items.len().div_ceil(self.workers);
        let parts: Vec<botlstm_core::Result<BatchOutcome>> = thread::scope(|s| {
            let handles: Vec<_> = items
                .chunks(chunk)
                .map(|c| s.spawn(move || Serial.run(model, c, dropout)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("worker panicked"))
                .collect()
        });
        let mut total = BatchOutcome::empty(model);
        for part in parts {
            total.merge(&part?);
        }
        Ok(total)
    }
}

/// Scores accounts on up to `workers` threads. Each account is scored
/// independently, so the output does not depend on `workers`.
pub fn score_accounts_parallel(
    model: &ModelParams,
    vocab: &Vocabulary,
    tokenizer: &Tokenizer,
    accounts: &[Account],
    granularity: Granularity,
    workers: usize,
) -> botlstm_core::Result<Vec<AccountScore>> {
    if workers <= 1 || accounts.len() < 2 {
        return score_accounts(model, vocab, tokenizer, accounts, granularity);
    }
    let chunk = accounts.len().div_ceil(workers);
    let parts: Vec<botlstm_core::Result<Vec<AccountScore>>> = thread::scope(|s| {
        let handles: Vec<_> = accounts
            .chunks(chunk)
            .map(|c| s.spawn(move || score_accounts(model, vocab, tokenizer, c, granularity)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect()
    });
    let mut out = Vec::with_capacity(accounts.len());
    for part in parts {
        out.extend(part?);
    }
    Ok(out)
}

/// Monotonic wall clock for training history.
pub struct WallClock(Instant);

impl WallClock {
    pub fn new() -> Self {
        WallClock(Instant::now())
    }
}

impl Default for WallClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for WallClock {
    fn now_seconds(&mut self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}
