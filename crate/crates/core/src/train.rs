//! Mini-batch SGD with classical momentum, the dropout schedule, and
//! account-level evaluation.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{make_examples, Account, Class, Granularity, LabeledSequence};
use crate::metrics::{compute_metrics, ConfusionCounts, MetricsReport};
use crate::nn::{backward_into, bilstm_forward, Gradients, ModelParams};
use crate::text::{Tokenizer, Vocabulary};
use crate::{Error, Result};

/// Probabilities below this are clamped before taking the log.
pub const MIN_PROBABILITY: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub dropout_start: f64,
    pub dropout_end: f64,
    pub seed: u64,
    pub max_seq_len: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            learning_rate: 0.01,
            momentum: 0.9,
            batch_size: 64,
            epochs: 30,
            dropout_start: 0.5,
            dropout_end: 0.1,
            seed: 0,
            max_seq_len: 64,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && (0.0..1.0).contains(&self.momentum)
            && self.batch_size >= 1
            && self.epochs >= 1
            && self.max_seq_len >= 1
            && 0.0 <= self.dropout_end
            && self.dropout_end <= self.dropout_start
            && self.dropout_start < 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("{self:?}")))
        }
    }
}

/// `-ln p(label)`, with `p` clamped at [`MIN_PROBABILITY`].
pub fn nll_loss(probabilities: &[f64], label: Class) -> f64 {
    -libm::log(probabilities[label.index()].max(MIN_PROBABILITY))
}

/// Linear decay from `dropout_start` at epoch 1 to `dropout_end` at the last
/// epoch.
pub fn dropout_schedule(epoch: usize, cfg: &TrainingConfig) -> f64 {
    if cfg.epochs <= 1 || epoch <= 1 {
        return cfg.dropout_start;
    }
    if epoch >= cfg.epochs {
        return cfg.dropout_end;
    }
    let frac = (epoch - 1) as f64 / (cfg.epochs - 1) as f64;
    cfg.dropout_start - (cfg.dropout_start - cfg.dropout_end) * frac
}

/// `v ← μ·v − lr·g; θ ← θ + v` on every trainable tensor. Fixed embedding
/// rows are not part of the trainable set and are never touched.
pub fn sgd_momentum_step(
    params: &mut ModelParams,
    grads: &Gradients,
    velocity: &mut Gradients,
    lr: f64,
    momentum: f64,
) -> Result<()> {
    let g = grads.tensors();
    if let Some((name, _)) = g.iter().find(|(_, t)| t.iter().any(|x| !x.is_finite())) {
        return Err(Error::NonFinite(format!("gradient {name}")));
    }
    let mut p = params.trainable_tensors_mut();
    if p.len() != g.len() {
        return Err(Error::Shape("gradients do not match parameters".into()));
    }
    let mut v = velocity_slices(velocity);
    for ((pt, (_, gt)), vt) in p.iter_mut().zip(&g).zip(v.iter_mut()) {
        for ((theta, &grad), vel) in pt.1.iter_mut().zip(gt.iter()).zip(vt.iter_mut()) {
            *vel = momentum * *vel - lr * grad;
            *theta += *vel;
        }
    }
    Ok(())
}

fn velocity_slices(v: &mut Gradients) -> Vec<&mut [f64]> {
    let mut out: Vec<&mut [f64]> = Vec::new();
    let dim = v.embedding.as_slice().len() / v.embedding.row_ids().len().max(1);
    if dim > 0 {
        out.extend(v.embedding.as_mut_slice().chunks_mut(dim));
    }
    for layer in &mut v.layers {
        out.extend(layer.forward.tensors_mut());
        out.extend(layer.backward.tensors_mut());
    }
    out.push(v.softmax_w.as_mut_slice());
    out.push(v.softmax_b.as_mut_slice());
    out
}

/// `p(bot) ≥ 0.5` is a bot; exact ties go to bot.
pub fn predict_class(p_bot: f64) -> Class {
    if p_bot >= 0.5 {
        Class::Bot
    } else {
        Class::Human
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
    pub dropout: f64,
    pub seconds: f64,
    /// Examples whose loss hit the probability clamp.
    pub clamped: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
}

impl TrainHistory {
    /// `epoch,loss,accuracy,dropout,seconds` with a header row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,loss,accuracy,dropout,seconds\n");
        for r in &self.epochs {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.epoch, r.loss, r.accuracy, r.dropout, r.seconds
            );
        }
        out
    }
}

/// Wall-clock source for the history. `no_std` builds use [`NoClock`].
pub trait Clock {
    fn now_seconds(&mut self) -> f64;
}

pub struct NoClock;

impl Clock for NoClock {
    fn now_seconds(&mut self) -> f64 {
        0.0
    }
}

/// One example of a mini-batch with the seed for its dropout masks.
#[derive(Debug, Clone, Copy)]
pub struct BatchItem<'a> {
    pub sequence: &'a LabeledSequence,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct BatchOutcome {
    /// Summed (not averaged) gradient.
    pub grads: Gradients,
    pub loss_sum: f64,
    pub correct: usize,
    pub clamped: usize,
    pub count: usize,
}

impl BatchOutcome {
    pub fn empty(model: &ModelParams) -> Self {
        BatchOutcome {
            grads: Gradients::zeros_like(model),
            loss_sum: 0.0,
            correct: 0,
            clamped: 0,
            count: 0,
        }
    }

    pub fn merge(&mut self, other: &BatchOutcome) {
        self.grads.add_assign(&other.grads);
        self.loss_sum += other.loss_sum;
        self.correct += other.correct;
        self.clamped += other.clamped;
        self.count += other.count;
    }

    /// Forward + backward for one example, accumulated in place.
    pub fn accumulate(
        &mut self,
        model: &ModelParams,
        item: &BatchItem<'_>,
        dropout: f64,
    ) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(item.seed);
        let trace = bilstm_forward(model, &item.sequence.ids, dropout, &mut rng, true)?;
        let p_true = backward_into(model, &trace, item.sequence.label, &mut self.grads)?;
        self.loss_sum += nll_loss(&trace.probabilities, item.sequence.label);
        if p_true < MIN_PROBABILITY {
            self.clamped += 1;
        }
        if predict_class(trace.p_bot()) == item.sequence.label {
            self.correct += 1;
        }
        self.count += 1;
        Ok(())
    }
}

/// Computes the summed gradient of a mini-batch. Implementations may fan out
/// but must reduce in a fixed order.
pub trait BatchRunner {
    fn run(
        &self,
        model: &ModelParams,
        items: &[BatchItem<'_>],
        dropout: f64,
    ) -> Result<BatchOutcome>;
}

/// Single-threaded runner; bit-reproducible.
#[derive(Debug, Clone, Copy, Default)]
pub struct Serial;

impl BatchRunner for Serial {
    fn run(
        &self,
        model: &ModelParams,
        items: &[BatchItem<'_>],
        dropout: f64,
    ) -> Result<BatchOutcome> {
        let mut out = BatchOutcome::empty(model);
        for item in items {
            out.accumulate(model, item, dropout)?;
        }
        Ok(out)
    }
}

pub fn train(
    model: &mut ModelParams,
    data: &[LabeledSequence],
    cfg: &TrainingConfig,
) -> Result<TrainHistory> {
    train_with(model, data, cfg, &Serial, &mut NoClock, &mut |_| {})
}

/// Full training loop: seeded shuffle each epoch, batches of
/// `cfg.batch_size` (the last may be smaller), mean gradient, one momentum
/// step per batch.
pub fn train_with<R, C>(
    model: &mut ModelParams,
    data: &[LabeledSequence],
    cfg: &TrainingConfig,
    runner: &R,
    clock: &mut C,
    on_epoch: &mut dyn FnMut(&EpochRecord),
) -> Result<TrainHistory>
where
    R: BatchRunner + ?Sized,
    C: Clock + ?Sized,
{
    cfg.validate()?;
    model.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut velocity = Gradients::zeros_like(model);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = TrainHistory::default();

    for epoch in 1..=cfg.epochs {
        let started = clock.now_seconds();
        let dropout = dropout_schedule(epoch, cfg);
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0;
        let mut clamped = 0;
        for batch in order.chunks(cfg.batch_size) {
            let items: Vec<BatchItem<'_>> = batch
                .iter()
                .map(|&i| BatchItem {
                    sequence: &data[i],
                    seed: rng.next_u64(),
                })
                .collect();
            let mut outcome = runner.run(model, &items, dropout)?;
            outcome.grads.scale(1.0 / outcome.count as f64);
            sgd_momentum_step(
                model,
                &outcome.grads,
                &mut velocity,
                cfg.learning_rate,
                cfg.momentum,
            )?;
            loss_sum += outcome.loss_sum;
            correct += outcome.correct;
            clamped += outcome.clamped;
        }
        let record = EpochRecord {
            epoch,
            loss: loss_sum / data.len() as f64,
            accuracy: correct as f64 / data.len() as f64,
            dropout,
            seconds: clock.now_seconds() - started,
            clamped,
        };
        on_epoch(&record);
        history.epochs.push(record);
    }
    Ok(history)
}

/// Inference-mode `p(bot)` for one id sequence.
pub fn predict_sequence(model: &ModelParams, ids: &[crate::TokenId]) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    Ok(bilstm_forward(model, ids, 0.0, &mut rng, false)?.p_bot())
}

/// Mean loss over `data` in inference mode.
pub fn mean_loss(model: &ModelParams, data: &[LabeledSequence]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut sum = 0.0;
    for s in data {
        let tr = bilstm_forward(model, &s.ids, 0.0, &mut rng, false)?;
        sum += nll_loss(&tr.probabilities, s.label);
    }
    Ok(sum / data.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccountScore {
    pub p_bot: f64,
    pub predicted: Class,
    /// Sequences averaged; 0 means the account had no usable text and
    /// `p_bot` defaults to 0.5.
    pub sequences: usize,
}

/// Per-account `p(bot)`: the mean over the account's sequences at the given
/// granularity, or 0.5 for accounts without usable text.
pub fn score_accounts(
    model: &ModelParams,
    vocab: &Vocabulary,
    tokenizer: &Tokenizer,
    accounts: &[Account],
    granularity: Granularity,
) -> Result<Vec<AccountScore>> {
    let examples = make_examples(
        accounts,
        vocab,
        tokenizer,
        granularity,
        model.config.max_seq_len,
    );
    let mut sums = vec![0.0; accounts.len()];
    let mut counts = vec![0usize; accounts.len()];
    for s in &examples.sequences {
        sums[s.account] += predict_sequence(model, &s.ids)?;
        counts[s.account] += 1;
    }
    Ok(sums
        .into_iter()
        .zip(counts)
        .map(|(sum, n)| {
            let p_bot = if n == 0 { 0.5 } else { sum / n as f64 };
            AccountScore {
                p_bot,
                predicted: predict_class(p_bot),
                sequences: n,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub counts: ConfusionCounts,
    pub report: MetricsReport,
    pub scores: Vec<AccountScore>,
    /// Accounts scored exactly 0.5 and therefore called bot.
    pub ties: usize,
}

/// Classifies each account exactly once and reports the six metrics.
pub fn evaluate(
    model: &ModelParams,
    vocab: &Vocabulary,
    tokenizer: &Tokenizer,
    accounts: &[Account],
    granularity: Granularity,
) -> Result<Evaluation> {
    if accounts.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let scores = score_accounts(model, vocab, tokenizer, accounts, granularity)?;
    evaluation_from_scores(accounts, scores)
}

/// Builds an [`Evaluation`] from precomputed scores (one per account).
pub fn evaluation_from_scores(
    accounts: &[Account],
    scores: Vec<AccountScore>,
) -> Result<Evaluation> {
    if accounts.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let predictions: Vec<Class> = scores.iter().map(|s| s.predicted).collect();
    let labels: Vec<Class> = accounts.iter().map(|a| a.label).collect();
    let counts = crate::metrics::tally(&predictions, &labels)?;
    let report = compute_metrics(&counts)?;
    let ties = scores.iter().filter(|s| s.p_bot == 0.5).count();
    Ok(Evaluation {
        counts,
        report,
        scores,
        ties,
    })
}
