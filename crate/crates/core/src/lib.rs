//! Bidirectional peephole-LSTM classifier for telling bot accounts from human
//! accounts using nothing but tweet text.
//!
//! The crate is `no_std` (it needs `alloc`). Everything that touches files,
//! clocks or threads lives in the companion `botlstm` crate; the hooks it uses
//! are [`train::BatchRunner`] and [`train::Clock`].
//!
//! Pipeline, bottom up:
//!
//! * [`text`]: tokenizer, special-token mapping, vocabulary.
//! * [`embedding`]: GloVe parsing and the embedding table with its trainable OOV row.
//! * [`nn`]: the stacked BiLSTM, forward pass and BPTT.
//! * [`train`]: momentum SGD, dropout schedule, evaluation.
//! * [`metrics`]: confusion counts and the six reported metrics.
//! * [`data`]: accounts, test-set composition, example building, synthetic corpora.
//! * [`stats`]: token-frequency tables.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod data;
pub mod embedding;
mod error;
pub mod linalg;
pub mod metrics;
pub mod nn;
pub mod stats;
pub mod text;
pub mod train;

pub use data::{Account, Class};
pub use error::Error;
pub use text::{Token, TokenId, Vocabulary};

pub type Result<T, E = Error> = core::result::Result<T, E>;
