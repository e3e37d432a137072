//! Files, checkpoints, threads and the `botlstm` command line around
//! [`botlstm_core`].

pub mod checkpoint;
pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod parallel;

pub use checkpoint::Checkpoint;
pub use config::RunConfig;
pub use error::{CliError, Result};
