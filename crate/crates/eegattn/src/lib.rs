//! File formats, run manifests and the `eegattn` command-line pipeline built
//! on [`eegattn_core`].

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod corpus_io;
pub mod error;
pub mod formats;
pub mod jsonl;
pub mod manifest;

pub use error::{Error, Result};
