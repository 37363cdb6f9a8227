//! Numerical core for EEG-supervised attention.
//!
//! Everything in this crate is pure computation over in-memory data: the
//! word-aligned EEG corpus model and its synthetic generator, per-electrode
//! bootstrap statistics, CART random forests, the band/electrode reduction
//! pipeline, a small LSTM toolkit with exact backpropagation, the EEG
//! attention-scalar transform and the multi-task biLSTM classifier.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, manifests and
//! the command-line front end live in the `eegattn` crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod attnscore;
pub mod corpus;
pub mod error;
pub mod forest;
pub mod math;
pub mod neural;
pub mod reduction;
pub mod rng;
pub mod seqlabel;
pub mod stats;
pub mod taskclf;
pub mod tasksets;

pub use error::{Error, Result};
