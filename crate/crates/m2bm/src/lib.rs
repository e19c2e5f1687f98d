//! File formats and the `m2bm` command line on top of `m2bm-core`.
//!
//! Audio is read and written as multichannel WAV (PCM16 or float32), configs
//! and reports are JSON, and checkpoints are a flat little-endian `f64`
//! vector with a JSON sidecar describing the model.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checkpoint;
pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod manifest;
pub mod wav;

pub use error::{Error, Result};
