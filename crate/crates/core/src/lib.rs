//! Insertion-only discrete diffusion for sequences.
//!
//! Clean sequences are noised by a pure-birth process that only inserts
//! letters; a denoiser learns which letter was inserted last and generates
//! or shrinks sequences by deleting. Training targets are exact: they count
//! subsequence alignments instead of sampling insertion paths.

pub mod align;
pub mod cli;
pub mod config;
pub mod denoiser;
pub mod error;
pub mod forward;
pub mod numerics;
pub mod objective;
pub mod sampler;
pub mod schedule;
pub mod scorer;
pub mod selftest;
pub mod seqcore;
pub mod stats;

pub use error::{Error, Result};
