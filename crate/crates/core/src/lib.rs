//! Cultural value probing and in-context self-alignment for language models.
//!
//! The crate is organised along the stages of an evaluation run:
//!
//! - [`probe_data`]: probes, survey tables, Likert aggregation, language to country mapping.
//! - [`chrf`]: chrF++ similarity and nearest-probe ranking.
//! - [`demo`]: demonstration selection strategies and order shuffling.
//! - [`prompt`]: prompt rendering, serialization and answer parsing.
//! - [`backend`]: sampling contract, scripted and HTTP backends, response cache.
//! - [`eval`]: misalignment detection, self-alignment, error reduction.
//! - [`report`]: run summaries, histograms and CSV/JSON emission.
//! - [`config`]: the versioned run configuration.

pub mod backend;
pub mod chrf;
pub mod config;
pub mod demo;
pub mod eval;
pub mod probe_data;
pub mod prompt;
pub mod report;
pub mod seed;

pub use probe_data::{Answer, Probe, ProbeSet};
