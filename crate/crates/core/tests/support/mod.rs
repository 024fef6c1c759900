//! Helpers shared by the integration tests and the acceptance suite.
#![allow(dead_code)]

pub mod chrf_oracle;
pub mod fixtures;
pub mod text_gen;
