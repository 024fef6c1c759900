//! Sampling contract shared by every model backend.
//!
//! A backend turns one serialized prompt into exactly `n_samples` raw
//! response texts. [`CachedBackend`] records every sample in an append-only
//! store so completed work is never requested twice.

mod cache;
mod http;
mod scripted;

pub use cache::{CacheKey, CacheRecord, CachedBackend, ResponseCache};
pub use http::{HttpBackend, HttpConfig, RetryPolicy, TokenBucket, Vendor};
pub use scripted::{load_rules, parse_rules, ScriptedBackend, ScriptedRule, NOISE_TEMPLATES};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_N_SAMPLES: u32 = 10;

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("backend unavailable while sampling {context}: {reason}")]
    Unavailable { context: String, reason: String },
    #[error("protocol error while sampling {context}: {reason}")]
    Protocol { context: String, reason: String },
    #[error("corrupt cache record {key}: {reason}")]
    CacheCorrupt { key: String, reason: String },
    #[error("cache i/o error on {path}: {source}")]
    CacheIo {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid backend parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendParams {
    pub model_id: String,
    pub temperature: f64,
    pub max_new_tokens: u32,
    pub n_samples: u32,
}

impl BackendParams {
    pub fn validate(&self) -> Result<(), BackendError> {
        if self.n_samples < 1 {
            return Err(BackendError::InvalidParams("n_samples must be >= 1".into()));
        }
        if self.max_new_tokens < 1 {
            return Err(BackendError::InvalidParams("max_new_tokens must be >= 1".into()));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(BackendError::InvalidParams(format!(
                "temperature must be nonnegative, got {}",
                self.temperature
            )));
        }
        Ok(())
    }
}

/// One sampling request.
#[derive(Debug, Clone, Copy)]
pub struct GenerationRequest<'a> {
    pub prompt: &'a str,
    pub params: &'a BackendParams,
    pub run_seed: u64,
    /// Probe id or similar label, carried into errors so runs can be resumed.
    pub context: &'a str,
}

pub trait Backend: Send + Sync {
    /// Returns exactly `params.n_samples` response texts.
    fn generate(&self, req: &GenerationRequest<'_>) -> Result<Vec<String>, BackendError>;
}

impl<B: Backend + ?Sized> Backend for Box<B> {
    fn generate(&self, req: &GenerationRequest<'_>) -> Result<Vec<String>, BackendError> {
        (**self).generate(req)
    }
}

impl<B: Backend + ?Sized> Backend for &B {
    fn generate(&self, req: &GenerationRequest<'_>) -> Result<Vec<String>, BackendError> {
        (**self).generate(req)
    }
}

/// Default sampling temperature for the instruction-tuned checkpoints the
/// method was evaluated on, matched on a lowercase substring of `model_id`.
pub fn default_temperature(model_id: &str) -> Option<f64> {
    let id = model_id.to_lowercase();
    let table: [(&[&str], f64); 5] = [
        (&["llama-3", "llama3"], 0.6),
        (&["mistral"], 1.0),
        (&["gemini"], 1.0),
        (&["command-r", "commandr"], 0.3),
        (&["bloomz"], 1.0),
    ];
    table
        .iter()
        .find(|(keys, _)| keys.iter().any(|k| id.contains(k)))
        .map(|(_, t)| *t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn temperatures() {
        assert_eq!(default_temperature("meta-llama/Meta-Llama-3-8B-Instruct"), Some(0.6));
        assert_eq!(default_temperature("mistralai/Mistral-7B-Instruct-v0.2"), Some(1.0));
        assert_eq!(default_temperature("gemini-pro"), Some(1.0));
        assert_eq!(default_temperature("CohereForAI/c4ai-command-r-v01"), Some(0.3));
        assert_eq!(default_temperature("bigscience/bloomz-7b1"), Some(1.0));
        assert_eq!(default_temperature("gpt2"), None);
    }

    #[test]
    fn params_validation() {
        let ok = BackendParams { model_id: "m".into(), temperature: 0.6, max_new_tokens: 16, n_samples: 10 };
        assert!(ok.validate().is_ok());
        assert!(BackendParams { n_samples: 0, ..ok.clone() }.validate().is_err());
        assert!(BackendParams { max_new_tokens: 0, ..ok.clone() }.validate().is_err());
        assert!(BackendParams { temperature: -1.0, ..ok }.validate().is_err());
    }
}
