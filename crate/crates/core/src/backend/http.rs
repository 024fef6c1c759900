use super::{Backend, BackendError, GenerationRequest};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

/// Wire format of the remote endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Vendor {
    /// `/chat/completions` shape with an `n` parameter.
    OpenaiCompatible,
    /// Same shape, but the server returns one choice per request.
    OpenaiCompatibleSingle,
    /// `generateContent` shape with `candidateCount`.
    Gemini,
}

impl Vendor {
    fn max_choices(self) -> u32 {
        match self {
            Vendor::OpenaiCompatible => u32::MAX,
            Vendor::OpenaiCompatibleSingle => 1,
            Vendor::Gemini => 8,
        }
    }

    fn body(self, system: Option<&str>, prompt: &str, temperature: f64, max_tokens: u32, n: u32, model: &str) -> Value {
        match self {
            Vendor::OpenaiCompatible | Vendor::OpenaiCompatibleSingle => {
                let mut messages = Vec::new();
                if let Some(system) = system {
                    messages.push(json!({"role": "system", "content": system}));
                }
                messages.push(json!({"role": "user", "content": prompt}));
                let mut body = json!({
                    "model": model,
                    "messages": messages,
                    "temperature": temperature,
                    "max_tokens": max_tokens,
                });
                if self == Vendor::OpenaiCompatible {
                    body["n"] = json!(n);
                }
                body
            }
            Vendor::Gemini => {
                let mut body = json!({
                    "contents": [{"role": "user", "parts": [{"text": prompt}]}],
                    "generationConfig": {
                        "temperature": temperature,
                        "maxOutputTokens": max_tokens,
                        "candidateCount": n,
                    },
                });
                if let Some(system) = system {
                    body["systemInstruction"] = json!({"parts": [{"text": system}]});
                }
                body
            }
        }
    }

    fn parse(self, body: &Value) -> Result<Vec<String>, String> {
        match self {
            Vendor::OpenaiCompatible | Vendor::OpenaiCompatibleSingle => {
                let choices = body["choices"].as_array().ok_or("missing \"choices\" array")?;
                let mut indexed = Vec::with_capacity(choices.len());
                for (pos, c) in choices.iter().enumerate() {
                    let text = c["message"]["content"]
                        .as_str()
                        .or_else(|| c["text"].as_str())
                        .ok_or_else(|| format!("choice {pos} has no message content"))?;
                    let index = c["index"].as_u64().unwrap_or(pos as u64);
                    indexed.push((index, text.to_string()));
                }
                indexed.sort_by_key(|(i, _)| *i);
                Ok(indexed.into_iter().map(|(_, t)| t).collect())
            }
            Vendor::Gemini => {
                let candidates = body["candidates"].as_array().ok_or("missing \"candidates\" array")?;
                candidates
                    .iter()
                    .enumerate()
                    .map(|(pos, c)| {
                        let parts = c["content"]["parts"]
                            .as_array()
                            .ok_or_else(|| format!("candidate {pos} has no content parts"))?;
                        Ok(parts.iter().filter_map(|p| p["text"].as_str()).collect::<String>())
                    })
                    .collect()
            }
        }
    }

    fn auth_header(self, key: &str) -> (&'static str, String) {
        match self {
            Vendor::OpenaiCompatible | Vendor::OpenaiCompatibleSingle => ("Authorization", format!("Bearer {key}")),
            Vendor::Gemini => ("x-goog-api-key", key.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { attempts: 3, base_delay: Duration::from_secs(1) }
    }
}

impl RetryPolicy {
    /// Exponential delay before retry number `retry` (0-based), with up to 50% added jitter.
    fn delay(&self, retry: u32) -> Duration {
        let base = self.base_delay.saturating_mul(1u32 << retry.min(16));
        base + base.mul_f64(rand::random::<f64>() * 0.5)
    }
}

/// Requests-per-minute limiter.
#[derive(Debug)]
pub struct TokenBucket {
    capacity: f64,
    per_second: f64,
    state: Mutex<(f64, Instant)>,
}

impl TokenBucket {
    pub fn per_minute(rpm: u32) -> Self {
        let capacity = f64::from(rpm.max(1));
        Self { capacity, per_second: capacity / 60.0, state: Mutex::new((capacity, Instant::now())) }
    }

    /// Blocks until a token is available.
    pub fn acquire(&self) {
        loop {
            let wait = {
                let mut state = self.state.lock().expect("token bucket poisoned");
                let now = Instant::now();
                let refill = now.duration_since(state.1).as_secs_f64() * self.per_second;
                state.0 = (state.0 + refill).min(self.capacity);
                state.1 = now;
                if state.0 >= 1.0 {
                    state.0 -= 1.0;
                    return;
                }
                Duration::from_secs_f64((1.0 - state.0) / self.per_second)
            };
            thread::sleep(wait);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpConfig {
    pub endpoint: String,
    pub vendor: Vendor,
    /// Name of the environment variable holding the API key.
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default)]
    pub system_prompt: Option<String>,
    #[serde(default)]
    pub requests_per_minute: Option<u32>,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
    /// Attempts per request, counting the first; 429 and 5xx responses are retried.
    #[serde(default = "default_retry_attempts")]
    pub retry_attempts: u32,
    #[serde(default = "default_retry_base_delay_ms")]
    pub retry_base_delay_ms: u64,
}

fn default_timeout_secs() -> u64 {
    120
}

fn default_retry_attempts() -> u32 {
    RetryPolicy::default().attempts
}

fn default_retry_base_delay_ms() -> u64 {
    RetryPolicy::default().base_delay.as_millis() as u64
}

impl HttpConfig {
    pub fn retry_policy(&self) -> RetryPolicy {
        RetryPolicy { attempts: self.retry_attempts, base_delay: Duration::from_millis(self.retry_base_delay_ms) }
    }
}

/// Chat-completion client for OpenAI-compatible gateways and the Gemini API.
pub struct HttpBackend {
    agent: ureq::Agent,
    cfg: HttpConfig,
    api_key: Option<String>,
    retry: RetryPolicy,
    bucket: Option<TokenBucket>,
}

impl HttpBackend {
    pub fn new(cfg: HttpConfig, retry: RetryPolicy) -> Self {
        let agent = ureq::AgentBuilder::new().timeout(Duration::from_secs(cfg.timeout_secs)).build();
        let bucket = cfg.requests_per_minute.map(TokenBucket::per_minute);
        let api_key = cfg.api_key_env.as_deref().and_then(|var| std::env::var(var).ok());
        if let (Some(var), None) = (&cfg.api_key_env, &api_key) {
            log::warn!("environment variable {var} is not set; sending requests without credentials");
        }
        Self { agent, cfg, api_key, retry, bucket }
    }

    fn post(&self, body: &Value, context: &str) -> Result<Value, BackendError> {
        let unavailable = |reason: String| BackendError::Unavailable { context: context.to_string(), reason };
        let mut last = String::new();
        for attempt in 0..self.retry.attempts.max(1) {
            if attempt > 0 {
                thread::sleep(self.retry.delay(attempt - 1));
            }
            if let Some(bucket) = &self.bucket {
                bucket.acquire();
            }
            let mut request = self.agent.post(&self.cfg.endpoint);
            if let Some(key) = &self.api_key {
                let (name, value) = self.cfg.vendor.auth_header(key);
                request = request.set(name, &value);
            }
            match request.send_json(body.clone()) {
                Ok(response) => {
                    return response.into_json::<Value>().map_err(|e| BackendError::Protocol {
                        context: context.to_string(),
                        reason: format!("response is not JSON: {e}"),
                    });
                }
                Err(ureq::Error::Status(code, response)) => {
                    let detail = response.into_string().unwrap_or_default();
                    last = format!("HTTP {code}: {}", detail.chars().take(200).collect::<String>());
                    if code != 429 && code < 500 {
                        return Err(unavailable(last));
                    }
                }
                Err(ureq::Error::Transport(t)) => last = t.to_string(),
            }
            log::warn!("request for {context} failed (attempt {}): {last}", attempt + 1);
        }
        Err(unavailable(format!("gave up after {} attempts: {last}", self.retry.attempts.max(1))))
    }
}

impl Backend for HttpBackend {
    fn generate(&self, req: &GenerationRequest<'_>) -> Result<Vec<String>, BackendError> {
        req.params.validate()?;
        let vendor = self.cfg.vendor;
        let mut out = Vec::with_capacity(req.params.n_samples as usize);
        while out.len() < req.params.n_samples as usize {
            let remaining = req.params.n_samples - out.len() as u32;
            let n = remaining.min(vendor.max_choices());
            let body = vendor.body(
                self.cfg.system_prompt.as_deref(),
                req.prompt,
                req.params.temperature,
                req.params.max_new_tokens,
                n,
                &req.params.model_id,
            );
            let response = self.post(&body, req.context)?;
            let texts = vendor
                .parse(&response)
                .map_err(|reason| BackendError::Protocol { context: req.context.to_string(), reason })?;
            if texts.is_empty() || texts.len() > n as usize {
                return Err(BackendError::Protocol {
                    context: req.context.to_string(),
                    reason: format!("expected {n} choices, got {}", texts.len()),
                });
            }
            out.extend(texts);
        }
        Ok(out)
    }
}
