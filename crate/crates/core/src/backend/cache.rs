use super::{Backend, BackendError, BackendParams, GenerationRequest};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Mutex, RwLock};

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// SHA-256 digest identifying one sampled response.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CacheKey(String);

impl CacheKey {
    pub fn new(model_id: &str, prompt: &str, params: &BackendParams, sample_index: u32, run_seed: u64) -> Self {
        let mut h = Sha256::new();
        let mut field = |bytes: &[u8]| {
            h.update((bytes.len() as u64).to_le_bytes());
            h.update(bytes);
        };
        field(model_id.as_bytes());
        field(prompt.as_bytes());
        field(params.model_id.as_bytes());
        field(&params.temperature.to_bits().to_le_bytes());
        field(&params.max_new_tokens.to_le_bytes());
        field(&params.n_samples.to_le_bytes());
        field(&sample_index.to_le_bytes());
        field(&run_seed.to_le_bytes());
        CacheKey(hex(&h.finalize()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl std::fmt::Display for CacheKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// One line of the cache file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheRecord {
    pub key: CacheKey,
    pub context: String,
    pub sample_index: u32,
    pub text: String,
    pub text_sha256: String,
}

impl CacheRecord {
    pub fn new(key: CacheKey, context: &str, sample_index: u32, text: String) -> Self {
        let text_sha256 = hex(&Sha256::digest(text.as_bytes()));
        Self { key, context: context.to_string(), sample_index, text, text_sha256 }
    }
}

/// Append-only JSON-lines response store with an in-memory index.
///
/// One writer appends under a mutex; lookups take a read lock on the index.
pub struct ResponseCache {
    path: PathBuf,
    writer: Mutex<File>,
    index: RwLock<HashMap<CacheKey, String>>,
}

impl ResponseCache {
    /// Opens (or creates) the store at `path` and loads its index.
    ///
    /// A final line without a terminating newline is treated as a torn write
    /// from an interrupted run and truncated away. Any other unreadable or
    /// inconsistent record is reported as corrupt.
    pub fn open(path: &Path) -> Result<Self, BackendError> {
        let io = |source| BackendError::CacheIo { path: path.display().to_string(), source };
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent).map_err(io)?;
            }
        }
        let mut file = OpenOptions::new().read(true).append(true).create(true).open(path).map_err(io)?;
        let mut text = String::new();
        file.read_to_string(&mut text).map_err(io)?;
        let complete_len = match text.rfind('\n') {
            Some(pos) => pos + 1,
            None => 0,
        };
        if complete_len < text.len() {
            log::warn!("dropping torn final record in {}", path.display());
            file.set_len(complete_len as u64).map_err(io)?;
            file.seek(SeekFrom::End(0)).map_err(io)?;
        }
        let mut index = HashMap::new();
        for (i, line) in text[..complete_len].lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: CacheRecord = serde_json::from_str(line).map_err(|e| BackendError::CacheCorrupt {
                key: format!("{}:{}", path.display(), i + 1),
                reason: e.to_string(),
            })?;
            let digest = hex(&Sha256::digest(record.text.as_bytes()));
            if digest != record.text_sha256 {
                return Err(BackendError::CacheCorrupt {
                    key: record.key.to_string(),
                    reason: "text does not match its checksum".into(),
                });
            }
            index.insert(record.key, record.text);
        }
        Ok(Self { path: path.to_path_buf(), writer: Mutex::new(file), index: RwLock::new(index) })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.index.read().expect("cache index poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn lookup(&self, key: &CacheKey) -> Option<String> {
        self.index.read().expect("cache index poisoned").get(key).cloned()
    }

    pub fn put(&self, record: CacheRecord) -> Result<(), BackendError> {
        let io = |source| BackendError::CacheIo { path: self.path.display().to_string(), source };
        let mut line = serde_json::to_string(&record).expect("cache records serialize");
        line.push('\n');
        {
            let mut file = self.writer.lock().expect("cache writer poisoned");
            file.write_all(line.as_bytes()).map_err(io)?;
            file.flush().map_err(io)?;
        }
        self.index.write().expect("cache index poisoned").insert(record.key, record.text);
        Ok(())
    }
}

/// Serves samples from a [`ResponseCache`] and forwards misses to `inner`.
pub struct CachedBackend<B> {
    inner: B,
    cache: ResponseCache,
    calls: AtomicUsize,
}

impl<B: Backend> CachedBackend<B> {
    pub fn new(inner: B, cache: ResponseCache) -> Self {
        Self { inner, cache, calls: AtomicUsize::new(0) }
    }

    /// Number of requests forwarded to the wrapped backend.
    pub fn backend_calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn cache(&self) -> &ResponseCache {
        &self.cache
    }
}

impl<B: Backend> Backend for CachedBackend<B> {
    fn generate(&self, req: &GenerationRequest<'_>) -> Result<Vec<String>, BackendError> {
        req.params.validate()?;
        let n = req.params.n_samples;
        let keys: Vec<CacheKey> = (0..n)
            .map(|i| CacheKey::new(&req.params.model_id, req.prompt, req.params, i, req.run_seed))
            .collect();
        let hits: Vec<Option<String>> = keys.iter().map(|k| self.cache.lookup(k)).collect();
        if hits.iter().all(Option::is_some) {
            return Ok(hits.into_iter().flatten().collect());
        }
        self.calls.fetch_add(1, Ordering::SeqCst);
        let texts = self.inner.generate(req)?;
        if texts.len() != n as usize {
            return Err(BackendError::Protocol {
                context: req.context.to_string(),
                reason: format!("backend returned {} samples, expected {n}", texts.len()),
            });
        }
        for ((i, key), text) in keys.into_iter().enumerate().zip(&texts) {
            self.cache.put(CacheRecord::new(key, req.context, i as u32, text.clone()))?;
        }
        Ok(texts)
    }
}
