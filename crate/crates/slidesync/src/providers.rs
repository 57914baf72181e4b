//! Embedding and chat-completion providers: HTTP clients plus deterministic
//! local stand-ins (feature-hashing embeddings, scripted replies) used for
//! offline runs and tests.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const MAX_TEXT_BYTES: usize = 8192;
pub const MAX_PROMPT_BYTES: usize = 32 * 1024;

/// Environment variable holding the bearer token for HTTP providers.
pub const API_TOKEN_ENV: &str = "SLIDESYNC_API_TOKEN";

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("unscripted prompt (sha256 {0})")]
    UnscriptedPrompt(String),
    #[error("input too large: {actual} bytes exceeds limit {limit}")]
    InputTooLarge { actual: usize, limit: usize },
    #[error("provider spec invalid: {0}")]
    Spec(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub fn sha256_hex(s: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(s.as_bytes());
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

// --- Specs ----------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingKind {
    Http,
    File,
    Hashing,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbeddingProviderSpec {
    pub kind: EmbeddingKind,
    #[serde(default)]
    pub endpoint_url: Option<String>,
    #[serde(default)]
    pub model_name: Option<String>,
    pub vector_dim: usize,
    #[serde(default)]
    pub cache_path: Option<PathBuf>,
    #[serde(default = "default_timeout_s")]
    pub timeout_s: f64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LlmKind {
    Http,
    Scripted,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LlmProviderSpec {
    pub kind: LlmKind,
    #[serde(default)]
    pub endpoint_url: Option<String>,
    #[serde(default)]
    pub model_name: String,
    #[serde(default)]
    pub script_path: Option<PathBuf>,
    #[serde(default = "default_timeout_s")]
    pub timeout_s: f64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
}

fn default_timeout_s() -> f64 {
    30.0
}

fn default_retries() -> u32 {
    2
}

// --- Traits ---------------------------------------------------------------

/// Maps texts to vectors of a fixed dimension. Non-empty texts come back
/// unit-norm; an empty text maps to the zero vector, which downstream
/// similarity scores as zero.
pub trait EmbeddingProvider: Sync {
    fn dim(&self) -> usize;
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, ProviderError>;
}

pub trait LlmProvider: Sync {
    fn complete(&self, prompt: &str) -> Result<String, ProviderError>;
}

fn check_text_sizes(texts: &[String]) -> Result<(), ProviderError> {
    for t in texts {
        if t.len() > MAX_TEXT_BYTES {
            return Err(ProviderError::InputTooLarge {
                actual: t.len(),
                limit: MAX_TEXT_BYTES,
            });
        }
    }
    Ok(())
}

// --- Hashing embedding ----------------------------------------------------

/// Deterministic local pseudo-embedding: counts of character 3-grams
/// feature-hashed into `dim` buckets with a signed hash, then L2-normalized.
/// Correlates with lexical overlap; it is not a semantic model.
pub struct HashingEmbedding {
    dim: usize,
}

impl HashingEmbedding {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "vector_dim must be positive");
        Self { dim }
    }
}

/// FNV-1a, 64-bit. Hand-rolled so the hash is stable across toolchains.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

fn char_trigrams(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    if chars.is_empty() {
        return Vec::new();
    }
    if chars.len() < 3 {
        return vec![chars.iter().collect()];
    }
    chars.windows(3).map(|w| w.iter().collect()).collect()
}

fn hash_embed(text: &str, dim: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    for gram in char_trigrams(text) {
        let h = fnv1a64(gram.as_bytes());
        let bucket = (h % dim as u64) as usize;
        let sign = if (h >> 63) & 1 == 0 { 1.0 } else { -1.0 };
        v[bucket] += sign;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in &mut v {
            *x /= norm;
        }
    }
    v
}

impl EmbeddingProvider for HashingEmbedding {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, ProviderError> {
        check_text_sizes(texts)?;
        Ok(texts.iter().map(|t| hash_embed(t, self.dim)).collect())
    }
}

// --- Vector cache ---------------------------------------------------------

/// On-disk vector cache keyed by sha256 of the text. Writes go through a
/// temp file and rename so concurrent writers cannot corrupt it.
struct VectorCache {
    path: PathBuf,
    entries: Mutex<BTreeMap<String, Vec<f64>>>,
}

impl VectorCache {
    fn open(path: &Path) -> Result<Self, ProviderError> {
        let entries = if path.exists() {
            let bytes = fs::read(path).map_err(|source| ProviderError::Io {
                path: path.to_path_buf(),
                source,
            })?;
            serde_json::from_slice(&bytes)
                .map_err(|e| ProviderError::Protocol(format!("corrupt cache file: {e}")))?
        } else {
            BTreeMap::new()
        };
        Ok(Self {
            path: path.to_path_buf(),
            entries: Mutex::new(entries),
        })
    }

    fn get(&self, key: &str) -> Option<Vec<f64>> {
        self.entries.lock().unwrap().get(key).cloned()
    }

    fn insert(&self, key: String, vector: Vec<f64>) -> Result<(), ProviderError> {
        let mut entries = self.entries.lock().unwrap();
        entries.insert(key, vector);
        let bytes = serde_json::to_vec(&*entries).expect("cache serializes");
        let tmp = self.path.with_extension("tmp");
        fs::write(&tmp, bytes).map_err(|source| ProviderError::Io {
            path: tmp.clone(),
            source,
        })?;
        fs::rename(&tmp, &self.path).map_err(|source| ProviderError::Io {
            path: self.path.clone(),
            source,
        })
    }
}

// --- File embedding -------------------------------------------------------

/// Serves vectors from a pre-built cache file only; any miss is an error.
pub struct FileEmbedding {
    dim: usize,
    cache: VectorCache,
}

impl FileEmbedding {
    pub fn open(path: &Path, dim: usize) -> Result<Self, ProviderError> {
        Ok(Self {
            dim,
            cache: VectorCache::open(path)?,
        })
    }
}

impl EmbeddingProvider for FileEmbedding {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, ProviderError> {
        check_text_sizes(texts)?;
        texts
            .iter()
            .map(|t| {
                self.cache.get(&sha256_hex(t)).ok_or_else(|| {
                    ProviderError::Protocol(format!("vector for text hash {} not in cache", sha256_hex(t)))
                })
            })
            .collect()
    }
}

// --- HTTP embedding -------------------------------------------------------

#[derive(Serialize)]
struct EmbedRequest<'a> {
    model: &'a str,
    texts: &'a [String],
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
}

pub struct HttpEmbedding {
    client: reqwest::blocking::Client,
    endpoint_url: String,
    model: String,
    dim: usize,
    max_retries: u32,
    cache: Option<VectorCache>,
}

impl HttpEmbedding {
    pub fn new(spec: &EmbeddingProviderSpec) -> Result<Self, ProviderError> {
        let endpoint_url = spec
            .endpoint_url
            .clone()
            .ok_or_else(|| ProviderError::Spec("http embedding requires endpoint_url".into()))?;
        let mut builder =
            reqwest::blocking::Client::builder().timeout(Duration::from_secs_f64(spec.timeout_s));
        if let Ok(token) = std::env::var(API_TOKEN_ENV) {
            let mut headers = reqwest::header::HeaderMap::new();
            let value = reqwest::header::HeaderValue::from_str(&format!("Bearer {token}"))
                .map_err(|e| ProviderError::Spec(format!("bad token: {e}")))?;
            headers.insert(reqwest::header::AUTHORIZATION, value);
            builder = builder.default_headers(headers);
        }
        let cache = spec
            .cache_path
            .as_deref()
            .map(VectorCache::open)
            .transpose()?;
        Ok(Self {
            client: builder
                .build()
                .map_err(|e| ProviderError::Spec(e.to_string()))?,
            endpoint_url,
            model: spec.model_name.clone().unwrap_or_default(),
            dim: spec.vector_dim,
            max_retries: spec.max_retries,
            cache,
        })
    }

    fn fetch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, ProviderError> {
        let mut last_err = String::new();
        let attempts = self.max_retries + 1;
        for _ in 0..attempts {
            let resp = self
                .client
                .post(&self.endpoint_url)
                .json(&EmbedRequest {
                    model: &self.model,
                    texts,
                })
                .send();
            match resp {
                Ok(resp) if resp.status().is_success() => {
                    let body: EmbedResponse = resp
                        .json()
                        .map_err(|e| ProviderError::Protocol(e.to_string()))?;
                    if body.vectors.len() != texts.len() {
                        return Err(ProviderError::Protocol(format!(
                            "expected {} vectors, got {}",
                            texts.len(),
                            body.vectors.len()
                        )));
                    }
                    for v in &body.vectors {
                        if v.len() != self.dim {
                            return Err(ProviderError::Protocol(format!(
                                "dimension mismatch: expected {}, got {}",
                                self.dim,
                                v.len()
                            )));
                        }
                    }
                    return Ok(body.vectors);
                }
                Ok(resp) => last_err = format!("http status {}", resp.status()),
                Err(e) => last_err = e.to_string(),
            }
        }
        Err(ProviderError::Transport {
            attempts,
            message: last_err,
        })
    }
}

impl EmbeddingProvider for HttpEmbedding {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, ProviderError> {
        check_text_sizes(texts)?;
        let keys: Vec<String> = texts
            .iter()
            .map(|t| format!("{}:{}", self.model, sha256_hex(t)))
            .collect();
        let mut out: Vec<Option<Vec<f64>>> = vec![None; texts.len()];
        let mut misses = Vec::new();
        if let Some(cache) = &self.cache {
            for (i, key) in keys.iter().enumerate() {
                out[i] = cache.get(key);
                if out[i].is_none() {
                    misses.push(i);
                }
            }
        } else {
            misses = (0..texts.len()).collect();
        }
        if !misses.is_empty() {
            let miss_texts: Vec<String> = misses.iter().map(|&i| texts[i].clone()).collect();
            let vectors = self.fetch(&miss_texts)?;
            for (&i, v) in misses.iter().zip(vectors) {
                if let Some(cache) = &self.cache {
                    cache.insert(keys[i].clone(), v.clone())?;
                }
                out[i] = Some(v);
            }
        }
        Ok(out.into_iter().map(|v| v.unwrap()).collect())
    }
}

// --- Scripted LLM ---------------------------------------------------------

/// Replies keyed by sha256 of the exact prompt; a miss fails loudly so test
/// fixtures cannot silently drift.
pub struct ScriptedLlm {
    replies: BTreeMap<String, String>,
}

impl ScriptedLlm {
    pub fn from_file(path: &Path) -> Result<Self, ProviderError> {
        let bytes = fs::read(path).map_err(|source| ProviderError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let replies = serde_json::from_slice(&bytes)
            .map_err(|e| ProviderError::Protocol(format!("bad script file: {e}")))?;
        Ok(Self { replies })
    }

    pub fn from_replies(replies: BTreeMap<String, String>) -> Self {
        Self { replies }
    }

    /// Convenience for tests: script a reply for a literal prompt.
    pub fn from_prompts<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        Self {
            replies: pairs
                .into_iter()
                .map(|(prompt, reply)| (sha256_hex(prompt), reply.to_string()))
                .collect(),
        }
    }
}

impl LlmProvider for ScriptedLlm {
    fn complete(&self, prompt: &str) -> Result<String, ProviderError> {
        if prompt.len() > MAX_PROMPT_BYTES {
            return Err(ProviderError::InputTooLarge {
                actual: prompt.len(),
                limit: MAX_PROMPT_BYTES,
            });
        }
        let key = sha256_hex(prompt);
        self.replies
            .get(&key)
            .cloned()
            .ok_or(ProviderError::UnscriptedPrompt(key))
    }
}

// --- HTTP LLM -------------------------------------------------------------

#[derive(Serialize)]
struct CompleteRequest<'a> {
    model: &'a str,
    prompt: &'a str,
    /// Pinned to zero for determinism.
    temperature: f64,
}

#[derive(Deserialize)]
struct CompleteResponse {
    text: String,
}

pub struct HttpLlm {
    client: reqwest::blocking::Client,
    endpoint_url: String,
    model: String,
    max_retries: u32,
}

impl HttpLlm {
    pub fn new(spec: &LlmProviderSpec) -> Result<Self, ProviderError> {
        let endpoint_url = spec
            .endpoint_url
            .clone()
            .ok_or_else(|| ProviderError::Spec("http llm requires endpoint_url".into()))?;
        let mut builder =
            reqwest::blocking::Client::builder().timeout(Duration::from_secs_f64(spec.timeout_s));
        if let Ok(token) = std::env::var(API_TOKEN_ENV) {
            let mut headers = reqwest::header::HeaderMap::new();
            let value = reqwest::header::HeaderValue::from_str(&format!("Bearer {token}"))
                .map_err(|e| ProviderError::Spec(format!("bad token: {e}")))?;
            headers.insert(reqwest::header::AUTHORIZATION, value);
            builder = builder.default_headers(headers);
        }
        Ok(Self {
            client: builder
                .build()
                .map_err(|e| ProviderError::Spec(e.to_string()))?,
            endpoint_url,
            model: spec.model_name.clone(),
            max_retries: spec.max_retries,
        })
    }
}

impl LlmProvider for HttpLlm {
    fn complete(&self, prompt: &str) -> Result<String, ProviderError> {
        if prompt.len() > MAX_PROMPT_BYTES {
            return Err(ProviderError::InputTooLarge {
                actual: prompt.len(),
                limit: MAX_PROMPT_BYTES,
            });
        }
        let mut last_err = String::new();
        let attempts = self.max_retries + 1;
        for _ in 0..attempts {
            let resp = self
                .client
                .post(&self.endpoint_url)
                .json(&CompleteRequest {
                    model: &self.model,
                    prompt,
                    temperature: 0.0,
                })
                .send();
            match resp {
                Ok(resp) if resp.status().is_success() => {
                    let body: CompleteResponse = resp
                        .json()
                        .map_err(|e| ProviderError::Protocol(e.to_string()))?;
                    return Ok(body.text);
                }
                Ok(resp) => last_err = format!("http status {}", resp.status()),
                Err(e) => last_err = e.to_string(),
            }
        }
        Err(ProviderError::Transport {
            attempts,
            message: last_err,
        })
    }
}

// --- Spec-driven construction ---------------------------------------------

pub fn build_embedding_provider(
    spec: &EmbeddingProviderSpec,
) -> Result<Box<dyn EmbeddingProvider>, ProviderError> {
    if spec.vector_dim == 0 {
        return Err(ProviderError::Spec("vector_dim must be positive".into()));
    }
    match spec.kind {
        EmbeddingKind::Hashing => Ok(Box::new(HashingEmbedding::new(spec.vector_dim))),
        EmbeddingKind::File => {
            let path = spec
                .cache_path
                .as_deref()
                .ok_or_else(|| ProviderError::Spec("file embedding requires cache_path".into()))?;
            Ok(Box::new(FileEmbedding::open(path, spec.vector_dim)?))
        }
        EmbeddingKind::Http => Ok(Box::new(HttpEmbedding::new(spec)?)),
    }
}

pub fn build_llm_provider(spec: &LlmProviderSpec) -> Result<Box<dyn LlmProvider>, ProviderError> {
    match spec.kind {
        LlmKind::Scripted => {
            let path = spec
                .script_path
                .as_deref()
                .ok_or_else(|| ProviderError::Spec("scripted llm requires script_path".into()))?;
            Ok(Box::new(ScriptedLlm::from_file(path)?))
        }
        LlmKind::Http => Ok(Box::new(HttpLlm::new(spec)?)),
    }
}
