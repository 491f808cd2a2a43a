use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::LlmError;

pub const ENV_ENDPOINT: &str = "LLMPC_ENDPOINT";
pub const ENV_API_KEY: &str = "LLMPC_API_KEY";
pub const ENV_MODEL: &str = "LLMPC_MODEL";

/// Anything that turns a user prompt into a raw completion.
pub trait ChatClient: Send + Sync {
    fn complete(&self, prompt: &str) -> Result<String, LlmError>;
}

impl<T: ChatClient + ?Sized> ChatClient for &T {
    fn complete(&self, prompt: &str) -> Result<String, LlmError> {
        (**self).complete(prompt)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LlmConfig {
    pub endpoint: String,
    pub model: String,
    pub api_key: Option<String>,
    pub temperature: f64,
    pub timeout: Duration,
    pub retries: usize,
    pub cache_dir: PathBuf,
    pub offline: bool,
}

impl Default for LlmConfig {
    fn default() -> Self {
        Self {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-4".into(),
            api_key: None,
            temperature: 0.0,
            timeout: Duration::from_secs(60),
            retries: 2,
            cache_dir: PathBuf::from(".llm-cache"),
            offline: true,
        }
    }
}

impl LlmConfig {
    /// Defaults overridden by the `LLMPC_*` environment variables.
    pub fn from_env() -> Self {
        let mut cfg = Self::default();
        if let Ok(v) = std::env::var(ENV_ENDPOINT) {
            cfg.endpoint = v;
        }
        if let Ok(v) = std::env::var(ENV_MODEL) {
            cfg.model = v;
        }
        cfg.api_key = std::env::var(ENV_API_KEY).ok();
        cfg
    }
}

/// OpenAI-style chat-completion client.
pub struct HttpClient {
    agent: ureq::Agent,
    endpoint: String,
    model: String,
    api_key: Option<String>,
    temperature: f64,
    retries: usize,
}

impl HttpClient {
    pub fn new(cfg: &LlmConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(cfg.timeout))
            .build()
            .into();
        Self {
            agent,
            endpoint: cfg.endpoint.clone(),
            model: cfg.model.clone(),
            api_key: cfg.api_key.clone(),
            temperature: cfg.temperature,
            retries: cfg.retries,
        }
    }

    fn request(&self, prompt: &str) -> Result<String, String> {
        let body = json!({
            "model": self.model,
            "temperature": self.temperature,
            "messages": [{ "role": "user", "content": prompt }],
        });
        let mut req = self.agent.post(&self.endpoint);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send_json(&body).map_err(|e| e.to_string())?;
        let value: Value = resp.body_mut().read_json().map_err(|e| e.to_string())?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_owned)
            .ok_or_else(|| "response has no choices[0].message.content".to_string())
    }
}

impl ChatClient for HttpClient {
    fn complete(&self, prompt: &str) -> Result<String, LlmError> {
        let mut last = String::new();
        for attempt in 0..=self.retries {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(500 << attempt.min(5)));
            }
            match self.request(prompt) {
                Ok(text) => return Ok(text),
                Err(e) => last = e,
            }
        }
        Err(LlmError::Transport(last))
    }
}

/// Hex SHA-256 over the model, temperature and prompt.
pub fn cache_key(model: &str, temperature: f64, prompt: &str) -> String {
    let mut h = Sha256::new();
    for part in [model.as_bytes(), format!("{temperature:?}").as_bytes(), prompt.as_bytes()] {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part);
    }
    hex::encode(h.finalize())
}

/// Response cache in front of an optional upstream client. Without an
/// upstream every miss is an error naming the key.
pub struct CachedClient {
    upstream: Option<Box<dyn ChatClient>>,
    dir: PathBuf,
    model: String,
    temperature: f64,
    network_calls: AtomicUsize,
}

impl CachedClient {
    pub fn new(
        upstream: Option<Box<dyn ChatClient>>,
        dir: impl Into<PathBuf>,
        model: impl Into<String>,
        temperature: f64,
    ) -> Self {
        Self {
            upstream,
            dir: dir.into(),
            model: model.into(),
            temperature,
            network_calls: AtomicUsize::new(0),
        }
    }

    /// Offline unless `cfg.offline` is false, in which case misses go to
    /// [`HttpClient`].
    pub fn from_config(cfg: &LlmConfig) -> Self {
        let upstream: Option<Box<dyn ChatClient>> = if cfg.offline {
            None
        } else {
            Some(Box::new(HttpClient::new(cfg)))
        };
        Self::new(upstream, &cfg.cache_dir, &cfg.model, cfg.temperature)
    }

    pub fn key(&self, prompt: &str) -> String {
        cache_key(&self.model, self.temperature, prompt)
    }

    pub fn path_for(&self, prompt: &str) -> PathBuf {
        self.dir.join(format!("{}.txt", self.key(prompt)))
    }

    /// Requests forwarded upstream so far.
    pub fn network_calls(&self) -> usize {
        self.network_calls.load(Ordering::SeqCst)
    }

    /// Stores a response for `prompt`, replacing any earlier one.
    pub fn store(&self, prompt: &str, response: &str) -> Result<PathBuf, LlmError> {
        let path = self.path_for(prompt);
        write_atomic(&self.dir, &path, response.as_bytes())?;
        Ok(path)
    }
}

fn write_atomic(dir: &Path, path: &Path, bytes: &[u8]) -> Result<(), LlmError> {
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| LlmError::Io(e.error))?;
    Ok(())
}

impl ChatClient for CachedClient {
    fn complete(&self, prompt: &str) -> Result<String, LlmError> {
        let path = self.path_for(prompt);
        match fs::read(&path) {
            Ok(bytes) => {
                return String::from_utf8(bytes)
                    .map_err(|_| LlmError::Cache(format!("{} is not valid UTF-8", path.display())))
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
            Err(e) => return Err(e.into()),
        }
        let Some(upstream) = &self.upstream else {
            return Err(LlmError::OfflineMiss(self.key(prompt)));
        };
        self.network_calls.fetch_add(1, Ordering::SeqCst);
        let text = upstream.complete(prompt)?;
        write_atomic(&self.dir, &path, text.as_bytes())?;
        Ok(text)
    }
}

/// Client backed by a closure, counting its calls.
pub struct FnClient<F> {
    f: F,
    calls: AtomicUsize,
}

impl<F> FnClient<F>
where
    F: Fn(&str) -> Result<String, LlmError> + Send + Sync,
{
    pub fn new(f: F) -> Self {
        Self {
            f,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl<F> ChatClient for FnClient<F>
where
    F: Fn(&str) -> Result<String, LlmError> + Send + Sync,
{
    fn complete(&self, prompt: &str) -> Result<String, LlmError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        (self.f)(prompt)
    }
}
