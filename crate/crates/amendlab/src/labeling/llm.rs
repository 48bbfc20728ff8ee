//! LLM client contract plus HTTP, caching, and mock implementations.

use std::path::PathBuf;
use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::prompt_hash;

/// Decoding settings sent with every completion request.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecodeConfig {
    pub temperature: f64,
    pub max_tokens: Option<u32>,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self {
            temperature: 0.1,
            max_tokens: Some(1024),
        }
    }
}

pub trait LlmClient {
    fn complete(&self, prompt: &str, decode: &DecodeConfig) -> Result<String, String>;
}

/// Endpoint configuration for [`HttpLlmClient`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LlmClientConfig {
    pub base_url: String,
    #[serde(default = "default_model")]
    pub model: String,
    #[serde(default = "default_api_key_env")]
    pub api_key_env: String,
    #[serde(default = "default_http_retries")]
    pub max_retries: u32,
}

impl Default for LlmClientConfig {
    fn default() -> Self {
        Self {
            base_url: String::new(),
            model: default_model(),
            api_key_env: default_api_key_env(),
            max_retries: default_http_retries(),
        }
    }
}

fn default_model() -> String {
    // instruct model used for the published denoised labels
    "Qwen/Qwen2.5-7B-Instruct-1M".to_string()
}

fn default_api_key_env() -> String {
    "AMENDLAB_API_KEY".to_string()
}

fn default_http_retries() -> u32 {
    2
}

/// Chat/completions-style HTTP client.
pub struct HttpLlmClient {
    config: LlmClientConfig,
    client: reqwest::blocking::Client,
}

impl HttpLlmClient {
    pub fn new(config: LlmClientConfig) -> Self {
        Self {
            config,
            client: reqwest::blocking::Client::builder()
                .timeout(std::time::Duration::from_secs(120))
                .build()
                .expect("client construction cannot fail with static config"),
        }
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    content: String,
}

impl LlmClient for HttpLlmClient {
    fn complete(&self, prompt: &str, decode: &DecodeConfig) -> Result<String, String> {
        let url = format!(
            "{}/chat/completions",
            self.config.base_url.trim_end_matches('/')
        );
        let body = serde_json::json!({
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": decode.temperature,
            "max_tokens": decode.max_tokens,
        });
        let mut last_err = String::new();
        for attempt in 0..=self.config.max_retries {
            let mut req = self.client.post(&url).json(&body);
            if let Ok(key) = std::env::var(&self.config.api_key_env) {
                req = req.bearer_auth(key);
            }
            match req.send() {
                Ok(resp) if resp.status().is_success() => {
                    let parsed: ChatResponse =
                        resp.json().map_err(|e| format!("bad response body: {e}"))?;
                    return parsed
                        .choices
                        .into_iter()
                        .next()
                        .map(|c| c.message.content)
                        .ok_or_else(|| "response has no choices".to_string());
                }
                Ok(resp) => last_err = format!("HTTP status {}", resp.status()),
                Err(e) => last_err = e.to_string(),
            }
            if attempt < self.config.max_retries {
                std::thread::sleep(std::time::Duration::from_millis(200 << attempt));
            }
        }
        Err(last_err)
    }
}

/// Content-addressed prompt -> response store wrapping another client.
///
/// Responses are files named by the prompt hash, so replays are byte-exact
/// and re-runs after a partial failure only pay for the misses.
pub struct CachingClient<C> {
    inner: C,
    dir: PathBuf,
}

impl<C: LlmClient> CachingClient<C> {
    pub fn new(inner: C, dir: PathBuf) -> Self {
        Self { inner, dir }
    }

    pub fn inner(&self) -> &C {
        &self.inner
    }
}

impl<C: LlmClient> LlmClient for CachingClient<C> {
    fn complete(&self, prompt: &str, decode: &DecodeConfig) -> Result<String, String> {
        let path = self.dir.join(format!("{}.txt", prompt_hash(prompt)));
        if let Ok(cached) = std::fs::read_to_string(&path) {
            return Ok(cached);
        }
        let response = self.inner.complete(prompt, decode)?;
        std::fs::create_dir_all(&self.dir).map_err(|e| e.to_string())?;
        let tmp = path.with_extension("txt.tmp");
        std::fs::write(&tmp, &response).map_err(|e| e.to_string())?;
        std::fs::rename(&tmp, &path).map_err(|e| e.to_string())?;
        Ok(response)
    }
}

enum MockBehavior {
    Always(String),
    Scripted(Mutex<Vec<String>>),
    ByCheck { add: u8, remove: u8, modify: u8 },
    ParseIfContains(String),
}

/// Test double with a call counter.
pub struct MockLlmClient {
    behavior: MockBehavior,
    calls: AtomicU32,
}

impl MockLlmClient {
    pub fn always(response: &str) -> Self {
        Self {
            behavior: MockBehavior::Always(response.to_string()),
            calls: AtomicU32::new(0),
        }
    }

    /// Return the given responses in order, then repeat the last one.
    pub fn scripted(responses: Vec<String>) -> Self {
        let mut rev = responses;
        rev.reverse();
        Self {
            behavior: MockBehavior::Scripted(Mutex::new(rev)),
            calls: AtomicU32::new(0),
        }
    }

    /// Answer each check kind with a fixed verdict, recognized from the
    /// check-specific instruction text in the prompt.
    pub fn by_check(add: u8, remove: u8, modify: u8) -> Self {
        Self {
            behavior: MockBehavior::ByCheck { add, remove, modify },
            calls: AtomicU32::new(0),
        }
    }

    /// Emit a parseable verdict only when the prompt contains `needle`.
    pub fn parse_if_contains(needle: &str) -> Self {
        Self {
            behavior: MockBehavior::ParseIfContains(needle.to_string()),
            calls: AtomicU32::new(0),
        }
    }

    pub fn calls(&self) -> u32 {
        self.calls.load(Ordering::SeqCst)
    }
}

impl LlmClient for MockLlmClient {
    fn complete(&self, prompt: &str, _decode: &DecodeConfig) -> Result<String, String> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        match &self.behavior {
            MockBehavior::Always(r) => Ok(r.clone()),
            MockBehavior::Scripted(rest) => {
                let mut rest = rest.lock().expect("script lock");
                Ok(if rest.len() > 1 {
                    rest.pop().expect("non-empty script")
                } else {
                    rest.last().cloned().unwrap_or_default()
                })
            }
            MockBehavior::ByCheck { add, remove, modify } => {
                let verdict = if prompt.contains("determine if any new criteria have been added") {
                    *add
                } else if prompt.contains("determine if any existing criteria have been removed") {
                    *remove
                } else {
                    *modify
                };
                Ok(format!("Considered the diff.\nFinal output: {verdict}"))
            }
            MockBehavior::ParseIfContains(needle) => {
                if prompt.contains(needle.as_str()) {
                    Ok("Final output: 1".to_string())
                } else {
                    Ok("cannot determine".to_string())
                }
            }
        }
    }
}
