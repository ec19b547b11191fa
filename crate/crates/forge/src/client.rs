//! Chat-completions client for hosted vision-language models.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use base64::Engine;
use forge_core::rng::{derive_stream, seeded};
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::Semaphore;

use crate::error::{ForgeError, Result};

pub const API_KEY_ENV: &str = "DEPTHLM_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EndpointConfig {
    /// Base URL up to and including the API version, e.g. `http://host:8000/v1`.
    pub base_url: String,
    pub model: String,
    /// Read from the environment, never from config files.
    #[serde(skip)]
    pub api_key: Option<String>,
    pub max_concurrency: usize,
    pub request_timeout_s: f64,
    pub max_retries: u32,
    pub temperature: f64,
    pub max_tokens: Option<u32>,
    pub backoff_base_s: f64,
    pub backoff_factor: f64,
    /// Upper bound of the uniform jitter added to each backoff.
    pub backoff_jitter_s: f64,
    /// JSONL audit log of requests and responses, images elided.
    pub audit_log: Option<PathBuf>,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        Self {
            base_url: String::new(),
            model: String::new(),
            api_key: None,
            max_concurrency: 8,
            request_timeout_s: 120.0,
            max_retries: 3,
            temperature: 0.0,
            max_tokens: None,
            backoff_base_s: 1.0,
            backoff_factor: 2.0,
            backoff_jitter_s: 0.25,
            audit_log: None,
        }
    }
}

impl EndpointConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(ForgeError::Config(format!("endpoint: {m}")));
        if self.base_url.trim().is_empty() {
            return bad("base_url is required");
        }
        if self.max_concurrency < 1 {
            return bad("max_concurrency must be >= 1");
        }
        if !(self.request_timeout_s > 0.0 && self.request_timeout_s.is_finite()) {
            return bad("request_timeout_s must be positive");
        }
        if !(self.backoff_base_s >= 0.0 && self.backoff_factor >= 1.0 && self.backoff_jitter_s >= 0.0) {
            return bad("backoff settings must be non-negative with factor >= 1");
        }
        Ok(())
    }

    pub fn with_env_key(mut self) -> Self {
        self.api_key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        self
    }

    /// Delay before retry number `retry` (0-based); `unit` in [0, 1) scales the jitter.
    pub fn backoff(&self, retry: u32, unit: f64) -> Duration {
        let secs = self.backoff_base_s * self.backoff_factor.powi(retry as i32) + self.backoff_jitter_s * unit;
        Duration::from_secs_f64(secs)
    }
}

fn data_url(png: &[u8]) -> String {
    format!("data:image/png;base64,{}", base64::engine::general_purpose::STANDARD.encode(png))
}

/// Request body with one user turn holding the images followed by the prompt.
pub fn chat_request(cfg: &EndpointConfig, image_urls: &[String], prompt: &str) -> Value {
    let mut content: Vec<Value> = image_urls.iter().map(|u| json!({"type": "image_url", "image_url": {"url": u}})).collect();
    content.push(json!({"type": "text", "text": prompt}));
    let mut body = json!({
        "model": cfg.model,
        "temperature": cfg.temperature,
        "messages": [{"role": "user", "content": content}],
    });
    if let Some(m) = cfg.max_tokens {
        body["max_tokens"] = json!(m);
    }
    body
}

/// Assistant text from a chat-completions response.
pub fn response_text(body: &str) -> Option<String> {
    let v: Value = serde_json::from_str(body).ok()?;
    let content = &v["choices"][0]["message"]["content"];
    match content {
        Value::String(s) => Some(s.clone()),
        Value::Array(parts) => Some(parts.iter().filter_map(|p| p["text"].as_str()).collect::<Vec<_>>().join("")),
        _ => None,
    }
}

#[derive(Debug)]
pub struct Client {
    http: reqwest::Client,
    cfg: EndpointConfig,
    url: String,
    permits: Semaphore,
    audit: Option<Mutex<File>>,
    seed: u64,
}

impl Client {
    pub fn new(cfg: EndpointConfig, seed: u64) -> Result<Arc<Self>> {
        cfg.validate()?;
        let http = reqwest::Client::builder()
            .timeout(Duration::from_secs_f64(cfg.request_timeout_s))
            .build()
            .map_err(|e| ForgeError::Config(format!("http client: {e}")))?;
        let audit = match &cfg.audit_log {
            Some(p) => Some(Mutex::new(OpenOptions::new().create(true).append(true).open(p).map_err(ForgeError::io(p))?)),
            None => None,
        };
        let url = format!("{}/chat/completions", cfg.base_url.trim_end_matches('/'));
        Ok(Arc::new(Self { http, permits: Semaphore::new(cfg.max_concurrency), cfg, url, audit, seed }))
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.cfg
    }

    fn log(&self, entry: Value) {
        if let Some(f) = &self.audit {
            let mut f = f.lock().unwrap_or_else(|e| e.into_inner());
            // Audit logging is best effort.
            let _ = writeln!(f, "{entry}");
        }
    }

    /// Sends one request, retrying timeouts, connection failures, 429 and 5xx.
    pub async fn query(&self, request_id: &str, pngs: &[Vec<u8>], prompt: &str) -> Result<String> {
        let body = chat_request(&self.cfg, &pngs.iter().map(|p| data_url(p)).collect::<Vec<_>>(), prompt);
        let elided = chat_request(&self.cfg, &pngs.iter().map(|p| format!("<png elided, {} bytes>", p.len())).collect::<Vec<_>>(), prompt);
        let mut rng = seeded(derive_stream(self.seed, request_id, "backoff"));
        let mut last_status = None;
        let mut last_message = String::new();
        let attempts = self.cfg.max_retries + 1;
        for attempt in 0..attempts {
            if attempt > 0 {
                tokio::time::sleep(self.cfg.backoff(attempt - 1, rng.random::<f64>())).await;
            }
            let permit = self.permits.acquire().await.map_err(|e| ForgeError::Internal(e.to_string()))?;
            let mut req = self.http.post(&self.url).json(&body);
            if let Some(key) = &self.cfg.api_key {
                req = req.bearer_auth(key);
            }
            let outcome = match req.send().await {
                Ok(resp) => {
                    let status = resp.status().as_u16();
                    resp.text().await.map(|t| (status, t))
                }
                Err(e) => Err(e),
            };
            drop(permit);
            match outcome {
                Ok((status, text)) => {
                    self.log(json!({"id": request_id, "attempt": attempt + 1, "request": elided, "status": status, "response": text}));
                    if (200..300).contains(&status) {
                        return response_text(&text).ok_or_else(|| ForgeError::Protocol { status, body: format!("no assistant message in response: {}", truncate(&text)) });
                    }
                    if status == 429 || status >= 500 {
                        last_status = Some(status);
                        last_message = truncate(&text);
                        continue;
                    }
                    return Err(ForgeError::Protocol { status, body: truncate(&text) });
                }
                Err(e) => {
                    self.log(json!({"id": request_id, "attempt": attempt + 1, "request": elided, "error": e.to_string()}));
                    last_status = e.status().map(|s| s.as_u16());
                    last_message = e.to_string();
                }
            }
        }
        Err(ForgeError::Transport { attempts, status: last_status, message: last_message })
    }
}

fn truncate(s: &str) -> String {
    const MAX: usize = 512;
    match s.char_indices().nth(MAX) {
        Some((i, _)) => format!("{}...", &s[..i]),
        None => s.to_owned(),
    }
}
