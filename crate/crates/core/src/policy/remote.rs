//! Chat-completions adapter: one POST per generation, images inlined as
//! base64 PNG data URLs, capped exponential backoff between attempts.

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{LearnBatch, Policy, PolicyError, PolicyResponse, PolicyRole, PromptContext};
use crate::image::save_png;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemoteConfig {
    pub base_url: String,
    pub path: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    pub token_env: Option<String>,
    pub timeout_secs: f64,
    pub attempts: u32,
    pub backoff_base_ms: u64,
    pub backoff_cap_ms: u64,
    pub max_in_flight: usize,
    pub transcript: Option<PathBuf>,
    /// Where learn batches are appended for an external trainer.
    pub learn_log: Option<PathBuf>,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        Self {
            base_url: "http://127.0.0.1:8000".into(),
            path: "/v1/chat/completions".into(),
            model: "default".into(),
            token_env: None,
            timeout_secs: 120.0,
            attempts: 3,
            backoff_base_ms: 1000,
            backoff_cap_ms: 4000,
            max_in_flight: 8,
            transcript: None,
            learn_log: None,
        }
    }
}

impl RemoteConfig {
    /// Delay before retry number `k` (0-based): `base * 2^k`, capped.
    pub fn backoff(&self, k: u32) -> Duration {
        let ms = self.backoff_base_ms.saturating_mul(1u64 << k.min(20));
        Duration::from_millis(ms.min(self.backoff_cap_ms))
    }
}

/// One line of the transcript log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub role: PolicyRole,
    pub stream_seed: u64,
    pub attempt: u32,
    pub prompt: String,
    pub images: Vec<String>,
    pub status: Option<u16>,
    pub response: Option<String>,
    pub error: Option<String>,
}

struct Gate {
    busy: Mutex<usize>,
    freed: Condvar,
    limit: usize,
}

impl Gate {
    fn enter(&self) -> GateGuard<'_> {
        let mut n = self.busy.lock().unwrap();
        while *n >= self.limit {
            n = self.freed.wait(n).unwrap();
        }
        *n += 1;
        GateGuard(self)
    }
}

struct GateGuard<'a>(&'a Gate);

impl Drop for GateGuard<'_> {
    fn drop(&mut self) {
        *self.0.busy.lock().unwrap() -= 1;
        self.0.freed.notify_one();
    }
}

enum Attempt {
    Done(String),
    Retry(PolicyError),
    Fatal(PolicyError),
}

pub struct RemotePolicy {
    config: RemoteConfig,
    agent: ureq::Agent,
    gate: Gate,
    transcript: Option<Mutex<BufWriter<File>>>,
}

fn append(path: &PathBuf) -> Result<File, PolicyError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(OpenOptions::new().create(true).append(true).open(path)?)
}

impl RemotePolicy {
    pub fn new(config: RemoteConfig) -> Result<Self, PolicyError> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs_f64(config.timeout_secs.max(0.001))))
            .build()
            .into();
        let transcript = match &config.transcript {
            Some(p) => Some(Mutex::new(BufWriter::new(append(p)?))),
            None => None,
        };
        Ok(Self {
            gate: Gate {
                busy: Mutex::new(0),
                freed: Condvar::new(),
                limit: config.max_in_flight.max(1),
            },
            agent,
            transcript,
            config,
        })
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    /// The JSON body sent for `ctx`.
    pub fn request_body(&self, ctx: &PromptContext) -> Result<Value, PolicyError> {
        let mut content = vec![json!({"type": "text", "text": ctx.rendered_prompt})];
        for img in &ctx.images {
            let png = save_png(&img.image).map_err(|e| PolicyError::InvalidContext(e.to_string()))?;
            let url = format!("data:image/png;base64,{}", STANDARD.encode(png));
            content.push(json!({"type": "image_url", "url": url, "image_url": {"url": url}}));
        }
        let s = &ctx.sampling;
        Ok(json!({
            "model": self.config.model,
            "temperature": s.temperature,
            "top_p": s.top_p,
            "top_k": s.top_k,
            "presence_penalty": s.presence_penalty,
            "max_tokens": s.max_tokens,
            "messages": [{"role": "user", "content": content}],
        }))
    }

    fn log(&self, rec: &TranscriptRecord) {
        if let Some(t) = &self.transcript {
            let mut w = t.lock().unwrap();
            let line = serde_json::to_string(rec).expect("record serializes");
            if let Err(e) = writeln!(w, "{line}").and_then(|_| w.flush()) {
                log::warn!("transcript write failed: {e}");
            }
        }
    }

    fn attempt(&self, url: &str, body: &str, token: Option<&str>) -> (Attempt, Option<u16>, Option<String>) {
        let mut req = self.agent.post(url).header("Content-Type", "application/json");
        if let Some(t) = token {
            req = req.header("Authorization", &format!("Bearer {t}"));
        }
        let mut resp = match req.send(body) {
            Ok(r) => r,
            Err(ureq::Error::Timeout(_)) => return (Attempt::Retry(PolicyError::Timeout), None, None),
            Err(e) => {
                let msg = e.to_string();
                return (
                    Attempt::Retry(PolicyError::Unavailable {
                        attempts: 0,
                        message: msg,
                    }),
                    None,
                    None,
                );
            }
        };
        let status = resp.status().as_u16();
        let text = match resp.body_mut().read_to_string() {
            Ok(t) => t,
            Err(ureq::Error::Timeout(_)) => return (Attempt::Retry(PolicyError::Timeout), Some(status), None),
            Err(e) => return (Attempt::Retry(PolicyError::MalformedJson(e.to_string())), Some(status), None),
        };
        let outcome = if status == 429 || status >= 500 {
            Attempt::Retry(PolicyError::HttpStatus { status, body: text.clone() })
        } else if status >= 400 {
            Attempt::Fatal(PolicyError::HttpStatus { status, body: text.clone() })
        } else {
            match parse_completion(&text) {
                Ok(t) => Attempt::Done(t),
                Err(e) => Attempt::Fatal(e),
            }
        };
        (outcome, Some(status), Some(text))
    }
}

/// First choice's message content; array-of-parts content is joined.
pub fn parse_completion(body: &str) -> Result<String, PolicyError> {
    let v: Value = serde_json::from_str(body).map_err(|e| PolicyError::MalformedJson(e.to_string()))?;
    let choices = v
        .get("choices")
        .and_then(Value::as_array)
        .ok_or_else(|| PolicyError::MalformedJson("missing choices".into()))?;
    let first = choices.first().ok_or(PolicyError::NoChoices)?;
    match first.pointer("/message/content") {
        Some(Value::String(s)) => Ok(s.clone()),
        Some(Value::Array(parts)) => Ok(parts.iter().filter_map(|p| p.get("text").and_then(Value::as_str)).collect()),
        _ => Err(PolicyError::MalformedJson("choice has no message content".into())),
    }
}

fn truncate_chars(s: String, cap: usize) -> String {
    match s.char_indices().nth(cap) {
        Some((i, _)) => s[..i].to_string(),
        None => s,
    }
}

impl Policy for RemotePolicy {
    fn name(&self) -> String {
        format!("remote({})", self.config.model)
    }

    fn generate(&self, ctx: &PromptContext) -> Result<PolicyResponse, PolicyError> {
        let body = serde_json::to_string(&self.request_body(ctx)?).expect("json value serializes");
        let url = format!("{}{}", self.config.base_url.trim_end_matches('/'), self.config.path);
        let token = self.config.token_env.as_deref().and_then(|k| std::env::var(k).ok());
        let attempts = self.config.attempts.max(1);
        let started = Instant::now();
        let _slot = self.gate.enter();
        let mut last = None;
        for k in 0..attempts {
            if k > 0 {
                std::thread::sleep(self.config.backoff(k - 1));
            }
            let (outcome, status, response) = self.attempt(&url, &body, token.as_deref());
            self.log(&TranscriptRecord {
                role: ctx.role,
                stream_seed: ctx.stream_seed,
                attempt: k + 1,
                prompt: ctx.rendered_prompt.clone(),
                images: ctx.images.iter().map(|i| i.digest.clone()).collect(),
                status,
                response,
                error: match &outcome {
                    Attempt::Done(_) => None,
                    Attempt::Retry(e) | Attempt::Fatal(e) => Some(e.to_string()),
                },
            });
            match outcome {
                Attempt::Done(text) => {
                    return Ok(PolicyResponse {
                        text: truncate_chars(text, ctx.sampling.max_chars()),
                        latency: started.elapsed(),
                        attempts: k + 1,
                    })
                }
                Attempt::Fatal(e) => return Err(e),
                Attempt::Retry(e) => last = Some(e),
            }
        }
        Err(match last {
            Some(PolicyError::Timeout) => PolicyError::Timeout,
            other => PolicyError::Unavailable {
                attempts,
                message: other.map(|e| e.to_string()).unwrap_or_default(),
            },
        })
    }

    fn learn(&mut self, batch: &LearnBatch) -> Result<(), PolicyError> {
        if let Some(p) = &self.config.learn_log {
            let mut f = append(p)?;
            writeln!(f, "{}", serde_json::to_string(batch).expect("batch serializes"))?;
        }
        Ok(())
    }
}
