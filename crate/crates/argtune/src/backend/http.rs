//! Blocking client for chat-completions style HTTP endpoints.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use argtune_core::backend::{
    BackendError, CompletionBackend, CompletionRequest, CompletionResult, FinishReason,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    /// Endpoint root, e.g. `http://localhost:8000/v1`; `/chat/completions`
    /// is appended.
    pub base_url: String,
    /// Environment variable holding the API key. Empty means the endpoint
    /// needs no authentication.
    pub api_key_env_var: String,
    pub model_name: String,
    pub max_new_tokens: u32,
    pub temperature: f64,
    pub request_timeout_secs: f64,
    pub max_retries: u32,
    pub parallelism: usize,
    pub backoff_base_ms: u64,
    pub backoff_max_ms: u64,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            base_url: "http://localhost:8000/v1".into(),
            api_key_env_var: "OPENAI_API_KEY".into(),
            model_name: String::new(),
            max_new_tokens: 512,
            temperature: 0.0,
            request_timeout_secs: 120.0,
            max_retries: 4,
            parallelism: 4,
            backoff_base_ms: 500,
            backoff_max_ms: 30_000,
        }
    }
}

impl BackendConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.max_new_tokens == 0 {
            return Err("max_new_tokens must be at least 1".into());
        }
        if self.parallelism == 0 {
            return Err("parallelism must be at least 1".into());
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(format!("temperature {} is negative", self.temperature));
        }
        if self.request_timeout_secs.is_nan() || self.request_timeout_secs <= 0.0 {
            return Err("request_timeout_secs must be positive".into());
        }
        Ok(())
    }
}

/// Delay before retry `attempt` (0-based): `min(max, base * 2^attempt * (1 + jitter))`
/// with `jitter` in `[0, 0.5)`. Doubling outweighs the jitter, so the
/// schedule never decreases.
pub fn backoff_delay(attempt: u32, base: Duration, max: Duration, jitter: f64) -> Duration {
    let jitter = jitter.clamp(0.0, 0.499_999);
    let factor = 2f64.powi(attempt.min(32) as i32) * (1.0 + jitter);
    base.mul_f64(factor).min(max)
}

/// Counting semaphore bounding requests in flight.
struct Slots {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Slots {
    fn acquire(&self) -> SlotGuard<'_> {
        let mut free = self.free.lock().unwrap();
        while *free == 0 {
            free = self.cv.wait(free).unwrap();
        }
        *free -= 1;
        SlotGuard(self)
    }
}

struct SlotGuard<'a>(&'a Slots);

impl Drop for SlotGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap() += 1;
        self.0.cv.notify_one();
    }
}

enum Attempt {
    Done(CompletionResult),
    Retry(BackendError),
    Fail(BackendError),
}

pub struct HttpBackend {
    config: BackendConfig,
    agent: ureq::Agent,
    slots: Slots,
    requests_sent: AtomicUsize,
}

impl HttpBackend {
    pub fn new(config: BackendConfig) -> Result<Self, String> {
        config.validate()?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(config.request_timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(HttpBackend {
            slots: Slots {
                free: Mutex::new(config.parallelism),
                cv: Condvar::new(),
            },
            agent,
            config,
            requests_sent: AtomicUsize::new(0),
        })
    }

    pub fn config(&self) -> &BackendConfig {
        &self.config
    }

    /// HTTP requests issued so far, retries included.
    pub fn requests_sent(&self) -> usize {
        self.requests_sent.load(Ordering::Relaxed)
    }

    fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'))
    }

    fn api_key(&self) -> Result<Option<String>, BackendError> {
        let var = self.config.api_key_env_var.trim();
        if var.is_empty() {
            return Ok(None);
        }
        match std::env::var(var) {
            Ok(k) if !k.trim().is_empty() => Ok(Some(k)),
            _ => Err(BackendError::Auth(format!(
                "environment variable {var} is not set"
            ))),
        }
    }

    fn body(&self, request: &CompletionRequest) -> Value {
        let max_tokens = request
            .overrides
            .max_new_tokens
            .unwrap_or(self.config.max_new_tokens);
        let temperature = request
            .overrides
            .temperature
            .unwrap_or(self.config.temperature);
        let mut body = json!({
            "model": self.config.model_name,
            "messages": [{"role": "user", "content": request.prompt}],
            "max_tokens": max_tokens,
            "temperature": temperature,
        });
        if !request.stop_sequences.is_empty() {
            body["stop"] = json!(request.stop_sequences);
        }
        body
    }

    fn attempt(&self, body: &[u8], key: Option<&str>, attempts: u32) -> Attempt {
        self.requests_sent.fetch_add(1, Ordering::Relaxed);
        let started = Instant::now();
        let mut req = self
            .agent
            .post(&self.endpoint())
            .header("Content-Type", "application/json");
        if let Some(k) = key {
            req = req.header("Authorization", &format!("Bearer {k}"));
        }
        let mut resp = match req.send(body) {
            Ok(r) => r,
            Err(ureq::Error::Timeout(_)) => {
                return Attempt::Retry(BackendError::Timeout { attempts })
            }
            Err(e) => {
                return Attempt::Retry(BackendError::Transport {
                    attempts,
                    message: e.to_string(),
                })
            }
        };
        let status = resp.status().as_u16();
        let text = match resp.body_mut().read_to_string() {
            Ok(t) => t,
            Err(ureq::Error::Timeout(_)) => {
                return Attempt::Retry(BackendError::Timeout { attempts })
            }
            Err(e) => {
                return Attempt::Retry(BackendError::Transport {
                    attempts,
                    message: e.to_string(),
                })
            }
        };
        match status {
            200..=299 => match parse_completion(&text) {
                Ok((text, finish_reason)) => Attempt::Done(CompletionResult {
                    text,
                    finish_reason,
                    latency: started.elapsed(),
                }),
                Err(e) => Attempt::Fail(BackendError::MalformedResponse(e)),
            },
            401 | 403 => Attempt::Fail(BackendError::Auth(format!("HTTP {status}"))),
            408 | 409 | 429 | 500..=599 => Attempt::Retry(BackendError::Transport {
                attempts,
                message: format!("HTTP {status}"),
            }),
            _ => Attempt::Fail(BackendError::Transport {
                attempts,
                message: format!("HTTP {status}: {}", snippet(&text)),
            }),
        }
    }
}

fn snippet(s: &str) -> &str {
    match s.char_indices().nth(200) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

/// Text and finish reason of the first choice of a chat-completions reply.
pub fn parse_completion(body: &str) -> Result<(String, FinishReason), String> {
    let v: Value = serde_json::from_str(body).map_err(|e| format!("invalid JSON: {e}"))?;
    let choice = v
        .get("choices")
        .and_then(|c| c.get(0))
        .ok_or("response has no choices")?;
    let text = choice
        .pointer("/message/content")
        .or_else(|| choice.get("text"))
        .and_then(Value::as_str)
        .ok_or("choice has no text content")?;
    let finish = match choice.get("finish_reason").and_then(Value::as_str) {
        Some("length") => FinishReason::Length,
        Some("stop") | None => FinishReason::Stop,
        Some(_) => FinishReason::Error,
    };
    Ok((text.to_string(), finish))
}

impl CompletionBackend for HttpBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResult, BackendError> {
        let key = self.api_key()?;
        let body = serde_json::to_vec(&self.body(request))
            .map_err(|e| BackendError::MalformedResponse(e.to_string()))?;
        let base = Duration::from_millis(self.config.backoff_base_ms);
        let max = Duration::from_millis(self.config.backoff_max_ms);
        let mut attempt = 0;
        loop {
            let outcome = {
                let _slot = self.slots.acquire();
                self.attempt(&body, key.as_deref(), attempt + 1)
            };
            match outcome {
                Attempt::Done(r) => return Ok(r),
                Attempt::Fail(e) => return Err(e),
                Attempt::Retry(e) if attempt >= self.config.max_retries => return Err(e),
                Attempt::Retry(_) => {
                    let jitter = rand::random::<f64>() * 0.5;
                    std::thread::sleep(backoff_delay(attempt, base, max, jitter));
                    attempt += 1;
                }
            }
        }
    }

    fn complete_batch(
        &self,
        requests: &[CompletionRequest],
    ) -> Vec<Result<CompletionResult, BackendError>> {
        let workers = self.config.parallelism.min(requests.len());
        if workers <= 1 {
            return requests.iter().map(|r| self.complete(r)).collect();
        }
        let next = AtomicUsize::new(0);
        let results: Vec<Mutex<Option<Result<CompletionResult, BackendError>>>> =
            requests.iter().map(|_| Mutex::new(None)).collect();
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(req) = requests.get(i) else { break };
                    *results[i].lock().unwrap() = Some(self.complete(req));
                });
            }
        });
        results
            .into_iter()
            .map(|m| m.into_inner().unwrap().expect("every slot is filled"))
            .collect()
    }
}
