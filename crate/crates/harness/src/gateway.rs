//! Remote chat-completion clients behind one synchronous interface. Three
//! provider API shapes share a retry and rate-limit policy, and every raw
//! response body lands in an append-only audit log before any parsing.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write as IoWrite};
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use standoff_core::agents::{Agent, AgentError};
use standoff_core::game::{Action, AgentId, Decision, DecisionContext};
use standoff_core::prompts::{self, FORMAT_REMINDER};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApiStyle {
    #[serde(rename = "openai_chat")]
    OpenAiChat,
    AnthropicMessages,
    GoogleGenerateContent,
}

fn default_timeout_ms() -> u64 {
    30_000
}

fn default_max_attempts() -> u32 {
    3
}

fn default_backoff_ms() -> Vec<u64> {
    vec![250, 1_000, 4_000]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderSpec {
    pub provider_id: String,
    pub model_name: String,
    pub api: ApiStyle,
    pub endpoint: String,
    /// Name of the environment variable holding the credential. The value
    /// itself never appears in config or flags.
    pub auth_env: String,
    #[serde(default)]
    pub temperature: Option<f64>,
    #[serde(default)]
    pub max_output_tokens: Option<u32>,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_max_attempts")]
    pub max_attempts: u32,
    /// Sleep before transport retry i; the last entry repeats.
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: Vec<u64>,
    /// Minimum spacing between request starts against this provider,
    /// shared across all in-flight games.
    #[serde(default)]
    pub min_request_interval_ms: u64,
}

impl ProviderSpec {
    pub fn validate(&self) -> Result<(), String> {
        if self.max_attempts < 1 {
            return Err(format!("provider {}: max_attempts must be at least 1", self.provider_id));
        }
        if self.timeout_ms == 0 {
            return Err(format!("provider {}: timeout must be positive", self.provider_id));
        }
        Ok(())
    }

    fn backoff_for(&self, completed_attempts: u32) -> Duration {
        if self.backoff_ms.is_empty() {
            return Duration::ZERO;
        }
        let idx = (completed_attempts as usize - 1).min(self.backoff_ms.len() - 1);
        Duration::from_millis(self.backoff_ms[idx])
    }
}

#[derive(Debug, Clone)]
pub struct RawCompletion {
    pub text: String,
    pub latency: Duration,
    pub attempt: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ParseErrorKind {
    NotStructured,
    MissingKey,
    UnknownAction,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind:?}: {offending_text:?}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub offending_text: String,
}

impl ParseError {
    fn new(kind: ParseErrorKind, offending: &str) -> ParseError {
        ParseError {
            kind,
            offending_text: offending.to_string(),
        }
    }
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("credential variable {var} is not set")]
    MissingCredential { var: String },
    #[error("provider {provider}: transport failure after {attempts} attempts: {detail}")]
    Transport {
        provider: String,
        attempts: u32,
        detail: String,
    },
    #[error("provider {provider}: HTTP {status}: {detail}")]
    Http {
        provider: String,
        status: u16,
        detail: String,
    },
    #[error("provider {provider}: response had no completion text: {detail}")]
    BadResponse { provider: String, detail: String },
    #[error("audit log: {0}")]
    Audit(#[from] std::io::Error),
}

/// Identifies the game turn a request belongs to, for the audit log.
#[derive(Debug, Clone)]
pub struct CallContext {
    pub run_key: String,
    pub period: u32,
    pub agent: AgentId,
}

#[derive(Serialize)]
struct AuditEntry<'a> {
    run_key: &'a str,
    period: u32,
    agent: AgentId,
    attempt: u32,
    prompt_hash: &'a str,
    /// 0 when the request never produced an HTTP response.
    http_status: u16,
    latency_ms: u128,
    raw_text: &'a str,
}

/// Shared client for all providers. Rate limiting is per provider_id and
/// global across games; the audit writer is append-only JSONL.
pub struct Gateway {
    client: reqwest::blocking::Client,
    next_start: Mutex<HashMap<String, Instant>>,
    audit: Option<Mutex<BufWriter<File>>>,
}

impl Gateway {
    pub fn new(audit_path: Option<&Path>) -> Result<Gateway, GatewayError> {
        let audit = match audit_path {
            Some(path) => {
                if let Some(parent) = path.parent() {
                    std::fs::create_dir_all(parent)?;
                }
                let file = OpenOptions::new().create(true).append(true).open(path)?;
                Some(Mutex::new(BufWriter::new(file)))
            }
            None => None,
        };
        Ok(Gateway {
            client: reqwest::blocking::Client::new(),
            next_start: Mutex::new(HashMap::new()),
            audit,
        })
    }

    /// Blocks until this provider's next request slot, spacing starts by
    /// min_request_interval_ms across all threads.
    fn reserve_slot(&self, spec: &ProviderSpec) {
        let interval = Duration::from_millis(spec.min_request_interval_ms);
        let start = {
            let mut slots = self.next_start.lock().expect("limiter lock");
            let now = Instant::now();
            let start = slots
                .get(&spec.provider_id)
                .copied()
                .map_or(now, |slot| slot.max(now));
            slots.insert(spec.provider_id.clone(), start + interval);
            start
        };
        let now = Instant::now();
        if start > now {
            std::thread::sleep(start - now);
        }
    }

    fn audit_write(&self, entry: &AuditEntry) -> Result<(), GatewayError> {
        if let Some(writer) = &self.audit {
            let mut writer = writer.lock().expect("audit lock");
            serde_json::to_writer(&mut *writer, entry).map_err(std::io::Error::other)?;
            writer.write_all(b"\n")?;
            writer.flush()?;
        }
        Ok(())
    }

    /// One completion call with transport retries. 429, 5xx, and network
    /// errors retry per the backoff schedule; other HTTP failures are final.
    pub fn complete(
        &self,
        spec: &ProviderSpec,
        prompt: &str,
        ctx: &CallContext,
    ) -> Result<RawCompletion, GatewayError> {
        let credential =
            std::env::var(&spec.auth_env).map_err(|_| GatewayError::MissingCredential {
                var: spec.auth_env.clone(),
            })?;
        let prompt_hash = prompts::sha256_hex(prompt);
        let body = request_body(spec, prompt);
        let mut last_detail = String::new();
        for attempt in 1..=spec.max_attempts {
            self.reserve_slot(spec);
            let started = Instant::now();
            let response = self
                .client
                .post(&spec.endpoint)
                .timeout(Duration::from_millis(spec.timeout_ms))
                .headers(auth_headers(spec, &credential))
                .json(&body)
                .send();
            let latency = started.elapsed();
            let (status, text) = match response {
                Ok(resp) => {
                    let status = resp.status().as_u16();
                    let text = resp.text().unwrap_or_default();
                    (status, text)
                }
                Err(err) => (0, err.to_string()),
            };
            self.audit_write(&AuditEntry {
                run_key: &ctx.run_key,
                period: ctx.period,
                agent: ctx.agent,
                attempt,
                prompt_hash: &prompt_hash,
                http_status: status,
                latency_ms: latency.as_millis(),
                raw_text: &text,
            })?;
            if (200..300).contains(&status) {
                let content = extract_completion_text(spec.api, &text).ok_or_else(|| {
                    GatewayError::BadResponse {
                        provider: spec.provider_id.clone(),
                        detail: text.clone(),
                    }
                })?;
                return Ok(RawCompletion {
                    text: content,
                    latency,
                    attempt,
                });
            }
            let retryable = status == 0 || status == 429 || (500..600).contains(&status);
            if !retryable {
                return Err(GatewayError::Http {
                    provider: spec.provider_id.clone(),
                    status,
                    detail: text,
                });
            }
            last_detail = if status == 0 {
                text
            } else {
                format!("HTTP {status}: {text}")
            };
            if attempt < spec.max_attempts {
                std::thread::sleep(spec.backoff_for(attempt));
            }
        }
        Err(GatewayError::Transport {
            provider: spec.provider_id.clone(),
            attempts: spec.max_attempts,
            detail: last_detail,
        })
    }
}

fn auth_headers(spec: &ProviderSpec, credential: &str) -> reqwest::header::HeaderMap {
    use reqwest::header::{HeaderMap, HeaderValue};
    let mut headers = HeaderMap::new();
    let secret = |value: String| {
        let mut v = HeaderValue::from_str(&value).expect("credential is valid header text");
        v.set_sensitive(true);
        v
    };
    match spec.api {
        ApiStyle::OpenAiChat => {
            headers.insert("authorization", secret(format!("Bearer {credential}")));
        }
        ApiStyle::AnthropicMessages => {
            headers.insert("x-api-key", secret(credential.to_string()));
            headers.insert("anthropic-version", HeaderValue::from_static("2023-06-01"));
        }
        ApiStyle::GoogleGenerateContent => {
            headers.insert("x-goog-api-key", secret(credential.to_string()));
        }
    }
    headers
}

fn request_body(spec: &ProviderSpec, prompt: &str) -> Value {
    let mut body = match spec.api {
        ApiStyle::OpenAiChat => json!({
            "model": spec.model_name,
            "messages": [{"role": "user", "content": prompt}],
        }),
        ApiStyle::AnthropicMessages => json!({
            "model": spec.model_name,
            "max_tokens": spec.max_output_tokens.unwrap_or(1024),
            "messages": [{"role": "user", "content": prompt}],
        }),
        ApiStyle::GoogleGenerateContent => json!({
            "contents": [{"role": "user", "parts": [{"text": prompt}]}],
        }),
    };
    match spec.api {
        ApiStyle::OpenAiChat => {
            if let Some(t) = spec.temperature {
                body["temperature"] = json!(t);
            }
            if let Some(m) = spec.max_output_tokens {
                body["max_tokens"] = json!(m);
            }
        }
        ApiStyle::AnthropicMessages => {
            if let Some(t) = spec.temperature {
                body["temperature"] = json!(t);
            }
        }
        ApiStyle::GoogleGenerateContent => {
            let mut config = serde_json::Map::new();
            if let Some(t) = spec.temperature {
                config.insert("temperature".into(), json!(t));
            }
            if let Some(m) = spec.max_output_tokens {
                config.insert("maxOutputTokens".into(), json!(m));
            }
            if !config.is_empty() {
                body["generationConfig"] = Value::Object(config);
            }
        }
    }
    body
}

fn extract_completion_text(api: ApiStyle, body: &str) -> Option<String> {
    let value: Value = serde_json::from_str(body).ok()?;
    let text = match api {
        ApiStyle::OpenAiChat => value.get("choices")?.get(0)?.get("message")?.get("content")?,
        ApiStyle::AnthropicMessages => value.get("content")?.get(0)?.get("text")?,
        ApiStyle::GoogleGenerateContent => value
            .get("candidates")?
            .get(0)?
            .get("content")?
            .get("parts")?
            .get(0)?
            .get("text")?,
    };
    text.as_str().map(str::to_string)
}

/// The single synonym table. Everything outside it is an error, never a
/// silent default.
const ACTION_SYNONYMS: [(&str, Action); 5] = [
    ("attack", Action::Attack),
    ("do_nothing", Action::DoNothing),
    ("do nothing", Action::DoNothing),
    ("donothing", Action::DoNothing),
    ("nothing", Action::DoNothing),
];

pub fn normalize_action(text: &str) -> Result<Action, ParseError> {
    // trim_matches only strips the ends, so interior underscores survive
    let trimmed = text
        .trim_matches(|c: char| c.is_whitespace() || c.is_ascii_punctuation())
        .to_lowercase();
    ACTION_SYNONYMS
        .iter()
        .find(|(synonym, _)| *synonym == trimmed)
        .map(|(_, action)| *action)
        .ok_or_else(|| ParseError::new(ParseErrorKind::UnknownAction, text))
}

/// Extracts the first JSON object in the text that carries all three output
/// keys, tolerating surrounding prose and code fences. Objects missing keys
/// are skipped; if only such objects exist the error is MISSING_KEY.
pub fn parse_decision(raw: &str) -> Result<Decision, ParseError> {
    let mut saw_object = false;
    for (idx, _) in raw.char_indices().filter(|(_, c)| *c == '{') {
        let Some(value) = leading_json_value(&raw[idx..]) else {
            continue;
        };
        let Value::Object(map) = value else {
            continue;
        };
        saw_object = true;
        let (Some(action), Some(message), Some(reasoning)) =
            (map.get("action"), map.get("message"), map.get("reasoning"))
        else {
            continue;
        };
        // message and reasoning are recorded verbatim, so only strings qualify
        let (Some(message), Some(reasoning)) = (message.as_str(), reasoning.as_str()) else {
            continue;
        };
        let Some(action) = action.as_str() else {
            return Err(ParseError::new(ParseErrorKind::UnknownAction, raw));
        };
        let action = normalize_action(action)
            .map_err(|e| ParseError::new(e.kind, raw))?;
        return Ok(Decision::new(action, message, reasoning));
    }
    if saw_object {
        Err(ParseError::new(ParseErrorKind::MissingKey, raw))
    } else {
        Err(ParseError::new(ParseErrorKind::NotStructured, raw))
    }
}

fn leading_json_value(text: &str) -> Option<Value> {
    serde_json::Deserializer::from_str(text)
        .into_iter::<Value>()
        .next()?
        .ok()
}

/// A seat driven by a remote model. Parse failures re-ask with the same
/// prompt plus a one-line reminder, up to the provider's attempt budget.
pub struct LlmAgent {
    gateway: Arc<Gateway>,
    spec: ProviderSpec,
    run_key: String,
    agent_id: AgentId,
}

impl LlmAgent {
    pub fn new(gateway: Arc<Gateway>, spec: ProviderSpec, run_key: String) -> LlmAgent {
        LlmAgent {
            gateway,
            spec,
            run_key,
            agent_id: AgentId::A,
        }
    }
}

impl Agent for LlmAgent {
    fn begin_game(&mut self, _game_seed: u64, agent_id: AgentId) {
        self.agent_id = agent_id;
    }

    fn decide(&mut self, ctx: &DecisionContext) -> Result<Decision, AgentError> {
        let base_prompt =
            prompts::render_context(ctx).map_err(|e| AgentError::Usage(e.to_string()))?;
        let reminded = format!("{base_prompt}\n\n{FORMAT_REMINDER}");
        let call_ctx = CallContext {
            run_key: self.run_key.clone(),
            period: ctx.current_period,
            agent: self.agent_id,
        };
        let mut last_error = String::new();
        for attempt in 1..=self.spec.max_attempts {
            let prompt = if attempt == 1 { &base_prompt } else { &reminded };
            let raw = self
                .gateway
                .complete(&self.spec, prompt, &call_ctx)
                .map_err(|err| match err {
                    GatewayError::MissingCredential { .. } => AgentError::Usage(err.to_string()),
                    other => AgentError::Transport(other.to_string()),
                })?;
            match parse_decision(&raw.text) {
                Ok(decision) => return Ok(decision),
                Err(parse_err) => last_error = parse_err.to_string(),
            }
        }
        Err(AgentError::MalformedOutput {
            attempts: self.spec.max_attempts,
            last_error,
        })
    }
}
