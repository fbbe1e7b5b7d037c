//! Text-generation backends: a remote HTTP endpoint and a deterministic
//! fixture-driven stand-in.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use super::{prompt_hash, GenerationParams};

#[derive(Debug, Clone, Error, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "detail")]
pub enum BackendError {
    #[error("backend unreachable: {0}")]
    Unreachable(String),
    #[error("backend timed out: {0}")]
    Timeout(String),
    #[error("backend returned a non-conforming response: {0}")]
    BadResponse(String),
}

impl BackendError {
    /// Transient failures worth retrying.
    pub fn is_retryable(&self) -> bool {
        !matches!(self, BackendError::BadResponse(_))
    }
}

pub trait Backend: Send + Sync {
    /// Raw continuation for `prompt`, excluding the prompt itself.
    fn generate(&self, prompt: &str, params: &GenerationParams) -> Result<String, BackendError>;

    /// Stable description recorded in run provenance.
    fn descriptor(&self) -> String;
}

pub const FALLBACK_KEY: &str = "_fallback";

/// Answers from a fixture keyed by prompt hash. A key may map to a list of
/// answers, returned in turn on repeated calls.
#[derive(Debug)]
pub struct ScriptedBackend {
    answers: HashMap<String, Vec<String>>,
    fallback: String,
    calls: AtomicUsize,
    turns: Mutex<HashMap<String, usize>>,
    label: String,
}

impl ScriptedBackend {
    pub fn new(fallback: impl Into<String>) -> Self {
        Self {
            answers: HashMap::new(),
            fallback: fallback.into(),
            calls: AtomicUsize::new(0),
            turns: Mutex::new(HashMap::new()),
            label: "scripted".into(),
        }
    }

    /// Registers an answer for the exact prompt text.
    pub fn answer(mut self, prompt: &str, text: impl Into<String>) -> Self {
        self.answers.insert(prompt_hash(prompt), vec![text.into()]);
        self
    }

    pub fn answer_sequence(mut self, prompt: &str, texts: Vec<String>) -> Self {
        self.answers.insert(prompt_hash(prompt), texts);
        self
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let value: Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
        let Value::Object(map) = value else {
            return Err("scripted fixture must be a JSON object".into());
        };
        let mut backend = ScriptedBackend::new("Yes");
        for (key, value) in map {
            let answers = match value {
                Value::String(s) => vec![s],
                Value::Array(items) => items
                    .into_iter()
                    .map(|v| match v {
                        Value::String(s) => Ok(s),
                        _ => Err(format!("fixture entry {key} must hold strings")),
                    })
                    .collect::<Result<Vec<_>, _>>()?,
                _ => return Err(format!("fixture entry {key} must be a string or list")),
            };
            if key == FALLBACK_KEY {
                backend.fallback = answers.into_iter().next().unwrap_or_default();
            } else if answers.is_empty() {
                return Err(format!("fixture entry {key} is empty"));
            } else {
                backend.answers.insert(key, answers);
            }
        }
        Ok(backend)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, String> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let mut backend = Self::from_json(&text)?;
        backend.label = format!("scripted:{}", path.display());
        Ok(backend)
    }

    pub fn to_json(&self) -> Value {
        let mut keys: Vec<_> = self.answers.keys().collect();
        keys.sort();
        let mut map = serde_json::Map::new();
        for k in keys {
            let v = &self.answers[k];
            map.insert(k.clone(), if v.len() == 1 { json!(v[0]) } else { json!(v) });
        }
        map.insert(FALLBACK_KEY.into(), json!(self.fallback));
        Value::Object(map)
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn fallback(&self) -> &str {
        &self.fallback
    }
}

impl Backend for ScriptedBackend {
    fn generate(&self, prompt: &str, _params: &GenerationParams) -> Result<String, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let key = prompt_hash(prompt);
        let Some(answers) = self.answers.get(&key) else {
            return Ok(self.fallback.clone());
        };
        let mut turns = self.turns.lock().expect("turn counter poisoned");
        let turn = turns.entry(key).or_insert(0);
        let text = answers[*turn % answers.len()].clone();
        *turn += 1;
        Ok(text)
    }

    fn descriptor(&self) -> String {
        self.label.clone()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WireFormat {
    /// `{"prompt", ...}` → `{"text"}`
    #[default]
    Completion,
    /// role/content message envelope.
    Chat,
}

pub struct HttpBackend {
    url: String,
    wire: WireFormat,
    agent: ureq::Agent,
}

impl fmt::Debug for HttpBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HttpBackend")
            .field("url", &self.url)
            .field("wire", &self.wire)
            .finish()
    }
}

#[derive(Deserialize)]
struct CompletionResponse {
    text: String,
}

impl HttpBackend {
    pub fn new(url: impl Into<String>, timeout: Duration, wire: WireFormat) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            url: url.into(),
            wire,
            agent,
        }
    }

    fn request_body(&self, prompt: &str, params: &GenerationParams) -> Value {
        let mut body = match self.wire {
            WireFormat::Completion => json!({ "prompt": prompt }),
            WireFormat::Chat => json!({ "messages": [{ "role": "user", "content": prompt }] }),
        };
        let obj = body.as_object_mut().expect("object literal");
        obj.insert("max_new_tokens".into(), json!(params.max_new_tokens));
        obj.insert("sample".into(), json!(params.sample));
        obj.insert("top_k".into(), json!(params.top_k));
        if let Some(seed) = params.seed {
            obj.insert("seed".into(), json!(seed));
        }
        body
    }

    fn parse_body(&self, value: Value) -> Result<String, BackendError> {
        let bad = |why: &str| BackendError::BadResponse(format!("{why}: {value}"));
        match self.wire {
            WireFormat::Completion => serde_json::from_value::<CompletionResponse>(value.clone())
                .map(|r| r.text)
                .map_err(|_| bad("expected {\"text\": string}")),
            WireFormat::Chat => value
                .pointer("/message/content")
                .or_else(|| value.pointer("/choices/0/message/content"))
                .and_then(Value::as_str)
                .map(str::to_string)
                .ok_or_else(|| bad("expected {\"message\": {\"content\": string}}")),
        }
    }
}

fn map_transport_error(err: ureq::Error) -> BackendError {
    match err {
        ureq::Error::Timeout(t) => BackendError::Timeout(t.to_string()),
        ureq::Error::Io(e) if e.kind() == std::io::ErrorKind::TimedOut => BackendError::Timeout(e.to_string()),
        ureq::Error::Io(e) => BackendError::Unreachable(e.to_string()),
        ureq::Error::ConnectionFailed | ureq::Error::HostNotFound => BackendError::Unreachable(err.to_string()),
        other => BackendError::BadResponse(other.to_string()),
    }
}

impl Backend for HttpBackend {
    fn generate(&self, prompt: &str, params: &GenerationParams) -> Result<String, BackendError> {
        let mut response = self
            .agent
            .post(&self.url)
            .send_json(self.request_body(prompt, params))
            .map_err(map_transport_error)?;
        let status = response.status().as_u16();
        if status >= 500 {
            return Err(BackendError::Unreachable(format!("HTTP {status} from {}", self.url)));
        }
        if status >= 300 {
            return Err(BackendError::BadResponse(format!("HTTP {status} from {}", self.url)));
        }
        let value: Value = response
            .body_mut()
            .read_json()
            .map_err(|e| BackendError::BadResponse(e.to_string()))?;
        self.parse_body(value)
    }

    fn descriptor(&self) -> String {
        let wire = match self.wire {
            WireFormat::Completion => "completion",
            WireFormat::Chat => "chat",
        };
        format!("http:{wire}:{}", self.url)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BackendKind {
    Http {
        url: String,
        #[serde(default)]
        wire: WireFormat,
    },
    Scripted {
        fixture: Option<PathBuf>,
    },
}

/// Backend construction parameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendSpec {
    #[serde(flatten)]
    pub kind: BackendKind,
    #[serde(default = "BackendSpec::default_timeout_secs")]
    pub timeout_secs: u64,
    #[serde(default = "BackendSpec::default_in_flight")]
    pub max_in_flight: usize,
}

impl BackendSpec {
    fn default_timeout_secs() -> u64 {
        60
    }

    fn default_in_flight() -> usize {
        4
    }

    pub fn scripted(fixture: Option<PathBuf>) -> Self {
        Self {
            kind: BackendKind::Scripted { fixture },
            timeout_secs: Self::default_timeout_secs(),
            max_in_flight: Self::default_in_flight(),
        }
    }

    pub fn http(url: impl Into<String>) -> Self {
        Self {
            kind: BackendKind::Http {
                url: url.into(),
                wire: WireFormat::Completion,
            },
            timeout_secs: Self::default_timeout_secs(),
            max_in_flight: Self::default_in_flight(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.timeout_secs == 0 {
            return Err("backend timeout must be positive".into());
        }
        if self.max_in_flight == 0 {
            return Err("max_in_flight must be at least 1".into());
        }
        Ok(())
    }

    pub fn build(&self) -> Result<Box<dyn Backend>, String> {
        self.validate()?;
        Ok(match &self.kind {
            BackendKind::Http { url, wire } => Box::new(HttpBackend::new(
                url.clone(),
                Duration::from_secs(self.timeout_secs),
                *wire,
            )),
            BackendKind::Scripted { fixture: Some(path) } => Box::new(ScriptedBackend::load(path)?),
            BackendKind::Scripted { fixture: None } => Box::new(ScriptedBackend::new("Yes")),
        })
    }
}
