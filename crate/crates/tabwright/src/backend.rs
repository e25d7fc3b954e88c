//! Agent backends that need the standard library: a live chat-completions
//! client, fixture recording and fixture replay, plus configuration from the
//! environment.
//!
//! Fixtures (`fixture/v1`) are a JSON array of `{requestHash, request, response}`
//! entries in call order. The request is `{"plan": …}` or `{"suggest": …}` and the
//! hash is the SHA-256 of its canonical JSON (object keys sorted, no whitespace).

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value as Json};
use sha2::{Digest, Sha256};
use tabwright_core::agent::{AgentBackend, AgentTurn, BackendError, ChatMessage, ChatRole, PlanRequest, SuggestRequest};
use tabwright_core::prompt::split_goal;
use tabwright_core::script::{Script, ScriptedBackend};
use tabwright_core::tools::ToolCall;

pub const FIXTURE_VERSION: &str = "fixture/v1";
pub const DEFAULT_TIMEOUT_MS: u64 = 60_000;
const REDACTED: &str = "[REDACTED]";

/// A string that never shows up in `Debug` or `Display` output.
#[derive(Clone, PartialEq, Eq)]
pub struct Secret(String);

impl Secret {
    pub fn new(value: impl Into<String>) -> Self {
        Self(value.into())
    }

    pub fn expose(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Secret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(REDACTED)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendMode {
    Live,
    Scripted,
    Replay,
}

impl std::str::FromStr for BackendMode {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "live" => Ok(Self::Live),
            "scripted" => Ok(Self::Scripted),
            "replay" => Ok(Self::Replay),
            other => Err(ConfigError::Mode(other.into())),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("unknown backend mode `{0}` (expected live, scripted or replay)")]
    Mode(String),
    #[error("{mode:?} backend requires {var}")]
    Missing { mode: BackendMode, var: &'static str },
    #[error("AGENT_TIMEOUT_MS must be a positive integer, got `{0}`")]
    Timeout(String),
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid script {path}: {message}")]
    Script { path: PathBuf, message: String },
    #[error("invalid fixture {path}: {message}")]
    Fixture { path: PathBuf, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BackendConfig {
    pub mode: BackendMode,
    pub api_base: Option<String>,
    pub api_key: Option<Secret>,
    pub model: Option<String>,
    pub timeout_ms: u64,
    pub script_path: Option<PathBuf>,
    pub fixture_path: Option<PathBuf>,
}

impl BackendConfig {
    pub fn scripted(path: impl Into<PathBuf>) -> Self {
        Self { script_path: Some(path.into()), ..Self::empty(BackendMode::Scripted) }
    }

    pub fn replay(path: impl Into<PathBuf>) -> Self {
        Self { fixture_path: Some(path.into()), ..Self::empty(BackendMode::Replay) }
    }

    pub fn live(api_base: impl Into<String>, api_key: Secret, model: impl Into<String>) -> Self {
        Self {
            api_base: Some(api_base.into()),
            api_key: Some(api_key),
            model: Some(model.into()),
            ..Self::empty(BackendMode::Live)
        }
    }

    fn empty(mode: BackendMode) -> Self {
        Self {
            mode,
            api_base: None,
            api_key: None,
            model: None,
            timeout_ms: DEFAULT_TIMEOUT_MS,
            script_path: None,
            fixture_path: None,
        }
    }

    pub fn from_env() -> Result<Self, ConfigError> {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    /// Reads the `AGENT_*` variables through `lookup`. The mode defaults to scripted.
    pub fn from_lookup(lookup: impl Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        let get = |k: &str| lookup(k).map(|v| v.trim().to_string()).filter(|v| !v.is_empty());
        let mode = get("AGENT_BACKEND").map(|m| m.parse()).transpose()?.unwrap_or(BackendMode::Scripted);
        let timeout_ms = match get("AGENT_TIMEOUT_MS") {
            Some(t) => t.parse().ok().filter(|&t: &u64| t > 0).ok_or(ConfigError::Timeout(t))?,
            None => DEFAULT_TIMEOUT_MS,
        };
        let config = Self {
            mode,
            api_base: get("AGENT_API_BASE"),
            api_key: get("AGENT_API_KEY").map(Secret),
            model: get("AGENT_MODEL"),
            timeout_ms,
            script_path: get("AGENT_SCRIPT").map(PathBuf::from),
            fixture_path: get("AGENT_FIXTURE").map(PathBuf::from),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let missing = |var| Err(ConfigError::Missing { mode: self.mode, var });
        match self.mode {
            BackendMode::Live if self.api_base.is_none() => missing("AGENT_API_BASE"),
            BackendMode::Live if self.api_key.is_none() => missing("AGENT_API_KEY"),
            BackendMode::Live if self.model.is_none() => missing("AGENT_MODEL"),
            BackendMode::Scripted if self.script_path.is_none() => missing("AGENT_SCRIPT"),
            BackendMode::Replay if self.fixture_path.is_none() => missing("AGENT_FIXTURE"),
            _ => Ok(()),
        }
    }

    /// A fresh backend for one session.
    pub fn build(&self) -> Result<Box<dyn AgentBackend + Send>, ConfigError> {
        self.validate()?;
        Ok(match self.mode {
            BackendMode::Live => Box::new(LiveBackend::new(
                self.api_base.clone().unwrap_or_default(),
                self.api_key.clone().unwrap_or(Secret(String::new())),
                self.model.clone().unwrap_or_default(),
                self.timeout_ms,
            )),
            BackendMode::Scripted => {
                let path = self.script_path.as_deref().unwrap_or(Path::new(""));
                Box::new(ScriptedBackend::new(load_script(path)?))
            }
            BackendMode::Replay => {
                let path = self.fixture_path.as_deref().unwrap_or(Path::new(""));
                Box::new(ReplayBackend::new(load_fixture(path)?))
            }
        })
    }
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })
}

pub fn load_script(path: &Path) -> Result<Script, ConfigError> {
    Script::parse(&read(path)?).map_err(|e| ConfigError::Script { path: path.into(), message: e.to_string() })
}

pub fn load_fixture(path: &Path) -> Result<Vec<FixtureEntry>, ConfigError> {
    parse_fixture(&read(path)?).map_err(|e| ConfigError::Fixture { path: path.into(), message: e.to_string() })
}

/// What was asked of the backend, as stored in a fixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixtureRequest {
    Plan(PlanRequest),
    Suggest(SuggestRequest),
}

impl FixtureRequest {
    pub fn to_json(&self) -> Json {
        serde_json::to_value(self).unwrap_or_else(|e| unreachable!("requests always serialize: {e}"))
    }

    pub fn hash(&self) -> String {
        request_hash(&self.to_json())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct FixtureEntry {
    pub request_hash: String,
    pub request: Json,
    /// An [`AgentTurn`] for plan requests, the raw reply string for suggestion requests.
    pub response: Json,
}

/// JSON text with object keys sorted at every level and no whitespace.
pub fn canonical_json(value: &Json) -> String {
    fn write(value: &Json, out: &mut String) {
        match value {
            Json::Object(map) => {
                let mut keys: Vec<&String> = map.keys().collect();
                keys.sort();
                out.push('{');
                for (i, key) in keys.into_iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    out.push_str(&Json::String(key.clone()).to_string());
                    out.push(':');
                    write(&map[key], out);
                }
                out.push('}');
            }
            Json::Array(items) => {
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    write(item, out);
                }
                out.push(']');
            }
            scalar => out.push_str(&scalar.to_string()),
        }
    }
    let mut out = String::new();
    write(value, &mut out);
    out
}

pub fn request_hash(request: &Json) -> String {
    hex::encode(Sha256::digest(canonical_json(request).as_bytes()))
}

pub fn parse_fixture(text: &str) -> Result<Vec<FixtureEntry>, serde_json::Error> {
    serde_json::from_str(text)
}

/// Pretty-printed fixture text with every occurrence of `secret` replaced.
pub fn render_fixture(entries: &[FixtureEntry], secret: Option<&Secret>) -> String {
    let text = serde_json::to_string_pretty(entries).unwrap_or_else(|e| unreachable!("fixtures serialize: {e}"));
    scrub(&text, secret)
}

pub fn scrub(text: &str, secret: Option<&Secret>) -> String {
    match secret {
        Some(s) if !s.0.is_empty() => text.replace(&s.0, REDACTED),
        _ => text.to_string(),
    }
}

/// Wraps a backend and appends every successful exchange to a shared fixture.
pub struct RecordingBackend<B> {
    inner: B,
    entries: Arc<Mutex<Vec<FixtureEntry>>>,
}

impl<B: AgentBackend> RecordingBackend<B> {
    pub fn new(inner: B) -> Self {
        Self { inner, entries: Arc::default() }
    }

    /// Handle to the recorded entries; stays valid after the backend moves into a session.
    pub fn entries(&self) -> Arc<Mutex<Vec<FixtureEntry>>> {
        self.entries.clone()
    }

    fn push(&self, request: FixtureRequest, response: Json) {
        let request = request.to_json();
        let entry = FixtureEntry { request_hash: request_hash(&request), request, response };
        self.entries.lock().unwrap_or_else(|p| p.into_inner()).push(entry);
    }
}

impl<B: AgentBackend> AgentBackend for RecordingBackend<B> {
    fn plan(&mut self, request: &PlanRequest) -> Result<AgentTurn, BackendError> {
        let turn = self.inner.plan(request)?;
        let response = serde_json::to_value(&turn).map_err(|e| BackendError::Transport(e.to_string()))?;
        self.push(FixtureRequest::Plan(request.clone()), response);
        Ok(turn)
    }

    fn suggest(&mut self, request: &SuggestRequest) -> Result<String, BackendError> {
        let reply = self.inner.suggest(request)?;
        self.push(FixtureRequest::Suggest(request.clone()), Json::String(reply.clone()));
        Ok(reply)
    }
}

/// Answers requests from a fixture by content hash; identical requests are served in recorded order.
#[derive(Debug, Clone)]
pub struct ReplayBackend {
    responses: HashMap<String, VecDeque<Json>>,
}

impl ReplayBackend {
    pub fn new(entries: Vec<FixtureEntry>) -> Self {
        let mut responses: HashMap<String, VecDeque<Json>> = HashMap::new();
        for entry in entries {
            responses.entry(entry.request_hash).or_default().push_back(entry.response);
        }
        Self { responses }
    }

    fn take(&mut self, request: FixtureRequest) -> Result<Json, BackendError> {
        let hash = request.hash();
        match self.responses.get_mut(&hash).and_then(VecDeque::pop_front) {
            Some(response) => Ok(response),
            None => Err(BackendError::FixtureMiss { hash }),
        }
    }
}

impl AgentBackend for ReplayBackend {
    fn plan(&mut self, request: &PlanRequest) -> Result<AgentTurn, BackendError> {
        let response = self.take(FixtureRequest::Plan(request.clone()))?;
        serde_json::from_value(response).map_err(|e| BackendError::Transport(format!("bad fixture response: {e}")))
    }

    fn suggest(&mut self, request: &SuggestRequest) -> Result<String, BackendError> {
        match self.take(FixtureRequest::Suggest(request.clone()))? {
            Json::String(s) => Ok(s),
            other => Ok(other.to_string()),
        }
    }
}

/// The user messages of a fixture's final plan request, in order.
pub fn fixture_user_inputs(entries: &[FixtureEntry]) -> Vec<String> {
    let last = entries.iter().rev().find_map(|e| match serde_json::from_value(e.request.clone()) {
        Ok(FixtureRequest::Plan(p)) => Some(p),
        _ => None,
    });
    last.map(|p| p.messages.into_iter().filter(|m| m.role == ChatRole::User).map(|m| m.content).collect())
        .unwrap_or_default()
}

/// Client for an OpenAI-style `POST {base}/chat/completions` endpoint with function tools.
pub struct LiveBackend {
    api_base: String,
    api_key: Secret,
    model: String,
    timeout_ms: u64,
    /// Built on first use so construction never touches an async runtime.
    client: Option<reqwest::blocking::Client>,
}

impl fmt::Debug for LiveBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LiveBackend")
            .field("api_base", &self.api_base)
            .field("api_key", &self.api_key)
            .field("model", &self.model)
            .field("timeout_ms", &self.timeout_ms)
            .finish()
    }
}

impl LiveBackend {
    pub fn new(api_base: impl Into<String>, api_key: Secret, model: impl Into<String>, timeout_ms: u64) -> Self {
        Self { api_base: api_base.into(), api_key, model: model.into(), timeout_ms, client: None }
    }

    fn post(&mut self, body: &Json) -> Result<Json, BackendError> {
        let timeout = Duration::from_millis(self.timeout_ms);
        if self.client.is_none() {
            let client = reqwest::blocking::Client::builder()
                .timeout(timeout)
                .connect_timeout(timeout)
                .build()
                .map_err(|e| BackendError::Transport(e.without_url().to_string()))?;
            self.client = Some(client);
        }
        let client = self.client.as_ref().unwrap_or_else(|| unreachable!("client built above"));
        let url = format!("{}/chat/completions", self.api_base.trim_end_matches('/'));
        log::debug!("POST {url} model={}", self.model);
        let map_err = |e: reqwest::Error| {
            if e.is_timeout() {
                BackendError::Timeout(self.timeout_ms)
            } else {
                BackendError::Transport(scrub(&e.to_string(), Some(&self.api_key)))
            }
        };
        let response = client.post(&url).bearer_auth(self.api_key.expose()).json(body).send().map_err(map_err)?;
        let status = response.status();
        let text = response.text().map_err(map_err)?;
        if !status.is_success() {
            let excerpt: String = text.chars().take(200).collect();
            return Err(BackendError::Transport(scrub(&format!("HTTP {status}: {excerpt}"), Some(&self.api_key))));
        }
        serde_json::from_str(&text).map_err(|e| BackendError::Transport(format!("malformed response: {e}")))
    }
}

fn wire_message(message: &ChatMessage) -> Json {
    match message.role {
        ChatRole::Assistant if !message.tool_calls.is_empty() => {
            let calls: Vec<Json> = message
                .tool_calls
                .iter()
                .map(|c| json!({"id": c.id, "type": "function", "function": {"name": c.name, "arguments": c.args.to_string()}}))
                .collect();
            let content = if message.content.is_empty() { Json::Null } else { Json::String(message.content.clone()) };
            json!({"role": "assistant", "content": content, "tool_calls": calls})
        }
        ChatRole::Tool => json!({
            "role": "tool",
            "tool_call_id": message.tool_call_id.clone().unwrap_or_default(),
            "content": message.content,
        }),
        role => json!({"role": role, "content": message.content}),
    }
}

/// Builds the chat-completions body for a plan request.
pub fn plan_body(model: &str, request: &PlanRequest) -> Json {
    let mut messages = vec![json!({"role": "system", "content": request.system})];
    messages.extend(request.messages.iter().map(wire_message));
    let tools: Vec<Json> = request.tools.iter().map(|t| json!({"type": "function", "function": t})).collect();
    json!({"model": model, "messages": messages, "tools": tools})
}

/// Maps a chat-completions reply to an [`AgentTurn`].
pub fn parse_plan_reply(reply: &Json) -> Result<AgentTurn, BackendError> {
    let message = reply
        .pointer("/choices/0/message")
        .ok_or_else(|| BackendError::Transport("response has no choices[0].message".into()))?;
    let content = message.get("content").and_then(Json::as_str).unwrap_or("");
    let (text, goal) = split_goal(content);
    let tool_calls: Vec<ToolCall> = message
        .get("tool_calls")
        .and_then(Json::as_array)
        .map(|calls| calls.iter().map(wire_tool_call).collect())
        .unwrap_or_default();
    Ok(AgentTurn {
        utterance: Some(text).filter(|t| !t.trim().is_empty()),
        done: tool_calls.is_empty(),
        tool_calls,
        goal,
    })
}

fn wire_tool_call(call: &Json) -> ToolCall {
    let function = call.get("function").cloned().unwrap_or(Json::Null);
    let raw = function.get("arguments").cloned().unwrap_or(Json::Null);
    // Unparseable arguments stay a string so validation reports them and the retry loop can fix them.
    let args = match &raw {
        Json::String(s) => serde_json::from_str(s).unwrap_or(raw.clone()),
        _ => raw,
    };
    ToolCall {
        id: call.get("id").and_then(Json::as_str).unwrap_or("").into(),
        name: function.get("name").and_then(Json::as_str).unwrap_or("").into(),
        args,
    }
}

impl AgentBackend for LiveBackend {
    fn plan(&mut self, request: &PlanRequest) -> Result<AgentTurn, BackendError> {
        let body = plan_body(&self.model, request);
        parse_plan_reply(&self.post(&body)?)
    }

    fn suggest(&mut self, request: &SuggestRequest) -> Result<String, BackendError> {
        let mut messages = vec![json!({"role": "system", "content": request.prompt})];
        let last_user = request.messages.iter().rev().find(|m| m.role == ChatRole::User);
        messages.push(json!({"role": "user", "content": last_user.map_or("What next?", |m| m.content.as_str())}));
        if let Some(error) = &request.previous_error {
            messages.push(json!({
                "role": "user",
                "content": format!("Your previous reply was rejected: {error}. Reply again with only the JSON array."),
            }));
        }
        let reply = self.post(&json!({"model": self.model, "messages": messages}))?;
        reply
            .pointer("/choices/0/message/content")
            .and_then(Json::as_str)
            .map(String::from)
            .ok_or_else(|| BackendError::Transport("response has no message content".into()))
    }
}
