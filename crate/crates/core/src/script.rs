//! Deterministic backend that plays an authored `script/v1` session.
//!
//! A script lists user turns. Each turn names the user text it expects and the
//! backend's replies to successive plan calls within that turn, plus the raw
//! replies to the suggestion call and its reprompt. The backend is stateless:
//! the turn is the number of user messages in the request and the step is the
//! number of assistant messages since the last user message.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;
use thiserror::Error;

use crate::agent::{AgentBackend, AgentTurn, BackendError, ChatMessage, ChatRole, PlanRequest, SuggestRequest};

pub const SCRIPT_VERSION: &str = "script/v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Script {
    pub version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub turns: Vec<ScriptTurn>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptTurn {
    /// Exact user text this turn expects.
    pub user: String,
    /// Replies to the plan calls of this turn, in order.
    pub steps: Vec<AgentTurn>,
    /// Suggestion replies by attempt. Strings are sent verbatim; anything else as JSON text.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub suggestions: Vec<Json>,
}

#[derive(Debug, Error)]
pub enum ScriptError {
    #[error("malformed script: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported script version `{0}`")]
    Version(String),
}

impl Script {
    pub fn parse(text: &str) -> Result<Self, ScriptError> {
        let script: Script = serde_json::from_str(text)?;
        if script.version != SCRIPT_VERSION {
            return Err(ScriptError::Version(script.version));
        }
        Ok(script)
    }

    /// User texts in order, for driving a replay.
    pub fn user_inputs(&self) -> Vec<String> {
        self.turns.iter().map(|t| t.user.clone()).collect()
    }
}

#[derive(Debug, Clone)]
pub struct ScriptedBackend {
    script: Script,
}

impl ScriptedBackend {
    pub fn new(script: Script) -> Self {
        Self { script }
    }

    /// Index of the current turn, checking the user text against the script.
    fn turn(&self, messages: &[ChatMessage]) -> Result<usize, BackendError> {
        let users: Vec<&ChatMessage> = messages.iter().filter(|m| m.role == ChatRole::User).collect();
        let Some(last) = users.last() else {
            return Err(BackendError::ScriptExhausted { turn: 0 });
        };
        let index = users.len() - 1;
        let turn = self.script.turns.get(index).ok_or(BackendError::ScriptExhausted { turn: index + 1 })?;
        if turn.user.trim() != last.content.trim() {
            return Err(BackendError::ScriptMismatch {
                turn: index + 1,
                expected: turn.user.clone(),
                got: last.content.clone(),
            });
        }
        Ok(index)
    }
}

impl AgentBackend for ScriptedBackend {
    fn plan(&mut self, request: &PlanRequest) -> Result<AgentTurn, BackendError> {
        let index = self.turn(&request.messages)?;
        let since_user = request.messages.iter().rev().take_while(|m| m.role != ChatRole::User);
        let step = since_user.filter(|m| m.role == ChatRole::Assistant).count();
        self.script.turns[index]
            .steps
            .get(step)
            .cloned()
            .ok_or(BackendError::ScriptExhausted { turn: index + 1 })
    }

    fn suggest(&mut self, request: &SuggestRequest) -> Result<String, BackendError> {
        let index = self.turn(&request.messages)?;
        match self.script.turns[index].suggestions.get(request.attempt as usize) {
            Some(Json::String(s)) => Ok(s.clone()),
            Some(other) => Ok(other.to_string()),
            None => Err(BackendError::Unavailable("script has no suggestion reply for this turn".into())),
        }
    }
}
