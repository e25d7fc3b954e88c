//! The conversational session loop: plan with the backend, validate and run
//! tool calls, feed results back, repeat until the backend is done, then offer
//! three suggestions.
//!
//! Every observable step is an [`Event`] with a session-wide, gapless sequence
//! number. Cancellation is cooperative: the flag is checked before each plan
//! call and before each tool execution, and a tool that has started always
//! finishes or rolls back as a unit.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::sync::atomic::{AtomicBool, Ordering};

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;
use thiserror::Error;

use crate::codec::{serialize_state, state_document, StateDocument};
use crate::prompt::system_prompt;
use crate::suggest::{generate_suggestions, Suggestion, SuggestionInput, SuggestionSource};
use crate::tools::{execute_tool, tool_schemas, validate_tool_call, ToolCall, ToolResult, ToolStatus};
use crate::workbook::{TableKind, UndoStack, Workbook};

/// Attempts allowed per tool call, counting the first.
pub const MAX_ATTEMPTS: u32 = 3;
/// Plan calls allowed in one turn.
pub const MAX_PLAN_CALLS: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    GatherRequirements,
    DefineDataTables,
    ExtractInsights,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageRole {
    User,
    Agent,
    ToolEvent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: MessageRole,
    pub text: String,
    /// Logical clock: position in the session, not wall time.
    pub timestamp: u64,
}

#[derive(Debug, Clone)]
pub struct ConversationState {
    pub messages: Vec<Message>,
    pub phase: Phase,
    pub goal_summary: String,
    /// Empty or exactly three.
    pub pending_suggestions: Vec<Suggestion>,
    pub undo_stack: UndoStack,
    pub cancel_requested: Arc<AtomicBool>,
}

impl Default for ConversationState {
    fn default() -> Self {
        Self {
            messages: Vec::new(),
            phase: Phase::GatherRequirements,
            goal_summary: String::new(),
            pending_suggestions: Vec::new(),
            undo_stack: UndoStack::default(),
            cancel_requested: Arc::new(AtomicBool::new(false)),
        }
    }
}

/// Phase after looking at the conversation and workbook. Never moves backwards.
pub fn advance_phase(conversation: &ConversationState, wb: &Workbook) -> Phase {
    let mut phase = conversation.phase;
    if wb.tables().any(|(_, t)| t.kind == TableKind::Data) {
        return Phase::ExtractInsights.max(phase);
    }
    let replied = conversation
        .messages
        .iter()
        .skip_while(|m| m.role != MessageRole::Agent)
        .any(|m| m.role == MessageRole::User);
    if phase == Phase::GatherRequirements && !conversation.goal_summary.trim().is_empty() && replied {
        phase = Phase::DefineDataTables;
    }
    phase
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChatRole {
    System,
    User,
    Assistant,
    Tool,
}

/// One entry of the backend transcript, shaped like a chat-completions message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ChatMessage {
    pub role: ChatRole,
    pub content: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tool_calls: Vec<ToolCall>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_call_id: Option<String>,
}

impl ChatMessage {
    pub fn new(role: ChatRole, content: impl Into<String>) -> Self {
        Self { role, content: content.into(), tool_calls: Vec::new(), tool_call_id: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanRequest {
    pub system: String,
    pub messages: Vec<ChatMessage>,
    pub tools: Vec<Json>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SuggestRequest {
    pub prompt: String,
    pub messages: Vec<ChatMessage>,
    /// 0 for the first ask, 1 for the reprompt.
    pub attempt: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub previous_error: Option<String>,
}

/// What the backend decided for one plan call.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AgentTurn {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utterance: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tool_calls: Vec<ToolCall>,
    /// Ignored when tool calls are present.
    #[serde(default)]
    pub done: bool,
    /// Refreshed one-sentence summary of the user's overall goal.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("backend timed out after {0} ms")]
    Timeout(u64),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("script turn {turn} expected user text {expected:?} but got {got:?}")]
    ScriptMismatch { turn: usize, expected: String, got: String },
    #[error("script has no step for turn {turn}")]
    ScriptExhausted { turn: usize },
    #[error("no recorded response for request hash {hash}")]
    FixtureMiss { hash: String },
    #[error("backend unavailable: {0}")]
    Unavailable(String),
}

pub trait AgentBackend {
    fn plan(&mut self, request: &PlanRequest) -> Result<AgentTurn, BackendError>;
    /// Raw reply text for the suggestion call.
    fn suggest(&mut self, request: &SuggestRequest) -> Result<String, BackendError>;
}

impl<B: AgentBackend + ?Sized> AgentBackend for Box<B> {
    fn plan(&mut self, request: &PlanRequest) -> Result<AgentTurn, BackendError> {
        (**self).plan(request)
    }

    fn suggest(&mut self, request: &SuggestRequest) -> Result<String, BackendError> {
        (**self).suggest(request)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TurnStatus {
    Completed,
    Cancelled,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "data", rename_all = "snake_case")]
pub enum EventKind {
    Utterance {
        text: String,
    },
    ToolCall {
        id: String,
        name: String,
        args: Json,
        attempt: u32,
    },
    ToolResult(ToolResult),
    StateUpdate {
        revision: u64,
        state: StateDocument,
    },
    Phase {
        phase: Phase,
    },
    Error {
        kind: String,
        message: String,
    },
    Suggestions {
        items: Vec<Suggestion>,
        source: SuggestionSource,
    },
    Done {
        status: TurnStatus,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    #[serde(flatten)]
    pub kind: EventKind,
}

impl Event {
    pub fn name(&self) -> &'static str {
        match self.kind {
            EventKind::Utterance { .. } => "utterance",
            EventKind::ToolCall { .. } => "tool_call",
            EventKind::ToolResult(_) => "tool_result",
            EventKind::StateUpdate { .. } => "state_update",
            EventKind::Phase { .. } => "phase",
            EventKind::Error { .. } => "error",
            EventKind::Suggestions { .. } => "suggestions",
            EventKind::Done { .. } => "done",
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).unwrap_or_else(|e| unreachable!("events always serialize: {e}"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TurnOutcome {
    pub events: Vec<Event>,
    pub final_utterance: Option<String>,
    pub suggestions: Vec<Suggestion>,
    pub status: TurnStatus,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TurnError {
    #[error("a turn is already in flight for this session")]
    Busy,
    #[error("message text is empty")]
    EmptyMessage,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum UndoError {
    #[error("nothing to undo")]
    NothingToUndo,
    #[error("a turn is in flight")]
    Busy,
}

/// Clears the busy flag when a turn ends, however it ends.
struct BusyGuard(Arc<AtomicBool>);

impl Drop for BusyGuard {
    fn drop(&mut self) {
        self.0.store(false, Ordering::SeqCst);
    }
}

/// One conversation with one workbook and one backend.
pub struct Session {
    workbook: Workbook,
    conversation: ConversationState,
    backend: Box<dyn AgentBackend + Send>,
    history: Vec<ChatMessage>,
    busy: Arc<AtomicBool>,
    next_seq: u64,
    clock: u64,
    calls: u64,
    log: Vec<Event>,
}

impl Session {
    pub fn new(backend: Box<dyn AgentBackend + Send>) -> Self {
        Self::with_workbook(backend, Workbook::new())
    }

    pub fn with_workbook(backend: Box<dyn AgentBackend + Send>, workbook: Workbook) -> Self {
        Self {
            workbook,
            conversation: ConversationState::default(),
            backend,
            history: Vec::new(),
            busy: Arc::new(AtomicBool::new(false)),
            next_seq: 1,
            clock: 0,
            calls: 0,
            log: Vec::new(),
        }
    }

    pub fn workbook(&self) -> &Workbook {
        &self.workbook
    }

    pub fn conversation(&self) -> &ConversationState {
        &self.conversation
    }

    pub fn phase(&self) -> Phase {
        self.conversation.phase
    }

    pub fn pending_suggestions(&self) -> &[Suggestion] {
        &self.conversation.pending_suggestions
    }

    /// Every event this session has emitted, in order.
    pub fn events(&self) -> &[Event] {
        &self.log
    }

    pub fn events_after(&self, seq: u64) -> &[Event] {
        let start = self.log.partition_point(|e| e.seq <= seq);
        &self.log[start..]
    }

    /// Shared flag that [`Session::stop`] sets; usable from another thread mid-turn.
    pub fn cancel_handle(&self) -> Arc<AtomicBool> {
        self.conversation.cancel_requested.clone()
    }

    /// True while a turn runs.
    pub fn busy_handle(&self) -> Arc<AtomicBool> {
        self.busy.clone()
    }

    pub fn stop(&self) {
        self.conversation.cancel_requested.store(true, Ordering::SeqCst);
    }

    fn cancelled(&self) -> bool {
        self.conversation.cancel_requested.load(Ordering::SeqCst)
    }

    fn emit(&mut self, kind: EventKind, out: &mut Vec<Event>, sink: &mut dyn FnMut(&Event)) {
        let event = Event { seq: self.next_seq, kind };
        self.next_seq += 1;
        sink(&event);
        self.log.push(event.clone());
        out.push(event);
    }

    fn record(&mut self, role: MessageRole, text: String) {
        self.clock += 1;
        self.conversation.messages.push(Message { role, text, timestamp: self.clock });
    }

    fn state_event(&self) -> EventKind {
        EventKind::StateUpdate { revision: self.workbook.revision(), state: state_document(&self.workbook) }
    }

    fn refresh_phase(&mut self, out: &mut Vec<Event>, sink: &mut dyn FnMut(&Event)) {
        let next = advance_phase(&self.conversation, &self.workbook);
        if next != self.conversation.phase {
            self.conversation.phase = next;
            self.emit(EventKind::Phase { phase: next }, out, sink);
        }
    }

    /// Restores the workbook to just before the most recent turn that changed it.
    pub fn undo(&mut self, sink: &mut dyn FnMut(&Event)) -> Result<Event, UndoError> {
        if self.busy.load(Ordering::SeqCst) {
            return Err(UndoError::Busy);
        }
        let snapshot = self.conversation.undo_stack.pop().ok_or(UndoError::NothingToUndo)?;
        self.workbook.restore(snapshot);
        let mut out = Vec::new();
        let kind = self.state_event();
        self.emit(kind, &mut out, sink);
        self.record(MessageRole::ToolEvent, "Undid the last batch of changes.".into());
        self.history.push(ChatMessage::new(
            ChatRole::System,
            "(The user pressed undo; the workbook was restored to its state before your last changes.)",
        ));
        Ok(out.remove(0))
    }

    /// Runs one user turn to completion, cancellation, or backend failure.
    pub fn run_turn(&mut self, text: &str, sink: &mut dyn FnMut(&Event)) -> Result<TurnOutcome, TurnError> {
        let text = text.trim();
        if text.is_empty() {
            return Err(TurnError::EmptyMessage);
        }
        if self.busy.compare_exchange(false, true, Ordering::SeqCst, Ordering::SeqCst).is_err() {
            return Err(TurnError::Busy);
        }
        let _guard = BusyGuard(self.busy.clone());
        self.conversation.cancel_requested.store(false, Ordering::SeqCst);
        self.conversation.pending_suggestions.clear();

        let mut out = Vec::new();
        self.record(MessageRole::User, text.into());
        self.history.push(ChatMessage::new(ChatRole::User, text));
        self.refresh_phase(&mut out, sink);

        let mut final_utterance = None;
        let mut status = TurnStatus::Completed;
        let mut snapshotted = false;
        // attempts already spent on the call that failed validation last round
        let mut retry: Option<u32> = None;
        let mut plan_calls = 0;

        'plan: loop {
            if self.cancelled() {
                status = TurnStatus::Cancelled;
                break;
            }
            if plan_calls == MAX_PLAN_CALLS {
                let message = format!("stopped after {MAX_PLAN_CALLS} planning steps in one turn");
                self.emit(EventKind::Error { kind: "loop_limit".into(), message }, &mut out, sink);
                status = TurnStatus::Failed;
                break;
            }
            plan_calls += 1;
            let state = serialize_state(&self.workbook);
            let request = PlanRequest {
                system: system_prompt(&state, self.conversation.phase, &self.conversation.goal_summary),
                messages: self.history.clone(),
                tools: tool_schemas(),
            };
            let turn = match self.backend.plan(&request) {
                Ok(t) => t,
                Err(e) => {
                    let message = e.to_string();
                    self.emit(EventKind::Error { kind: "backend_unavailable".into(), message }, &mut out, sink);
                    status = TurnStatus::Failed;
                    break;
                }
            };
            if let Some(goal) = turn.goal.as_ref().map(|g| g.trim()).filter(|g| !g.is_empty()) {
                self.conversation.goal_summary = goal.into();
            }
            let mut calls = turn.tool_calls;
            for call in &mut calls {
                if call.id.is_empty() {
                    self.calls += 1;
                    call.id = format!("call-{}", self.calls);
                }
            }
            let utterance = turn.utterance.filter(|u| !u.trim().is_empty());
            self.history.push(ChatMessage {
                role: ChatRole::Assistant,
                content: utterance.clone().unwrap_or_default(),
                tool_calls: calls.clone(),
                tool_call_id: None,
            });
            if let Some(u) = utterance {
                self.record(MessageRole::Agent, u.clone());
                self.emit(EventKind::Utterance { text: u.clone() }, &mut out, sink);
                final_utterance = Some(u);
            }
            if calls.is_empty() {
                break;
            }

            let mut blocked = false;
            let mut next_retry = None;
            for (k, call) in calls.iter().enumerate() {
                if blocked {
                    self.tool_reply(call, "Not executed because an earlier call in this batch failed validation. Send it again if it is still needed.");
                    continue;
                }
                if self.cancelled() {
                    for rest in &calls[k..] {
                        self.tool_reply(rest, "Not executed: the user stopped the turn.");
                    }
                    status = TurnStatus::Cancelled;
                    break 'plan;
                }
                let attempt = if k == 0 { retry.map_or(1, |a| a + 1) } else { 1 };
                self.emit(
                    EventKind::ToolCall { id: call.id.clone(), name: call.name.clone(), args: call.args.clone(), attempt },
                    &mut out,
                    sink,
                );
                if let Err(e) = validate_tool_call(call, &self.workbook) {
                    let result = ToolResult {
                        call_id: call.id.clone(),
                        status: ToolStatus::ValidationError,
                        message: e.to_string(),
                        field: Some(e.field.clone()),
                        state_revision: self.workbook.revision(),
                    };
                    self.emit(EventKind::ToolResult(result), &mut out, sink);
                    blocked = true;
                    if attempt >= MAX_ATTEMPTS {
                        let message = format!("`{}` failed validation {attempt} times; last error: {e}", call.name);
                        self.emit(EventKind::Error { kind: "retries_exhausted".into(), message }, &mut out, sink);
                        self.tool_reply(call, &format!("Validation failed: {e}. Retries are exhausted; do not send this call again. Tell the user what could not be done."));
                    } else {
                        next_retry = Some(attempt);
                        self.tool_reply(call, &format!("Validation failed: {e}. Fix the argument and send the call again."));
                    }
                    continue;
                }
                if !snapshotted {
                    self.conversation.undo_stack.push(self.workbook.snapshot());
                    snapshotted = true;
                }
                let result = execute_tool(call, &mut self.workbook);
                let ok = result.status == ToolStatus::Ok;
                let message = result.message.clone();
                self.emit(EventKind::ToolResult(result), &mut out, sink);
                if ok {
                    let kind = self.state_event();
                    self.emit(kind, &mut out, sink);
                    self.record(MessageRole::ToolEvent, message.clone());
                    self.refresh_phase(&mut out, sink);
                    self.tool_reply(call, &format!("OK: {message}"));
                } else {
                    self.tool_reply(call, &format!("Execution failed: {message}"));
                }
            }
            retry = next_retry;
        }

        let mut suggestions = Vec::new();
        if status == TurnStatus::Completed {
            self.refresh_phase(&mut out, sink);
            let last = final_utterance.clone().unwrap_or_else(|| text.into());
            let input = SuggestionInput {
                history: &self.history,
                last_message: &last,
                goal: &self.conversation.goal_summary,
                phase: self.conversation.phase,
            };
            let (items, source) = generate_suggestions(self.backend.as_mut(), &input, &self.workbook);
            self.conversation.pending_suggestions = items.clone();
            suggestions = items.clone();
            self.emit(EventKind::Suggestions { items, source }, &mut out, sink);
        }
        self.emit(EventKind::Done { status }, &mut out, sink);
        self.conversation.cancel_requested.store(false, Ordering::SeqCst);
        Ok(TurnOutcome { events: out, final_utterance, suggestions, status })
    }

    fn tool_reply(&mut self, call: &ToolCall, content: &str) {
        self.history.push(ChatMessage {
            role: ChatRole::Tool,
            content: content.into(),
            tool_calls: Vec::new(),
            tool_call_id: Some(call.id.clone()),
        });
    }

    /// Text of pending suggestion `index`, for sending it as the next message.
    pub fn suggestion_text(&self, index: usize) -> Option<String> {
        self.conversation.pending_suggestions.get(index).map(|s| s.text.clone())
    }
}

impl core::fmt::Debug for Session {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Session")
            .field("phase", &self.conversation.phase)
            .field("revision", &self.workbook.revision())
            .field("events", &self.log.len())
            .finish_non_exhaustive()
    }
}
