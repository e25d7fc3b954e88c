//! Next-step suggestions: three pills per completed turn.
//!
//! Replies come from the backend as a JSON array of `{thought, suggestion}`.
//! A batch is accepted only if it has exactly three non-empty pills of at most
//! [`MAX_SUGGESTION_CHARS`] characters, and every double-quoted or backticked name
//! in a pill is a table, column or sheet in the current state.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{AgentBackend, ChatMessage, Phase, SuggestRequest};
use crate::codec::{state_document, StateDocument};
use crate::prompt::suggestion_prompt;
use crate::workbook::Workbook;

pub const SUGGESTION_COUNT: usize = 3;
pub const MAX_SUGGESTION_CHARS: usize = 120;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Suggestion {
    pub thought: String,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuggestionSource {
    Backend,
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SuggestionError {
    #[error("reply is not a JSON array of {{thought, suggestion}} objects: {0}")]
    Malformed(String),
    #[error("expected exactly 3 suggestions, got {0}")]
    Count(usize),
    #[error("suggestion {0} is empty")]
    Empty(usize),
    #[error("suggestion {0} is longer than 120 characters")]
    TooLong(usize),
    #[error("suggestion {index} names \"{name}\", which is not a table, column or sheet")]
    Ungrounded { index: usize, name: String },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WireSuggestion {
    thought: String,
    suggestion: String,
}

fn strip_fence(reply: &str) -> &str {
    let t = reply.trim();
    let Some(inner) = t.strip_prefix("```") else {
        return t;
    };
    let inner = inner.strip_prefix("json").unwrap_or(inner);
    inner.strip_suffix("```").unwrap_or(inner).trim()
}

/// Parses and checks the shape of a reply, not its groundedness.
pub fn parse_suggestion_reply(reply: &str) -> Result<Vec<Suggestion>, SuggestionError> {
    let items: Vec<WireSuggestion> =
        serde_json::from_str(strip_fence(reply)).map_err(|e| SuggestionError::Malformed(e.to_string()))?;
    if items.len() != SUGGESTION_COUNT {
        return Err(SuggestionError::Count(items.len()));
    }
    items
        .into_iter()
        .enumerate()
        .map(|(i, w)| {
            let text = w.suggestion.trim();
            if text.is_empty() {
                Err(SuggestionError::Empty(i + 1))
            } else if text.chars().count() > MAX_SUGGESTION_CHARS {
                Err(SuggestionError::TooLong(i + 1))
            } else {
                Ok(Suggestion { thought: w.thought.trim().into(), text: text.into() })
            }
        })
        .collect()
}

/// Names written in double quotes (straight or curly) or backticks.
pub fn quoted_names(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for (open, close) in [('"', '"'), ('\u{201c}', '\u{201d}'), ('`', '`')] {
        let mut rest = text;
        while let Some(i) = rest.find(open) {
            let after = &rest[i + open.len_utf8()..];
            let Some(j) = after.find(close) else { break };
            let name = after[..j].trim();
            if !name.is_empty() {
                out.push(name.into());
            }
            rest = &after[j + close.len_utf8()..];
        }
    }
    out
}

fn known_names(doc: &StateDocument) -> Vec<&str> {
    let mut names = Vec::new();
    for s in &doc.sheets {
        names.push(s.name.as_str());
        for t in &s.tables {
            names.push(t.name.as_str());
            names.extend(t.columns.iter().map(|c| c.header.as_str()));
        }
    }
    names
}

pub fn check_grounded(items: &[Suggestion], doc: &StateDocument) -> Result<(), SuggestionError> {
    let known = known_names(doc);
    for (i, s) in items.iter().enumerate() {
        for name in quoted_names(&s.text) {
            if !known.iter().any(|k| k.eq_ignore_ascii_case(&name)) {
                return Err(SuggestionError::Ungrounded { index: i + 1, name });
            }
        }
    }
    Ok(())
}

/// Everything the suggestion call sees.
#[derive(Debug, Clone)]
pub struct SuggestionInput<'a> {
    pub history: &'a [ChatMessage],
    pub last_message: &'a str,
    pub goal: &'a str,
    pub phase: Phase,
}

/// Asks the backend, reprompts once on a bad reply, then falls back to templates.
pub fn generate_suggestions(
    backend: &mut dyn AgentBackend,
    input: &SuggestionInput<'_>,
    wb: &Workbook,
) -> (Vec<Suggestion>, SuggestionSource) {
    let doc = state_document(wb);
    let state = serde_json::to_string(&doc).unwrap_or_default();
    let prompt = suggestion_prompt(&state, input.phase, input.goal, input.last_message);
    let mut previous_error: Option<String> = None;
    for attempt in 0..2 {
        let request = SuggestRequest {
            prompt: prompt.clone(),
            messages: input.history.to_vec(),
            attempt,
            previous_error: previous_error.clone(),
        };
        let reply = match backend.suggest(&request) {
            Ok(r) => r,
            Err(e) => {
                log::warn!("suggestion call failed: {e}");
                break;
            }
        };
        match parse_suggestion_reply(&reply).and_then(|items| check_grounded(&items, &doc).map(|_| items)) {
            Ok(items) => return (items, SuggestionSource::Backend),
            Err(e) => {
                log::warn!("rejected suggestion reply: {e}");
                previous_error = Some(e.to_string());
            }
        }
    }
    (fallback_suggestions(input.phase, wb), SuggestionSource::Fallback)
}

fn pill(thought: String, text: String) -> Suggestion {
    Suggestion { thought, text }
}

/// Deterministic phase templates. Every name they mention is quoted and exists.
pub fn fallback_suggestions(phase: Phase, wb: &Workbook) -> Vec<Suggestion> {
    let tables: Vec<&crate::workbook::Table> = wb.tables().map(|(_, t)| t).collect();
    let data = tables.iter().find(|t| t.kind == crate::workbook::TableKind::Data).or(tables.first());
    let out = match (phase, data) {
        (Phase::GatherRequirements, _) => alloc::vec![
            pill(
                "The agent should know who will read this before it designs anything.".into(),
                "The audience for this spreadsheet is my team; keep it simple to read.".into(),
            ),
            pill(
                "Choosing a timescale decides how much data the tables need.".into(),
                "The timescale is one month; track it week by week.".into(),
            ),
            pill(
                "Some context about where the numbers come from would help.".into(),
                "Here is some context: the data comes from my monthly statements.".into(),
            ),
        ],
        (Phase::DefineDataTables, None) | (Phase::ExtractInsights, None) => alloc::vec![
            pill("I need a structure before any data goes in.".into(), "Propose a schema for the data table.".into()),
            pill(
                "Seeing a draft first is easier than fixing a real table.".into(),
                "Show me a Markdown prototype of the table before creating it.".into(),
            ),
            pill(
                "A few sample rows would show whether the columns work.".into(),
                "Add a few example rows so I can check the columns.".into(),
            ),
        ],
        (Phase::DefineDataTables, Some(t)) => alloc::vec![
            pill(
                format!("I want to check that \"{}\" captures everything.", t.name),
                clip(format!("Review the columns of \"{}\" and propose any that are missing.", t.name)),
            ),
            pill(
                "More rows would make the table realistic.".into(),
                clip(format!("Add more example rows to \"{}\".", t.name)),
            ),
            pill(
                "A second table might be needed for related data.".into(),
                "Propose a schema for another data table that this goal needs.".into(),
            ),
        ],
        (Phase::ExtractInsights, Some(t)) => {
            let numeric = t.columns.iter().find(|c| c.value_type.is_numeric());
            let group = t.columns.iter().find(|c| c.value_type == crate::workbook::ValueType::Text);
            match numeric {
                Some(n) => {
                    let by = match group {
                        Some(g) => format!(" by \"{}\"", g.header),
                        None => String::new(),
                    };
                    alloc::vec![
                        pill(
                            format!("Totals would show where the \"{}\" goes.", n.header),
                            clip(format!("Summarize the total \"{}\"{by} from \"{}\" in a new table.", n.header, t.name)),
                        ),
                        pill(
                            "Ordering the rows makes the largest values stand out.".into(),
                            clip(format!("Sort \"{}\" by \"{}\" from largest to smallest.", t.name, n.header)),
                        ),
                        pill(
                            "A chart would make the comparison visual.".into(),
                            clip(format!("Create a pie chart of \"{}\" from \"{}\".", n.header, t.name)),
                        ),
                    ]
                }
                None => alloc::vec![
                    pill(
                        "Counting rows is a first summary.".into(),
                        clip(format!("Count the rows of \"{}\" in a summary table.", t.name)),
                    ),
                    pill("Some rows matter more than others.".into(), clip(format!("Highlight the important rows of \"{}\" in yellow.", t.name))),
                    pill(
                        "Without numbers there is nothing to chart yet.".into(),
                        clip(format!("Add a numeric column to \"{}\" so it can be summarized.", t.name)),
                    ),
                ],
            }
        }
    };
    debug_assert_eq!(out.len(), SUGGESTION_COUNT);
    out
}

/// Long names can push a template past the cap; fall back to a shorter wording.
fn clip(text: String) -> String {
    if text.chars().count() <= MAX_SUGGESTION_CHARS {
        text
    } else {
        let names = quoted_names(&text);
        match names.first() {
            Some(n) if n.chars().count() <= MAX_SUGGESTION_CHARS - 30 => format!("Summarize the data in \"{n}\"."),
            _ => "Summarize the data in the first table.".into(),
        }
    }
}
