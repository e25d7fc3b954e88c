//! Prompt assembly for the planning and suggestion calls.
//!
//! The planning prompt is ordered: context, current workbook state, process steps,
//! goal summary instruction, then guidelines.

use alloc::format;
use alloc::string::String;

use crate::agent::Phase;

pub const GOAL_OPEN: &str = "<goal>";
pub const GOAL_CLOSE: &str = "</goal>";

fn phase_line(phase: Phase) -> &'static str {
    match phase {
        Phase::GatherRequirements => "Current step: 1 (gather requirements).",
        Phase::DefineDataTables => "Current step: 2 (define data tables).",
        Phase::ExtractInsights => "Current step: 3 (extract insights).",
    }
}

pub fn system_prompt(state_json: &str, phase: Phase, goal: &str) -> String {
    let goal = if goal.is_empty() { "(none yet)" } else { goal };
    format!(
        "You help a person build a spreadsheet step by step through conversation. \
You change the workbook only by calling the provided tools, one small step at a time, \
and the person reviews every step.

Current workbook state (state/v1 JSON; each cell lists its address, displayed value and formula):
{state_json}

Work through these steps in order and do not skip ahead:
1. Gather requirements: ask about the purpose, the audience, the timescale and any other context until the goal is clear.
2. Define data tables: propose the schema of each data table, prototyping tables in Markdown when defining data and insight tables, and create a table only after the person approves the prototype.
3. Extract insights: suggest and build insight tables, sorts, filters, highlights and charts that answer the person's questions.
{phase}

Current goal summary: {goal}
In every reply, restate the person's overall goal in one sentence wrapped in {GOAL_OPEN}{GOAL_CLOSE}.

Guidelines:
- Use spreadsheet formulas for anything computed instead of typing computed numbers.
- Tables must never overlap; omit the anchor to let the workbook place a table.
- Refer only to tables and columns that exist in the state above.
- Be concise and end with a short summary of what you changed.",
        phase = phase_line(phase),
    )
}

pub fn suggestion_prompt(state_json: &str, phase: Phase, goal: &str, last_message: &str) -> String {
    let goal = if goal.is_empty() { "(none yet)" } else { goal };
    format!(
        "Propose exactly three next steps the person might ask for, written as short imperative requests in their voice.
For each, first think as the person would about what they need next, then write the request.
Reply with only a JSON array of three objects: [{{\"thought\": \"...\", \"suggestion\": \"...\"}}, ...].
Each suggestion is at most 120 characters. Put table and column names in double quotes and name only tables and columns that exist.

Workbook state:
{state_json}

{phase}
Goal: {goal}
Last message: {last_message}",
        phase = phase_line(phase),
    )
}

/// Splits a `<goal>…</goal>` tag out of a reply. Returns the remaining text and the goal.
pub fn split_goal(text: &str) -> (String, Option<String>) {
    let Some(start) = text.find(GOAL_OPEN) else {
        return (text.into(), None);
    };
    let Some(len) = text[start..].find(GOAL_CLOSE) else {
        return (text.into(), None);
    };
    let goal = text[start + GOAL_OPEN.len()..start + len].trim();
    let mut rest = String::from(text[..start].trim_end());
    let tail = text[start + len + GOAL_CLOSE.len()..].trim_start();
    if !rest.is_empty() && !tail.is_empty() {
        rest.push('\n');
    }
    rest.push_str(tail);
    (rest, Some(goal.into()).filter(|g: &String| !g.is_empty()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_in_order() {
        let p = system_prompt("{\"x\":1}", Phase::DefineDataTables, "track April expenses");
        let at = |s: &str| p.find(s).unwrap();
        assert!(at("step by step") < at("{\"x\":1}"));
        assert!(at("{\"x\":1}") < at("prototyping tables in Markdown"));
        assert!(at("prototyping tables in Markdown") < at("<goal>"));
        assert!(at("<goal>") < at("never overlap"));
        assert!(p.contains("Current step: 2"));
    }

    #[test]
    fn goal_tag() {
        let (rest, goal) = split_goal("Sure.\n<goal>Track April spending</goal>\nWhat period?");
        assert_eq!(goal.as_deref(), Some("Track April spending"));
        assert_eq!(rest, "Sure.\nWhat period?");
        assert_eq!(split_goal("no tag"), ("no tag".into(), None));
        assert_eq!(split_goal("<goal> </goal>").1, None);
    }
}
