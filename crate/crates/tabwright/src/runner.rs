//! Headless end-to-end runs: feed user inputs to a session and collect the event log.

use tabwright_core::agent::{AgentBackend, Event, Session, TurnStatus};
use tabwright_core::codec::serialize_state;

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub events: Vec<Event>,
    /// One entry per input; `None` when the input was rejected before a turn started.
    pub statuses: Vec<Option<TurnStatus>>,
    pub final_state: String,
}

impl RunResult {
    pub fn all_completed(&self) -> bool {
        self.statuses.iter().all(|s| *s == Some(TurnStatus::Completed))
    }

    /// One JSON event per line.
    pub fn event_log(&self) -> String {
        event_log(&self.events)
    }
}

pub fn event_log(events: &[Event]) -> String {
    let mut out = String::new();
    for event in events {
        out.push_str(&event.to_json());
        out.push('\n');
    }
    out
}

pub fn run_inputs(backend: Box<dyn AgentBackend + Send>, inputs: &[String]) -> RunResult {
    let mut session = Session::new(backend);
    let mut statuses = Vec::with_capacity(inputs.len());
    for input in inputs {
        let outcome = session.run_turn(input, &mut |_| {});
        statuses.push(outcome.ok().map(|o| o.status));
    }
    RunResult { events: session.events().to_vec(), statuses, final_state: serialize_state(session.workbook()) }
}
