//! Command-line entry points. Exit codes: 0 success, 1 user error, 2 internal error.

use std::ffi::OsString;
use std::io::{BufRead, Write};
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::error::ErrorKind as ClapErrorKind;
use clap::{Parser, Subcommand};
use serde_json::Value as Json;
use tabwright_core::agent::{AgentBackend, Event, EventKind, Session};
use tabwright_core::codec::{parse_state, serialize_state};
use tabwright_core::formula::{evaluate, parse_formula};
use tabwright_core::script::{Script, ScriptedBackend, SCRIPT_VERSION};
use tabwright_core::tools::ToolStatus;
use tabwright_core::Workbook;

use crate::backend::{
    fixture_user_inputs, parse_fixture, render_fixture, BackendConfig, BackendMode, RecordingBackend, ReplayBackend,
};
use crate::export::{export_workbook, ExportFormat};
use crate::runner::run_inputs;
use crate::service::{serve, DEFAULT_PORT};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USER: i32 = 1;
pub const EXIT_INTERNAL: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "tabwright", version, about = "Conversational spreadsheet agent: service, REPL and tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the HTTP session service.
    Serve {
        #[arg(long, default_value_t = DEFAULT_PORT)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
    },
    /// Chat with the agent in the terminal. Flags override the AGENT_* environment.
    Repl {
        #[arg(long, value_parser = ["live", "scripted", "replay"])]
        backend: Option<String>,
        #[arg(long)]
        script: Option<PathBuf>,
        #[arg(long)]
        fixture: Option<PathBuf>,
    },
    /// Evaluate one formula against a state/v1 workbook and print the value.
    Eval {
        #[arg(long)]
        workbook: Option<PathBuf>,
        #[arg(long)]
        formula: String,
        /// Sheet the formula is evaluated on; defaults to the first.
        #[arg(long)]
        sheet: Option<String>,
    },
    /// Run a script/v1 or fixture/v1 session end to end and write the event log as JSON lines.
    Replay {
        #[arg(long)]
        fixture: PathBuf,
        #[arg(long)]
        transcript: PathBuf,
        /// Also record every backend exchange to this fixture/v1 file.
        #[arg(long)]
        record: Option<PathBuf>,
        /// Write the final state/v1 document here.
        #[arg(long)]
        state: Option<PathBuf>,
    },
    /// Export a state/v1 workbook as CSV, Markdown or JSON.
    Export {
        #[arg(long)]
        workbook: PathBuf,
        #[arg(long, default_value = "csv")]
        fmt: String,
        #[arg(long)]
        table: Option<String>,
    },
}

#[derive(Debug)]
enum Failure {
    User(anyhow::Error),
    Internal(anyhow::Error),
}

type CliResult = Result<(), Failure>;

fn user(e: impl Into<anyhow::Error>) -> Failure {
    Failure::User(e.into())
}

fn internal(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Internal(e.into())
}

/// Runs the CLI with explicit streams and returns the exit code.
pub fn run<I, T>(args: I, input: &mut dyn BufRead, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ClapErrorKind::DisplayHelp | ClapErrorKind::DisplayVersion) => {
            let _ = write!(out, "{}", e.render());
            return EXIT_OK;
        }
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return EXIT_USER;
        }
    };
    let result = match cli.command {
        Command::Serve { port, host } => run_serve(SocketAddr::new(host, port)),
        Command::Repl { backend, script, fixture } => run_repl(backend, script, fixture, input, out),
        Command::Eval { workbook, formula, sheet } => run_eval(workbook.as_deref(), &formula, sheet, out),
        Command::Replay { fixture, transcript, record, state } => {
            run_replay(&fixture, &transcript, record.as_deref(), state.as_deref(), out)
        }
        Command::Export { workbook, fmt, table } => run_export(&workbook, &fmt, table.as_deref(), out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::User(e)) => {
            let _ = writeln!(err, "error: {e:#}");
            EXIT_USER
        }
        Err(Failure::Internal(e)) => {
            let _ = writeln!(err, "internal error: {e:#}");
            EXIT_INTERNAL
        }
    }
}

fn read_file(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display())).map_err(user)
}

fn write_file(path: &Path, text: &str) -> CliResult {
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display())).map_err(user)
}

fn load_workbook(path: &Path) -> Result<Workbook, Failure> {
    let text = read_file(path)?;
    parse_state(&text).with_context(|| format!("invalid workbook {}", path.display())).map_err(user)
}

fn run_serve(addr: SocketAddr) -> CliResult {
    let config = BackendConfig::from_env().map_err(user)?;
    let runtime = tokio::runtime::Runtime::new().map_err(internal)?;
    runtime.block_on(serve(addr, config)).with_context(|| format!("cannot serve on {addr}")).map_err(user)
}

fn run_eval(workbook: Option<&Path>, formula: &str, sheet: Option<String>, out: &mut dyn Write) -> CliResult {
    let wb = match workbook {
        Some(path) => load_workbook(path)?,
        None => Workbook::new(),
    };
    let ast = parse_formula(formula).map_err(|e| user(anyhow!("invalid formula: {e}")))?;
    let sheet = sheet.unwrap_or_else(|| wb.first_sheet().name.clone());
    if wb.sheet(&sheet).is_none() {
        return Err(user(anyhow!("no sheet named `{sheet}`")));
    }
    writeln!(out, "{}", evaluate(&ast, &wb, &sheet)).map_err(internal)
}

fn run_export(workbook: &Path, fmt: &str, table: Option<&str>, out: &mut dyn Write) -> CliResult {
    let wb = load_workbook(workbook)?;
    let format: ExportFormat = fmt.parse().map_err(user)?;
    let text = export_workbook(&wb, format, table).map_err(user)?;
    out.write_all(text.as_bytes()).map_err(internal)?;
    if !text.ends_with('\n') {
        writeln!(out).map_err(internal)?;
    }
    Ok(())
}

/// A backend and the user inputs that drive it, loaded from a script/v1 or fixture/v1 file.
fn load_session_source(path: &Path) -> Result<(Box<dyn AgentBackend + Send>, Vec<String>), Failure> {
    let text = read_file(path)?;
    let json: Json = serde_json::from_str(&text).with_context(|| format!("{} is not JSON", path.display())).map_err(user)?;
    if json.is_array() {
        let entries = parse_fixture(&text).with_context(|| format!("invalid fixture {}", path.display())).map_err(user)?;
        let inputs = fixture_user_inputs(&entries);
        return Ok((Box::new(ReplayBackend::new(entries)), inputs));
    }
    if json.get("version").and_then(Json::as_str) == Some(SCRIPT_VERSION) {
        let script = Script::parse(&text).with_context(|| format!("invalid script {}", path.display())).map_err(user)?;
        let inputs = script.user_inputs();
        return Ok((Box::new(ScriptedBackend::new(script)), inputs));
    }
    Err(user(anyhow!("{} is neither a script/v1 nor a fixture/v1 document", path.display())))
}

fn run_replay(
    fixture: &Path,
    transcript: &Path,
    record: Option<&Path>,
    state: Option<&Path>,
    out: &mut dyn Write,
) -> CliResult {
    let (backend, inputs) = load_session_source(fixture)?;
    if inputs.is_empty() {
        return Err(user(anyhow!("{} contains no user turns", fixture.display())));
    }
    let (result, recorded) = match record {
        Some(_) => {
            let recorder = RecordingBackend::new(backend);
            let entries = recorder.entries();
            let result = run_inputs(Box::new(recorder), &inputs);
            let recorded = entries.lock().unwrap_or_else(|p| p.into_inner()).clone();
            (result, Some(recorded))
        }
        None => (run_inputs(backend, &inputs), None),
    };
    write_file(transcript, &result.event_log())?;
    if let Some(path) = state {
        write_file(path, &result.final_state)?;
    }
    if let (Some(path), Some(entries)) = (record, recorded) {
        write_file(path, &render_fixture(&entries, None))?;
    }
    let completed = result.statuses.iter().filter(|s| **s == Some(tabwright_core::agent::TurnStatus::Completed)).count();
    writeln!(out, "{completed}/{} turns completed, {} events", inputs.len(), result.events.len()).map_err(internal)?;
    if result.all_completed() {
        Ok(())
    } else {
        Err(user(anyhow!("replay did not complete every turn; see {}", transcript.display())))
    }
}

fn repl_config(backend: Option<String>, script: Option<PathBuf>, fixture: Option<PathBuf>) -> Result<BackendConfig, Failure> {
    let flags_only = backend.is_some() || script.is_some() || fixture.is_some();
    let env = |k: &str| {
        let flag = match k {
            "AGENT_BACKEND" => backend.clone(),
            "AGENT_SCRIPT" => script.as_ref().map(|p| p.display().to_string()),
            "AGENT_FIXTURE" => fixture.as_ref().map(|p| p.display().to_string()),
            _ => None,
        };
        flag.or_else(|| std::env::var(k).ok())
    };
    let mut config = BackendConfig::from_lookup(env).map_err(user)?;
    if flags_only && backend.is_none() {
        config.mode = if fixture.is_some() { BackendMode::Replay } else { BackendMode::Scripted };
        config.validate().map_err(user)?;
    }
    Ok(config)
}

fn print_event(event: &Event, out: &mut dyn Write) -> std::io::Result<()> {
    match &event.kind {
        EventKind::Utterance { text } => writeln!(out, "agent> {text}"),
        EventKind::ToolCall { name, args, attempt, .. } => {
            let retry = if *attempt > 1 { format!(" (attempt {attempt})") } else { String::new() };
            writeln!(out, "  [tool] {name} {args}{retry}")
        }
        EventKind::ToolResult(r) if r.status != ToolStatus::Ok => writeln!(out, "  [failed] {}", r.message),
        EventKind::ToolResult(r) => writeln!(out, "  [ok] {}", r.message),
        EventKind::Phase { phase } => writeln!(out, "  [phase] {}", serde_json::to_string(phase).unwrap_or_default()),
        EventKind::Error { kind, message } => writeln!(out, "  [error] {kind}: {message}"),
        EventKind::Suggestions { items, .. } => {
            for (i, s) in items.iter().enumerate() {
                writeln!(out, "  {}) {}", i + 1, s.text)?;
            }
            Ok(())
        }
        EventKind::StateUpdate { .. } | EventKind::Done { .. } => Ok(()),
    }
}

const REPL_HELP: &str = "Type a message, a pill number to accept a suggestion, /undo, /export csv|md|json, or /quit.";

fn run_repl(
    backend: Option<String>,
    script: Option<PathBuf>,
    fixture: Option<PathBuf>,
    input: &mut dyn BufRead,
    out: &mut dyn Write,
) -> CliResult {
    let config = repl_config(backend, script, fixture)?;
    let mut session = Session::new(config.build().map_err(user)?);
    writeln!(out, "{REPL_HELP}").map_err(internal)?;
    let mut line = String::new();
    loop {
        write!(out, "you> ").map_err(internal)?;
        out.flush().map_err(internal)?;
        line.clear();
        if input.read_line(&mut line).map_err(internal)? == 0 {
            break;
        }
        let text = line.trim();
        let mut io_result = Ok(());
        let mut sink = |e: &Event| {
            if io_result.is_ok() {
                io_result = print_event(e, out);
            }
        };
        match text {
            "" => continue,
            "/quit" | "/exit" => break,
            "/undo" => {
                if let Err(e) = session.undo(&mut sink) {
                    io_result = writeln!(out, "  [undo] {e}");
                } else {
                    io_result = io_result.and_then(|_| writeln!(out, "  [undo] restored"));
                }
            }
            _ if text.starts_with("/export") => {
                let fmt = text["/export".len()..].trim();
                let fmt = if fmt.is_empty() { "md" } else { fmt };
                let rendered = fmt
                    .parse::<ExportFormat>()
                    .map_err(anyhow::Error::from)
                    .and_then(|f| Ok(export_workbook(session.workbook(), f, None)?));
                io_result = match rendered {
                    Ok(text) => writeln!(out, "{text}"),
                    Err(e) => writeln!(out, "  [export] {e}"),
                };
            }
            _ => {
                let message = match text.parse::<usize>() {
                    Ok(n) if n >= 1 => session.suggestion_text(n - 1).unwrap_or_else(|| text.to_string()),
                    _ => text.to_string(),
                };
                if let Err(e) = session.run_turn(&message, &mut sink) {
                    io_result = writeln!(out, "  [rejected] {e}");
                }
            }
        }
        io_result.map_err(internal)?;
    }
    writeln!(out).map_err(internal)?;
    log::debug!("final state: {}", serialize_state(session.workbook()));
    Ok(())
}
