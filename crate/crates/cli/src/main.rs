use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use netintent_cli::render::{entry_line, render_trace};
use netintent_cli::{serve, ApiClient, AppState, DEFAULT_API};
use netintent_core::stack::StackConfig;
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "netintent", version, about = "Run and operate a simulated intent-driven 5G core")]
struct Cli {
    /// Base URL of a running stack.
    #[arg(long, global = true, env = "NETINTENT_API", default_value = DEFAULT_API)]
    api: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Boot the stack and serve its HTTP API in the foreground.
    Run {
        #[arg(long, short)]
        config: PathBuf,
        /// Overrides the bind address from the config.
        #[arg(long)]
        bind: Option<String>,
        /// Advance the virtual clock one tick per tick of wall time.
        #[arg(long)]
        realtime: bool,
    },
    /// Virtual clock.
    Clock {
        #[command(subcommand)]
        command: ClockCommand,
    },
    /// Submit and inspect intents.
    Intent {
        #[command(subcommand)]
        command: IntentCommand,
    },
    /// Resolve a pending approval token.
    Approve {
        token: String,
        #[arg(long, value_enum, default_value_t = DecisionArg::Approve)]
        decision: DecisionArg,
    },
    /// Approval tokens.
    Approvals {
        #[command(subcommand)]
        command: ApprovalsCommand,
    },
    /// Scheduled policy actions.
    Schedules {
        #[command(subcommand)]
        command: ListOnly,
    },
    /// Telemetry collections.
    Collections {
        #[command(subcommand)]
        command: CollectionsCommand,
    },
    /// Call gateway tools directly over JSON-RPC.
    Tools {
        #[command(subcommand)]
        command: ToolsCommand,
    },
}

#[derive(Subcommand)]
enum ClockCommand {
    /// Advance by a duration such as 90s, 3m or 1h30m.
    Advance {
        #[arg(allow_hyphen_values = true)]
        duration: String,
    },
    Show,
}

#[derive(Subcommand)]
enum IntentCommand {
    /// Prints the new intent id; with --follow, streams the trace until the run ends.
    Submit {
        text: String,
        #[arg(long)]
        follow: bool,
    },
    List,
    Status { id: String },
    /// Stream an intent's trace until the run ends.
    Follow { id: String },
    /// Pretty-print the transcript with validator verdicts.
    Trace {
        id: String,
        /// Raw transcript JSON instead of the rendered view.
        #[arg(long)]
        json: bool,
    },
    Stop { id: String },
}

#[derive(Subcommand)]
enum ApprovalsCommand {
    List {
        /// Only tokens still awaiting a decision.
        #[arg(long)]
        pending: bool,
    },
}

#[derive(Subcommand)]
enum ListOnly {
    List,
}

#[derive(Subcommand)]
enum CollectionsCommand {
    List,
    Records {
        name: String,
        #[arg(long)]
        slice: Option<String>,
        #[arg(long, default_value_t = 20)]
        limit: usize,
        #[arg(long, value_enum, default_value_t = OrderArg::RecentFirst)]
        order: OrderArg,
    },
}

#[derive(Subcommand)]
enum ToolsCommand {
    List,
    Call {
        name: String,
        /// Arguments as a JSON object.
        #[arg(default_value = "{}")]
        arguments: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum DecisionArg {
    Approve,
    Deny,
}

#[derive(Clone, Copy, ValueEnum)]
enum OrderArg {
    RecentFirst,
    OldestFirst,
}

/// Writes one line to stdout; a closed pipe ends the process quietly.
fn emit(line: &str) {
    let mut stdout = std::io::stdout().lock();
    if writeln!(stdout, "{line}").and_then(|_| stdout.flush()).is_err() {
        std::process::exit(0);
    }
}

macro_rules! out {
    ($($arg:tt)*) => { emit(&format!($($arg)*)) };
}

fn print_json(v: &Value) {
    out!("{}", serde_json::to_string_pretty(v).unwrap_or_default());
}

/// Signed duration in milliseconds; a leading '-' marks a negative duration.
fn parse_duration_ms(text: &str) -> anyhow::Result<i64> {
    let (sign, rest) = match text.trim().strip_prefix('-') {
        Some(rest) => (-1, rest),
        None => (1, text.trim()),
    };
    let d = humantime::parse_duration(rest).with_context(|| format!("invalid duration '{text}'"))?;
    let ms = i64::try_from(d.as_millis()).map_err(|_| anyhow!("duration '{text}' is too long"))?;
    Ok(sign * ms)
}

fn follow(client: &ApiClient, id: &str) -> anyhow::Result<Value> {
    let mut end = Value::Null;
    client.stream(&format!("/intents/{id}/stream"), None, |event| {
        if event.event == "end" {
            end = serde_json::from_str(&event.data).unwrap_or(Value::Null);
            return false;
        }
        if let Ok(entry) = serde_json::from_str::<Value>(&event.data) {
            out!("{}", entry_line(&entry, None));
        }
        true
    })?;
    out!("status: {}", end["status"].as_str().unwrap_or("unknown"));
    Ok(end)
}

fn run_server(config: PathBuf, bind: Option<String>, realtime: bool) -> anyhow::Result<()> {
    let mut cfg = StackConfig::load(&config)?;
    if let Some(bind) = bind {
        cfg.bind = bind;
    }
    let state = AppState::build(&cfg)?;
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&cfg.bind)
            .await
            .with_context(|| format!("cannot bind {}", cfg.bind))?;
        let addr = listener.local_addr()?;
        out!("listening on http://{addr}");
        serve(listener, state, realtime).await?;
        Ok(())
    })
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    let client = ApiClient::new(&cli.api);
    match cli.command {
        Command::Run { config, bind, realtime } => run_server(config, bind, realtime)?,
        Command::Clock { command } => match command {
            ClockCommand::Advance { duration } => {
                let ms = parse_duration_ms(&duration)?;
                let report = client.post("/clock/advance", &json!({ "duration_ms": ms }))?;
                out!("{}", report["now"].as_str().unwrap_or_default());
            }
            ClockCommand::Show => print_json(&client.get("/clock")?),
        },
        Command::Intent { command } => match command {
            IntentCommand::Submit { text, follow: stream } => {
                let created = client.post("/intents", &json!({ "text": text }))?;
                let id = created["intent_id"].as_str().ok_or_else(|| anyhow!("malformed reply {created}"))?;
                out!("{id}");
                if stream {
                    let end = follow(&client, id)?;
                    if end["status"] != "done" {
                        bail!("intent {id} ended {}", end["status"]);
                    }
                }
            }
            IntentCommand::List => {
                let list = client.get("/intents")?;
                for i in list.as_array().into_iter().flatten() {
                    out!(
                        "{}  {:<18} {}",
                        i["intent_id"].as_str().unwrap_or_default(),
                        i["status"].as_str().unwrap_or_default(),
                        i["text"].as_str().unwrap_or_default()
                    );
                }
            }
            IntentCommand::Status { id } => print_json(&client.get(&format!("/intents/{id}"))?),
            IntentCommand::Follow { id } => {
                follow(&client, &id)?;
            }
            IntentCommand::Trace { id, json } => {
                let trace = client.get(&format!("/intents/{id}/trace"))?;
                if json {
                    print_json(&trace);
                } else {
                    let entries = trace["entries"].as_array().cloned().unwrap_or_default();
                    out!("{}", render_trace(&entries).trim_end());
                    out!("status: {}", trace["status"].as_str().unwrap_or("unknown"));
                }
            }
            IntentCommand::Stop { id } => print_json(&client.post(&format!("/intents/{id}/stop"), &json!({}))?),
        },
        Command::Approve { token, decision } => {
            let decision = match decision {
                DecisionArg::Approve => "approve",
                DecisionArg::Deny => "deny",
            };
            let resolved = client.post(&format!("/approvals/{token}"), &json!({ "decision": decision }))?;
            out!("{} {}", token, resolved["state"].as_str().unwrap_or_default());
        }
        Command::Approvals { command: ApprovalsCommand::List { pending } } => {
            let path = if pending { "/approvals?state=pending" } else { "/approvals" };
            for t in client.get(path)?.as_array().into_iter().flatten() {
                let state = match t["consumed"] == true {
                    true => "consumed",
                    false => t["state"].as_str().unwrap_or_default(),
                };
                out!(
                    "{}  {:<9} {}",
                    t["token"].as_str().unwrap_or_default(),
                    state,
                    t["action_summary"].as_str().unwrap_or_default()
                );
            }
        }
        Command::Schedules { command: ListOnly::List } => print_json(&client.get("/schedules")?),
        Command::Collections { command } => match command {
            CollectionsCommand::List => {
                for c in client.get("/collections")?.as_array().into_iter().flatten() {
                    out!("{:<40} {}", c["name"].as_str().unwrap_or_default(), c["count"]);
                }
            }
            CollectionsCommand::Records { name, slice, limit, order } => {
                let order = match order {
                    OrderArg::RecentFirst => "recent_first",
                    OrderArg::OldestFirst => "oldest_first",
                };
                let mut path = format!("/collections/{name}/records?limit={limit}&order={order}");
                if let Some(slice) = slice {
                    path.push_str(&format!("&slice={slice}"));
                }
                print_json(&client.get(&path)?);
            }
        },
        Command::Tools { command } => {
            let (method, params) = match command {
                ToolsCommand::List => ("tools/list", json!({})),
                ToolsCommand::Call { name, arguments } => {
                    let arguments: Value =
                        serde_json::from_str(&arguments).context("arguments must be a JSON object")?;
                    ("tools/call", json!({ "name": name, "arguments": arguments }))
                }
            };
            let reply = client.post("/rpc", &json!({ "jsonrpc": "2.0", "id": 1, "method": method, "params": params }))?;
            if let Some(err) = reply.get("error") {
                bail!("rpc error: {err}");
            }
            let result = &reply["result"];
            print_json(result);
            if result["isError"] == true {
                bail!("tool reported {}", result["errorKind"].as_str().unwrap_or("an error"));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
