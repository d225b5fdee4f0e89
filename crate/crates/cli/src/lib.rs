//! `wot-gatt` command-line client.
//!
//! Exit codes: 0 success, 1 interaction error, 2 usage or validation error.

mod serve;

use std::ffi::OsString;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::time::Duration;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use wot_gatt::bench::{format_table, run_bench_on, to_csv, BenchError, BenchPlan};
use wot_gatt::binding::WotOperation;
use wot_gatt::consumer::{consume, ConnectionPolicy, ConsumedThing, ConsumerError};
use wot_gatt::td::{parse_td, validate_td, AffordanceKind, Severity, ThingDescription};
use wot_gatt::transport::sim::SimNetwork;
use wot_gatt::transport::{ClockMode, OpenOptions, OpenedTransport, TransportError, TransportSelection};

#[derive(Debug, Parser)]
#[command(name = "wot-gatt", version, about = "Interact with Bluetooth LE Things described by WoT Thing Descriptions")]
struct Cli {
    /// `sim:<config.json>` or `host`
    #[arg(long, global = true)]
    transport: Option<TransportSelection>,
    /// Seed for the simulated network
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Connect timeout, and how long `subscribe` waits for values
    #[arg(long = "timeout-ms", global = true)]
    timeout_ms: Option<u64>,
    #[arg(long, global = true, value_enum, default_value_t = Output::Table)]
    output: Output,
    /// Clock of a simulated network, overriding its config
    #[arg(long, global = true, value_enum)]
    clock: Option<ClockArg>,
    #[arg(long, global = true, value_enum, default_value_t = PolicyArg::KeepConnected)]
    policy: PolicyArg,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Output {
    Table,
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ClockArg {
    Virtual,
    Real,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PolicyArg {
    KeepConnected,
    ReconnectPerOperation,
    DisconnectAfter,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Read a property and print its decoded value
    Read { td: PathBuf, property: String },
    /// Write a JSON value to a property
    Write { td: PathBuf, property: String, value: String },
    /// Invoke an action with a JSON input
    Invoke { td: PathBuf, action: String, value: String },
    /// Print event values as they arrive
    Subscribe {
        td: PathBuf,
        event: String,
        /// Stop after this many values
        #[arg(long, default_value_t = 1)]
        count: usize,
    },
    /// Run a latency benchmark plan
    Bench { plan: PathBuf },
    /// Check a Thing Description
    Validate { td: PathBuf },
    /// Simulated peripherals
    Sim {
        #[command(subcommand)]
        command: SimCommand,
    },
}

#[derive(Debug, Subcommand)]
enum SimCommand {
    /// Serve a simulated network as JSON lines over stdin/stdout
    Serve { config: PathBuf },
}

struct Failure {
    code: i32,
    error: anyhow::Error,
}

fn usage(error: impl Into<anyhow::Error>) -> Failure {
    Failure { code: 2, error: error.into() }
}

fn interaction(error: impl Into<anyhow::Error>) -> Failure {
    Failure { code: 1, error: error.into() }
}

fn consumer_failure(e: ConsumerError) -> Failure {
    match e {
        ConsumerError::InvalidTd(_) | ConsumerError::UnknownAffordance { .. } => usage(e),
        e => interaction(e),
    }
}

type Outcome = Result<(), Failure>;

/// Runs the CLI; returns the process exit code.
pub fn cli_main<I, T>(args: I, input: &mut dyn BufRead, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    match run(&cli, input, out) {
        Ok(()) => 0,
        Err(f) => {
            let _ = writeln!(err, "error: {:#}", f.error);
            f.code
        }
    }
}

fn run(cli: &Cli, input: &mut dyn BufRead, out: &mut dyn Write) -> Outcome {
    match &cli.command {
        Command::Read { td, property } => {
            let (thing, _) = open_thing(cli, td)?;
            let value = thing.read_property(property).map_err(consumer_failure)?;
            emit_value(cli.output, out, "property", property, &value)
        }
        Command::Write { td, property, value } => {
            let value = parse_json(value)?;
            let (thing, _) = open_thing(cli, td)?;
            thing.write_property(property, &value).map_err(consumer_failure)?;
            thing.disconnect().map_err(consumer_failure)?;
            emit_done(cli.output, out, "property", property)
        }
        Command::Invoke { td, action, value } => {
            let value = parse_json(value)?;
            let (thing, _) = open_thing(cli, td)?;
            thing.invoke_action(action, &value).map_err(consumer_failure)?;
            thing.disconnect().map_err(consumer_failure)?;
            emit_done(cli.output, out, "action", action)
        }
        Command::Subscribe { td, event, count } => subscribe(cli, td, event, *count, out),
        Command::Bench { plan } => bench(cli, plan, out),
        Command::Validate { td } => validate(cli, td, out),
        Command::Sim { command: SimCommand::Serve { config } } => {
            let opened = open_transport(cli, &TransportSelection::Sim(config.clone()))?;
            let net = opened.network.expect("sim transport");
            serve::serve(&net, opened.transport, input, out).map_err(interaction)
        }
    }
}

fn parse_json(text: &str) -> Result<Value, Failure> {
    serde_json::from_str(text).with_context(|| format!("{text:?} is not a JSON value")).map_err(usage)
}

fn load_td(path: &Path) -> Result<ThingDescription, Failure> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display())).map_err(usage)?;
    parse_td(&text).with_context(|| format!("{}", path.display())).map_err(usage)
}

fn open_options(cli: &Cli) -> OpenOptions {
    OpenOptions {
        seed: cli.seed,
        clock: cli.clock.map(|c| match c {
            ClockArg::Virtual => ClockMode::Virtual,
            ClockArg::Real => ClockMode::Real,
        }),
        connect_timeout: cli.timeout_ms.map(Duration::from_millis),
    }
}

fn open_transport(cli: &Cli, selection: &TransportSelection) -> Result<OpenedTransport, Failure> {
    open_with(selection, &open_options(cli))
}

fn open_with(selection: &TransportSelection, options: &OpenOptions) -> Result<OpenedTransport, Failure> {
    selection.open(options).map_err(|e| match e {
        TransportError::InvalidConfig(_) => usage(e),
        e => interaction(e),
    })
}

fn policy(cli: &Cli) -> ConnectionPolicy {
    match cli.policy {
        PolicyArg::KeepConnected => ConnectionPolicy::KeepConnected,
        PolicyArg::ReconnectPerOperation => ConnectionPolicy::ReconnectPerOperation,
        PolicyArg::DisconnectAfter => ConnectionPolicy::DisconnectAfter,
    }
}

fn open_thing(cli: &Cli, td: &Path) -> Result<(ConsumedThing, Option<SimNetwork>), Failure> {
    let td = load_td(td)?;
    let selection = cli.transport.as_ref().ok_or_else(|| usage(anyhow!("--transport is required")))?;
    let opened = open_transport(cli, selection)?;
    let thing = consume(td, opened.transport, policy(cli)).map_err(consumer_failure)?;
    Ok((thing, opened.network))
}

fn io(e: std::io::Error) -> Failure {
    interaction(e)
}

fn emit_value(output: Output, out: &mut dyn Write, kind: &str, name: &str, value: &Value) -> Outcome {
    match output {
        Output::Table => writeln!(out, "{value}"),
        Output::Json => writeln!(out, "{}", json!({ kind: name, "value": value })),
        Output::Csv => writeln!(out, "{kind},value\n{name},{}", csv_field(value)),
    }
    .map_err(io)
}

fn emit_done(output: Output, out: &mut dyn Write, kind: &str, name: &str) -> Outcome {
    match output {
        Output::Json => writeln!(out, "{}", json!({ kind: name, "ok": true })).map_err(io),
        _ => Ok(()),
    }
}

fn csv_field(value: &Value) -> String {
    let text = match value {
        Value::String(s) => s.clone(),
        v => v.to_string(),
    };
    if text.contains([',', '"', '\n']) {
        format!("\"{}\"", text.replace('"', "\"\""))
    } else {
        text
    }
}

fn subscribe(cli: &Cli, td: &Path, event: &str, count: usize, out: &mut dyn Write) -> Outcome {
    let (thing, network) = open_thing(cli, td)?;
    let (tx, rx) = mpsc::channel();
    let sub = thing.subscribe_event(event, move |v| {
        let _ = tx.send(v);
    });
    let sub = sub.map_err(consumer_failure)?;
    // a simulated peripheral plays back its scripted values
    if let Some(net) = &network {
        let req =
            thing.resolve(AffordanceKind::Event, event, WotOperation::SubscribeEvent).map_err(consumer_failure)?;
        net.fire_all(&req.uri).map_err(interaction)?;
    }
    let wait = Duration::from_millis(cli.timeout_ms.unwrap_or(10_000));
    if cli.output == Output::Csv {
        writeln!(out, "event,value").map_err(io)?;
    }
    let mut received = 0;
    while received < count {
        let Ok(value) = rx.recv_timeout(wait) else { break };
        received += 1;
        match cli.output {
            Output::Table => writeln!(out, "{value}"),
            Output::Json => writeln!(out, "{}", json!({"event": event, "value": value})),
            Output::Csv => writeln!(out, "{event},{}", csv_field(&value)),
        }
        .map_err(io)?;
    }
    thing.unsubscribe_event(sub).map_err(consumer_failure)?;
    thing.disconnect().map_err(consumer_failure)?;
    if received < count {
        return Err(interaction(anyhow!("received {received} of {count} values within {wait:?}")));
    }
    Ok(())
}

fn bench(cli: &Cli, path: &Path, out: &mut dyn Write) -> Outcome {
    let mut plan = BenchPlan::load(path).map_err(usage)?;
    if cli.seed.is_some() {
        plan.seed = cli.seed;
    }
    if let Some(ms) = cli.timeout_ms {
        plan.timeout_ms = Some(ms);
    }
    let options = OpenOptions {
        seed: plan.seed,
        clock: open_options(cli).clock.or(plan.clock),
        connect_timeout: plan.timeout_ms.map(Duration::from_millis),
    };
    let selection = match &cli.transport {
        Some(t) => t.clone(),
        None => plan.transport_selection().map_err(usage)?,
    };
    let td = load_td(&plan.td_path())?;
    let opened = open_with(&selection, &options)?;
    let report = run_bench_on(td, opened.transport, &plan).map_err(|e| match e {
        BenchError::Plan(_) | BenchError::Consumer(ConsumerError::InvalidTd(_)) => usage(e),
        e => interaction(e),
    })?;
    match cli.output {
        Output::Table => write!(out, "{}", format_table(std::slice::from_ref(&report))).map_err(io),
        Output::Csv => write!(out, "{}", to_csv(&report.stats).map_err(interaction)?).map_err(io),
        Output::Json => writeln!(out, "{}", serde_json::to_string_pretty(&report).map_err(interaction)?).map_err(io),
    }
}

fn validate(cli: &Cli, path: &Path, out: &mut dyn Write) -> Outcome {
    let td = load_td(path)?;
    let diagnostics = validate_td(&td);
    match cli.output {
        Output::Json => {
            let list: Vec<Value> = diagnostics
                .iter()
                .map(|d| {
                    json!({
                        "severity": if d.severity() == Severity::Error { "error" } else { "warning" },
                        "kind": format!("{:?}", d.kind),
                        "affordance": d.affordance,
                        "message": d.message,
                    })
                })
                .collect();
            writeln!(out, "{}", Value::Array(list)).map_err(io)?;
        }
        _ if diagnostics.is_empty() => writeln!(out, "{}: ok", path.display()).map_err(io)?,
        _ => {
            for d in &diagnostics {
                writeln!(out, "{d}").map_err(io)?;
            }
        }
    }
    let errors = diagnostics.iter().filter(|d| d.severity() == Severity::Error).count();
    if errors > 0 {
        return Err(usage(anyhow!("{} has {errors} error(s)", path.display())));
    }
    Ok(())
}
