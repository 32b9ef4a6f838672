use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use healthnet::scenario::{preset_text, report_from_logs, run_scenario, ScenarioConfig, PRESETS};

/// Deterministic simulation of continuous authentication on a sliced
/// private health network.
#[derive(Parser)]
#[command(name = "healthnet", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write events.jsonl, audit.jsonl and report.json.
    Run {
        /// Scenario file (TOML). Omit when using --scenario.
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the duration in ticks.
        #[arg(long)]
        ticks: Option<u64>,
        /// Run a bundled preset: home, hospital or road.
        #[arg(long)]
        scenario: Option<String>,
    },
    /// Recompute the metrics report from an event log and an audit log.
    Report {
        events: PathBuf,
        audit: PathBuf,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Config(String),
    Io(String),
}

impl Failure {
    fn io(path: &Path, e: io::Error) -> Self {
        Failure::Io(format!("{}: {e}", path.display()))
    }
}

fn load_config(config: Option<PathBuf>, scenario: Option<String>) -> Result<ScenarioConfig, Failure> {
    let text = match (config, scenario) {
        (Some(_), Some(_)) => return Err(Failure::Config("give either a config file or --scenario, not both".into())),
        (None, None) => return Err(Failure::Config("no scenario: give a config file or --scenario".into())),
        (Some(path), None) => fs::read_to_string(&path).map_err(|e| Failure::io(&path, e))?,
        (None, Some(name)) => match preset_text(&name) {
            Some(t) => t.to_string(),
            None => {
                let known: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
                return Err(Failure::Config(format!("unknown scenario {name:?}; known: {}", known.join(", "))));
            }
        },
    };
    ScenarioConfig::parse(&text).map_err(|e| Failure::Config(e.to_string()))
}

fn write(path: PathBuf, contents: &str) -> Result<(), Failure> {
    fs::write(&path, contents).map_err(|e| Failure::io(&path, e))
}

fn run(
    config: Option<PathBuf>,
    out: PathBuf,
    seed: Option<u64>,
    ticks: Option<u64>,
    scenario: Option<String>,
) -> Result<(), Failure> {
    let mut cfg = load_config(config, scenario)?;
    if let Some(seed) = seed {
        cfg.scenario.seed = seed;
    }
    if let Some(ticks) = ticks {
        cfg.scenario.duration = ticks;
    }
    let output = run_scenario(&cfg).map_err(|e| Failure::Config(e.to_string()))?;
    fs::create_dir_all(&out).map_err(|e| Failure::io(&out, e))?;
    write(out.join("events.jsonl"), &output.events_jsonl())?;
    write(out.join("audit.jsonl"), &output.audit_jsonl())?;
    write(out.join("report.json"), &output.report_json())?;
    let r = &output.report;
    println!(
        "{}: {} events, {} audit records, {} delivered, {} dropped",
        cfg.scenario.name,
        output.events.len(),
        output.audit.len(),
        r.messages.delivered,
        r.messages.dropped.values().sum::<u64>()
    );
    Ok(())
}

fn report(events: PathBuf, audit: PathBuf, out: Option<PathBuf>) -> Result<(), Failure> {
    let ev = fs::read_to_string(&events).map_err(|e| Failure::io(&events, e))?;
    let au = fs::read_to_string(&audit).map_err(|e| Failure::io(&audit, e))?;
    let r = report_from_logs(&ev, &au).map_err(|e| Failure::Config(e.to_string()))?;
    match out {
        Some(path) => write(path, &r.to_json()),
        None => {
            print!("{}", r.to_json());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out, seed, ticks, scenario } => run(config, out, seed, ticks, scenario),
        Command::Report { events, audit, out } => report(events, audit, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
