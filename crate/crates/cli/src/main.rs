use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use halfflow::harness::{run_experiment, Command, ExperimentConfig};
use serde_json::json;

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Cmd {
    Calibrate,
    Flow,
    Scan,
    Bubble,
    Variational,
    Wente,
    Accept,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Calibrate => Command::Calibrate,
            Cmd::Flow => Command::Flow,
            Cmd::Scan => Command::Scan,
            Cmd::Bubble => Command::Bubble,
            Cmd::Variational => Command::Variational,
            Cmd::Wente => Command::Wente,
            Cmd::Accept => Command::Accept,
        }
    }
}

/// Half-harmonic gradient flow laboratory.
///
/// Worker threads come from HALFFLOW_THREADS (default 1). Errors are
/// printed to stderr as JSON {code, message, context}.
#[derive(Debug, Parser)]
#[command(name = "halfflow", version)]
struct Cli {
    command: Cmd,
    /// Flat key = value configuration file.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Flow output directory (scan, bubble).
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Scan radii, comma separated (scan).
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    radii: Option<Vec<f64>>,
    /// Concentration point t,x,R (bubble).
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    at: Option<Vec<f64>>,
}

struct Failure {
    code: String,
    message: String,
    context: serde_json::Value,
}

impl Failure {
    fn new(code: &str, message: impl Into<String>) -> Self {
        Self { code: code.into(), message: message.into(), context: json!({}) }
    }
}

impl From<halfflow::Error> for Failure {
    fn from(e: halfflow::Error) -> Self {
        Self { code: e.code().into(), message: e.to_string(), context: e.details() }
    }
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

fn threads() -> Result<usize, Failure> {
    match std::env::var("HALFFLOW_THREADS") {
        Err(_) => Ok(1),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(Failure::new("config", format!("HALFFLOW_THREADS must be a positive integer, got `{v}`"))),
        },
    }
}

fn run(cli: &Cli) -> Result<serde_json::Value, Failure> {
    let n = threads()?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::new("threads", e.to_string()))?;
    let command: Command = cli.command.into();
    let mut cfg = ExperimentConfig::load(command, &cli.config)?.with_out(&cli.out);
    if let Some(seed) = cli.seed {
        cfg = cfg.with_seed(seed);
    }
    if let Some(t) = &cli.trace {
        cfg.set("trace", t.to_string_lossy())?;
    }
    if let Some(r) = &cli.radii {
        cfg.set("radii", join(r))?;
    }
    if let Some(a) = &cli.at {
        cfg.set("at", join(a))?;
    }
    let summary = run_experiment(&cfg)?;
    Ok(serde_json::to_value(summary).expect("summary serializes"))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let f = Failure::new("usage", e.to_string().trim());
            eprintln!("{}", json!({ "code": f.code, "message": f.message, "context": f.context }));
            return ExitCode::from(2);
        }
    };
    let result = run(&cli);
    if matches!(cli.command, Cmd::Accept) {
        if let Ok(table) = std::fs::read_to_string(cli.out.join("acceptance.txt")) {
            print!("{table}");
        }
    }
    match result {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(mut f) => {
            if let serde_json::Value::Object(map) = &mut f.context {
                map.insert("command".into(), json!(Command::from(cli.command).name()));
                map.insert("config".into(), json!(cli.config.display().to_string()));
            }
            eprintln!("{}", json!({ "code": f.code, "message": f.message, "context": f.context }));
            ExitCode::FAILURE
        }
    }
}
