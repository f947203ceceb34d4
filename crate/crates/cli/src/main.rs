//! `asmon`: validate task files, explore state graphs, simulate sessions,
//! monitor live or recorded detections and score the result.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

#[derive(Parser, Debug)]
#[command(name = "asmon", version, about = "Assembly-task state monitoring")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check a task definition and, optionally, calibration and tray files.
    Validate(ValidateArgs),
    /// Build the state graph of a task.
    Plan(PlanArgs),
    /// Generate a synthetic session as a detection log plus ground truth.
    Simulate(SimulateArgs),
    /// Track the assembly state from live cameras or a recorded log.
    Monitor(MonitorArgs),
    /// Print the synchronized frame bundles of a recorded log.
    Replay(ReplayArgs),
    /// Score a predicted timeline against ground truth.
    Eval(EvalArgs),
}

#[derive(Args, Debug)]
struct ValidateArgs {
    #[arg(long, value_name = "FILE")]
    task: PathBuf,
    #[arg(long, value_name = "FILE")]
    calib: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    trays: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PlanArgs {
    #[arg(long, value_name = "FILE")]
    task: PathBuf,
    /// Write the graph in Graphviz format.
    #[arg(long, value_name = "FILE")]
    dot: Option<PathBuf>,
    /// Write the transition matrix as CSV.
    #[arg(long, value_name = "FILE")]
    matrix: Option<PathBuf>,
    /// Overrides `reasoner.stay_prob`.
    #[arg(long, value_name = "P")]
    stay_prob: Option<f64>,
    /// Print up to this many plans.
    #[arg(long, default_value_t = 10, value_name = "N")]
    plans: usize,
    /// Print the node listing.
    #[arg(long)]
    nodes: bool,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long, value_name = "FILE")]
    task: PathBuf,
    /// Detection log to write.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Ground-truth CSV to write.
    #[arg(long, value_name = "FILE")]
    gt: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Total frame count; per-state durations are rescaled to match.
    #[arg(long, value_name = "N")]
    frames: Option<u64>,
    #[arg(long, value_name = "P")]
    dropout: Option<f64>,
    #[arg(long, value_name = "SD")]
    confidence_jitter: Option<f64>,
    /// Probability that a look-alike element (`X` and `X'`) is reported as its twin.
    #[arg(long, value_name = "P")]
    confusion: Option<f64>,
    /// Per-point position noise radius, meters.
    #[arg(long, value_name = "M")]
    position_jitter: Option<f64>,
    #[arg(long, value_name = "FILE")]
    calib_out: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    trays_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct MonitorArgs {
    #[arg(long, value_name = "FILE")]
    task: PathBuf,
    #[arg(long, value_name = "FILE")]
    calib: PathBuf,
    #[arg(long, value_name = "FILE")]
    trays: PathBuf,
    /// Accept camera connections on this address.
    #[arg(long, value_name = "ADDR", conflicts_with = "log", required_unless_present = "log")]
    listen: Option<String>,
    /// Read a recorded detection log.
    #[arg(long, value_name = "FILE")]
    log: Option<PathBuf>,
    /// Timeline CSV to write (stdout when omitted).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Replay pacing relative to the recorded rate; 0 is as fast as possible.
    #[arg(long, default_value_t = 0.0)]
    speed: f64,
    /// Stop listening after this much silence.
    #[arg(long, value_name = "MS")]
    idle_timeout_ms: Option<u64>,
}

#[derive(Args, Debug)]
struct ReplayArgs {
    #[arg(long, value_name = "FILE")]
    log: PathBuf,
    /// Camera ids, comma separated (default: every camera in the log).
    #[arg(long, value_delimiter = ',')]
    cameras: Vec<String>,
    /// Pacing relative to the recorded rate; 0 is as fast as possible.
    #[arg(long, default_value_t = 1.0)]
    speed: f64,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Timeline CSV written by `monitor`.
    #[arg(long, value_name = "FILE")]
    predicted: PathBuf,
    /// Ground-truth CSV written by `simulate`.
    #[arg(long, value_name = "FILE")]
    gt: PathBuf,
    /// Frames a prediction may lead or lag the ground truth.
    #[arg(long, default_value_t = 0)]
    tol: u64,
    #[arg(long, value_enum, default_value_t = Column::Path)]
    column: Column,
    /// Per-frame match CSV to write.
    #[arg(long, value_name = "FILE")]
    per_frame: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Column {
    /// `state_index`, the smoothed path.
    Path,
    /// `map_state`, the online estimate.
    Map,
}

/// Failure classes with their exit codes.
#[derive(Debug)]
enum CliError {
    /// Bad input files, flags or configuration.
    Invalid(String),
    /// I/O or network failure while running.
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Invalid(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Invalid(m) | CliError::Runtime(m) => m,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = commands::load_config(cli.config.as_deref()).and_then(|config| match &cli.command {
        Command::Validate(a) => commands::validate(&config, a),
        Command::Plan(a) => commands::plan(&config, a),
        Command::Simulate(a) => commands::simulate(&config, a),
        Command::Monitor(a) => commands::monitor(&config, a),
        Command::Replay(a) => commands::replay(&config, a),
        Command::Eval(a) => commands::eval(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
