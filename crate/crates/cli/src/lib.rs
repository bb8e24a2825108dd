//! Command-line front end for `qobserver`.
//!
//! [`run`] executes one invocation in-process and returns the exit code with
//! the captured output streams; the binary only forwards them.

mod commands;
mod render;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use render::{round_to, JSON_SCHEMA};

/// Exit code for successful runs.
pub const EXIT_OK: i32 = 0;
/// Exit code for parse and validation failures.
pub const EXIT_INVALID: i32 = 1;
/// Exit code for usage and I/O errors.
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "qobserver", version, about = "Simulate observers as quantum subsystems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Seed for collapse steps and Monte-Carlo trials.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Table)]
    pub output: OutputFormat,
    /// Decimal digits kept in printed numbers.
    #[arg(long, global = true, default_value_t = 12, value_parser = clap::value_parser!(u8).range(0..=17))]
    pub precision: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Table,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a `.qwp` protocol file.
    Run {
        file: PathBuf,
        /// Repeat the run this many times and tally collapse outcomes.
        #[arg(long)]
        shots: Option<usize>,
    },
    /// Run a bundled scenario.
    Scenario {
        #[arg(value_enum)]
        name: ScenarioName,
    },
    /// Check an agent's predictions against what actually happens.
    Predict {
        /// Protocol the agent's knowledge is taken from.
        file: PathBuf,
        #[arg(long)]
        agent: String,
        /// Use the plain certainty rule instead of the catalytic-aware one.
        #[arg(long)]
        naive: bool,
        /// Protocol that actually runs; defaults to `file`.
        #[arg(long)]
        actual: Option<PathBuf>,
    },
    /// Feasibility analyses of catalytic measurements.
    #[command(subcommand)]
    Feasibility(Feasibility),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScenarioName {
    Cat,
    Dog,
    Pet,
}

impl ScenarioName {
    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioName::Cat => "cat",
            ScenarioName::Dog => "dog",
            ScenarioName::Pet => "pet",
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Feasibility {
    /// Oscillator parity operator and its Taylor truncations.
    Parity(ParityArgs),
    /// Needle pointer coupled to an n-qubit agent through the exchange operator.
    Needle(NeedleArgs),
    /// Cat-basis statistics of an agent under per-qubit flips.
    Dephasing(DephasingArgs),
}

#[derive(Debug, Args)]
pub struct ParityArgs {
    /// Number-basis truncation (even, at least 8).
    #[arg(long, default_value_t = 16)]
    pub truncation: usize,
    /// Oscillator parameter `a`.
    #[arg(long, default_value_t = 1.0)]
    pub a: f64,
    /// Scale of the number basis; defaults to `a`.
    #[arg(long)]
    pub basis_scale: Option<f64>,
    /// Taylor orders to evaluate.
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,4,8,16,20,30,40,50,60,64,70,80")]
    pub orders: Vec<usize>,
}

#[derive(Debug, Args)]
pub struct NeedleArgs {
    #[arg(long, default_value_t = 2)]
    pub qubits: usize,
    #[arg(long, default_value_t = 64)]
    pub lattice: usize,
    #[arg(long, default_value_t = 1.0)]
    pub spacing: f64,
    #[arg(long, default_value_t = 3.0)]
    pub coupling: f64,
    #[arg(long, default_value_t = 1.0)]
    pub duration: f64,
    /// Initial agent state.
    #[arg(long, value_enum, default_value_t = AgentState::U)]
    pub state: AgentState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AgentState {
    U,
    D,
    Plus,
    Minus,
}

#[derive(Debug, Args)]
pub struct DephasingArgs {
    /// Agent sizes to compare.
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
    pub qubits: Vec<usize>,
    /// Per-qubit flip probability.
    #[arg(long, default_value_t = 0.05)]
    pub p: f64,
    #[arg(long, default_value_t = 100_000)]
    pub trials: usize,
}

/// Result of one invocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    fn ok(stdout: String) -> Self {
        Self {
            code: EXIT_OK,
            stdout,
            stderr: String::new(),
        }
    }

    fn fail(code: i32, stderr: String) -> Self {
        Self {
            code,
            stdout: String::new(),
            stderr,
        }
    }
}

/// Parses `args` (including the program name) and executes the command.
pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => commands::execute(&cli),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            if code == EXIT_OK {
                Outcome::ok(text)
            } else {
                Outcome::fail(code, text)
            }
        }
    }
}
