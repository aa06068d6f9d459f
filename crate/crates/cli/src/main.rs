//! Command-line entry point for the two-stage question classifier.
//!
//! Exit status contract: 0 success, 1 usage error (bad flags or config),
//! 2 data error (unreadable or malformed corpus, taxonomy, or bundle),
//! 3 training or numeric failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

mod commands;
mod config;

use config::{Overrides, RunConfig};

#[derive(Debug)]
pub enum CliError {
    /// Bad invocation: unparseable config, invalid settings.
    Usage(String),
    Core(hqc_core::Error),
    Io(std::io::Error),
}

impl From<hqc_core::Error> for CliError {
    fn from(e: hqc_core::Error) -> Self {
        match e {
            hqc_core::Error::Config(m) => CliError::Usage(m),
            other => CliError::Core(other),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "{e}"),
        }
    }
}

/// Map an error to the documented exit status.
pub fn exit_code(err: &CliError) -> u8 {
    match err {
        CliError::Usage(_) => 1,
        CliError::Io(_) => 2,
        CliError::Core(e) => match e.root() {
            hqc_core::Error::Config(_) | hqc_core::Error::InvalidArgument(_) => 1,
            hqc_core::Error::NonFinite { .. }
            | hqc_core::Error::Divergence { .. }
            | hqc_core::Error::Shape { .. } => 3,
            _ => 2,
        },
    }
}

#[derive(Parser)]
#[command(
    name = "hqc",
    version,
    about = "Two-stage Bengali question classification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate the corpus and print a vocabulary report.
    Prepare(JobArgs),
    /// Train the pipeline and save a model bundle.
    Train(JobArgs),
    /// Run cross-validation and write evaluation reports.
    Evaluate(JobArgs),
    /// Classify questions from stdin or a file using a saved bundle.
    Predict(PredictArgs),
    /// Check analytic gradients against central finite differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Args)]
struct JobArgs {
    /// Run configuration file.
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct PredictArgs {
    /// Run configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Questions file, one per line; stdin when omitted.
    #[arg(long)]
    input: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct GradcheckArgs {
    /// Seed for the randomized check shapes.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    match cli.command {
        Command::Prepare(args) => {
            let config = RunConfig::load(&args.config, &args.overrides)?;
            commands::prepare(&config, &mut out)
        }
        Command::Train(args) => {
            let config = RunConfig::load(&args.config, &args.overrides)?;
            commands::train(&config, &mut out)
        }
        Command::Evaluate(args) => {
            let config = RunConfig::load(&args.config, &args.overrides)?;
            commands::evaluate(&config, &mut out)
        }
        Command::Predict(args) => {
            let config = RunConfig::load(&args.config, &args.overrides)?;
            match &args.input {
                Some(path) => {
                    let file = std::fs::File::open(path)?;
                    let mut reader = std::io::BufReader::new(file);
                    commands::predict(&config, &mut reader, &mut out)
                }
                None => {
                    let stdin = std::io::stdin();
                    let mut reader = stdin.lock();
                    commands::predict(&config, &mut reader, &mut out)
                }
            }
        }
        Command::Gradcheck(args) => commands::gradcheck(args.seed, &mut out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version are successful exits; everything else is
            // a usage error under this tool's status contract.
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        // A closed stdout pipe means the consumer has all it wants.
        Err(CliError::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
