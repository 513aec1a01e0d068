use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cvteleport::cli::{self, CliError, Command, OutputPlan};
use cvteleport::config::{OutputFormat, Overrides, RunConfig};

/// Continuous-variable teleportation through lossy and turbulent channels.
///
/// Set RAYON_NUM_THREADS to choose the worker count; results do not depend
/// on it.
#[derive(Parser)]
#[command(name = "cvteleport", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Histogram of the channel transmission.
    Pdt(Common),
    /// Mean fidelity against squeezing for each configured scheme.
    FidelitySweep(Common),
    /// Direct and adaptive fidelity against the postselection threshold.
    PostselectSweep(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; all sections are optional.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    samples: Option<usize>,
    /// Data file; a CSV run also writes `<out>.summary.json`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Also write the sampled channel transmissions as CSV.
    #[arg(long)]
    ensemble: Option<PathBuf>,
}

fn execute(command: Command, args: Common) -> Result<(), CliError> {
    let overrides = Overrides {
        seed: args.seed,
        samples: args.samples,
        out: args.out.clone(),
        format: args.format.map(|f| match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        }),
    };
    let config = match &args.config {
        Some(path) => RunConfig::load(path, &overrides)?,
        None => RunConfig::parse("", &overrides)?,
    };
    let report = cli::run(command, &config)?;
    let plan = OutputPlan { format: config.format, out: config.output.clone(), ensemble: args.ensemble };
    cli::emit(&report, &plan, &mut io::stdout().lock(), &mut io::stderr().lock())
}

fn main() -> ExitCode {
    // Usage errors share the configuration-error status instead of clap's 2,
    // which is reserved for numerical failures.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (command, args) = match cli.command {
        Cmd::Pdt(a) => (Command::Pdt, a),
        Cmd::FidelitySweep(a) => (Command::FidelitySweep, a),
        Cmd::PostselectSweep(a) => (Command::PostselectSweep, a),
    };
    match execute(command, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cvteleport: error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
