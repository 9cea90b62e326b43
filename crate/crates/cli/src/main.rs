use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use skipfree_cli::{
    cmd_identities, cmd_simulate, cmd_verify, load_config, CliError, Format, OracleHorizon,
    Outcome, Overrides, Settings, Workers,
};

#[derive(Parser)]
#[command(
    name = "skipfree",
    version,
    about = "Ruin probabilities of skip-free walks: exact checks and Monte Carlo verification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand)]
enum Command {
    /// Closed forms against Monte Carlo and exhaustive enumeration.
    Verify,
    /// Ballot, rotation and hitting-time identity suites.
    Identities,
    /// Ruin probability estimates for the configured initial capitals.
    Simulate,
}

#[derive(Args)]
struct Flags {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    #[arg(long, global = true, value_name = "N")]
    trials: Option<u64>,
    #[arg(long, global = true, value_name = "N")]
    horizon: Option<u64>,
    #[arg(long, global = true, value_name = "N|off")]
    oracle_horizon: Option<OracleHorizon>,
    #[arg(long, global = true, value_name = "N|auto")]
    workers: Option<Workers>,
    /// Report file, appended to; stdout when absent.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_name = "csv|structured")]
    format: Option<Format>,
    /// Record wall time in each row (reports are then not reproducible).
    #[arg(long, global = true)]
    timing: bool,
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    let path = cli
        .flags
        .config
        .ok_or_else(|| CliError::Config("--config is required".into()))?;
    let overrides = Overrides {
        seed: cli.flags.seed,
        trials: cli.flags.trials,
        horizon: cli.flags.horizon,
        oracle_horizon: cli.flags.oracle_horizon,
        workers: cli.flags.workers,
        out: cli.flags.out,
        format: cli.flags.format,
        timing: cli.flags.timing,
    };
    let settings = Settings::new(load_config(&path)?, overrides)?;
    match cli.command {
        Command::Verify => cmd_verify(&settings),
        Command::Identities => cmd_identities(&settings),
        Command::Simulate => cmd_simulate(&settings),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(outcome) => {
            if !outcome.passed {
                eprintln!("{} rows written; some checks failed", outcome.rows);
            }
            ExitCode::from(outcome.exit_code())
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
