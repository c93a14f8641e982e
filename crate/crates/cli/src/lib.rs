//! Command-line driver: parses a JSON run configuration (or a built-in
//! preset), dispatches to the core library and writes JSON/CSV artifacts.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod error;
pub mod expr;
pub mod json;
pub mod presets;

pub use commands::{run_command, Command, Outcome};
pub use config::{parse_config, parse_config_file, RunConfig};
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "sgsde",
    version,
    about = "Small-gain verification and random equilibria of additive-noise SDEs"
)]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Built-in configuration of a worked example (5.1, 5.2, 5.3, 6.1).
    #[arg(long, global = true, value_name = "ID", conflicts_with = "config")]
    preset: Option<String>,

    /// Directory for the artifacts; created if missing.
    #[arg(long, global = true, value_name = "DIR", default_value = ".")]
    out: PathBuf,

    /// Overrides `seeds.base`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for the parallel parts; defaults to the available cores.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Hypotheses report: eigenvalues, cooperativity, norm bound, gain.
    Check,
    /// Forward trajectories, one per seed.
    Simulate,
    /// Pullback trajectory and optional tail envelopes.
    Pullback,
    /// Fixed point of the gain operator and its verification.
    Equilibrium,
    /// Monte Carlo estimate of the stationary law.
    Stationary,
    /// Full pipeline on a built-in example with a comparison report.
    Example { id: String },
}

fn execute(cli: Cli) -> Result<commands::Outcome, CliError> {
    let cmd = match cli.command {
        Cmd::Check => Command::Check,
        Cmd::Simulate => Command::Simulate,
        Cmd::Pullback => Command::Pullback,
        Cmd::Equilibrium => Command::Equilibrium,
        Cmd::Stationary => Command::Stationary,
        Cmd::Example { id } => Command::Example(id),
    };
    let mut cfg = match (&cmd, &cli.config, &cli.preset) {
        (Command::Example(id), _, _) => presets::load(id)?,
        (_, Some(path), _) => parse_config_file(path)?,
        (_, None, Some(id)) => presets::load(id)?,
        (_, None, None) => {
            return Err(CliError::Usage {
                usage: "one of --config <PATH> or --preset <ID> is required".into(),
            })
        }
    };
    if let Some(seed) = cli.seed {
        cfg.seeds.base = seed;
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage {
                usage: "--threads must be at least 1".into(),
            });
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| CliError::Usage {
        usage: e.to_string(),
    })?;
    pool.install(|| run_command(&cmd, &cfg, &cli.out))
}

/// Runs the command line `args` (program name first) and returns the exit
/// status: 0 on success, 1 on a configuration, validation or refusal error,
/// 2 on a numerical failure or a failed example comparison.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return 0;
            }
            let err = CliError::Usage {
                usage: e.render().to_string(),
            };
            let _ = write!(stderr, "{}", json::to_string(&err.to_json()));
            return err.exit_code();
        }
    };
    match execute(cli) {
        Ok(outcome) => {
            let _ = write!(stdout, "{}", json::to_string(&outcome.document));
            if outcome.pass {
                0
            } else {
                2
            }
        }
        Err(err) => {
            let _ = write!(stderr, "{}", json::to_string(&err.to_json()));
            err.exit_code()
        }
    }
}
