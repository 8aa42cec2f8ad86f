//! Command-line front end for `catdep`.

pub mod commands;
pub mod config;
pub mod error;

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{BatchFormat, CovarianceMethod, GraphFormat, MatrixFormat};
pub use config::{ConfigArgs, RunConfig, RunConfigFile};
pub use error::{CliError, ExitStatus};

#[derive(Debug, Parser)]
#[command(
    name = "catdep",
    version,
    about = "Dependent categorical sequences: validation, graphs, exact covariance, sampling"
)]
pub struct Cli {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check 1 <= alpha(n) < n for every n in 2..=N.
    Validate,
    /// Print the dependency tree.
    Graph {
        #[arg(long, value_enum, default_value = "dot")]
        format: GraphFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cross-covariance matrix between positions m < n.
    Covariance {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, value_enum, default_value = "both")]
        method: CovarianceMethod,
        #[arg(long, value_enum, default_value = "json")]
        format: MatrixFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw a seeded batch of sequences.
    Sample {
        #[arg(long, value_enum, default_value = "csv")]
        format: BatchFormat,
        /// Worker threads; output does not depend on this.
        #[arg(long)]
        workers: Option<usize>,
        /// Batch file; metadata goes next to it with extension .meta.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cross-check the exact computation paths at the configured parameters.
    Verify,
}

/// Executes a parsed command, writing its primary output to `stdout`.
pub fn run(cli: &Cli, stdout: &mut dyn Write) -> Result<ExitStatus, CliError> {
    let cfg = cli.config.resolve()?;
    match &cli.command {
        Command::Validate => commands::cmd_validate(&cfg, stdout),
        Command::Graph { format, out } => commands::cmd_graph(&cfg, *format, out.as_deref(), stdout),
        Command::Covariance {
            m,
            n,
            method,
            format,
            out,
        } => commands::cmd_covariance(&cfg, *m, *n, *method, *format, out.as_deref(), stdout),
        Command::Sample { format, workers, out } => {
            commands::cmd_sample(&cfg, *format, *workers, out.as_deref(), stdout)
        }
        Command::Verify => commands::cmd_verify(&cfg, stdout),
    }
}

/// Parses `args` and runs, returning the exit status. Errors go to `stderr`.
pub fn run_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> ExitStatus
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let _ = write!(stderr, "{err}");
            return if err.use_stderr() {
                ExitStatus::Usage
            } else {
                ExitStatus::Success
            };
        }
    };
    match run(&cli, stdout) {
        Ok(status) => status,
        Err(err) => {
            let _ = writeln!(stderr, "error: {err}");
            err.status()
        }
    }
}
