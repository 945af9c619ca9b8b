#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches, Parser, Subcommand};

mod commands;
mod config;

#[derive(Parser)]
#[command(name = "planar-dvm", version, about = "Stationary discrete-velocity Boltzmann solver on convex planar domains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Model files: certification and generators.
    #[command(subcommand)]
    Model(ModelCommand),
    /// Truncation sweep with damping continuation at every level.
    Solve {
        /// Run configuration (JSON).
        #[arg(long, short)]
        config: PathBuf,
        /// Output directory, overriding the config.
        #[arg(long, short)]
        output: Option<PathBuf>,
        /// One regularized solve at the configured alpha and k.
        #[arg(long)]
        single: bool,
    },
    /// Damping continuation at the configured k, keeping every stage.
    Sweep {
        #[arg(long, short)]
        config: PathBuf,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Diagnostics of a stored field against a run configuration.
    Diagnose {
        #[arg(long, short)]
        config: PathBuf,
        /// Field CSV with its JSON sidecar next to it.
        #[arg(long, short)]
        field: PathBuf,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum ModelCommand {
    /// Validate rules, genericity, a positive direction and normality.
    Check {
        path: PathBuf,
        /// Print the certificate as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Shift a base model (classical Broadwell by default) by c0·n0.
    GenShifted {
        /// Base model file.
        #[arg(long)]
        base: Option<PathBuf>,
        #[arg(long, default_value_t = 8f64.sqrt())]
        c0: f64,
        /// Shift direction as `x,y`.
        #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [1.0, 1.0])]
        n0: Vec<f64>,
        /// Output file (stdout if omitted).
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Build a model from circle quadruples given as JSON `{quadruples, gammas, n0}`.
    GenCircle {
        spec: PathBuf,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}

fn dispatch(cli: Cli) -> anyhow::Result<u8> {
    use commands::*;
    match cli.command {
        Command::Model(ModelCommand::Check { path, json }) => model_check(&path, json),
        Command::Model(ModelCommand::GenShifted { base, c0, n0, output }) => {
            gen_shifted(base.as_deref(), c0, [n0[0], n0[1]], output.as_deref())
        }
        Command::Model(ModelCommand::GenCircle { spec, output }) => gen_circle(&spec, output.as_deref()),
        Command::Solve { config, output, single } => solve(&config, output.as_deref(), single),
        Command::Sweep { config, output } => sweep(&config, output.as_deref()),
        Command::Diagnose { config, field, output } => diagnose_field(&config, &field, output.as_deref()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let matches = Cli::command().after_long_help(config::defaults_help()).get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
