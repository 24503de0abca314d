//! `ncphase`: command-line access to Poisson structures, Darboux maps,
//! trajectories, spectra, limit scans and constraint chains.

mod commands;
mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{CliError, Outcome};
use config::{RunConfig, TOL_ENV};

#[derive(Parser)]
#[command(name = "ncphase", version, about = "Mechanics on noncommutative phase spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output file; defaults to the config's `output`, then stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Two-form, Poisson matrix and coordinate brackets (JSON).
    Brackets(Common),
    /// Darboux map and its residuals (JSON).
    Darboux(Common),
    /// Trajectory samples (CSV); `quadratic_hamiltonian` replaces the model.
    Simulate(Common),
    /// Quantum levels (JSON).
    Spectrum {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 3)]
        nmax: u32,
    },
    /// Frequencies as chi = eps^2 -> 0 at fixed B (CSV).
    LimitScan {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1e-3)]
        eps_min: f64,
        #[arg(long, default_value_t = 1e-1)]
        eps_max: f64,
        #[arg(long, default_value_t = 7)]
        points: usize,
    },
    /// Gotay-Nester-Hinds constraint chain (JSON).
    Reduce(Common),
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Brackets(c) | Command::Darboux(c) | Command::Simulate(c) | Command::Reduce(c) => c,
            Command::Spectrum { common, .. } | Command::LimitScan { common, .. } => common,
        }
    }
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so a failed run never leaves a partial file.
fn write_atomic(path: &Path, text: &str) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(text.as_bytes())?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let common = cli.command.common();
    let env = std::env::var(TOL_ENV).ok();
    let setup = RunConfig::load(&common.config)?.validate(env.as_deref())?;
    let outcome = match &cli.command {
        Command::Brackets(_) => commands::brackets(&setup)?,
        Command::Darboux(_) => commands::darboux(&setup)?,
        Command::Simulate(_) => commands::simulate(&setup)?,
        Command::Spectrum { nmax, .. } => commands::spectrum(&setup, *nmax)?,
        Command::LimitScan {
            eps_min,
            eps_max,
            points,
            ..
        } => commands::limit_scan(&setup, *eps_min, *eps_max, *points)?,
        Command::Reduce(_) => commands::reduce(&setup)?,
    };
    match common.out.as_ref().or(setup.output.as_ref()) {
        Some(path) => write_atomic(path, &outcome.text)?,
        None => std::io::stdout().write_all(outcome.text.as_bytes())?,
    }
    Ok(outcome)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) => {
            if let Some(msg) = &outcome.message {
                eprintln!("ncphase: {msg}");
            }
            ExitCode::from(outcome.code as u8)
        }
        Err(e) => {
            eprintln!("ncphase: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
