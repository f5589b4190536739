// SPDX-License-Identifier: Apache-2.0
//! `ionflow`: command-line driver for the trapped-ion transport simulator.

mod commands;
mod config;
mod output;
mod setup;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use crate::config::{parse_config, ConfigError, Issue};

#[derive(Parser)]
#[command(name = "ionflow", version, about = "Energy transport through trapped-ion quantum magnets")]
struct Cli {
    /// Worker threads for sweeps; 1 runs serially.
    #[arg(long, global = true, env = "IONFLOW_THREADS")]
    threads: Option<usize>,
    /// Directory for CSV output; overrides `output.dir`.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Print the parsed config with defaults filled in and exit.
    #[arg(long, global = true)]
    print_config: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Modes,
    Reservoirs,
    Dos,
    Spectrum,
    Steady,
    Sweep,
    Dimer,
    Oracle,
    Protocol,
}

#[derive(Subcommand)]
enum Command {
    /// Normal modes of the crystal.
    Modes(Target),
    /// Cooling rates, widths and temperatures of the reservoir modes.
    Reservoirs(Target),
    /// Sampled reservoir densities of states.
    Dos(Target),
    /// Magnet levels and dressed couplings.
    Spectrum(Target),
    /// Steady state and currents at the configured point.
    Steady(Target),
    /// Current over a detuning/width grid.
    Sweep(Target),
    /// Ising dimer: closed forms next to the numeric solution.
    Dimer(Target),
    /// Full spin-phonon model compared with the effective one.
    Oracle(Target),
    /// Quench-and-probe current estimate.
    Protocol(Target),
}

#[derive(clap::Args)]
struct Target {
    /// TOML run configuration.
    config: PathBuf,
}

#[derive(Debug)]
pub enum CliError {
    Io { path: PathBuf, message: String },
    Config(ConfigError),
    Core { context: String, error: ionflow::Error },
    Unsupported(String),
    Csv(String),
    Threads(String),
}

impl CliError {
    pub fn core(context: &str, error: ionflow::Error) -> Self {
        CliError::Core { context: context.into(), error }
    }

    pub fn missing(section: &str) -> Self {
        CliError::Config(ConfigError::Invalid(vec![Issue {
            path: section.into(),
            reason: "section is required by this subcommand".into(),
        }]))
    }

    pub fn unsupported(why: String) -> Self {
        CliError::Unsupported(why)
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), message: e.to_string() }
    }

    pub fn csv(e: impl std::fmt::Display) -> Self {
        CliError::Csv(e.to_string())
    }

    fn to_json(&self) -> serde_json::Value {
        match self {
            CliError::Io { path, message } => {
                json!({"kind": "io", "path": path.display().to_string(), "message": message})
            }
            CliError::Config(ConfigError::Io { path, message }) => {
                json!({"kind": "io", "path": path.display().to_string(), "message": message})
            }
            CliError::Config(ConfigError::Schema(issue)) => {
                json!({"kind": "schema", "message": issue.to_string(), "issues": [issue]})
            }
            CliError::Config(ConfigError::Invalid(issues)) => json!({
                "kind": "config",
                "message": format!("{} problem(s) in config", issues.len()),
                "issues": issues,
            }),
            CliError::Core { context, error } => json!({
                "kind": "model",
                "context": context,
                "variant": variant(error),
                "message": error.to_string(),
            }),
            CliError::Unsupported(m) => json!({"kind": "unsupported", "message": m}),
            CliError::Csv(m) => json!({"kind": "output", "message": m}),
            CliError::Threads(m) => json!({"kind": "threads", "message": m}),
        }
    }
}

fn variant(e: &ionflow::Error) -> &'static str {
    use ionflow::Error::*;
    match e {
        InvalidInput(_) => "invalid_input",
        Unstable { .. } => "unstable",
        NoConvergence { .. } => "no_convergence",
        NoCooling { .. } => "no_cooling",
        SizeCap { .. } => "size_cap",
        Resonance { .. } => "resonance",
        Validity { .. } => "validity",
        Stiffness { .. } => "stiffness",
        SteadyState(_) => "steady_state",
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (kind, target) = match &cli.command {
        Command::Modes(t) => (Kind::Modes, t),
        Command::Reservoirs(t) => (Kind::Reservoirs, t),
        Command::Dos(t) => (Kind::Dos, t),
        Command::Spectrum(t) => (Kind::Spectrum, t),
        Command::Steady(t) => (Kind::Steady, t),
        Command::Sweep(t) => (Kind::Sweep, t),
        Command::Dimer(t) => (Kind::Dimer, t),
        Command::Oracle(t) => (Kind::Oracle, t),
        Command::Protocol(t) => (Kind::Protocol, t),
    };
    let cfg = parse_config(&target.config).map_err(CliError::Config)?;
    if cli.print_config {
        print!("{}", config::to_toml(&cfg));
        return Ok(());
    }
    let dir = cli.out_dir.clone().or_else(|| {
        let base = target.config.parent().unwrap_or(Path::new(""));
        cfg.output.dir.as_ref().map(|d| base.join(d))
    });
    let threads = cli.threads.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Threads(e.to_string()))?;
    let mut warnings = Vec::new();
    let tables = pool.install(|| match kind {
        Kind::Modes => commands::modes(&cfg),
        Kind::Reservoirs => commands::reservoirs(&cfg),
        Kind::Dos => commands::dos_table(&cfg),
        Kind::Spectrum => commands::spectrum(&cfg),
        Kind::Steady => commands::steady(&cfg, &mut warnings),
        Kind::Sweep => commands::sweep(&cfg, &mut warnings),
        Kind::Dimer => commands::dimer(&cfg, &mut warnings),
        Kind::Oracle => commands::oracle(&cfg),
        Kind::Protocol => commands::protocol(&cfg, &mut warnings),
    })?;
    for w in &warnings {
        eprintln!("{}", json!({ "warning": w }));
    }
    output::emit(&tables, dir.as_deref())?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", json!({ "error": e.to_json() }));
            ExitCode::FAILURE
        }
    }
}
