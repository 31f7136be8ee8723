//! Command-line front end for the cavity-sideband cooling toolkit.
//!
//! All workflows are driven by a config file (`--config`); the optional
//! subcommand must agree with the config's `mode` and exists for
//! discoverability. Exit codes: 0 success, 2 configuration error,
//! 3 numerical failure, 4 sweep completed with failed cells.

mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{parse_config, Mode};
use run::{Failure, RunContext, RunError};

#[derive(Parser)]
#[command(
    name = "cavity-sideband",
    version,
    about = "Simulator and rate analysis for cavity-assisted sideband cooling of a trapped dipole"
)]
struct Cli {
    /// Run configuration file (key = value lines with [section] headers).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for CSV/SVG artifacts and the run manifest.
    #[arg(long, default_value = ".", global = true)]
    out: PathBuf,

    /// Override the config's rate-extraction method.
    #[arg(long, value_parser = ["perturbative", "numeric", "both"], global = true)]
    method: Option<String>,

    /// Also render SVG heatmaps for sweep grids.
    #[arg(long, global = true)]
    svg: bool,

    /// Worker threads for sweep execution (default: all cores). Results are
    /// identical for any value.
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    mode: Option<ModeCmd>,
}

#[derive(Subcommand, Clone, Copy)]
enum ModeCmd {
    /// Propagate the master equation and write the observable trajectory.
    Simulate,
    /// Extract cooling/heating rates at a single parameter point.
    Rates,
    /// Sweep the (laser, cavity) detuning plane.
    Sweep,
    /// Scan the drive strength and report extremal rates per point.
    OmegaScan,
    /// List molecular candidates and their derived cavity-cooling figures.
    Molecule,
    /// Check convergence of the extracted rate with the trap truncation.
    Convergence,
}

impl ModeCmd {
    fn to_mode(self) -> Mode {
        match self {
            ModeCmd::Simulate => Mode::Simulate,
            ModeCmd::Rates => Mode::Rates,
            ModeCmd::Sweep => Mode::Sweep,
            ModeCmd::OmegaScan => Mode::OmegaScan,
            ModeCmd::Molecule => Mode::Molecule,
            ModeCmd::Convergence => Mode::Convergence,
        }
    }
}

fn fail(e: RunError) -> ExitCode {
    eprintln!("error: code={} message=\"{}\"", e.failure.code(), e.message);
    ExitCode::from(e.failure.code())
}

fn config_fail(msg: impl std::fmt::Display) -> ExitCode {
    fail(RunError {
        failure: Failure::Config,
        message: msg.to_string(),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    let Some(config_path) = &cli.config else {
        return config_fail("--config PATH is required");
    };
    let text = match std::fs::read_to_string(config_path) {
        Ok(t) => t,
        Err(e) => return config_fail(format!("cannot read {}: {e}", config_path.display())),
    };
    let config_dir = config_path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."));
    let mut config = match parse_config(&text, &config_dir) {
        Ok(c) => c,
        Err(e) => return config_fail(e),
    };

    if let Some(cmd) = cli.mode {
        let requested = cmd.to_mode();
        if requested != config.mode {
            return config_fail(format!(
                "subcommand '{}' conflicts with config mode '{}'",
                requested.name(),
                config.mode.name()
            ));
        }
    }
    if let Some(m) = &cli.method {
        config.method = config::MethodSel::parse(m).expect("clap-validated method");
    }

    let ctx = RunContext {
        out_dir: cli.out.clone(),
        svg: cli.svg,
        workers: cli.workers,
    };
    match run::run(&config, &ctx) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e),
    }
}
