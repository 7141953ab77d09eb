//! `hjlab run <config.json>`: runs one experiment and writes its CSV tables
//! and `summary.json`.
//!
//! Exit status: 0 success, 1 a check failed, 2 configuration error,
//! 3 numerical error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hjlab_core::{emit_report, run_experiment, HjError, RunConfig};
use log::{error, info};

#[derive(Parser)]
#[command(name = "hjlab", version, about = "State-constraint Hamilton-Jacobi homogenization lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Output directory (overrides `output.dir`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Only report errors.
        #[arg(long)]
        quiet: bool,
    },
}

const EXIT_FAIL: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

fn exit_code(e: &HjError) -> u8 {
    if e.is_config_error() {
        EXIT_CONFIG
    } else {
        EXIT_NUMERICAL
    }
}

fn main() -> ExitCode {
    let Command::Run { config, out, quiet } = Cli::parse().command;
    let level = if quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).format_timestamp(None).init();

    // an unreadable or malformed file is a configuration problem, whatever the cause
    let cfg = match RunConfig::from_path(&config) {
        Ok(c) => c,
        Err(e) => {
            error!("{e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if cfg.output.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cfg.output.threads).build_global() {
            error!("cli::run: cannot size the worker pool: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    let out_dir = out.unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    info!("running {:?} experiment from {}", cfg.experiment.kind, config.display());
    let report = match run_experiment(&cfg) {
        Ok(r) => r,
        Err(e) => {
            error!("{e}");
            return ExitCode::from(exit_code(&e));
        }
    };
    match emit_report(&report, &out_dir) {
        Ok(files) => info!("wrote {} files to {}", files.len(), out_dir.display()),
        Err(e) => {
            error!("{e}");
            return ExitCode::from(EXIT_NUMERICAL);
        }
    }
    for c in &report.checks {
        if c.pass {
            info!("PASS {}: {}", c.name, c.detail);
        } else {
            error!("FAIL {}: {}", c.name, c.detail);
        }
    }
    if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAIL)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numerical_and_config_errors_map_to_distinct_codes() {
        let num = HjError::NonConvergence { op: "effective::cell", detail: "stalled".into() };
        let cfg = HjError::UnresolvedHole { op: "geometry::build_lattice", detail: "h too coarse".into() };
        assert_eq!(exit_code(&num), EXIT_NUMERICAL);
        assert_eq!(exit_code(&cfg), EXIT_CONFIG);
    }
}
