//! `bsq`: experiment driver for the stochastic Boussinesq toolkit.
//!
//! Exit status: 0 success, 1 invalid input or I/O failure, 2 numerical
//! failure, 3 a verification check did not hold. `BSQ_SEED` and
//! `BSQ_WORKERS` override the configured seed and worker count; `--seed`
//! overrides both.

mod commands;
mod config;
mod run;

use bsq_core::Exec;
use clap::{Parser, Subcommand};
use run::{Failure, Run};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "bsq", version, about = "Simulate and probe the stochastic 2D Boussinesq system")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, overriding `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Integrate trajectories and store them in the binary BSQ1 format.
    Simulate,
    /// Compare closed-form brackets with finite differences.
    BracketsVerify,
    /// Build the span ledger from the forced modes.
    Span,
    /// Cone-restricted spectral bound of the Malliavin matrix per realization.
    MalliavinProbe,
    /// Monte Carlo decay of the regularized control residual.
    ControlDecay,
    /// Law of large numbers, central limit and exponential moment probes.
    ErgodicStats,
    /// Bracket-chain time series along one trajectory.
    Cascade,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::BracketsVerify => "brackets-verify",
            Command::Span => "span",
            Command::MalliavinProbe => "malliavin-probe",
            Command::ControlDecay => "control-decay",
            Command::ErgodicStats => "ergodic-stats",
            Command::Cascade => "cascade",
        }
    }
}

fn env_u64(name: &str) -> Result<Option<u64>, Failure> {
    match std::env::var(name) {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| Failure::Validation(vec![format!("{name} = {v:?} is not a non-negative integer")])),
        Err(_) => Ok(None),
    }
}

fn executor(workers: usize) -> Result<Exec, Failure> {
    if workers == 1 {
        return Ok(Exec::Serial);
    }
    #[cfg(feature = "parallel")]
    if workers > 1 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .map_err(|e| Failure::Validation(vec![format!("worker pool: {e}")]))?;
    }
    Ok(Exec::available())
}

fn prepare(cli: &Cli) -> Result<Run, Failure> {
    let path = cli.config.as_ref().ok_or_else(|| Failure::Validation(vec!["--config <path> is required".into()]))?;
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Validation(vec![format!("{}: {e}", path.display())]))?;
    let mut cfg = config::parse_config(&text).map_err(Failure::Validation)?;
    let seed = match cli.seed {
        Some(s) => s,
        None => env_u64("BSQ_SEED")?.unwrap_or(cfg.seed),
    };
    cfg.seed = seed;
    if let Some(w) = env_u64("BSQ_WORKERS")? {
        cfg.workers = w as usize;
    }
    let exec = executor(cfg.workers)?;
    let out = cli.out.clone().unwrap_or_else(|| cfg.out_dir.clone());
    Run::new(cfg, cli.command.name(), run::config_hash(&text), seed, exec, out)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { run::EXIT_VALIDATION } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let mut run = match prepare(&cli) {
        Ok(r) => r,
        Err(f) => {
            eprintln!("bsq: {f}");
            return ExitCode::from(f.exit_code());
        }
    };
    let outcome = match cli.command {
        Command::Simulate => commands::simulate(&mut run),
        Command::BracketsVerify => commands::brackets_verify(&mut run),
        Command::Span => commands::span(&mut run),
        Command::MalliavinProbe => commands::malliavin_probe(&mut run),
        Command::ControlDecay => commands::control_decay(&mut run),
        Command::ErgodicStats => commands::ergodic_stats(&mut run),
        Command::Cascade => commands::cascade(&mut run),
    };
    if let Err(e) = run.write_manifest(&outcome) {
        eprintln!("bsq: could not write manifest: {e}");
        return ExitCode::from(run::EXIT_VALIDATION);
    }
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("bsq: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}
