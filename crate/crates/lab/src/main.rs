use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use opuc_lab::error::EXIT_CHECK;
use opuc_lab::{run_and_write, Command, LabConfig, LabError, Overrides};

#[derive(Parser)]
#[command(name = "opuc", version, about = "Random paraorthogonal polynomial experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    trials: Option<u64>,
    /// Degree of the paraorthogonal polynomial.
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Radius of the coefficient disk.
    #[arg(long, global = true)]
    r: Option<f64>,
    /// Worker threads (0 = all available).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Exit with status 4 when any threshold check fails.
    #[arg(long, global = true)]
    check: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Zeros of sampled polynomials (CSV of trial, index, theta, residual).
    Zeros,
    /// Window counts against Poisson statistics.
    Poisson,
    /// Fractional moments of the Carathéodory resolvent.
    Fracmom,
    /// Lyapunov exponent of the transfer products.
    Lyapunov,
    /// Eigenvector localization profiles.
    Localize,
    /// Window-count agreement between coupled and decoupled models.
    Decouple,
    /// Quick checks of the numerical core.
    Selftest,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Zeros => Command::Zeros,
            Cmd::Poisson => Command::Poisson,
            Cmd::Fracmom => Command::Fracmom,
            Cmd::Lyapunov => Command::Lyapunov,
            Cmd::Localize => Command::Localize,
            Cmd::Decouple => Command::Decouple,
            Cmd::Selftest => Command::Selftest,
        }
    }
}

fn run(cli: &Cli) -> Result<bool, LabError> {
    let mut cfg = match &cli.config {
        Some(p) => LabConfig::load(p)?,
        None => LabConfig::default(),
    };
    cfg.apply(&Overrides {
        seed: cli.seed,
        trials: cli.trials,
        n: cli.n,
        r: cli.r,
        workers: cli.workers,
        out_dir: cli.out_dir.clone(),
    });
    let (report, dir) = run_and_write(cli.command.into(), &cfg)?;
    for line in &report.lines {
        println!("{line}");
    }
    for c in &report.checks {
        println!("[{}] {}: {}", if c.pass { "pass" } else { "FAIL" }, c.name, c.detail);
    }
    println!("wrote {}", dir.display());
    Ok(report.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(passed) if !passed && cli.check => ExitCode::from(EXIT_CHECK as u8),
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("opuc: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
