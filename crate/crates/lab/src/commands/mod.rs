//! One module per subcommand. Each turns a validated [`LabConfig`] into a
//! [`Report`]: the artifacts to write, the threshold checks and a few
//! lines for the terminal. Nothing here touches the filesystem.

use std::path::PathBuf;

use serde::Serialize;

use crate::config::LabConfig;
use crate::error::{LabError, LabResult};
use crate::output::{digests, write_run, Artifact, RunManifest};
use crate::runner::Runner;

pub mod decouple;
pub mod fracmom;
pub mod localize;
pub mod lyapunov;
pub mod poisson;
pub mod selftest;
pub mod zeros;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Zeros,
    Poisson,
    Fracmom,
    Lyapunov,
    Localize,
    Decouple,
    Selftest,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::Zeros,
        Command::Poisson,
        Command::Fracmom,
        Command::Lyapunov,
        Command::Localize,
        Command::Decouple,
        Command::Selftest,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Zeros => "zeros",
            Command::Poisson => "poisson",
            Command::Fracmom => "fracmom",
            Command::Lyapunov => "lyapunov",
            Command::Localize => "localize",
            Command::Decouple => "decouple",
            Command::Selftest => "selftest",
        }
    }
}

/// A named threshold test.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            pass,
            detail: detail.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub command: Command,
    pub files: Vec<Artifact>,
    pub checks: Vec<Check>,
    pub lines: Vec<String>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn file(&self, name: &str) -> Option<&Artifact> {
        self.files.iter().find(|f| f.name == name)
    }
}

/// Run `cmd` without writing anything.
pub fn execute(cmd: Command, cfg: &LabConfig) -> LabResult<Report> {
    cfg.validate()?;
    let runner = Runner::new(cfg.workers)?;
    match cmd {
        Command::Zeros => zeros::run(cfg, &runner),
        Command::Poisson => poisson::run(cfg, &runner),
        Command::Fracmom => fracmom::run(cfg, &runner),
        Command::Lyapunov => lyapunov::run(cfg, &runner),
        Command::Localize => localize::run(cfg, &runner),
        Command::Decouple => decouple::run(cfg, &runner),
        Command::Selftest => selftest::run(cfg, &runner),
    }
}

/// Run `cmd` and write its artifacts and manifest under
/// `out_dir/<command>/`.
pub fn run_and_write(cmd: Command, cfg: &LabConfig) -> LabResult<(Report, PathBuf)> {
    let started = now();
    let report = execute(cmd, cfg)?;
    let manifest = RunManifest {
        tool: "opuc".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: cmd.name().into(),
        seed: cfg.seed,
        config: serde_json::to_value(cfg).map_err(|e| LabError::config(e.to_string()))?,
        started,
        finished: now(),
        files: digests(&report.files),
    };
    let dir = cfg.out_dir.join(cmd.name());
    write_run(&dir, &report.files, &manifest)?;
    Ok((report, dir))
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Domain errors raised while assembling an experiment are config errors.
pub(crate) fn config_err(e: opuc_core::Error) -> LabError {
    LabError::config(e.to_string())
}
