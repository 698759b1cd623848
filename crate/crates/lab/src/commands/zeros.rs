use opuc_core::phase::Spectrum;
use opuc_core::pointproc::{trial_spectrum, ExperimentConfig};
use serde::Serialize;

use super::{config_err, Check, Command, Report};
use crate::config::LabConfig;
use crate::error::LabResult;
use crate::output::{Artifact, Csv};
use crate::runner::Runner;

pub const RESIDUAL_LIMIT: f64 = 1e-8;

#[derive(Serialize)]
struct Summary {
    n: usize,
    r: f64,
    trials: u64,
    seed: u64,
    complete: bool,
    max_residual: f64,
    min_gap: f64,
    checks: Vec<Check>,
}

pub fn run(cfg: &LabConfig, runner: &Runner) -> LabResult<Report> {
    let exp = ExperimentConfig::new(cfg.n, cfg.r, cfg.trials, cfg.seed, Vec::new()).map_err(config_err)?;
    let spectra: Vec<Spectrum> = runner.trials(exp.trials, |t| trial_spectrum(&exp, t))?;
    let mut csv = Csv::new(&["trial", "index", "theta", "residual_log"]);
    for (t, s) in spectra.iter().enumerate() {
        for (j, (&theta, &res)) in s.angles.iter().zip(&s.residual_log).enumerate() {
            csv.row(vec![t.into(), j.into(), theta.into(), res.into()]);
        }
    }
    let complete = spectra.iter().all(|s| s.len() == cfg.n && s.winding == cfg.n);
    let max_residual = spectra.iter().map(Spectrum::max_residual).fold(0.0, f64::max);
    let min_gap = spectra.iter().map(Spectrum::min_gap).fold(f64::INFINITY, f64::min);
    let checks = vec![
        Check::new("completeness", complete, format!("{} spectra of degree {}", spectra.len(), cfg.n)),
        Check::new(
            "residual",
            max_residual < RESIDUAL_LIMIT,
            format!("max scaled residual {max_residual:.3e} (limit {RESIDUAL_LIMIT:e})"),
        ),
    ];
    let lines = vec![format!(
        "{} spectra, n = {}, max residual {max_residual:.3e}, min gap {min_gap:.3e}",
        spectra.len(),
        cfg.n
    )];
    let summary = Summary {
        n: cfg.n,
        r: cfg.r,
        trials: cfg.trials,
        seed: cfg.seed,
        complete,
        max_residual,
        min_gap,
        checks: checks.clone(),
    };
    Ok(Report {
        command: Command::Zeros,
        files: vec![Artifact::csv("zeros.csv", csv), Artifact::json("zeros.json", &summary)],
        checks,
        lines,
    })
}
