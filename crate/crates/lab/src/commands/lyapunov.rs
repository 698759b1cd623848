use opuc_core::analysis::{lyapunov_closed_form, lyapunov_estimate, LyapunovEstimate};
use opuc_core::rng::trial_seed;
use opuc_core::Complex;
use serde::Serialize;

use super::{Check, Command, Report};
use crate::config::LabConfig;
use crate::error::{LabError, LabResult};
use crate::output::{Artifact, Cell, Csv};
use crate::runner::Runner;

pub const GAMMA_TOLERANCE: f64 = 0.005;

#[derive(Serialize)]
struct Estimate {
    theta: f64,
    gamma: f64,
    stderr: f64,
}

#[derive(Serialize)]
struct Summary {
    r: f64,
    steps: usize,
    seed: u64,
    closed_form: f64,
    estimates: Vec<Estimate>,
    checks: Vec<Check>,
}

pub fn run(cfg: &LabConfig, runner: &Runner) -> LabResult<Report> {
    let thetas = &cfg.lyapunov.thetas;
    if thetas.is_empty() {
        return Err(LabError::config("lyapunov.thetas is empty"));
    }
    let steps = cfg.lyapunov.steps;
    let closed = if cfg.r == 0.0 { 0.0 } else { lyapunov_closed_form(cfg.r)? };
    let est: Vec<LyapunovEstimate> = runner.trials(thetas.len() as u64, |i| {
        let z = Complex::from_polar(1.0, thetas[i as usize]);
        lyapunov_estimate(cfg.r, z, steps, trial_seed(cfg.seed, i))
    })?;

    let mut header = vec!["step".to_string()];
    header.extend((0..thetas.len()).map(|i| format!("gamma{i}")));
    let mut csv = Csv::new(&header.iter().map(String::as_str).collect::<Vec<_>>());
    for (j, &(step, _)) in est[0].trace.iter().enumerate() {
        let mut cells: Vec<Cell> = vec![step.into()];
        cells.extend(est.iter().map(|e| Cell::from(e.trace[j].1)));
        csv.row(cells);
    }

    let mut checks = Vec::new();
    let mut lines = vec![format!("closed form gamma({}) = {closed:.7}", cfg.r)];
    for (th, e) in thetas.iter().zip(&est) {
        checks.push(Check::new(
            format!("closed form at theta {th}"),
            (e.gamma - closed).abs() < GAMMA_TOLERANCE,
            format!("estimate {:.6} ± {:.6} vs {closed:.6}", e.gamma, e.stderr),
        ));
        lines.push(format!("theta {th}: estimate {:.6} ± {:.6}", e.gamma, e.stderr));
    }
    for i in 0..est.len() {
        for k in i + 1..est.len() {
            let diff = (est[i].gamma - est[k].gamma).abs();
            let se = est[i].stderr.hypot(est[k].stderr);
            checks.push(Check::new(
                format!("z independence {i}-{k}"),
                diff <= 2.0 * se,
                format!("difference {diff:.6}, combined stderr {se:.6}"),
            ));
        }
    }
    let summary = Summary {
        r: cfg.r,
        steps,
        seed: cfg.seed,
        closed_form: closed,
        estimates: thetas
            .iter()
            .zip(&est)
            .map(|(&theta, e)| Estimate {
                theta,
                gamma: e.gamma,
                stderr: e.stderr,
            })
            .collect(),
        checks: checks.clone(),
    };
    Ok(Report {
        command: Command::Lyapunov,
        files: vec![Artifact::csv("lyapunov.csv", csv), Artifact::json("lyapunov.json", &summary)],
        checks,
        lines,
    })
}
