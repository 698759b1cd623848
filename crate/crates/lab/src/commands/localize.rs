use opuc_core::analysis::{count_bad_eigenfunctions, eigenpairs, localization_profile};
use opuc_core::pointproc::{coupled_model, trial_model, DecoupleScheme, ExperimentConfig};
use opuc_core::stats::median;
use serde::Serialize;

use super::{config_err, Check, Command, Report};
use crate::config::LabConfig;
use crate::error::LabResult;
use crate::output::{Artifact, Csv};
use crate::runner::Runner;

pub const GOOD_FIT_R2: f64 = 0.5;
pub const GOOD_FIT_SHARE: f64 = 0.8;
pub const FREE_RATE_LIMIT: f64 = 0.01;

struct Row {
    angle: f64,
    center: usize,
    rate: f64,
    r2: f64,
}

#[derive(Serialize)]
struct Boundary {
    degree: usize,
    blocks: usize,
    block_size: usize,
    halfwidth: usize,
    mean_count: f64,
    mean_fraction: f64,
}

#[derive(Serialize)]
struct Summary {
    n: usize,
    r: f64,
    trials: u64,
    seed: u64,
    pairs: usize,
    median_rate: f64,
    max_abs_rate: f64,
    good_fit_share: f64,
    boundary: Option<Boundary>,
    checks: Vec<Check>,
}

pub fn run(cfg: &LabConfig, runner: &Runner) -> LabResult<Report> {
    let exp = ExperimentConfig::new(cfg.n, cfg.r, cfg.trials, cfg.seed, Vec::new()).map_err(config_err)?;
    let per_trial: Vec<Vec<Row>> = runner.trials(exp.trials, |t| {
        let model = coupled_model(&exp, t).map_err(|e| e.in_trial(t))?;
        let pairs = eigenpairs(&model).map_err(|e| e.in_trial(t))?;
        Ok(pairs
            .iter()
            .map(|p| {
                let prof = localization_profile(&p.vector);
                Row {
                    angle: p.angle,
                    center: prof.center,
                    rate: prof.fit_rate,
                    r2: prof.fit_r2,
                }
            })
            .collect())
    })?;

    let mut csv = Csv::new(&["trial", "index", "angle", "center", "rate", "r2"]);
    let mut rates = Vec::new();
    let mut good = 0usize;
    for (t, rows) in per_trial.iter().enumerate() {
        for (j, row) in rows.iter().enumerate() {
            csv.row(vec![t.into(), j.into(), row.angle.into(), row.center.into(), row.rate.into(), row.r2.into()]);
            rates.push(row.rate);
            good += usize::from(row.r2 > GOOD_FIT_R2);
        }
    }
    let pairs = rates.len();
    let median_rate = median(&rates);
    let max_abs_rate = rates.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    let good_fit_share = good as f64 / pairs as f64;
    let mut lines = vec![format!(
        "{pairs} eigenpairs: median rate {median_rate:.4}, max |rate| {max_abs_rate:.4}, r2 > {GOOD_FIT_R2} on {:.1}%",
        100.0 * good_fit_share
    )];
    let checks = if cfg.r == 0.0 {
        vec![Check::new(
            "free rates",
            max_abs_rate < FREE_RATE_LIMIT,
            format!("max |rate| {max_abs_rate:.2e}"),
        )]
    } else {
        vec![
            Check::new("median rate", median_rate > 0.0, format!("median rate {median_rate:.4}")),
            Check::new(
                "fit quality",
                good_fit_share >= GOOD_FIT_SHARE,
                format!("{:.1}% of fits with r2 > {GOOD_FIT_R2}", 100.0 * good_fit_share),
            ),
        ]
    };

    let boundary = if cfg.localize.decoupled {
        let scheme = DecoupleScheme::logarithmic(cfg.n).map_err(config_err)?;
        let mut dexp = exp.clone();
        dexp.decouple = Some(scheme);
        let degree = scheme.degree();
        let halfwidth = (cfg.localize.halfwidth_factor * (degree as f64).ln()).round() as usize;
        let counts = runner.trials(exp.trials, |t| {
            let m = trial_model(&dexp, t).map_err(|e| e.in_trial(t))?;
            count_bad_eigenfunctions(&m, halfwidth).map_err(|e| e.in_trial(t))
        })?;
        let mean_count = counts.iter().sum::<usize>() as f64 / counts.len() as f64;
        lines.push(format!(
            "decoupled N = {degree} ({} x {}): {mean_count:.2} eigenvectors centred within {halfwidth} of a cut",
            scheme.blocks, scheme.block_size
        ));
        Some(Boundary {
            degree,
            blocks: scheme.blocks,
            block_size: scheme.block_size,
            halfwidth,
            mean_count,
            mean_fraction: mean_count / degree as f64,
        })
    } else {
        None
    };

    let summary = Summary {
        n: cfg.n,
        r: cfg.r,
        trials: cfg.trials,
        seed: cfg.seed,
        pairs,
        median_rate,
        max_abs_rate,
        good_fit_share,
        boundary,
        checks: checks.clone(),
    };
    Ok(Report {
        command: Command::Localize,
        files: vec![Artifact::csv("localize.csv", csv), Artifact::json("localize.json", &summary)],
        checks,
        lines,
    })
}
