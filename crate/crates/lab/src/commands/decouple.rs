use opuc_core::pointproc::{trial_agreement, Agreement};
use opuc_core::stats::wilson_interval;
use serde::Serialize;

use super::{Check, Command, Report};
use crate::config::LabConfig;
use crate::error::LabResult;
use crate::output::{Artifact, Csv};
use crate::runner::Runner;

pub const AGREEMENT_TARGET: f64 = 0.85;

#[derive(Serialize)]
struct Entry {
    n: usize,
    degree: usize,
    blocks: usize,
    block_size: usize,
    a: f64,
    b: f64,
    agree: u64,
    trials: u64,
    fraction: f64,
    wilson: [f64; 2],
}

#[derive(Serialize)]
struct Summary {
    r: f64,
    seed: u64,
    theta0: f64,
    entries: Vec<Entry>,
    checks: Vec<Check>,
}

pub fn run(cfg: &LabConfig, runner: &Runner) -> LabResult<Report> {
    let mut entries = Vec::new();
    let mut lines = Vec::new();
    let mut csv = Csv::new(&["n", "degree", "blocks", "block_size", "a", "b", "agree", "trials", "fraction"]);
    let mut by_window: Vec<Vec<f64>> = vec![Vec::new(); cfg.decouple.windows.len()];
    for &n in &cfg.decouple.n_values {
        let exp = cfg.decouple_experiment(n)?;
        let scheme = exp.decouple.expect("decoupling experiment");
        let rows = runner.trials(exp.trials, |t| trial_agreement(&exp, t))?;
        let agreement = Agreement::from_rows(&exp, &rows);
        for (w, (&(a, b), frac)) in exp.windows.iter().zip(agreement.fractions()).enumerate() {
            let agree = agreement.agree[w];
            let (lo, hi) = wilson_interval(agree, agreement.trials, 1.96);
            csv.row(vec![
                n.into(),
                scheme.degree().into(),
                scheme.blocks.into(),
                scheme.block_size.into(),
                a.into(),
                b.into(),
                agree.into(),
                agreement.trials.into(),
                frac.into(),
            ]);
            lines.push(format!(
                "n {n} (N = {} = {} x {}), window ({a}, {b}): agreement {frac:.3} [{lo:.3}, {hi:.3}]",
                scheme.degree(),
                scheme.blocks,
                scheme.block_size
            ));
            by_window[w].push(frac);
            entries.push(Entry {
                n,
                degree: scheme.degree(),
                blocks: scheme.blocks,
                block_size: scheme.block_size,
                a,
                b,
                agree,
                trials: agreement.trials,
                fraction: frac,
                wilson: [lo, hi],
            });
        }
    }
    let mut checks = Vec::new();
    for (w, fr) in by_window.iter().enumerate() {
        let increasing = fr.windows(2).all(|p| p[1] >= p[0]);
        checks.push(Check::new(format!("trend window {w}"), increasing, format!("fractions {fr:?} in n order")));
        if let Some(&last) = fr.last() {
            checks.push(Check::new(
                format!("largest n window {w}"),
                last >= AGREEMENT_TARGET,
                format!("agreement {last:.3} (target {AGREEMENT_TARGET})"),
            ));
        }
    }
    let summary = Summary {
        r: cfg.r,
        seed: cfg.seed,
        theta0: cfg.decouple.theta0,
        entries,
        checks: checks.clone(),
    };
    Ok(Report {
        command: Command::Decouple,
        files: vec![Artifact::csv("decouple.csv", csv), Artifact::json("decouple.json", &summary)],
        checks,
        lines,
    })
}
