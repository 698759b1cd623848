use opuc_core::pointproc::{
    bernoulli_poisson_reference, count_histogram, joint_window_test, multiplicity_probability, poisson_distance,
    trial_counts, CountTable, MeanEstimate,
};
use opuc_core::stats::poisson_pmf;
use serde::Serialize;

use super::{Check, Command, Report};
use crate::config::LabConfig;
use crate::error::LabResult;
use crate::output::{Artifact, Cell, Csv};
use crate::runner::Runner;

pub const TV_LIMIT: f64 = 0.03;
pub const P0_TOLERANCE: f64 = 0.02;
pub const CORRELATION_LIMIT: f64 = 0.05;

#[derive(Serialize)]
struct Bernoulli {
    m: u64,
    p: f64,
    pmf: Vec<f64>,
}

#[derive(Serialize)]
struct WindowSummary {
    a: f64,
    b: f64,
    mean: f64,
    mean_stderr: f64,
    pmf: Vec<f64>,
    overflow: f64,
    poisson_pmf: Vec<f64>,
    tv_distance: Option<f64>,
    multiplicity: f64,
    multiplicity_stderr: f64,
    multiplicity_wilson: [f64; 2],
    multiplicity_bound: f64,
    bernoulli: Option<Bernoulli>,
}

#[derive(Serialize)]
struct JointEntry {
    counts: Vec<usize>,
    frequency: f64,
    poisson_product: f64,
}

#[derive(Serialize)]
struct Summary {
    n: usize,
    r: f64,
    trials: u64,
    seed: u64,
    theta0: f64,
    windows: Vec<WindowSummary>,
    correlation: Option<Vec<Vec<f64>>>,
    joint: Option<Vec<JointEntry>>,
    checks: Vec<Check>,
}

pub fn run(cfg: &LabConfig, runner: &Runner) -> LabResult<Report> {
    let exp = cfg.poisson_experiment()?;
    let rows = runner.trials(exp.trials, |t| trial_counts(&exp, t))?;
    let table = CountTable::from_rows(&exp, rows)?;

    let mut header = vec!["trial".to_string()];
    header.extend((0..exp.windows.len()).map(|w| format!("window{w}")));
    let mut csv = Csv::new(&header.iter().map(String::as_str).collect::<Vec<_>>());
    for (t, row) in table.rows.iter().enumerate() {
        let mut cells: Vec<Cell> = vec![t.into()];
        cells.extend(row.iter().map(|&c| Cell::from(c)));
        csv.row(cells);
    }

    let mut checks = Vec::new();
    let mut lines = Vec::new();
    let mut windows = Vec::new();
    let ln_n = (exp.degree() as f64).ln().floor() as u64;
    for (w, &(a, b)) in exp.windows.iter().enumerate() {
        let lambda = b - a;
        let hist = count_histogram(&table, w)?;
        let col: Vec<f64> = table.column(w)?.into_iter().map(|c| c as f64).collect();
        let mean = MeanEstimate::from_samples(&col);
        let kmax = hist.pmf.keys().next_back().copied().unwrap_or(0).max(4);
        let tv = poisson_distance(&hist, lambda)?;
        let mult = multiplicity_probability(&table, w)?;
        let p0 = hist.frequency(0);
        let p0_ref = (-lambda).exp();
        let label = format!("({a}, {b})");
        checks.push(Check::new(format!("tv {label}"), tv < TV_LIMIT, format!("TV to Poisson({lambda}) = {tv:.4}")));
        checks.push(Check::new(
            format!("pmf(0) {label}"),
            (p0 - p0_ref).abs() < P0_TOLERANCE,
            format!("pmf(0) = {p0:.4} vs {p0_ref:.4}"),
        ));
        checks.push(Check::new(
            format!("intensity {label}"),
            (mean.mean - lambda).abs() <= 3.0 * mean.stderr,
            format!("mean count {:.4} ± {:.4} vs {lambda}", mean.mean, mean.stderr),
        ));
        checks.push(Check::new(
            format!("multiplicity {label}"),
            mult.estimate <= mult.bound + 3.0 * mult.stderr,
            format!("P(>=2) = {:.4} ± {:.4}, bound {:.4}", mult.estimate, mult.stderr, mult.bound),
        ));
        lines.push(format!(
            "window {label}: mean {:.4}, pmf(0) {p0:.4}, TV {tv:.4}, P(>=2) {:.4}",
            mean.mean, mult.estimate
        ));
        let bernoulli = if ln_n >= 1 && lambda / ln_n as f64 <= 1.0 {
            let p = lambda / ln_n as f64;
            Some(Bernoulli {
                m: ln_n,
                p,
                pmf: (0..=ln_n).map(|k| bernoulli_poisson_reference(ln_n, p, k)).collect::<Result<_, _>>()?,
            })
        } else {
            None
        };
        windows.push(WindowSummary {
            a,
            b,
            mean: mean.mean,
            mean_stderr: mean.stderr,
            pmf: (0..=kmax).map(|k| hist.frequency(k)).collect(),
            overflow: hist.overflow,
            poisson_pmf: (0..=kmax).map(|k| poisson_pmf(lambda, k as u64)).collect(),
            tv_distance: Some(tv),
            multiplicity: mult.estimate,
            multiplicity_stderr: mult.stderr,
            multiplicity_wilson: [mult.wilson.0, mult.wilson.1],
            multiplicity_bound: mult.bound,
            bernoulli,
        });
    }

    let (correlation, joint) = if exp.windows.len() >= 2 {
        let j = joint_window_test(&table)?;
        for i in 0..exp.windows.len() {
            for k in i + 1..exp.windows.len() {
                let rho = j.correlation[i][k];
                checks.push(Check::new(
                    format!("correlation {i}-{k}"),
                    rho.abs() < CORRELATION_LIMIT,
                    format!("count correlation {rho:.4}"),
                ));
                lines.push(format!("windows {i}, {k}: correlation {rho:.4}"));
            }
        }
        let entries = j
            .joint
            .iter()
            .map(|(k, f)| JointEntry {
                counts: k.clone(),
                frequency: *f,
                poisson_product: j.poisson_product[k],
            })
            .collect();
        (Some(j.correlation.clone()), Some(entries))
    } else {
        (None, None)
    };

    let summary = Summary {
        n: exp.degree(),
        r: exp.r,
        trials: exp.trials,
        seed: exp.seed,
        theta0: exp.theta0,
        windows,
        correlation,
        joint,
        checks: checks.clone(),
    };
    Ok(Report {
        command: Command::Poisson,
        files: vec![Artifact::csv("counts.csv", csv), Artifact::json("poisson.json", &summary)],
        checks,
        lines,
    })
}
