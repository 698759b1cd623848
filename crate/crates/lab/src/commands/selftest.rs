//! Fast end-to-end checks of the numerical core, small enough to run on
//! every install.

use opuc_core::analysis::{lyapunov_closed_form, moment_bound};
use opuc_core::cmv::{banded_solve, build_cmv, inverse_iteration, resolvent_entry, resolvent_oracle};
use opuc_core::model::sample_para_model;
use opuc_core::phase::{compute_spectrum, DEFAULT_TOL};
use opuc_core::rng::trial_seed;
use opuc_core::{Complex, ParaModel, RngStream, TAU};
use serde::Serialize;

use super::{Check, Command, Report};
use crate::config::LabConfig;
use crate::error::LabResult;
use crate::output::Artifact;
use crate::runner::Runner;

#[derive(Serialize)]
struct Summary {
    seed: u64,
    checks: Vec<Check>,
}

pub fn run(cfg: &LabConfig, runner: &Runner) -> LabResult<Report> {
    let seed = cfg.seed;
    let mut checks = Vec::new();

    let free = compute_spectrum(&ParaModel::free(64, 0.0)?, DEFAULT_TOL)?;
    let err = free
        .angles
        .iter()
        .enumerate()
        .map(|(k, t)| (t - TAU * k as f64 / 64.0).abs())
        .fold(0.0, f64::max);
    checks.push(Check::new("free spectrum", err < 1e-10, format!("max error {err:.2e}")));

    let spectra = runner.trials(50, |t| {
        let m = sample_para_model(100, 0.9, trial_seed(seed, t))?;
        compute_spectrum(&m, DEFAULT_TOL).map_err(|e| e.in_trial(t))
    })?;
    let complete = spectra.iter().all(|s| s.len() == 100 && s.winding == 100);
    let worst = spectra.iter().map(|s| s.max_residual()).fold(0.0, f64::max);
    checks.push(Check::new(
        "completeness",
        complete && worst < 1e-8,
        format!("50 spectra at r = 0.9, max residual {worst:.2e}"),
    ));

    let m = sample_para_model(100, 0.5, seed)?;
    let c = build_cmv(&m);
    let mut eig = 0.0f64;
    for &t in &compute_spectrum(&m, DEFAULT_TOL)?.angles {
        eig = eig.max(inverse_iteration(&c, t)?.residual);
    }
    checks.push(Check::new("eigenvalue equivalence", eig < 1e-8, format!("max residual {eig:.2e}")));

    let mut rng = RngStream::new(seed, 7);
    let small = sample_para_model(12, 0.6, seed)?;
    let sc = build_cmv(&small);
    let mut rel = 0.0f64;
    for _ in 0..20 {
        let radius = 0.2 + 0.75 * rng.uniform();
        let z = Complex::from_polar(radius, TAU * rng.uniform());
        let k = (rng.uniform() * 12.0) as usize;
        let l = (rng.uniform() * 12.0) as usize;
        let a = resolvent_entry(&sc, z, k, l)?;
        let b = resolvent_oracle(&small, z, k, l)?;
        rel = rel.max((a - b).norm() / b.norm().max(1e-300));
    }
    checks.push(Check::new("resolvent oracle", rel < 1e-6, format!("max relative gap {rel:.2e}")));
    let rhs: Vec<Complex> = (0..12).map(|j| Complex::new(j as f64, 1.0)).collect();
    let x = banded_solve(&sc, Complex::new(0.0, 0.0), &rhs)?;
    let y = sc.adjoint_mul_vec(&rhs);
    let inv = x.iter().zip(&y).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    checks.push(Check::new("inverse is adjoint", inv < 1e-11, format!("max error {inv:.2e}")));

    let g = lyapunov_closed_form(0.5)?;
    checks.push(Check::new(
        "lyapunov closed form",
        (g - 0.068_476_9).abs() < 1e-7,
        format!("gamma(0.5) = {g:.9}"),
    ));
    let b = moment_bound(0.5)?;
    checks.push(Check::new("moment bound", (b - 4.0).abs() < 1e-12, format!("C(1/2) = {b}")));

    let summary = Summary {
        seed,
        checks: checks.clone(),
    };
    Ok(Report {
        command: Command::Selftest,
        files: vec![Artifact::json("selftest.json", &summary)],
        checks,
        lines: Vec::new(),
    })
}
