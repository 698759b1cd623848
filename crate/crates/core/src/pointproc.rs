//! Ensembles of spectra and the window statistics built on them.
//!
//! Windows are given in units of the mean spacing: `(a, b)` stands for the
//! open arc `(θ0 + 2πa/N, θ0 + 2πb/N)` where `N` is the degree actually
//! sampled. Per-trial work is exposed as pure functions of
//! `(config, trial)` so that callers can run trials in any order and fold
//! the results in trial order.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::cmv::decouple_model;
use crate::error::{Error, Result};
use crate::model::{sample_para_model, ParaModel, VerblunskySequence, BOUNDARY_STREAM};
use crate::phase::{arc_count, arc_of, compute_spectrum, phase_probe, window_count, Spectrum, DEFAULT_TOL};
use crate::rng::{trial_seed, RngStream};
use crate::stats::{binomial_pmf, correlation, poisson_pmf, wilson_interval, Moments};
use crate::TAU;

/// Stream for the angles of decoupling cuts.
pub const CUT_STREAM: u64 = BOUNDARY_STREAM | 1;
/// Counts at or above this value share one histogram bin.
pub const HISTOGRAM_CAP: usize = 64;

/// `blocks` equal blocks of `block_size` each.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DecoupleScheme {
    pub blocks: usize,
    pub block_size: usize,
}

impl DecoupleScheme {
    pub fn new(blocks: usize, block_size: usize) -> Result<Self> {
        if blocks == 0 || block_size == 0 {
            return Err(Error::Domain("decoupling needs positive block count and size"));
        }
        Ok(DecoupleScheme { blocks, block_size })
    }

    /// `[ln n]` blocks of size `[n / ln n]`.
    pub fn logarithmic(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::Domain("logarithmic scheme needs n >= 3"));
        }
        let ln = (n as f64).ln();
        Self::new(ln.floor() as usize, (n as f64 / ln).floor() as usize)
    }

    pub fn degree(&self) -> usize {
        self.blocks * self.block_size
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub n: usize,
    pub r: f64,
    pub trials: u64,
    pub seed: u64,
    pub theta0: f64,
    pub windows: Vec<(f64, f64)>,
    pub decouple: Option<DecoupleScheme>,
}

impl ExperimentConfig {
    pub fn new(n: usize, r: f64, trials: u64, seed: u64, windows: Vec<(f64, f64)>) -> Result<Self> {
        let cfg = ExperimentConfig {
            n,
            r,
            trials,
            seed,
            theta0: 0.0,
            windows,
            decouple: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Degree of the sampled models: `n`, or the scheme's `N` when
    /// decoupling is set.
    pub fn degree(&self) -> usize {
        self.decouple.map_or(self.n, |s| s.degree())
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Domain("degree must be positive"));
        }
        if !(0.0..1.0).contains(&self.r) {
            return Err(Error::Domain("radius must lie in [0, 1)"));
        }
        if self.trials == 0 {
            return Err(Error::Domain("need at least one trial"));
        }
        if !self.theta0.is_finite() {
            return Err(Error::Domain("theta0 must be finite"));
        }
        let scale = self.degree() as f64;
        for &(a, b) in &self.windows {
            if !(a.is_finite() && b.is_finite()) {
                return Err(Error::Domain("window ends must be finite"));
            }
            arc_of(self.theta0, a, b, self.degree())?;
        }
        for (i, &(a, b)) in self.windows.iter().enumerate() {
            for &(c, d) in &self.windows[i + 1..] {
                if arcs_overlap(a, b - a, c, d - c, scale) {
                    return Err(Error::Domain("windows must be pairwise disjoint"));
                }
            }
        }
        Ok(())
    }
}

/// Do the open arcs `(a, a + wa)` and `(c, c + wc)` on a circle of
/// circumference `scale` intersect?
fn arcs_overlap(a: f64, wa: f64, c: f64, wc: f64, scale: f64) -> bool {
    if wa <= 0.0 || wc <= 0.0 {
        return false;
    }
    let o = (c - a).rem_euclid(scale);
    o < wa || o + wc > scale
}

/// The model of trial `trial`, decoupled when the config asks for it.
pub fn trial_model(cfg: &ExperimentConfig, trial: u64) -> Result<ParaModel> {
    let model = coupled_model(cfg, trial)?;
    match cfg.decouple {
        Some(s) => decouple_trial(&model, s, cfg.seed, trial),
        None => Ok(model),
    }
}

/// The undecoupled model of trial `trial`; `r = 0` gives the free model
/// with the same boundary draw.
pub fn coupled_model(cfg: &ExperimentConfig, trial: u64) -> Result<ParaModel> {
    let seed = trial_seed(cfg.seed, trial);
    let n = cfg.degree();
    if cfg.r == 0.0 {
        let angle = TAU * RngStream::new(seed, BOUNDARY_STREAM).uniform();
        return Ok(ParaModel::new(VerblunskySequence::free(n - 1), angle, seed));
    }
    sample_para_model(n, cfg.r, seed)
}

fn decouple_trial(model: &ParaModel, scheme: DecoupleScheme, seed: u64, trial: u64) -> Result<ParaModel> {
    let mut rng = RngStream::new(trial_seed(seed, trial), CUT_STREAM);
    decouple_model(model, scheme.block_size, &mut rng)
}

pub fn trial_spectrum(cfg: &ExperimentConfig, trial: u64) -> Result<Spectrum> {
    trial_model(cfg, trial)
        .and_then(|m| compute_spectrum(&m, DEFAULT_TOL))
        .map_err(|e| e.in_trial(trial))
}

/// All spectra of the experiment, in trial order.
pub fn run_ensemble(cfg: &ExperimentConfig) -> Result<Vec<Spectrum>> {
    cfg.validate()?;
    (0..cfg.trials).map(|t| trial_spectrum(cfg, t)).collect()
}

/// Window counts of trial `trial`, read off the lifted phase without a
/// full solve.
pub fn trial_counts(cfg: &ExperimentConfig, trial: u64) -> Result<Vec<usize>> {
    let model = trial_model(cfg, trial).map_err(|e| e.in_trial(trial))?;
    model_counts(cfg, &model).map_err(|e| e.in_trial(trial))
}

fn model_counts(cfg: &ExperimentConfig, model: &ParaModel) -> Result<Vec<usize>> {
    cfg.windows
        .iter()
        .map(|&(a, b)| {
            let (start, width) = arc_of(cfg.theta0, a, b, cfg.degree())?;
            arc_count(model, start, width)
        })
        .collect()
}

/// Per-trial window counts; `rows[t][w]` is the count of window `w` in
/// trial `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct CountTable {
    pub windows: Vec<(f64, f64)>,
    pub rows: Vec<Vec<usize>>,
}

impl CountTable {
    pub fn from_rows(cfg: &ExperimentConfig, rows: Vec<Vec<usize>>) -> Result<Self> {
        if rows.iter().any(|r| r.len() != cfg.windows.len()) {
            return Err(Error::Domain("count rows must have one entry per window"));
        }
        Ok(CountTable {
            windows: cfg.windows.clone(),
            rows,
        })
    }

    pub fn from_spectra(cfg: &ExperimentConfig, spectra: &[Spectrum]) -> Result<Self> {
        let rows = spectra
            .iter()
            .map(|s| {
                cfg.windows
                    .iter()
                    .map(|&(a, b)| window_count(s, cfg.theta0, a, b, cfg.degree()))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_rows(cfg, rows)
    }

    pub fn trials(&self) -> usize {
        self.rows.len()
    }

    pub fn column(&self, window: usize) -> Result<Vec<usize>> {
        if window >= self.windows.len() {
            return Err(Error::Domain("window index out of range"));
        }
        Ok(self.rows.iter().map(|r| r[window]).collect())
    }
}

/// Serial count table over all trials.
pub fn count_table(cfg: &ExperimentConfig) -> Result<CountTable> {
    cfg.validate()?;
    let rows = (0..cfg.trials).map(|t| trial_counts(cfg, t)).collect::<Result<Vec<_>>>()?;
    CountTable::from_rows(cfg, rows)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CountHistogram {
    pub window: (f64, f64),
    /// Frequencies of counts below [`HISTOGRAM_CAP`].
    pub pmf: BTreeMap<usize, f64>,
    /// Frequency of counts at or above the cap.
    pub overflow: f64,
    pub trials: usize,
}

impl CountHistogram {
    pub fn frequency(&self, k: usize) -> f64 {
        if k >= HISTOGRAM_CAP {
            return 0.0;
        }
        self.pmf.get(&k).copied().unwrap_or(0.0)
    }

    pub fn mean(&self) -> f64 {
        self.pmf.iter().map(|(k, f)| *k as f64 * f).sum()
    }
}

pub fn count_histogram(table: &CountTable, window: usize) -> Result<CountHistogram> {
    let col = table.column(window)?;
    if col.is_empty() {
        return Err(Error::Domain("histogram needs at least one trial"));
    }
    let mut tally: BTreeMap<usize, u64> = BTreeMap::new();
    let mut over = 0u64;
    for &c in &col {
        if c >= HISTOGRAM_CAP {
            over += 1;
        } else {
            *tally.entry(c).or_default() += 1;
        }
    }
    let t = col.len() as f64;
    Ok(CountHistogram {
        window: table.windows[window],
        pmf: tally.into_iter().map(|(k, c)| (k, c as f64 / t)).collect(),
        overflow: over as f64 / t,
        trials: col.len(),
    })
}

/// Total variation distance between the histogram and Poisson(`lambda`),
/// with the Poisson tail lumped at the histogram cap.
pub fn poisson_distance(hist: &CountHistogram, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Domain("lambda must be positive"));
    }
    let mut tv = 0.0;
    let mut head = 0.0;
    for k in 0..HISTOGRAM_CAP {
        let p = poisson_pmf(lambda, k as u64);
        head += p;
        tv += (hist.frequency(k) - p).abs();
    }
    tv += (hist.overflow - (1.0 - head).max(0.0)).abs();
    Ok(0.5 * tv)
}

#[derive(Clone, Debug, PartialEq)]
pub struct JointTest {
    pub windows: Vec<(f64, f64)>,
    /// Empirical joint pmf of count tuples.
    pub joint: BTreeMap<Vec<usize>, f64>,
    /// `Π_i Poisson(b_i − a_i)(k_i)` for every observed tuple.
    pub poisson_product: BTreeMap<Vec<usize>, f64>,
    pub covariance: Vec<Vec<f64>>,
    pub correlation: Vec<Vec<f64>>,
}

impl JointTest {
    pub fn frequency(&self, counts: &[usize]) -> f64 {
        self.joint.get(counts).copied().unwrap_or(0.0)
    }
}

pub fn joint_window_test(table: &CountTable) -> Result<JointTest> {
    let m = table.windows.len();
    if m < 2 {
        return Err(Error::Domain("joint test needs at least two windows"));
    }
    if table.rows.is_empty() {
        return Err(Error::Domain("joint test needs at least one trial"));
    }
    let t = table.trials() as f64;
    let mut joint: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    for r in &table.rows {
        *joint.entry(r.clone()).or_default() += 1.0 / t;
    }
    let poisson_product = joint
        .keys()
        .map(|k| {
            let p = k
                .iter()
                .zip(&table.windows)
                .map(|(&c, &(a, b))| if b > a { poisson_pmf(b - a, c as u64) } else { f64::from(u8::from(c == 0)) })
                .product();
            (k.clone(), p)
        })
        .collect();
    let cols: Vec<Vec<f64>> = (0..m)
        .map(|w| table.rows.iter().map(|r| r[w] as f64).collect())
        .collect();
    let means: Vec<f64> = cols.iter().map(|c| Moments::from_slice(c).mean()).collect();
    let mut covariance = alloc::vec![alloc::vec![0.0; m]; m];
    let mut corr = alloc::vec![alloc::vec![0.0; m]; m];
    for i in 0..m {
        for j in 0..m {
            let s: f64 = cols[i].iter().zip(&cols[j]).map(|(x, y)| (x - means[i]) * (y - means[j])).sum();
            covariance[i][j] = if t > 1.0 { s / (t - 1.0) } else { 0.0 };
            corr[i][j] = if i == j { 1.0 } else { correlation(&cols[i], &cols[j]) };
        }
    }
    Ok(JointTest {
        windows: table.windows.clone(),
        joint,
        poisson_product,
        covariance,
        correlation: corr,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Multiplicity {
    pub estimate: f64,
    pub stderr: f64,
    /// 95% Wilson interval.
    pub wilson: (f64, f64),
    /// `(b − a)² / 2`.
    pub bound: f64,
}

/// Frequency of two or more zeros in the window.
pub fn multiplicity_probability(table: &CountTable, window: usize) -> Result<Multiplicity> {
    let col = table.column(window)?;
    if col.is_empty() {
        return Err(Error::Domain("need at least one trial"));
    }
    let hits = col.iter().filter(|&&c| c >= 2).count() as u64;
    let t = col.len() as u64;
    let p = hits as f64 / t as f64;
    let (a, b) = table.windows[window];
    Ok(Multiplicity {
        estimate: p,
        stderr: (p * (1.0 - p) / t as f64).sqrt(),
        wilson: wilson_interval(hits, t, 1.96),
        bound: 0.5 * (b - a) * (b - a),
    })
}

/// `η'_N(θ0)` of trial `trial` on the coupled model.
pub fn trial_eta_prime(cfg: &ExperimentConfig, trial: u64, theta0: f64) -> Result<f64> {
    let model = coupled_model(cfg, trial).map_err(|e| e.in_trial(trial))?;
    Ok(phase_probe(&model, theta0).map_err(|e| e.in_trial(trial))?.eta_prime)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub trials: u64,
}

impl MeanEstimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let m = Moments::from_slice(xs);
        MeanEstimate {
            mean: m.mean(),
            stderr: m.stderr(),
            trials: m.count(),
        }
    }
}

/// Monte Carlo mean of `η'_N(θ0)`; the config's `θ0` is used unless
/// `theta0` is given.
pub fn phase_derivative_mean(cfg: &ExperimentConfig, theta0: Option<f64>) -> Result<MeanEstimate> {
    cfg.validate()?;
    if cfg.trials < 30 {
        return Err(Error::Domain("phase-derivative mean needs at least 30 trials"));
    }
    let th = theta0.unwrap_or(cfg.theta0);
    let xs = (0..cfg.trials).map(|t| trial_eta_prime(cfg, t, th)).collect::<Result<Vec<_>>>()?;
    Ok(MeanEstimate::from_samples(&xs))
}

/// Per-window agreement of counts between the coupled model of trial
/// `trial` and its decoupled partner.
pub fn trial_agreement(cfg: &ExperimentConfig, trial: u64) -> Result<Vec<bool>> {
    let scheme = cfg
        .decouple
        .ok_or(Error::Domain("agreement needs a decoupling scheme"))?;
    let run = || -> Result<Vec<bool>> {
        let coupled = coupled_model(cfg, trial)?;
        let split = decouple_trial(&coupled, scheme, cfg.seed, trial)?;
        let a = model_counts(cfg, &coupled)?;
        let b = model_counts(cfg, &split)?;
        Ok(a.iter().zip(&b).map(|(x, y)| x == y).collect())
    };
    run().map_err(|e| e.in_trial(trial))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Agreement {
    pub windows: Vec<(f64, f64)>,
    pub agree: Vec<u64>,
    pub trials: u64,
}

impl Agreement {
    pub fn from_rows(cfg: &ExperimentConfig, rows: &[Vec<bool>]) -> Self {
        let mut agree = alloc::vec![0u64; cfg.windows.len()];
        for r in rows {
            for (a, &ok) in agree.iter_mut().zip(r) {
                *a += u64::from(ok);
            }
        }
        Agreement {
            windows: cfg.windows.clone(),
            agree,
            trials: rows.len() as u64,
        }
    }

    pub fn fractions(&self) -> Vec<f64> {
        self.agree.iter().map(|&a| a as f64 / self.trials as f64).collect()
    }
}

pub fn decoupling_agreement(cfg: &ExperimentConfig) -> Result<Agreement> {
    cfg.validate()?;
    let rows = (0..cfg.trials).map(|t| trial_agreement(cfg, t)).collect::<Result<Vec<_>>>()?;
    Ok(Agreement::from_rows(cfg, &rows))
}

/// `C(m, k) p^k (1 − p)^{m−k}`: the finite-`m` Bernoulli sum next to its
/// Poisson limit.
pub fn bernoulli_poisson_reference(m: u64, p: f64, k: u64) -> Result<f64> {
    binomial_pmf(m, p, k)
}

/// Windows `(j·w, (j+1)·w)` for `j < parts`, tiling `[0, parts·w)`.
pub fn partition_windows(parts: usize, width: f64) -> Vec<(f64, f64)> {
    (0..parts).map(|j| (j as f64 * width, (j + 1) as f64 * width)).collect()
}
