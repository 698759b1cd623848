//! Estimators: fractional resolvent moments, exponential fits, Lyapunov
//! exponents and eigenvector localization.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::cmv::{build_cmv, inverse_iteration, EigenPair};
use crate::error::{Error, Result};
use crate::model::{sample_para_model, uniform_disk, ParaModel};
use crate::phase::{compute_spectrum, DEFAULT_TOL};
use crate::rng::{mix64, trial_seed, RngStream};
use crate::stats::{linear_fit, Moments};
use crate::Complex;

/// LU pivots below this mark a draw as near-singular for moment estimates.
pub const REJECT_PIVOT: f64 = 1e-12;
/// Largest tolerated share of rejected draws.
pub const MAX_REJECT_RATE: f64 = 0.10;
/// Entries at or below this modulus are left out of localization fits.
pub const LOCALIZATION_FLOOR: f64 = 1e-13;
/// Batches used for the Lyapunov standard error.
pub const LYAPUNOV_BATCHES: usize = 20;
/// Stream for the i.i.d. coefficients of the Lyapunov estimator.
const LYAPUNOV_STREAM: u64 = (1 << 63) | 2;

/// `s` must lie in `(0, 1)`, the bound of the moment method.
pub fn moment_bound(s: f64) -> Result<f64> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::Domain("moment exponent must lie in (0, 1)"));
    }
    Ok(2f64.powf(2.0 - s) / (core::f64::consts::FRAC_PI_2 * s).cos())
}

/// Setup of a fractional-moment run.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentConfig {
    pub n: usize,
    pub r: f64,
    pub s: f64,
    pub z: Complex,
    pub seed: u64,
    /// Row index `k` of `F_{k, k+d}`.
    pub row: usize,
    pub distances: Vec<usize>,
}

impl MomentConfig {
    /// Row `n/4` and distances `0..=n/2`, at `z = e^{iθ}`.
    pub fn new(n: usize, r: f64, s: f64, theta: f64, seed: u64) -> Result<Self> {
        moment_bound(s)?;
        if n < 4 {
            return Err(Error::Domain("moment profile needs n >= 4"));
        }
        Ok(MomentConfig {
            n,
            r,
            s,
            z: Complex::from_polar(1.0, theta),
            seed,
            row: n / 4,
            distances: (0..=n / 2).collect(),
        })
    }
}

/// `|F_{k, k+d}(z)|^s` for one trial, with the number of near-singular
/// draws it took to get there.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentSample {
    pub values: Vec<f64>,
    pub rejected: u32,
}

/// `|F_{k, k+d}(z)|^s` for one model, or `NearSingular` when `C − z` is.
pub fn fractional_moment_row(model: &ParaModel, z: Complex, s: f64, row: usize, distances: &[usize]) -> Result<Vec<f64>> {
    let c = build_cmv(model);
    let n = c.dim();
    if row >= n || distances.iter().any(|d| row + d >= n) {
        return Err(Error::Domain("moment index out of range"));
    }
    let lu = c.factor_shifted(z)?;
    if lu.min_pivot() < REJECT_PIVOT {
        return Err(Error::NearSingular {
            re: z.re,
            im: z.im,
            pivot: lu.min_pivot(),
        });
    }
    let mut g = alloc::vec![Complex::new(0.0, 0.0); n];
    g[row] = Complex::new(1.0, 0.0);
    lu.solve_transpose_in_place(&mut g);
    Ok(distances
        .iter()
        .map(|&d| {
            let delta = if d == 0 { 1.0 } else { 0.0 };
            (Complex::new(delta, 0.0) + 2.0 * z * g[row + d]).norm().powf(s)
        })
        .collect())
}

/// Trial `trial`: resample with fresh coefficients while the draw is
/// near-singular. Gives up after as many attempts as the rejection budget
/// could ever allow for a single trial.
pub fn fractional_moment_sample(cfg: &MomentConfig, trial: u64) -> Result<MomentSample> {
    let mut rejected = 0u32;
    loop {
        let seed = if rejected == 0 {
            trial_seed(cfg.seed, trial)
        } else {
            trial_seed(mix64(cfg.seed ^ u64::from(rejected)), trial)
        };
        let model = sample_para_model(cfg.n, cfg.r, seed)?;
        match fractional_moment_row(&model, cfg.z, cfg.s, cfg.row, &cfg.distances) {
            Ok(values) => return Ok(MomentSample { values, rejected }),
            Err(Error::NearSingular { .. }) if rejected < 64 => rejected += 1,
            Err(e) => return Err(e),
        }
    }
}

/// Monte Carlo estimates of `E |F_{k, k+d}|^s`.
#[derive(Clone, Debug, PartialEq)]
pub struct DecayProfile {
    pub s: f64,
    pub distances: Vec<usize>,
    pub moments: Vec<f64>,
    pub stderrs: Vec<f64>,
    pub trials: u64,
    pub rejected: u64,
}

impl DecayProfile {
    /// Fold per-trial samples, in order.
    pub fn aggregate(cfg: &MomentConfig, samples: &[MomentSample]) -> Result<Self> {
        let mut acc = alloc::vec![Moments::new(); cfg.distances.len()];
        let mut rejected = 0u64;
        for smp in samples {
            rejected += u64::from(smp.rejected);
            for (a, v) in acc.iter_mut().zip(&smp.values) {
                a.push(*v);
            }
        }
        let trials = samples.len() as u64;
        let attempts = trials + rejected;
        if attempts > 0 && rejected as f64 > MAX_REJECT_RATE * attempts as f64 {
            return Err(Error::Diagnostics {
                rejected: rejected as usize,
                attempts: attempts as usize,
            });
        }
        Ok(DecayProfile {
            s: cfg.s,
            distances: cfg.distances.clone(),
            moments: acc.iter().map(Moments::mean).collect(),
            stderrs: acc.iter().map(Moments::stderr).collect(),
            trials,
            rejected,
        })
    }
}

impl DecayProfile {
    /// The profile without `d = 0`, where `F` carries the extra `δ_{kk}`.
    pub fn off_diagonal(&self) -> DecayProfile {
        let keep: Vec<usize> = (0..self.distances.len()).filter(|&i| self.distances[i] > 0).collect();
        DecayProfile {
            s: self.s,
            distances: keep.iter().map(|&i| self.distances[i]).collect(),
            moments: keep.iter().map(|&i| self.moments[i]).collect(),
            stderrs: keep.iter().map(|&i| self.stderrs[i]).collect(),
            trials: self.trials,
            rejected: self.rejected,
        }
    }
}

/// Serial driver over `trials` independent models.
pub fn fractional_moment_profile(n: usize, r: f64, s: f64, theta: f64, trials: u64, seed: u64) -> Result<DecayProfile> {
    if trials == 0 {
        return Err(Error::Domain("need at least one trial"));
    }
    let cfg = MomentConfig::new(n, r, s, theta, seed)?;
    let samples = (0..trials)
        .map(|t| fractional_moment_sample(&cfg, t))
        .collect::<Result<Vec<_>>>()?;
    DecayProfile::aggregate(&cfg, &samples)
}

/// `moment ≈ C e^{−D d}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExpFit {
    pub c: f64,
    pub d: f64,
    /// Standard error of `d` from the regression residuals.
    pub d_stderr: f64,
    pub r2: f64,
}

/// Least squares on `ln moment` over all listed distances.
pub fn fit_exponential(profile: &DecayProfile) -> Result<ExpFit> {
    if profile.distances.len() < 3 {
        return Err(Error::Domain("fit needs at least three distances"));
    }
    if profile.moments.iter().any(|m| !(*m > 0.0)) {
        return Err(Error::Domain("moments must be positive to fit"));
    }
    let x: Vec<f64> = profile.distances.iter().map(|&d| d as f64).collect();
    let y: Vec<f64> = profile.moments.iter().map(|m| m.ln()).collect();
    let f = linear_fit(&x, &y)?;
    Ok(ExpFit {
        c: f.intercept.exp(),
        d: -f.slope,
        d_stderr: f.slope_stderr,
        r2: f.r2,
    })
}

/// `γ(r) = (r² + (1 − r²) ln(1 − r²)) / (2r²)`.
pub fn lyapunov_closed_form(r: f64) -> Result<f64> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::Domain("radius must lie in (0, 1)"));
    }
    let x = r * r;
    if x < 0.05 {
        // Σ_{k>=2} x^{k-1} / (2k(k-1)); the direct form cancels badly here
        let mut sum = 0.0;
        let mut p = 1.0;
        for k in 2..40u32 {
            p *= x;
            sum += p / (2.0 * f64::from(k * (k - 1)));
        }
        return Ok(sum);
    }
    Ok((x + (1.0 - x) * (-x).ln_1p()) / (2.0 * x))
}

#[derive(Clone, Debug, PartialEq)]
pub struct LyapunovEstimate {
    pub gamma: f64,
    /// Batch-means standard error.
    pub stderr: f64,
    /// `(step, running estimate)` at evenly spaced checkpoints.
    pub trace: Vec<(usize, f64)>,
}

/// `γ̂ = (1/steps) ln ‖A(α_{steps-1}, z) ⋯ A(α_0, z)‖` with i.i.d. `α`
/// uniform in the disk of radius `r` (`r = 0` gives the free product).
pub fn lyapunov_estimate(r: f64, z: Complex, steps: usize, seed: u64) -> Result<LyapunovEstimate> {
    if steps == 0 {
        return Err(Error::Domain("need at least one step"));
    }
    if !(0.0..1.0).contains(&r) {
        return Err(Error::Domain("radius must lie in [0, 1)"));
    }
    let mut rng = RngStream::new(seed, LYAPUNOV_STREAM);
    let mut m = [[Complex::new(1.0, 0.0), Complex::new(0.0, 0.0)], [Complex::new(0.0, 0.0), Complex::new(1.0, 0.0)]];
    let mut log_norm = 0.0;
    let batch = (steps / LYAPUNOV_BATCHES).max(1);
    let mut batch_start = 0.0;
    let mut batches = Moments::new();
    let every = (steps / 100).max(1);
    let mut trace = Vec::with_capacity(steps / every + 1);
    for k in 0..steps {
        let a = if r == 0.0 { Complex::new(0.0, 0.0) } else { uniform_disk(&mut rng, r)? };
        let rho = (1.0 - a.norm_sqr()).sqrt();
        // A = ρ⁻¹ [[z, −ᾱ], [−αz, 1]]; the ρ⁻¹ goes into the log
        let [[m00, m01], [m10, m11]] = m;
        m = [
            [z * m00 - a.conj() * m10, z * m01 - a.conj() * m11],
            [-a * z * m00 + m10, -a * z * m01 + m11],
        ];
        let scale = (m[0][0].norm_sqr() + m[0][1].norm_sqr())
            .max(m[1][0].norm_sqr() + m[1][1].norm_sqr())
            .sqrt();
        for row in &mut m {
            for e in row.iter_mut() {
                *e /= scale;
            }
        }
        log_norm += scale.ln() - rho.ln();
        if (k + 1) % batch == 0 && (k + 1) / batch <= LYAPUNOV_BATCHES {
            batches.push((log_norm - batch_start) / batch as f64);
            batch_start = log_norm;
        }
        if (k + 1) % every == 0 || k + 1 == steps {
            trace.push((k + 1, log_norm / (k + 1) as f64));
        }
    }
    Ok(LyapunovEstimate {
        gamma: log_norm / steps as f64,
        stderr: batches.stderr(),
        trace,
    })
}

/// Decay of one eigenvector away from its peak.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalizationProfile {
    /// Smallest index of maximal modulus.
    pub center: usize,
    pub log_abs: Vec<f64>,
    /// `−slope` of `ln |v_m|` against `|m − center|`; `+∞` when nothing but
    /// the peak clears [`LOCALIZATION_FLOOR`].
    pub fit_rate: f64,
    pub fit_r2: f64,
}

pub fn localization_profile(vector: &[Complex]) -> LocalizationProfile {
    let abs: Vec<f64> = vector.iter().map(|v| v.norm()).collect();
    let mut center = 0;
    for (m, a) in abs.iter().enumerate() {
        if *a > abs[center] {
            center = m;
        }
    }
    let log_abs: Vec<f64> = abs.iter().map(|a| a.ln()).collect();
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (m, a) in abs.iter().enumerate() {
        if *a > LOCALIZATION_FLOOR {
            x.push(m.abs_diff(center) as f64);
            y.push(log_abs[m]);
        }
    }
    let (fit_rate, fit_r2) = match linear_fit(&x, &y) {
        Ok(f) => (-f.slope, f.r2),
        Err(_) => (f64::INFINITY, 0.0),
    };
    LocalizationProfile {
        center,
        log_abs,
        fit_rate,
        fit_r2,
    }
}

/// All eigenpairs of the CMV matrix, seeded from the phase solver.
pub fn eigenpairs(model: &ParaModel) -> Result<Vec<EigenPair>> {
    let spectrum = compute_spectrum(model, DEFAULT_TOL)?;
    let c = build_cmv(model);
    spectrum.angles.iter().map(|&t| inverse_iteration(&c, t)).collect()
}

/// Eigenvectors whose localization center lies within `halfwidth` of a
/// decoupling boundary. A cut at `α_k` separates indices `k` and `k + 1`,
/// so both count as boundary indices; the final `β` is not a cut.
pub fn count_bad_eigenfunctions(model: &ParaModel, halfwidth: usize) -> Result<usize> {
    let cuts = model.seq().cuts();
    if cuts.is_empty() {
        return Ok(0);
    }
    let pairs = eigenpairs(model)?;
    Ok(pairs
        .iter()
        .filter(|p| {
            let c = localization_profile(&p.vector).center;
            cuts.iter().any(|&k| c.abs_diff(k) <= halfwidth || c.abs_diff(k + 1) <= halfwidth)
        })
        .count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cmv::decouple_model;
    use crate::model::VerblunskySequence;

    /// `−(1/r²) ∫_0^r ρ ln(1 − ρ²) dρ` by composite Gauss–Legendre.
    fn disk_integral(r: f64) -> f64 {
        const NODES: [f64; 5] = [0.0, 0.538_469_310_105_683_1, -0.538_469_310_105_683_1, 0.906_179_845_938_664, -0.906_179_845_938_664];
        const WEIGHTS: [f64; 5] = [
            0.568_888_888_888_888_9,
            0.478_628_670_499_366_5,
            0.478_628_670_499_366_5,
            0.236_926_885_056_189_1,
            0.236_926_885_056_189_1,
        ];
        let panels = 2000;
        let h = r / panels as f64;
        let mut total = 0.0;
        for p in 0..panels {
            let mid = (p as f64 + 0.5) * h;
            for (x, w) in NODES.iter().zip(WEIGHTS) {
                let rho = mid + 0.5 * h * x;
                total += w * 0.5 * h * rho * (-rho * rho).ln_1p();
            }
        }
        -total / (r * r)
    }

    #[test]
    fn closed_form_against_quadrature() {
        for r in [0.1, 0.3, 0.5, 0.7, 0.9] {
            let g = lyapunov_closed_form(r).unwrap();
            assert!((g - disk_integral(r)).abs() < 1e-10, "{r}");
            assert!(g > 0.0);
        }
        assert!((lyapunov_closed_form(0.5).unwrap() - 0.068_476_9).abs() < 1e-7);
    }

    #[test]
    fn closed_form_small_radius() {
        let r = 1e-3;
        let g = lyapunov_closed_form(r).unwrap();
        assert!((g / (r * r / 4.0) - 1.0).abs() < 1e-5);
        // the two branches meet
        let x = 0.05f64;
        let direct = (x + (1.0 - x) * (-x).ln_1p()) / (2.0 * x);
        assert!((lyapunov_closed_form(x.sqrt()).unwrap() - direct).abs() < 1e-14);
        assert!(lyapunov_closed_form(0.0).is_err());
        assert!(lyapunov_closed_form(1.0).is_err());
    }

    #[test]
    fn free_transfer_product_does_not_grow() {
        let e = lyapunov_estimate(0.0, Complex::from_polar(1.0, 1.0), 10_000, 3).unwrap();
        assert!(e.gamma.abs() < 1e-12);
    }

    #[test]
    fn estimate_tracks_closed_form() {
        let e = lyapunov_estimate(0.5, Complex::from_polar(1.0, 1.0), 50_000, 11).unwrap();
        let g = lyapunov_closed_form(0.5).unwrap();
        assert!((e.gamma - g).abs() < 5.0 * e.stderr + 1e-3, "{} {}", e.gamma, e.stderr);
        assert_eq!(e.trace.last().unwrap().0, 50_000);
    }

    #[test]
    fn moment_bound_at_one_half() {
        assert!((moment_bound(0.5).unwrap() - 4.0).abs() < 1e-12);
        assert!(moment_bound(1.0).is_err());
    }

    #[test]
    fn at_the_origin_f_is_the_identity() {
        let m = sample_para_model(20, 0.5, 4).unwrap();
        let v = fractional_moment_row(&m, Complex::new(0.0, 0.0), 0.5, 5, &[0, 1, 2, 7]).unwrap();
        assert_eq!(v[0], 1.0);
        assert!(v[1..].iter().all(|x| *x == 0.0));
    }

    #[test]
    fn exact_exponential_fit() {
        let distances: Vec<usize> = (0..12).collect();
        let moments = distances.iter().map(|&d| 2.0 * (-0.3 * d as f64).exp()).collect();
        let p = DecayProfile {
            s: 0.5,
            stderrs: alloc::vec![0.0; 12],
            distances,
            moments,
            trials: 1,
            rejected: 0,
        };
        let f = fit_exponential(&p).unwrap();
        assert!((f.d - 0.3).abs() < 1e-10);
        assert!((f.c - 2.0).abs() < 1e-10);
        assert!((f.r2 - 1.0).abs() < 1e-12);
        assert_eq!(p.off_diagonal().distances[0], 1);
        assert_eq!(p.off_diagonal().moments.len(), 11);
        let flat = DecayProfile {
            moments: alloc::vec![0.7; 12],
            ..p.clone()
        };
        assert!(fit_exponential(&flat).unwrap().d.abs() < 1e-15);
        let bad = DecayProfile {
            moments: alloc::vec![0.0; 12],
            ..p
        };
        assert!(fit_exponential(&bad).is_err());
    }

    #[test]
    fn too_many_rejections_is_a_diagnostic() {
        let cfg = MomentConfig::new(8, 0.5, 0.5, 1.0, 0).unwrap();
        let s = MomentSample {
            values: alloc::vec![1.0; cfg.distances.len()],
            rejected: 1,
        };
        let err = DecayProfile::aggregate(&cfg, &[s.clone(), s]).unwrap_err();
        assert!(matches!(err, Error::Diagnostics { rejected: 2, attempts: 4 }));
    }

    #[test]
    fn delta_vector_profile() {
        let mut v = alloc::vec![Complex::new(0.0, 0.0); 9];
        v[4] = Complex::new(0.0, 1.0);
        let p = localization_profile(&v);
        assert_eq!(p.center, 4);
        assert_eq!(p.fit_rate, f64::INFINITY);
    }

    #[test]
    fn center_is_first_maximum() {
        let v: Vec<Complex> = [0.1, 0.5, 0.2, 0.5].iter().map(|&x| Complex::new(x, 0.0)).collect();
        assert_eq!(localization_profile(&v).center, 1);
    }

    #[test]
    fn free_modes_are_extended() {
        let m = ParaModel::free(16, 0.3).unwrap();
        for p in eigenpairs(&m).unwrap() {
            assert!(localization_profile(&p.vector).fit_rate.abs() < 0.01);
        }
    }

    #[test]
    fn bad_counts_at_the_extremes() {
        let m = sample_para_model(64, 0.9, 5).unwrap();
        assert_eq!(count_bad_eigenfunctions(&m, 3).unwrap(), 0);
        let d = decouple_model(&m, 16, &mut RngStream::new(5, 99)).unwrap();
        assert_eq!(count_bad_eigenfunctions(&d, 64).unwrap(), 64);
        let few = count_bad_eigenfunctions(&d, 1).unwrap();
        assert!(few < 64);
    }

    #[test]
    fn decoupled_vectors_stay_in_their_block() {
        let m = sample_para_model(48, 0.5, 8).unwrap();
        let d = decouple_model(&m, 16, &mut RngStream::new(8, 99)).unwrap();
        for p in eigenpairs(&d).unwrap() {
            let c = localization_profile(&p.vector).center;
            let (lo, hi) = (c / 16 * 16, c / 16 * 16 + 16);
            let outside: f64 = p
                .vector
                .iter()
                .enumerate()
                .filter(|(k, _)| *k < lo || *k >= hi)
                .map(|(_, v)| v.norm_sqr())
                .sum();
            assert!(outside < 1e-12, "{outside}");
        }
    }

    #[test]
    fn degenerate_sequence_rejected() {
        let seq = VerblunskySequence::new(alloc::vec![], 0.5).unwrap();
        let m = ParaModel::new(seq, 0.0, 0);
        assert!(MomentConfig::new(m.n(), 0.5, 0.5, 1.0, 0).is_err());
    }
}
