//! Blaschke phase and the certified zero solver.
//!
//! On the circle `B_N(e^{iθ}) = β z Φ_{N-1}(z) / Φ*_{N-1}(z) = e^{i η_N(θ)}`
//! with `η_N` strictly increasing and `η_N(θ + 2π) = η_N(θ) + 2πN`. The
//! zeros of the paraorthogonal `Φ_N(·; β)` are exactly the points where
//! `η_N ≡ 0 (mod 2π)`, so they are found as level crossings of a lifted
//! monotone function. The branch is pinned by `η_N(0) ∈ [0, 2π)`.
//!
//! `η_N` is lifted exactly through the recurrence for `z Φ_k / Φ*_k`, so
//! level counts between any two angles need no sampling, and the winding
//! certificate holds on every grid. Crossings are separated by bisection and
//! polished with Newton on `η` using `η'`.

use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::model::{ParaModel, VerblunskySequence};
use crate::{angle_diff, wrap_angle, Complex, TAU};

/// Default polishing tolerance in radians.
pub const DEFAULT_TOL: f64 = 1e-12;
/// Cells per zero in the initial grid.
pub const GRID_FACTOR: usize = 8;
/// Maximal bisection depth when separating crossings inside one grid cell.
pub const MAX_REFINE: usize = 40;
const MAX_POLISH_ITERS: usize = 200;
const MIN_CELL: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseProbe {
    pub theta: f64,
    pub eta_mod_2pi: f64,
    pub eta_prime: f64,
}

/// Zeros of a paraorthogonal polynomial, sorted in `[0, 2π)`.
///
/// `residual_log[j]` is `ln (|Φ_N(e^{iθ_j})| / max_grid |Φ_N|)`, the maximum
/// taken over the solver's evaluation grid (per block for decoupled models).
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    pub angles: Vec<f64>,
    pub residual_log: Vec<f64>,
    pub model_seed: u64,
    /// Winding number of `B_N` over the circle, summed over blocks.
    pub winding: usize,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn max_residual(&self) -> f64 {
        self.residual_log.iter().fold(0.0, |m: f64, r| m.max(r.exp()))
    }

    /// Smallest gap between cyclically consecutive zeros.
    pub fn min_gap(&self) -> f64 {
        let n = self.angles.len();
        if n < 2 {
            return TAU;
        }
        let mut gap = self.angles[0] + TAU - self.angles[n - 1];
        for w in self.angles.windows(2) {
            gap = gap.min(w[1] - w[0]);
        }
        gap
    }
}

/// Lifted phase sample.
#[derive(Clone, Copy)]
struct Lifted {
    theta: f64,
    eta: f64,
    deta: f64,
    /// `ln |Φ_N(e^{iθ}; β)|`.
    log_abs: f64,
}

/// `η_N(θ)` as a continuous function of `θ ∈ ℝ`.
///
/// `u_k = z Φ_k / Φ*_k` obeys `u_{k+1} = z u_k w̄ / w` with `w = 1 − α_k u_k`,
/// so `η_N = arg β + Nθ − 2 Σ arg w_k`. Every `w_k` has positive real part,
/// which makes the running argument of `Π w_k` liftable step by step without
/// any sampling in `θ`. Along the orbit `dη_{k+1}/dη_k = (1 − |α_k|²) / |w|²`,
/// and `|Φ*_{k+1}| = |Φ*_k| |w|` gives the amplitude for free.
fn lifted(seq: &VerblunskySequence, beta: Complex, theta: f64) -> Lifted {
    let z = Complex::from_polar(1.0, theta);
    let mut u = z;
    let mut prod = Complex::new(1.0, 0.0);
    let mut half_turns = 0i64;
    let mut log_prod = 0.0;
    let mut deta = 1.0;
    for (k, a) in seq.coefficients().iter().enumerate() {
        let w = Complex::new(1.0, 0.0) - a * u;
        let w2 = w.norm_sqr();
        deta = 1.0 + deta * (1.0 - a.norm_sqr()) / w2;
        let next = prod * w;
        // a turn by less than π/2 changes the sign of Im exactly when it
        // crosses the real axis; the side tells whether that was at ±π
        if (next.im < 0.0) != (prod.im < 0.0) && next.re + prod.re < 0.0 {
            half_turns += if next.im < 0.0 { 2 } else { -2 };
        }
        prod = next;
        let m = prod.norm_sqr();
        if !(1e-64..=1e64).contains(&m) {
            log_prod += 0.5 * m.ln();
            prod /= m.sqrt();
        }
        u = z * u * w.conj() * w.conj() / w2;
        if k % 16 == 15 {
            u /= u.norm();
        }
    }
    let arg_sum = prod.arg() + PI * half_turns as f64;
    let b = beta * u;
    Lifted {
        theta,
        eta: beta.arg() + theta * (seq.len() + 1) as f64 - 2.0 * arg_sum,
        deta,
        log_abs: log_prod + prod.norm().ln() + (b - Complex::new(1.0, 0.0)).norm().max(f64::MIN_POSITIVE).ln(),
    }
}

/// Phase and its derivative at `θ` for the full recurrence.
pub fn phase_probe(model: &ParaModel, theta: f64) -> Result<PhaseProbe> {
    if model.is_decoupled() {
        return Err(Error::Domain("phase of a decoupled model is taken per block"));
    }
    let p = lifted(model.seq(), model.boundary(), theta);
    if !p.eta.is_finite() {
        return Err(Error::SingularEvaluation { theta });
    }
    Ok(PhaseProbe {
        theta,
        eta_mod_2pi: wrap_angle(p.eta),
        eta_prime: p.deta,
    })
}

/// Number of levels `2πk` in `(lo, hi]`.
#[inline]
fn levels_in(lo: f64, hi: f64) -> usize {
    let first = (lo / TAU).floor() + 1.0;
    let last = (hi / TAU).floor();
    if last >= first {
        (last - first) as usize + 1
    } else {
        0
    }
}

/// Solve `η(θ) = level` on `[a, b]` with `η(a) < level <= η(b)`: Newton
/// on η, falling back to bisection whenever the step leaves the bracket.
fn polish(seq: &VerblunskySequence, beta: Complex, a: &Lifted, b: &Lifted, level: f64, tol: f64) -> Lifted {
    let (mut lo, mut hi) = (a.theta, b.theta);
    let mut theta = lo + (hi - lo) * ((level - a.eta) / (b.eta - a.eta)).clamp(0.0, 1.0);
    let mut p = lifted(seq, beta, theta);
    for _ in 0..MAX_POLISH_ITERS {
        let g = p.eta - level;
        if g == 0.0 {
            break;
        }
        if g < 0.0 {
            lo = theta;
        } else {
            hi = theta;
        }
        let mut next = theta - g / p.deta;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let step = (next - theta).abs();
        theta = next;
        p = lifted(seq, beta, theta);
        if step < 1e-2 * tol || hi - lo <= 2.0 * f64::EPSILON * hi.abs().max(1.0) {
            break;
        }
    }
    p
}

/// Zeros of a model with no cuts: `(angle, ln |Φ_N(e^{iθ})|)` pairs,
/// unsorted, plus the largest `ln |Φ_N|` on the initial grid.
fn solve_block(seq: &VerblunskySequence, beta: Complex, tol: f64) -> Result<(Vec<(f64, f64)>, f64)> {
    let n = seq.len() + 1;
    let cells = GRID_FACTOR * n;
    let h = TAU / cells as f64;
    let mut grid: Vec<Lifted> = (0..cells).map(|j| lifted(seq, beta, h * j as f64)).collect();
    // closing the loop exactly: η(θ + 2π) = η(θ) + 2πN
    let first = grid[0];
    grid.push(Lifted {
        theta: TAU,
        eta: first.eta + TAU * n as f64,
        deta: first.deta,
        log_abs: first.log_abs,
    });
    let winding: usize = grid.windows(2).map(|w| levels_in(w[0].eta, w[1].eta)).sum();
    if winding != n || grid.windows(2).any(|w| !(w[1].eta >= w[0].eta)) {
        return Err(Error::SolverFailure {
            expected: n,
            found: winding as i64,
        });
    }
    let grid_max = grid.iter().map(|p| p.log_abs).fold(f64::NEG_INFINITY, f64::max);

    let mut zeros = Vec::with_capacity(n);
    let mut stack: Vec<(Lifted, Lifted, usize)> = Vec::new();
    for w in grid.windows(2) {
        if levels_in(w[0].eta, w[1].eta) == 0 {
            continue;
        }
        stack.push((w[0], w[1], 0));
        while let Some((a, b, depth)) = stack.pop() {
            let count = levels_in(a.eta, b.eta);
            if count == 0 {
                continue;
            }
            if count == 1 {
                let level = TAU * (a.eta / TAU).floor() + TAU;
                let root = polish(seq, beta, &a, &b, level, tol);
                zeros.push((wrap_angle(root.theta), root.log_abs));
                continue;
            }
            if depth >= MAX_REFINE || b.theta - a.theta <= MIN_CELL {
                return Err(Error::SolverFailure {
                    expected: n,
                    found: zeros.len() as i64,
                });
            }
            let mid = lifted(seq, beta, 0.5 * (a.theta + b.theta));
            stack.push((mid, b, depth + 1));
            stack.push((a, mid, depth + 1));
        }
    }
    if zeros.len() != n {
        return Err(Error::SolverFailure {
            expected: n,
            found: zeros.len() as i64,
        });
    }
    Ok((zeros, grid_max))
}

/// The independent blocks of a model with cuts.
///
/// A block starting after a cut `u = α_{m-1}` has the spectrum of the
/// ordinary CMV matrix with coefficients `−conj(u) α_{m+j}`: the block
/// differs from that matrix by a diagonal unitary similarity.
pub fn block_models(model: &ParaModel) -> Vec<ParaModel> {
    let n = model.n();
    let mut ends: Vec<usize> = model.seq().cuts().to_vec();
    ends.push(n - 1);
    let mut out = Vec::with_capacity(ends.len());
    let mut start = 0;
    for &end in &ends {
        let phase = if start == 0 {
            Complex::new(1.0, 0.0)
        } else {
            -model.alpha(start - 1).conj()
        };
        let interior: Vec<Complex> = (start..end).map(|k| phase * model.alpha(k)).collect();
        let seq = VerblunskySequence::new(interior, model.radius()).expect("rotation preserves the disk");
        let beta = phase * model.alpha(end);
        out.push(ParaModel::new(seq, beta.arg(), model.seed()));
        start = end + 1;
    }
    out
}

/// All `n` zeros of `Φ_n(·; β)` as sorted angles in `[0, 2π)`.
pub fn compute_spectrum(model: &ParaModel, tol: f64) -> Result<Spectrum> {
    if !(tol >= 1e-13) {
        return Err(Error::Domain("tolerance must be at least 1e-13"));
    }
    let blocks = if model.is_decoupled() {
        block_models(model)
    } else {
        alloc::vec![model.clone()]
    };
    let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(model.n());
    let mut solved = Vec::with_capacity(blocks.len());
    for b in &blocks {
        let (zeros, gmax) = solve_block(b.seq(), b.boundary(), tol)?;
        solved.push((zeros, gmax));
    }
    for (zeros, gmax) in solved {
        pairs.extend(zeros.into_iter().map(|(t, l)| (t, l - gmax)));
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let spectrum = Spectrum {
        angles: pairs.iter().map(|p| p.0).collect(),
        residual_log: pairs.iter().map(|p| p.1).collect(),
        model_seed: model.seed(),
        winding: pairs.len(),
    };
    if spectrum.len() > 1 && spectrum.min_gap() <= 1e-12 {
        return Err(Error::SolverFailure {
            expected: model.n(),
            found: spectrum.len() as i64 - 1,
        });
    }
    Ok(spectrum)
}

/// Number of spectrum angles in the open arc
/// `(θ0 + 2πa/n_scale, θ0 + 2πb/n_scale)`.
pub fn window_count(spec: &Spectrum, theta0: f64, a: f64, b: f64, n_scale: usize) -> Result<usize> {
    let (start, width) = arc_of(theta0, a, b, n_scale)?;
    Ok(spec
        .angles
        .iter()
        .filter(|&&t| {
            let d = wrap_angle(t - start);
            d > 0.0 && d < width
        })
        .count())
}

/// Start angle and width of the scaled window `(a, b)`.
pub fn arc_of(theta0: f64, a: f64, b: f64, n_scale: usize) -> Result<(f64, f64)> {
    if n_scale == 0 {
        return Err(Error::Domain("window scale must be positive"));
    }
    if !(a <= b) {
        return Err(Error::Domain("window requires a <= b"));
    }
    if b - a >= n_scale as f64 {
        return Err(Error::Domain("window must be shorter than the full circle"));
    }
    let s = TAU / n_scale as f64;
    Ok((wrap_angle(theta0 + s * a), s * (b - a)))
}

/// Zeros in the open arc `(start, start + width)` without solving for the
/// full spectrum: the count of `2π`-levels crossed by the lifted phase.
pub fn arc_count(model: &ParaModel, start: f64, width: f64) -> Result<usize> {
    if !(width >= 0.0 && width < TAU) {
        return Err(Error::Domain("arc width must lie in [0, 2π)"));
    }
    if width == 0.0 {
        return Ok(0);
    }
    let blocks = if model.is_decoupled() {
        block_models(model)
    } else {
        alloc::vec![model.clone()]
    };
    let mut count = 0;
    for b in &blocks {
        let lo = lifted(b.seq(), b.boundary(), start).eta;
        let hi = lifted(b.seq(), b.boundary(), start + width).eta;
        // open arc: a level hit exactly at the far end is excluded
        count += levels_in(lo, hi) - usize::from(hi % TAU == 0.0 && hi > lo);
    }
    Ok(count)
}

/// Largest angular mismatch between two spectra of equal length, matched
/// in sorted cyclic order with the best rotation of indices.
pub fn max_angle_mismatch(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() || a.is_empty() {
        return if a.len() == b.len() { 0.0 } else { f64::INFINITY };
    }
    let n = a.len();
    let mut best = f64::INFINITY;
    for shift in 0..n {
        let mut worst: f64 = 0.0;
        for i in 0..n {
            worst = worst.max(angle_diff(a[i], b[(i + shift) % n]).abs());
            if worst >= best {
                break;
            }
        }
        best = best.min(worst);
        if best < PI / n as f64 / 4.0 {
            break;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::FRAC_PI_2;
    use crate::model::{rotate_model, sample_para_model};
    use crate::szego::paraorthogonal_value;

    #[test]
    fn free_phase_is_linear() {
        let gamma = 0.9;
        let m = ParaModel::free(7, gamma).unwrap();
        for &t in &[0.0, 0.5, 3.0, 6.0] {
            let p = phase_probe(&m, t).unwrap();
            assert!((p.eta_prime - 7.0).abs() < 1e-13);
            assert!(angle_diff(p.eta_mod_2pi, gamma + 7.0 * t).abs() < 1e-12);
        }
    }

    fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        adaptive_simpson(f, a, m, fa, flm, fm, tol / 2.0, depth - 1)
            + adaptive_simpson(f, m, b, fm, frm, fb, tol / 2.0, depth - 1)
    }

    #[test]
    fn derivative_integrates_to_winding() {
        let m = sample_para_model(20, 0.5, 5).unwrap();
        let f = |t: f64| phase_probe(&m, t).unwrap().eta_prime;
        // split into panels so the adaptive rule sees every spike
        let panels = 200;
        let h = TAU / panels as f64;
        let integral: f64 = (0..panels)
            .map(|j| {
                let (a, b) = (h * j as f64, h * (j + 1) as f64);
                adaptive_simpson(&f, a, b, f(a), f(0.5 * (a + b)), f(b), 1e-9, 40)
            })
            .sum();
        assert!((integral / (TAU * 20.0) - 1.0).abs() < 1e-6, "{integral}");
    }

    #[test]
    fn solver_is_complete_on_strong_disorder() {
        for seed in 0..300 {
            let m = sample_para_model(100, 0.9, seed).unwrap();
            let s = compute_spectrum(&m, DEFAULT_TOL).unwrap();
            assert_eq!(s.len(), 100);
            assert!(s.max_residual() < 1e-8, "seed {seed}: {}", s.max_residual());
        }
    }

    #[test]
    fn derivative_is_positive() {
        let mut rng = crate::rng::RngStream::new(99, 0);
        for i in 0..200 {
            let m = sample_para_model(30, 0.9, i).unwrap();
            for _ in 0..50 {
                let t = TAU * rng.uniform();
                assert!(phase_probe(&m, t).unwrap().eta_prime > 0.0);
            }
        }
    }

    #[test]
    fn roots_of_unity() {
        let s = compute_spectrum(&ParaModel::free(4, 0.0).unwrap(), DEFAULT_TOL).unwrap();
        let want = [0.0, FRAC_PI_2, PI, 1.5 * PI];
        for (a, b) in s.angles.iter().zip(want) {
            assert!(angle_diff(*a, b).abs() < 1e-12, "{:?}", s.angles);
        }
    }

    #[test]
    fn degree_one() {
        let gamma = 1.3;
        let s = compute_spectrum(&ParaModel::free(1, gamma).unwrap(), DEFAULT_TOL).unwrap();
        assert_eq!(s.len(), 1);
        assert!(angle_diff(s.angles[0], -gamma).abs() < 1e-12);
    }

    #[test]
    fn degree_two_real_alpha() {
        let seq = VerblunskySequence::new(alloc::vec![Complex::new(0.4, 0.0)], 0.5).unwrap();
        let s = compute_spectrum(&ParaModel::new(seq, 0.0, 0), DEFAULT_TOL).unwrap();
        assert!(angle_diff(s.angles[0], 0.0).abs() < 1e-12);
        assert!(angle_diff(s.angles[1], PI).abs() < 1e-12);
    }

    #[test]
    fn tolerance_floor() {
        let m = ParaModel::free(3, 0.0).unwrap();
        assert!(compute_spectrum(&m, 1e-14).is_err());
    }

    #[test]
    fn zeros_are_roots_of_the_polynomial() {
        let m = sample_para_model(60, 0.7, 44).unwrap();
        let s = compute_spectrum(&m, DEFAULT_TOL).unwrap();
        assert_eq!(s.len(), 60);
        assert!(s.max_residual() < 1e-8);
        assert!(s.min_gap() > 1e-12);
        let log_abs = |t: f64| {
            let (v, l) = paraorthogonal_value(&m, Complex::from_polar(1.0, t));
            v.norm().ln() + l
        };
        let grid_max = (0..480).map(|j| log_abs(TAU * j as f64 / 480.0)).fold(f64::NEG_INFINITY, f64::max);
        for t in &s.angles {
            assert!(log_abs(*t) - grid_max < (1e-8f64).ln());
        }
    }

    #[test]
    fn rotation_shifts_zeros() {
        let m = sample_para_model(16, 0.5, 7).unwrap();
        let phi = 0.8;
        let a = compute_spectrum(&m, DEFAULT_TOL).unwrap();
        let b = compute_spectrum(&rotate_model(&m, phi), DEFAULT_TOL).unwrap();
        let shifted: Vec<f64> = {
            let mut v: Vec<f64> = a.angles.iter().map(|t| wrap_angle(t + phi)).collect();
            v.sort_by(f64::total_cmp);
            v
        };
        assert!(max_angle_mismatch(&shifted, &b.angles) < 1e-9);
    }

    #[test]
    fn windows_on_roots_of_unity() {
        let s = compute_spectrum(&ParaModel::free(4, 0.0).unwrap(), DEFAULT_TOL).unwrap();
        assert_eq!(window_count(&s, 0.0, -0.5, 0.5, 4).unwrap(), 1);
        assert_eq!(window_count(&s, 0.0, 0.2, 0.2 + 1e-9, 4).unwrap(), 0);
        assert!(window_count(&s, 0.0, 0.0, 4.0, 4).is_err());
        assert!(window_count(&s, 0.0, 1.0, 0.5, 4).is_err());
    }

    #[test]
    fn partition_counts_sum_to_degree() {
        for seed in 0..100 {
            let m = sample_para_model(24, 0.5, seed).unwrap();
            let s = compute_spectrum(&m, DEFAULT_TOL).unwrap();
            let theta0 = 0.1 + 0.01 * seed as f64;
            let total: usize = (0..6)
                .map(|j| window_count(&s, theta0, 4.0 * j as f64, 4.0 * (j + 1) as f64, 24).unwrap())
                .sum();
            // boundaries between windows are hit with probability zero
            assert_eq!(total, 24);
        }
    }

    #[test]
    fn arc_count_matches_spectrum() {
        for seed in 0..30 {
            let m = sample_para_model(80, 0.5, seed).unwrap();
            let s = compute_spectrum(&m, DEFAULT_TOL).unwrap();
            for &(a, b) in &[(0.0, 1.0), (1.0, 2.0), (-3.0, 4.5)] {
                let (start, width) = arc_of(0.3, a, b, 80).unwrap();
                assert_eq!(arc_count(&m, start, width).unwrap(), window_count(&s, 0.3, a, b, 80).unwrap());
            }
        }
    }
}
