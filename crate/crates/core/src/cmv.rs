//! Five-diagonal CMV matrices and the linear algebra on them.
//!
//! The matrix is the product `C = L M` with `L = Θ_0 ⊕ Θ_2 ⊕ ⋯` and
//! `M = 1 ⊕ Θ_1 ⊕ Θ_3 ⊕ ⋯`, where `Θ_k = [[conj(α_k), ρ_k], [ρ_k, −α_k]]`.
//! Because `ρ_{n-1} = 0` the product truncates exactly to an `n × n`
//! unitary matrix whose eigenvalues are the zeros of `Φ_n(·; β)`.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::banded::BandLu;
use crate::error::{Error, Result};
use crate::model::ParaModel;
use crate::rng::RngStream;
use crate::szego::{orthonormal_table, paraorthogonal_value, second_kind_paraorthogonal_value};
use crate::{Complex, TAU};

const ZERO: Complex = Complex::new(0.0, 0.0);
const ONE: Complex = Complex::new(1.0, 0.0);

/// Radial offset of the inverse-iteration shift.
pub const INVERSE_SHIFT: f64 = 1e-10;
pub const INVERSE_MAX_ITERS: usize = 50;

#[derive(Clone, Debug, PartialEq)]
pub struct BandedCmv {
    dim: usize,
    /// `bands[i][o + 2]` is the entry at `(i, i + o)`.
    bands: Vec<[Complex; 5]>,
    /// Indices `c` with no coupling between `c` and `c + 1`.
    boundaries: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EigenPair {
    pub angle: f64,
    pub vector: Vec<Complex>,
    pub residual: f64,
}

fn theta_entry(alpha: Complex, rho: f64, r: usize, c: usize) -> Complex {
    match (r, c) {
        (0, 0) => alpha.conj(),
        (1, 1) => -alpha,
        _ => Complex::new(rho, 0.0),
    }
}

pub fn build_cmv(model: &ParaModel) -> BandedCmv {
    let n = model.n();
    let l_entry = |i: usize, k: usize| -> Complex {
        if i / 2 != k / 2 {
            return ZERO;
        }
        let m = i - i % 2;
        theta_entry(model.alpha(m), model.rho(m), i - m, k - m)
    };
    let m_entry = |i: usize, k: usize| -> Complex {
        if i == 0 || k == 0 {
            return if i == k { ONE } else { ZERO };
        }
        if (i + 1) / 2 != (k + 1) / 2 {
            return ZERO;
        }
        let m = 2 * ((i + 1) / 2) - 1;
        theta_entry(model.alpha(m), model.rho(m), i - m, k - m)
    };
    let mut bands = vec![[ZERO; 5]; n];
    for (i, row) in bands.iter_mut().enumerate() {
        for (o, slot) in row.iter_mut().enumerate() {
            let j = i as isize + o as isize - 2;
            if j < 0 || j >= n as isize {
                continue;
            }
            let j = j as usize;
            let mut s = ZERO;
            for k in i.saturating_sub(1)..(i + 2).min(n) {
                s += l_entry(i, k) * m_entry(k, j);
            }
            *slot = s;
        }
    }
    BandedCmv {
        dim: n,
        bands,
        boundaries: model.seq().cuts().to_vec(),
    }
}

impl BandedCmv {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn boundaries(&self) -> &[usize] {
        &self.boundaries
    }

    /// Entry `(i, j)`; zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> Complex {
        let o = j as isize - i as isize;
        if o.abs() > 2 || i >= self.dim || j >= self.dim {
            ZERO
        } else {
            self.bands[i][(o + 2) as usize]
        }
    }

    /// Nonzero entries in row-major order.
    pub fn nonzeros(&self) -> impl Iterator<Item = (usize, usize, Complex)> + '_ {
        self.bands.iter().enumerate().flat_map(move |(i, row)| {
            row.iter().enumerate().filter_map(move |(o, v)| {
                let j = i as isize + o as isize - 2;
                (*v != ZERO && j >= 0).then_some((i, j as usize, *v))
            })
        })
    }

    pub fn mul_vec(&self, x: &[Complex]) -> Vec<Complex> {
        (0..self.dim)
            .map(|i| {
                let lo = i.saturating_sub(2);
                let hi = (i + 3).min(self.dim);
                (lo..hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    /// `C* x`.
    pub fn adjoint_mul_vec(&self, x: &[Complex]) -> Vec<Complex> {
        (0..self.dim)
            .map(|j| {
                let lo = j.saturating_sub(2);
                let hi = (j + 3).min(self.dim);
                (lo..hi).map(|i| self.get(i, j).conj() * x[i]).sum()
            })
            .collect()
    }

    /// `max |(C*C − I)_{ij}|`.
    pub fn unitarity_defect(&self) -> f64 {
        let n = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in i.saturating_sub(4)..(i + 5).min(n) {
                let lo = i.max(j).saturating_sub(2);
                let hi = (i.min(j) + 3).min(n);
                let mut s = ZERO;
                for k in lo..hi {
                    s += self.get(k, i).conj() * self.get(k, j);
                }
                if i == j {
                    s -= ONE;
                }
                worst = worst.max(s.norm());
            }
        }
        worst
    }

    /// Banded LU of `C − z`.
    pub fn factor_shifted(&self, z: Complex) -> Result<BandLu> {
        BandLu::factor(self.dim, 2, 2, z, |i, j| if i == j { self.get(i, j) - z } else { self.get(i, j) })
    }
}

/// Force `α_{block-1}, α_{2·block-1}, …` onto the unit circle with fresh
/// uniform angles from `rng`, splitting the CMV matrix into `n / block`
/// independent blocks. The last of these indices is the boundary `β`.
pub fn decouple_model(model: &ParaModel, block: usize, rng: &mut RngStream) -> Result<ParaModel> {
    let n = model.n();
    if block == 0 || n % block != 0 {
        return Err(Error::Domain("block size must divide the degree"));
    }
    let mut out = model.clone();
    for j in 1..=n / block {
        let idx = j * block - 1;
        let angle = TAU * rng.uniform();
        if idx == n - 1 {
            out.set_boundary_angle(angle);
        } else {
            out.seq_mut().set_cut(idx, angle);
        }
    }
    Ok(out)
}

/// Solve `(C − z) x = rhs`.
pub fn banded_solve(c: &BandedCmv, z: Complex, rhs: &[Complex]) -> Result<Vec<Complex>> {
    if rhs.len() != c.dim {
        return Err(Error::Domain("right-hand side has the wrong length"));
    }
    Ok(c.factor_shifted(z)?.solve(rhs))
}

fn unit(n: usize, k: usize) -> Vec<Complex> {
    let mut e = vec![ZERO; n];
    e[k] = ONE;
    e
}

/// `G_{kl}(z) = [(C − z)^{-1}]_{kl}`.
pub fn resolvent_entry(c: &BandedCmv, z: Complex, k: usize, l: usize) -> Result<Complex> {
    if k >= c.dim || l >= c.dim {
        return Err(Error::Domain("matrix index out of range"));
    }
    Ok(banded_solve(c, z, &unit(c.dim, l))?[k])
}

/// `F_{kl}(z) = δ_{kl} + 2z G_{kl}(z)`.
pub fn caratheodory_entry(c: &BandedCmv, z: Complex, k: usize, l: usize) -> Result<Complex> {
    let g = resolvent_entry(c, z, k, l)?;
    Ok(if k == l { ONE } else { ZERO } + 2.0 * z * g)
}

/// Row `k` of the resolvent, `G_{k, ·}(z)`, from one transposed solve.
pub fn resolvent_row(c: &BandedCmv, z: Complex, k: usize) -> Result<Vec<Complex>> {
    let lu = c.factor_shifted(z)?;
    let mut e = unit(c.dim, k);
    lu.solve_transpose_in_place(&mut e);
    Ok(e)
}

/// The Carathéodory function of the spectral measure, two ways:
/// `(F_00` from the banded solve, `−Ψ_n(z; β) / Φ_n(z; β))`.
pub fn caratheodory_f(model: &ParaModel, z: Complex) -> Result<(Complex, Complex)> {
    let banded = caratheodory_entry(&build_cmv(model), z, 0, 0)?;
    Ok((banded, caratheodory_ratio(model, z)?))
}

fn caratheodory_ratio(model: &ParaModel, z: Complex) -> Result<Complex> {
    let (phi, s1) = paraorthogonal_value(model, z);
    let (psi, s2) = second_kind_paraorthogonal_value(model, z);
    if phi.norm() == 0.0 {
        return Err(Error::NearSingular { re: z.re, im: z.im, pivot: 0.0 });
    }
    Ok(-(psi / phi) * (s2 - s1).exp())
}

/// Resolvent entry assembled from orthonormal polynomials, second-kind
/// polynomials and the Carathéodory function:
///
/// ```text
/// G_{kl} = (2z)^{-1} χ_l(z) p_k(z)   if k > l, or k = l odd
/// G_{kl} = (2z)^{-1} π_l(z) x_k(z)   if k < l, or k = l even
/// ```
///
/// with `p = y + F x`, `π = Υ + F χ`. Here `χ, x` are the CMV and
/// alternate CMV bases and `y, Υ` their second-kind analogues. Unscaled,
/// so only for small `n`.
pub fn resolvent_oracle(model: &ParaModel, z: Complex, k: usize, l: usize) -> Result<Complex> {
    let n = model.n();
    if k >= n || l >= n {
        return Err(Error::Domain("matrix index out of range"));
    }
    if z.norm() == 0.0 || z.norm() > 1.0 + 1e-12 {
        return Err(Error::Domain("oracle needs 0 < |z| <= 1"));
    }
    let f = caratheodory_ratio(model, z)?;
    let table = orthonormal_table(model.seq(), z, n - 1)?;
    let zinv = ONE / z;
    let zpow = |e: i32| zinv.powi(e);
    // returns (χ_j, x_j, y_j, Υ_j)
    let basis = |j: usize| -> [Complex; 4] {
        let [p, ps, q, qs] = table[j];
        if j % 2 == 0 {
            let l = (j / 2) as i32;
            [zpow(l) * ps, zpow(l) * p, zpow(l) * q, -zpow(l) * qs]
        } else {
            let l = j.div_ceil(2) as i32;
            [zpow(l - 1) * p, zpow(l) * ps, -zpow(l) * qs, zpow(l - 1) * q]
        }
    };
    let [chi_l, _, _, ups_l] = basis(l);
    let [_, x_k, y_k, _] = basis(k);
    let half = ONE / (2.0 * z);
    if k > l || (k == l && k % 2 == 1) {
        Ok(half * chi_l * (y_k + f * x_k))
    } else {
        Ok(half * (ups_l + f * chi_l) * x_k)
    }
}

fn start_vector(n: usize) -> Vec<Complex> {
    let v: Vec<Complex> = (0..n)
        .map(|k| Complex::from_polar(1.0 + 0.5 * (1.3 * k as f64).sin(), 0.7 * k as f64))
        .collect();
    normalized(v)
}

fn norm(v: &[Complex]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn normalized(mut v: Vec<Complex>) -> Vec<Complex> {
    let s = 1.0 / norm(&v);
    for x in &mut v {
        *x *= s;
    }
    v
}

/// `(θ, ‖(C − e^{iθ}) v‖)` with `θ = arg ⟨v, C v⟩`.
fn rayleigh(c: &BandedCmv, v: &[Complex]) -> (f64, f64) {
    let cv = c.mul_vec(v);
    let q: Complex = v.iter().zip(&cv).map(|(a, b)| a.conj() * b).sum();
    let theta = q.arg();
    let e = Complex::from_polar(1.0, theta);
    let res = cv.iter().zip(v).map(|(a, b)| (a - e * b).norm_sqr()).sum::<f64>().sqrt();
    (crate::wrap_angle(theta), res)
}

/// Shifted inverse iteration from an approximate eigenvalue angle.
pub fn inverse_iteration(c: &BandedCmv, theta_seed: f64) -> Result<EigenPair> {
    let shift_of = |t: f64| Complex::from_polar(1.0 + INVERSE_SHIFT, t);
    let mut shift_angle = theta_seed;
    let mut lu = c.factor_shifted(shift_of(shift_angle))?;
    let mut v = start_vector(c.dim);
    let mut residual = f64::INFINITY;
    let mut angle = theta_seed;
    let mut converged_once = false;
    for _ in 0..INVERSE_MAX_ITERS {
        lu.solve_in_place(&mut v);
        v = normalized(v);
        let (t, r) = rayleigh(c, &v);
        angle = t;
        residual = r;
        if residual < 1e-8 {
            // one more sweep to settle to working precision
            if converged_once || residual < 1e-13 {
                break;
            }
            converged_once = true;
        }
        if crate::angle_diff(angle, shift_angle).abs() > 1e-8 && residual < 1e-3 {
            shift_angle = angle;
            lu = c.factor_shifted(shift_of(shift_angle))?;
        }
    }
    if !(residual < 1e-8) {
        return Err(Error::NoConvergence { residual });
    }
    Ok(EigenPair { angle, vector: v, residual })
}

/// Largest ratio `|G_{kl}| / |G_{k',l'}|` over index-adjacent pairs.
pub fn ratio_bound_resolvent(c: &BandedCmv, z: Complex) -> Result<f64> {
    let n = c.dim;
    let lu = c.factor_shifted(z)?;
    let cols: Vec<Vec<Complex>> = (0..n).map(|l| lu.solve(&unit(n, l))).collect();
    let g = |k: usize, l: usize| cols[l][k].norm();
    let mut worst: f64 = if n > 0 { 1.0 } else { 0.0 };
    for k in 0..n {
        for l in 0..n {
            let here = g(k, l);
            if l + 1 < n {
                worst = worst.max(here / g(k, l + 1)).max(g(k, l + 1) / here);
            }
            if k + 1 < n {
                worst = worst.max(here / g(k + 1, l)).max(g(k + 1, l) / here);
            }
        }
    }
    Ok(worst)
}

/// `max_{|j| <= j_max} |⟨δ_k, C^j δ_l⟩|`.
pub fn dynamical_moment(c: &BandedCmv, k: usize, l: usize, j_max: usize) -> Result<f64> {
    if j_max == 0 {
        return Err(Error::Domain("j_max must be at least 1"));
    }
    if k >= c.dim || l >= c.dim {
        return Err(Error::Domain("matrix index out of range"));
    }
    let mut fwd = unit(c.dim, l);
    let mut back = fwd.clone();
    let mut best = fwd[k].norm();
    for _ in 0..j_max {
        fwd = c.mul_vec(&fwd);
        back = c.adjoint_mul_vec(&back);
        best = best.max(fwd[k].norm()).max(back[k].norm());
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{sample_para_model, VerblunskySequence};
    use crate::phase::{compute_spectrum, DEFAULT_TOL};

    #[test]
    fn free_matrix_has_roots_of_unity() {
        let c = build_cmv(&ParaModel::free(4, 0.0).unwrap());
        assert!(c.unitarity_defect() < 1e-15);
        for j in 0..4 {
            let t = TAU * j as f64 / 4.0;
            let pair = inverse_iteration(&c, t).unwrap();
            assert!(pair.residual < 1e-10);
            assert!(crate::angle_diff(pair.angle, t).abs() < 1e-10);
            for x in &pair.vector {
                assert!((x.norm() - 0.5).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn two_by_two_layout() {
        let a0 = Complex::new(0.3, -0.2);
        let seq = VerblunskySequence::new(vec![a0], 0.5).unwrap();
        let m = ParaModel::new(seq, 0.9, 0);
        let a1 = m.boundary();
        let r0 = (1.0 - a0.norm_sqr()).sqrt();
        let c = build_cmv(&m);
        let want = [[a0.conj(), a1.conj() * r0], [Complex::new(r0, 0.0), -a1.conj() * a0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((c.get(i, j) - want[i][j]).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn unitarity_of_random_matrix() {
        let c = build_cmv(&sample_para_model(64, 0.5, 9).unwrap());
        assert!(c.unitarity_defect() < 1e-13);
    }

    #[test]
    fn decoupling_kills_couplings() {
        let m = sample_para_model(12, 0.5, 2).unwrap();
        let d = decouple_model(&m, 4, &mut RngStream::new(2, 77)).unwrap();
        assert_eq!(d.seq().cuts(), &[3, 7]);
        let c = build_cmv(&d);
        assert!(c.unitarity_defect() < 1e-13);
        for &b in &[4usize, 8] {
            for i in 0..12usize {
                for j in 0..12usize {
                    if (i < b) != (j < b) {
                        assert_eq!(c.get(i, j), ZERO, "({i},{j})");
                    }
                }
            }
        }
        // the difference touches few rows
        let full = build_cmv(&m);
        let rows = (0..12)
            .filter(|&i| (0..12).any(|j| (full.get(i, j) - c.get(i, j)).norm() > 0.0))
            .count();
        assert!(rows <= 4 * 3);
        assert!(decouple_model(&m, 5, &mut RngStream::new(0, 0)).is_err());
        assert!(decouple_model(&m, 0, &mut RngStream::new(0, 0)).is_err());
    }

    #[test]
    fn decoupled_spectrum_is_union_of_blocks() {
        let m = sample_para_model(12, 0.5, 31).unwrap();
        let d = decouple_model(&m, 4, &mut RngStream::new(31, 5)).unwrap();
        let spec = compute_spectrum(&d, DEFAULT_TOL).unwrap();
        assert_eq!(spec.len(), 12);
        let c = build_cmv(&d);
        for t in &spec.angles {
            let pair = inverse_iteration(&c, *t).unwrap();
            assert!(crate::angle_diff(pair.angle, *t).abs() < 1e-9);
        }
    }

    #[test]
    fn solve_at_origin_is_adjoint() {
        let c = build_cmv(&sample_para_model(40, 0.5, 1).unwrap());
        let rhs: Vec<Complex> = (0..40).map(|k| Complex::new(k as f64, 2.0)).collect();
        let x = banded_solve(&c, ZERO, &rhs).unwrap();
        let y = c.adjoint_mul_vec(&rhs);
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).norm() < 1e-11 * (1.0 + b.norm()));
        }
    }

    #[test]
    fn solve_round_trip() {
        let c = build_cmv(&sample_para_model(50, 0.5, 4).unwrap());
        let z = Complex::new(0.2, -0.5);
        let y: Vec<Complex> = (0..50).map(|k| Complex::from_polar(1.0, k as f64)).collect();
        let rhs: Vec<Complex> = c.mul_vec(&y).iter().zip(&y).map(|(a, b)| a - z * b).collect();
        let x = banded_solve(&c, z, &rhs).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn resolvent_at_origin_is_identity() {
        let c = build_cmv(&sample_para_model(10, 0.5, 4).unwrap());
        for k in 0..10 {
            for l in 0..10 {
                let f = caratheodory_entry(&c, ZERO, k, l).unwrap();
                let want = if k == l { ONE } else { ZERO };
                assert!((f - want).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn oracle_matches_banded_path() {
        let mut rng = RngStream::new(8, 1);
        let m = sample_para_model(8, 0.5, 8).unwrap();
        let c = build_cmv(&m);
        for _ in 0..20 {
            let z = Complex::from_polar(0.2 + 0.75 * rng.uniform(), TAU * rng.uniform());
            let k = (rng.uniform() * 8.0) as usize;
            let l = (rng.uniform() * 8.0) as usize;
            let a = resolvent_entry(&c, z, k, l).unwrap();
            let b = resolvent_oracle(&m, z, k, l).unwrap();
            assert!((a - b).norm() <= 1e-6 * a.norm(), "k={k} l={l} {a} {b}");
        }
    }

    #[test]
    fn caratheodory_two_ways() {
        let m = sample_para_model(15, 0.5, 3).unwrap();
        let (a, b) = caratheodory_f(&m, ZERO).unwrap();
        assert!((a - ONE).norm() < 1e-14 && (b - ONE).norm() < 1e-14);
        for j in 0..100 {
            let z = Complex::from_polar(0.9, 0.0628 * j as f64);
            let (a, b) = caratheodory_f(&m, z).unwrap();
            assert!(a.re >= 0.0);
            assert!((a - b).norm() < 1e-9 * a.norm());
        }
    }

    #[test]
    fn determinant_is_characteristic_polynomial() {
        let m = sample_para_model(64, 0.5, 6).unwrap();
        let c = build_cmv(&m);
        for &z in &[Complex::new(0.3, 0.1), Complex::from_polar(1.0, 0.5), Complex::from_polar(0.97, 2.0)] {
            let (log_det, _) = c.factor_shifted(z).unwrap().log_det();
            let (v, s) = paraorthogonal_value(&m, z);
            let log_phi = v.norm().ln() + s;
            assert!((log_det - log_phi).abs() < 1e-8, "{log_det} {log_phi}");
        }
    }

    #[test]
    fn dynamical_moment_locality() {
        let c = build_cmv(&sample_para_model(30, 0.5, 2).unwrap());
        assert!((dynamical_moment(&c, 5, 5, 3).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(dynamical_moment(&c, 2, 20, 4).unwrap(), 0.0);
        assert!(dynamical_moment(&c, 2, 20, 0).is_err());
    }

    #[test]
    fn resolvent_ratio_single_and_bound() {
        let one = build_cmv(&ParaModel::free(1, 0.3).unwrap());
        assert_eq!(ratio_bound_resolvent(&one, Complex::new(0.5, 0.0)).unwrap(), 1.0);
        let free = build_cmv(&ParaModel::free(10, 0.0).unwrap());
        assert!(ratio_bound_resolvent(&free, Complex::new(0.99, 0.0)).unwrap() <= 2.0);
    }
}
