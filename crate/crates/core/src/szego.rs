//! Log-stabilized Szegő recurrence.
//!
//! Monic polynomials are advanced as
//!
//! ```text
//! Φ_{k+1}  = z Φ_k − conj(α_k) Φ*_k
//! Φ*_{k+1} = Φ*_k − α_k z Φ_k
//! ```
//!
//! together with their z-derivatives. The working vector is rescaled
//! whenever `max(|Φ_k|, |Φ*_k|)` leaves `[1e-2, 1e2]`, the factor going into
//! `log_scale`, so the true value is `e^{log_scale} · phi`. Normalized
//! polynomials `φ_k = Φ_k / (ρ_0 ⋯ ρ_{k-1})` are recovered by subtracting
//! `log_rho_sum`.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::model::{ParaModel, VerblunskySequence};
use crate::Complex;

const LOW: f64 = 1e-2;
const HIGH: f64 = 1e2;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RecurrenceState {
    pub phi: Complex,
    pub phi_star: Complex,
    pub log_scale: f64,
    pub dphi: Complex,
    pub dphi_star: Complex,
    pub step: usize,
    /// `Σ_{j<step} ln ρ_j`.
    pub log_rho_sum: f64,
}

impl RecurrenceState {
    pub fn initial() -> Self {
        RecurrenceState {
            phi: Complex::new(1.0, 0.0),
            phi_star: Complex::new(1.0, 0.0),
            log_scale: 0.0,
            dphi: Complex::new(0.0, 0.0),
            dphi_star: Complex::new(0.0, 0.0),
            step: 0,
            log_rho_sum: 0.0,
        }
    }

    #[inline]
    pub fn advance(&mut self, alpha: Complex, rho: f64, z: Complex) {
        let zphi = z * self.phi;
        let lead = self.phi + z * self.dphi;
        let ac = alpha.conj();
        let phi = zphi - ac * self.phi_star;
        let phi_star = self.phi_star - alpha * zphi;
        self.dphi = lead - ac * self.dphi_star;
        self.dphi_star -= alpha * lead;
        self.phi = phi;
        self.phi_star = phi_star;
        self.step += 1;
        self.log_rho_sum += rho.ln();
        self.rescale();
    }

    #[inline]
    fn rescale(&mut self) {
        let m2 = self.phi.norm_sqr().max(self.phi_star.norm_sqr());
        if (m2 > HIGH * HIGH || m2 < LOW * LOW) && m2 > 0.0 && m2.is_finite() {
            let m = m2.sqrt();
            let inv = 1.0 / m;
            self.phi *= inv;
            self.phi_star *= inv;
            self.dphi *= inv;
            self.dphi_star *= inv;
            self.log_scale += m.ln();
        }
    }

    /// `ln |φ_step(z)|` for the normalized polynomial.
    pub fn log_abs_normalized(&self) -> f64 {
        self.phi.norm().ln() + self.log_scale - self.log_rho_sum
    }

    /// Monic `Φ_step(z)` without scaling; overflows for long sequences.
    pub fn monic(&self) -> (Complex, Complex) {
        let s = self.log_scale.exp();
        (self.phi * s, self.phi_star * s)
    }

    /// Normalized `(φ_step, φ*_step)`; overflows for long sequences.
    pub fn normalized(&self) -> (Complex, Complex) {
        let s = (self.log_scale - self.log_rho_sum).exp();
        (self.phi * s, self.phi_star * s)
    }
}

fn check_upto(seq: &VerblunskySequence, upto: usize) -> Result<()> {
    if upto > seq.len() {
        return Err(Error::Domain("recurrence step beyond the coefficient sequence"));
    }
    Ok(())
}

/// Advance the recurrence through `α_0 .. α_{upto-1}`.
pub fn evolve(seq: &VerblunskySequence, z: Complex, upto: usize) -> Result<RecurrenceState> {
    check_upto(seq, upto)?;
    let mut st = RecurrenceState::initial();
    for (a, r) in seq.coefficients()[..upto].iter().zip(seq.rhos()) {
        st.advance(*a, *r, z);
    }
    Ok(st)
}

/// Second-kind polynomials `Ψ_k`: the recurrence with every `α_k` negated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SecondKindState {
    pub psi: Complex,
    pub psi_star: Complex,
    pub log_scale: f64,
    pub step: usize,
    pub log_rho_sum: f64,
}

impl SecondKindState {
    /// Normalized `(ψ_step, ψ*_step)`.
    pub fn normalized(&self) -> (Complex, Complex) {
        let s = (self.log_scale - self.log_rho_sum).exp();
        (self.psi * s, self.psi_star * s)
    }

    pub fn monic(&self) -> (Complex, Complex) {
        let s = self.log_scale.exp();
        (self.psi * s, self.psi_star * s)
    }
}

pub fn second_kind_evolve(seq: &VerblunskySequence, z: Complex, upto: usize) -> Result<SecondKindState> {
    check_upto(seq, upto)?;
    let mut st = RecurrenceState::initial();
    for (a, r) in seq.coefficients()[..upto].iter().zip(seq.rhos()) {
        st.advance(-*a, *r, z);
    }
    Ok(SecondKindState {
        psi: st.phi,
        psi_star: st.phi_star,
        log_scale: st.log_scale,
        step: st.step,
        log_rho_sum: st.log_rho_sum,
    })
}

/// Scaled `Φ_n(z; β) = z Φ_{n-1}(z) − conj(β) Φ*_{n-1}(z)` and its log factor.
pub fn paraorthogonal_value(model: &ParaModel, z: Complex) -> (Complex, f64) {
    let st = evolve(model.seq(), z, model.seq().len()).expect("full length is in range");
    (z * st.phi - model.boundary().conj() * st.phi_star, st.log_scale)
}

/// Scaled `Ψ_n(z; β) = z Ψ_{n-1}(z) + conj(β) Ψ*_{n-1}(z)` and its log factor.
pub fn second_kind_paraorthogonal_value(model: &ParaModel, z: Complex) -> (Complex, f64) {
    let st = second_kind_evolve(model.seq(), z, model.seq().len()).expect("full length is in range");
    (z * st.psi + model.boundary().conj() * st.psi_star, st.log_scale)
}

/// Scaled product `A(α_{k-1}, z) ⋯ A(α_0, z)` with
/// `A(α, z) = ρ^{-1} [[z, −conj(α)], [−α z, 1]]`.
///
/// The true product is `e^{log_scale} · entries`. Applied to `(1, 1)` it
/// gives the normalized `(φ_k, φ*_k)`; applied to `(1, −1)` it gives
/// `(ψ_k, −ψ*_k)`. Since `det A(α, z) = z`, the determinant of the true
/// product is `z^k`, so `|det entries| = |z|^k e^{−2 log_scale}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransferMatrix {
    pub entries: [[Complex; 2]; 2],
    pub log_scale: f64,
    pub step: usize,
}

impl TransferMatrix {
    pub fn identity() -> Self {
        let one = Complex::new(1.0, 0.0);
        let zero = Complex::new(0.0, 0.0);
        TransferMatrix {
            entries: [[one, zero], [zero, one]],
            log_scale: 0.0,
            step: 0,
        }
    }

    pub fn apply(&self, v: [Complex; 2]) -> [Complex; 2] {
        let s = self.log_scale.exp();
        let e = &self.entries;
        [
            (e[0][0] * v[0] + e[0][1] * v[1]) * s,
            (e[1][0] * v[0] + e[1][1] * v[1]) * s,
        ]
    }

    pub fn determinant(&self) -> Complex {
        let e = &self.entries;
        e[0][0] * e[1][1] - e[0][1] * e[1][0]
    }
}

pub fn transfer_product(seq: &VerblunskySequence, z: Complex, upto: usize) -> Result<TransferMatrix> {
    check_upto(seq, upto)?;
    let mut t = TransferMatrix::identity();
    for k in 0..upto {
        let (a, rho) = (seq.alpha(k), seq.rho(k));
        if rho == 0.0 {
            return Err(Error::Domain("transfer matrix undefined at a unimodular coefficient"));
        }
        let e = t.entries;
        let ac = a.conj();
        let inv = 1.0 / rho;
        let mut next = [[Complex::new(0.0, 0.0); 2]; 2];
        for c in 0..2 {
            next[0][c] = (z * e[0][c] - ac * e[1][c]) * inv;
            next[1][c] = (e[1][c] - a * z * e[0][c]) * inv;
        }
        let m = next.iter().flatten().map(|x| x.norm()).fold(0.0, f64::max);
        if m > 0.0 {
            for x in next.iter_mut().flatten() {
                *x /= m;
            }
            t.log_scale += m.ln();
        }
        t.entries = next;
        t.step += 1;
    }
    Ok(t)
}

/// `2 / sqrt(1 − r²)`, the bound on consecutive normalized ratios.
pub fn ratio_bound(radius: f64) -> f64 {
    2.0 / (1.0 - radius * radius).sqrt()
}

/// Largest `|φ_{k±1}(z) / φ_k(z)|` over all steps and all grid points.
pub fn ratio_bound_check(seq: &VerblunskySequence, z_grid: &[Complex]) -> Result<f64> {
    if z_grid.iter().any(|z| (z.norm() - 1.0).abs() > 1e-12) {
        return Err(Error::Domain("ratio check requires unimodular points"));
    }
    let mut worst: f64 = 0.0;
    for &z in z_grid {
        let mut st = RecurrenceState::initial();
        let mut prev = st.log_abs_normalized();
        for k in 0..seq.len() {
            if seq.rho(k) == 0.0 {
                break;
            }
            st.advance(seq.alpha(k), seq.rho(k), z);
            let cur = st.log_abs_normalized();
            worst = worst.max((cur - prev).abs().exp());
            prev = cur;
        }
    }
    Ok(worst)
}

/// Normalized `(φ_k, φ*_k, ψ_k, ψ*_k)` for `k = 0 ..= upto`, unscaled.
/// Meant for short sequences only.
pub fn orthonormal_table(seq: &VerblunskySequence, z: Complex, upto: usize) -> Result<Vec<[Complex; 4]>> {
    check_upto(seq, upto)?;
    let mut first = RecurrenceState::initial();
    let mut second = RecurrenceState::initial();
    let mut out = Vec::with_capacity(upto + 1);
    let push = |out: &mut Vec<[Complex; 4]>, a: &RecurrenceState, b: &RecurrenceState| {
        let (p, ps) = a.normalized();
        let (q, qs) = b.normalized();
        out.push([p, ps, q, qs]);
    };
    push(&mut out, &first, &second);
    for k in 0..upto {
        first.advance(seq.alpha(k), seq.rho(k), z);
        second.advance(-seq.alpha(k), seq.rho(k), z);
        push(&mut out, &first, &second);
    }
    Ok(out)
}
