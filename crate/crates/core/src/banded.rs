//! Banded LU with partial pivoting for complex matrices.
//!
//! Storage follows the LAPACK `gbtrf` layout: column `j` keeps rows
//! `j - kl - ku ..= j + kl`, the extra `kl` superdiagonals holding the
//! fill-in produced by row interchanges.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::Complex;

/// Pivots smaller than this are treated as singular.
pub const PIVOT_FLOOR: f64 = 1e-14;

#[derive(Clone, Debug)]
pub struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    ld: usize,
    ab: Vec<Complex>,
    ipiv: Vec<usize>,
}

impl BandLu {
    /// Factor the `n × n` matrix with lower/upper bandwidths `kl`/`ku`
    /// whose entries are given by `entry(i, j)` inside the band.
    ///
    /// `shift` is only used to label a near-singular error.
    pub fn factor(
        n: usize,
        kl: usize,
        ku: usize,
        shift: Complex,
        entry: impl Fn(usize, usize) -> Complex,
    ) -> Result<Self> {
        let ld = 2 * kl + ku + 1;
        let mut lu = BandLu {
            n,
            kl,
            ku,
            ld,
            ab: vec![Complex::new(0.0, 0.0); ld * n],
            ipiv: vec![0; n],
        };
        for j in 0..n {
            for i in j.saturating_sub(ku)..(j + kl + 1).min(n) {
                *lu.at_mut(i, j) = entry(i, j);
            }
        }
        let kv = kl + ku;
        for j in 0..n {
            let last = (j + kl).min(n - 1);
            let mut p = j;
            let mut best = lu.at(j, j).norm();
            for i in j + 1..=last {
                let v = lu.at(i, j).norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best >= PIVOT_FLOOR) {
                return Err(Error::NearSingular {
                    re: shift.re,
                    im: shift.im,
                    pivot: best,
                });
            }
            lu.ipiv[j] = p;
            let right = (j + kv).min(n - 1);
            if p != j {
                for c in j..=right {
                    let (a, b) = (lu.at(j, c), lu.at(p, c));
                    *lu.at_mut(j, c) = b;
                    *lu.at_mut(p, c) = a;
                }
            }
            let inv = Complex::new(1.0, 0.0) / lu.at(j, j);
            for i in j + 1..=last {
                let l = lu.at(i, j) * inv;
                *lu.at_mut(i, j) = l;
                if l.re != 0.0 || l.im != 0.0 {
                    for c in j + 1..=right {
                        let u = lu.at(j, c);
                        *lu.at_mut(i, c) -= l * u;
                    }
                }
            }
        }
        Ok(lu)
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> Complex {
        self.ab[j * self.ld + self.kl + self.ku + i - j]
    }

    #[inline]
    fn at_mut(&mut self, i: usize, j: usize) -> &mut Complex {
        &mut self.ab[j * self.ld + self.kl + self.ku + i - j]
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solve `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [Complex]) {
        let (n, kl, kv) = (self.n, self.kl, self.kl + self.ku);
        for j in 0..n {
            let p = self.ipiv[j];
            if p != j {
                b.swap(j, p);
            }
            let bj = b[j];
            for i in j + 1..=(j + kl).min(n - 1) {
                b[i] -= self.at(i, j) * bj;
            }
        }
        for j in (0..n).rev() {
            b[j] /= self.at(j, j);
            let xj = b[j];
            for i in j.saturating_sub(kv)..j {
                b[i] -= self.at(i, j) * xj;
            }
        }
    }

    /// Solve `Aᵀ x = b` (plain transpose) in place.
    pub fn solve_transpose_in_place(&self, b: &mut [Complex]) {
        let (n, kl, kv) = (self.n, self.kl, self.kl + self.ku);
        for j in 0..n {
            let mut s = b[j];
            for i in j.saturating_sub(kv)..j {
                s -= self.at(i, j) * b[i];
            }
            b[j] = s / self.at(j, j);
        }
        for j in (0..n).rev() {
            let mut s = b[j];
            for i in j + 1..=(j + kl).min(n - 1) {
                s -= self.at(i, j) * b[i];
            }
            b[j] = s;
            let p = self.ipiv[j];
            if p != j {
                b.swap(j, p);
            }
        }
    }

    pub fn solve(&self, rhs: &[Complex]) -> Vec<Complex> {
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// `(ln |det A|, sign)` where `det A = e^{ln|det|} · sign`, `|sign| = 1`.
    pub fn log_det(&self) -> (f64, Complex) {
        let mut log = 0.0;
        let mut phase = Complex::new(1.0, 0.0);
        for j in 0..self.n {
            let d = self.at(j, j);
            let m = d.norm();
            log += num_traits::Float::ln(m);
            phase *= d / m;
            if self.ipiv[j] != j {
                phase = -phase;
            }
        }
        (log, phase)
    }

    /// Smallest pivot modulus.
    pub fn min_pivot(&self) -> f64 {
        (0..self.n).map(|j| self.at(j, j).norm()).fold(f64::INFINITY, f64::min)
    }
}
