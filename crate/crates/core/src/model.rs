//! Verblunsky coefficient models and their sampling.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::{wrap_angle, Complex, TAU};

/// Stream index reserved for the boundary coefficient of a sampled model.
pub const BOUNDARY_STREAM: u64 = 1 << 63;

/// Interior Verblunsky coefficients `α_0 .. α_{n-2}` together with their
/// `ρ_k = sqrt(1 - |α_k|²)`.
///
/// Coefficients satisfy `|α_k| <= radius < 1`, except at `cuts`: indices that
/// were forced onto the unit circle (ρ = 0 exactly) to split the CMV matrix
/// into independent blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct VerblunskySequence {
    interior: Vec<Complex>,
    rho: Vec<f64>,
    radius: f64,
    cuts: Vec<usize>,
}

impl VerblunskySequence {
    pub fn new(interior: Vec<Complex>, radius: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&radius) {
            return Err(Error::Domain("radius must lie in [0, 1)"));
        }
        if interior.iter().any(|a| !(a.re.is_finite() && a.im.is_finite()) || a.norm() > radius) {
            return Err(Error::Domain("coefficient outside the disk of the given radius"));
        }
        let rho = interior.iter().map(|a| rho_of(*a)).collect();
        Ok(VerblunskySequence {
            interior,
            rho,
            radius,
            cuts: Vec::new(),
        })
    }

    /// All coefficients zero.
    pub fn free(len: usize) -> Self {
        VerblunskySequence {
            interior: alloc::vec![Complex::new(0.0, 0.0); len],
            rho: alloc::vec![1.0; len],
            radius: 0.0,
            cuts: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.interior.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interior.is_empty()
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn coefficients(&self) -> &[Complex] {
        &self.interior
    }

    pub fn alpha(&self, k: usize) -> Complex {
        self.interior[k]
    }

    pub fn rho(&self, k: usize) -> f64 {
        self.rho[k]
    }

    pub fn rhos(&self) -> &[f64] {
        &self.rho
    }

    /// Interior indices carrying a unimodular coefficient.
    pub fn cuts(&self) -> &[usize] {
        &self.cuts
    }

    /// Force `α_k` onto the unit circle at angle `angle`.
    pub fn set_cut(&mut self, k: usize, angle: f64) {
        self.interior[k] = Complex::from_polar(1.0, angle);
        self.rho[k] = 0.0;
        if let Err(pos) = self.cuts.binary_search(&k) {
            self.cuts.insert(pos, k);
        }
    }

    /// `Σ_{j<k} ln ρ_j`, the log of the factor between monic and
    /// normalized polynomials of degree `k`.
    pub fn log_rho_sum(&self, k: usize) -> f64 {
        self.rho[..k].iter().map(|r| r.ln()).sum()
    }

    fn map_coefficients(&self, mut f: impl FnMut(usize, Complex) -> Complex) -> Self {
        let interior: Vec<Complex> = self.interior.iter().enumerate().map(|(k, a)| f(k, *a)).collect();
        let mut rho: Vec<f64> = interior.iter().map(|a| rho_of(*a)).collect();
        for &c in &self.cuts {
            rho[c] = 0.0;
        }
        VerblunskySequence {
            interior,
            rho,
            radius: self.radius,
            cuts: self.cuts.clone(),
        }
    }
}

fn rho_of(a: Complex) -> f64 {
    (1.0 - a.norm_sqr()).max(0.0).sqrt()
}

/// A paraorthogonal model of degree `n`: `n - 1` interior coefficients and
/// the boundary coefficient `β = α_{n-1}` on the unit circle.
///
/// The boundary is stored as an angle so that its modulus is one up to the
/// accuracy of `sin`/`cos`.
#[derive(Clone, Debug, PartialEq)]
pub struct ParaModel {
    seq: VerblunskySequence,
    beta_angle: f64,
    seed: u64,
}

impl ParaModel {
    pub fn new(seq: VerblunskySequence, beta_angle: f64, seed: u64) -> Self {
        ParaModel {
            seq,
            beta_angle: wrap_angle(beta_angle),
            seed,
        }
    }

    pub fn from_boundary(seq: VerblunskySequence, beta: Complex, seed: u64) -> Result<Self> {
        if (beta.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::Domain("boundary coefficient must be unimodular"));
        }
        Ok(Self::new(seq, beta.arg(), seed))
    }

    /// All interior coefficients zero; zeros solve `z^n = conj(β)`.
    pub fn free(n: usize, beta_angle: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("degree must be positive"));
        }
        Ok(Self::new(VerblunskySequence::free(n - 1), beta_angle, 0))
    }

    pub fn n(&self) -> usize {
        self.seq.len() + 1
    }

    pub fn seq(&self) -> &VerblunskySequence {
        &self.seq
    }

    pub fn seq_mut(&mut self) -> &mut VerblunskySequence {
        &mut self.seq
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn radius(&self) -> f64 {
        self.seq.radius
    }

    pub fn beta_angle(&self) -> f64 {
        self.beta_angle
    }

    pub fn boundary(&self) -> Complex {
        Complex::from_polar(1.0, self.beta_angle)
    }

    pub fn set_boundary_angle(&mut self, angle: f64) {
        self.beta_angle = wrap_angle(angle);
    }

    /// `α_k` for `k < n`, with `α_{n-1} = β`.
    pub fn alpha(&self, k: usize) -> Complex {
        if k + 1 == self.n() {
            self.boundary()
        } else {
            self.seq.alpha(k)
        }
    }

    /// `ρ_k` for `k < n`, with `ρ_{n-1} = 0`.
    pub fn rho(&self, k: usize) -> f64 {
        if k + 1 == self.n() {
            0.0
        } else {
            self.seq.rho(k)
        }
    }

    pub fn is_decoupled(&self) -> bool {
        !self.seq.cuts.is_empty()
    }
}

/// One draw uniform on the disk `|w| < radius`, by inverse CDF in the radius.
pub fn uniform_disk(rng: &mut RngStream, radius: f64) -> Result<Complex> {
    if !(radius > 0.0 && radius < 1.0) {
        return Err(Error::Domain("radius must lie in (0, 1)"));
    }
    let u = rng.uniform();
    let v = rng.uniform();
    Ok(Complex::from_polar(radius * u.sqrt(), TAU * v))
}

/// Sample a degree-`n` model. `α_k` is drawn from stream `k` and `β` from
/// [`BOUNDARY_STREAM`], all under master seed `seed`.
pub fn sample_para_model(n: usize, radius: f64, seed: u64) -> Result<ParaModel> {
    if n == 0 {
        return Err(Error::Domain("degree must be positive"));
    }
    if !(radius > 0.0 && radius < 1.0) {
        return Err(Error::Domain("radius must lie in (0, 1)"));
    }
    let interior = (0..n - 1)
        .map(|k| uniform_disk(&mut RngStream::new(seed, k as u64), radius))
        .collect::<Result<Vec<_>>>()?;
    let beta_angle = TAU * RngStream::new(seed, BOUNDARY_STREAM).uniform();
    Ok(ParaModel::new(VerblunskySequence::new(interior, radius)?, beta_angle, seed))
}

/// Rotate coefficients `α_k -> e^{-i(k+1)φ} α_k`; the zeros move by `+φ`.
pub fn rotate_model(model: &ParaModel, phi: f64) -> ParaModel {
    let seq = model
        .seq
        .map_coefficients(|k, a| a * Complex::from_polar(1.0, -((k + 1) as f64) * phi));
    ParaModel {
        seq,
        beta_angle: wrap_angle(model.beta_angle - model.n() as f64 * phi),
        seed: model.seed,
    }
}
