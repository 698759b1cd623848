//! Random paraorthogonal polynomials on the unit circle.
//!
//! The crate samples Verblunsky coefficients (i.i.d. uniform in a disk of
//! radius `r`, with a final coefficient on the unit circle), evaluates the
//! Szegő recurrence in a log-stabilized form, finds all zeros of the
//! resulting paraorthogonal polynomial through its monotone Blaschke phase,
//! and builds the five-diagonal CMV matrix whose eigenvalues are exactly
//! those zeros. On top of that sit the Monte Carlo estimators: fractional
//! resolvent moments, Lyapunov exponents, eigenvector localization, window
//! counts and their Poisson comparison.
//!
//! Everything here is `no_std` with `alloc`. Parallel drivers, file formats
//! and the command line live in the companion `opuc-lab` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod banded;
pub mod cmv;
pub mod error;
pub mod model;
pub mod phase;
pub mod pointproc;
pub mod rng;
pub mod stats;
pub mod szego;

pub use num_complex::Complex64 as Complex;

pub use cmv::{BandedCmv, EigenPair};
pub use error::{Error, Result};
pub use model::{ParaModel, VerblunskySequence};
pub use phase::{PhaseProbe, Spectrum};
pub use rng::RngStream;

/// 2π.
pub const TAU: f64 = core::f64::consts::TAU;

/// Reduce an angle to `[0, 2π)`.
#[inline]
pub fn wrap_angle(theta: f64) -> f64 {
    let mut t = theta % TAU;
    if t < 0.0 {
        t += TAU;
    }
    // tiny negative inputs round up to exactly TAU
    if t >= TAU {
        0.0
    } else {
        t
    }
}

/// Signed distance between two angles, in `(-π, π]`.
#[inline]
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let d = wrap_angle(a - b);
    if d > core::f64::consts::PI {
        d - TAU
    } else {
        d
    }
}
