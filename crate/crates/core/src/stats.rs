//! Small statistics kit for the Monte Carlo estimators.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

/// Running mean and variance (Welford), with a Neumaier-compensated sum so
/// that long reductions stay accurate.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Moments {
    count: u64,
    mean: f64,
    m2: f64,
    sum: f64,
    comp: f64,
}

impl Moments {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_slice(xs: &[f64]) -> Self {
        let mut m = Self::new();
        for &x in xs {
            m.push(x);
        }
        m
    }

    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            return f64::NAN;
        }
        (self.sum + self.comp) / self.count as f64
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        self.m2 / (self.count - 1) as f64
    }

    /// Standard error of the mean.
    pub fn stderr(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        (self.variance() / self.count as f64).sqrt()
    }
}

/// `(mean, stderr)` of a sample.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let m = Moments::from_slice(xs);
    (m.mean(), m.stderr())
}

/// Ordinary least squares `y ≈ intercept + slope·x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub r2: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() {
        return Err(Error::Domain("fit needs equally long inputs"));
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::Domain("fit needs at least two points"));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::Domain("fit needs at least two distinct abscissae"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let e = b - intercept - slope * a;
            e * e
        })
        .sum();
    let slope_stderr = if n > 2 { (sse / (nf - 2.0) / sxx).sqrt() } else { 0.0 };
    // a flat response is fitted perfectly
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    Ok(LinearFit {
        slope,
        intercept,
        slope_stderr,
        r2,
    })
}

/// Wilson score interval for `successes` out of `trials` at normal quantile `z`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// `ln k!`, exact summation for small `k` and Stirling beyond.
pub fn ln_factorial(k: u64) -> f64 {
    if k < 64 {
        return (2..=k).map(|j| (j as f64).ln()).sum();
    }
    let x = k as f64 + 1.0;
    // Stirling series for ln Γ(x)
    (x - 0.5) * x.ln() - x + 0.5 * (2.0 * core::f64::consts::PI).ln() + 1.0 / (12.0 * x) - 1.0 / (360.0 * x * x * x)
        + 1.0 / (1260.0 * x.powi(5))
}

pub fn poisson_pmf(lambda: f64, k: u64) -> f64 {
    if lambda == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    (k as f64 * lambda.ln() - lambda - ln_factorial(k)).exp()
}

/// `C(m, k) p^k (1 − p)^{m − k}`.
pub fn binomial_pmf(m: u64, p: f64, k: u64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain("probability must lie in [0, 1]"));
    }
    if k > m {
        return Ok(0.0);
    }
    if p == 0.0 {
        return Ok(if k == 0 { 1.0 } else { 0.0 });
    }
    if p == 1.0 {
        return Ok(if k == m { 1.0 } else { 0.0 });
    }
    let ln_c = ln_factorial(m) - ln_factorial(k) - ln_factorial(m - k);
    Ok((ln_c + k as f64 * p.ln() + (m - k) as f64 * (-p).ln_1p()).exp())
}

/// Median of a sample; `NaN` entries sort last.
pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v: Vec<f64> = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Pearson correlation; zero when either side has no spread.
pub fn correlation(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len());
    if n < 2 {
        return 0.0;
    }
    let mx = x[..n].iter().sum::<f64>() / n as f64;
    let my = y[..n].iter().sum::<f64>() / n as f64;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
        sxy += (a - mx) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}
