//! Run configuration: one TOML file with global keys and one table per
//! experiment family, then command-line overrides.
//!
//! ```toml
//! seed = 1
//! trials = 200
//! n = 71
//! r = 0.5
//!
//! [poisson]
//! windows = [[0.0, 1.0], [1.0, 2.0]]
//! ```
//!
//! Every key is optional; see the `Default` impls for the values used
//! when it is missing.

use std::path::{Path, PathBuf};

use opuc_core::pointproc::{DecoupleScheme, ExperimentConfig};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, LabResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabConfig {
    pub seed: u64,
    pub trials: u64,
    pub n: usize,
    pub r: f64,
    /// Worker threads; 0 means the available parallelism.
    pub workers: usize,
    pub out_dir: PathBuf,
    pub poisson: PoissonSection,
    pub fracmom: FracmomSection,
    pub lyapunov: LyapunovSection,
    pub localize: LocalizeSection,
    pub decouple: DecoupleSection,
}

impl Default for LabConfig {
    fn default() -> Self {
        LabConfig {
            seed: 1,
            trials: 100,
            n: 71,
            r: 0.5,
            workers: 0,
            out_dir: PathBuf::from("runs"),
            poisson: PoissonSection::default(),
            fracmom: FracmomSection::default(),
            lyapunov: LyapunovSection::default(),
            localize: LocalizeSection::default(),
            decouple: DecoupleSection::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoissonSection {
    pub theta0: f64,
    pub windows: Vec<[f64; 2]>,
}

impl Default for PoissonSection {
    fn default() -> Self {
        PoissonSection {
            theta0: 0.0,
            windows: vec![[0.0, 1.0], [1.0, 2.0]],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FracmomSection {
    pub s: f64,
    pub theta: f64,
}

impl Default for FracmomSection {
    fn default() -> Self {
        FracmomSection { s: 0.5, theta: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LyapunovSection {
    pub steps: usize,
    /// Angles of the spectral parameters `z = e^{iθ}`.
    pub thetas: Vec<f64>,
}

impl Default for LyapunovSection {
    fn default() -> Self {
        LyapunovSection {
            steps: 200_000,
            thetas: vec![1.0, 2.5],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalizeSection {
    /// Also count eigenvectors centred near the cuts of the logarithmic
    /// decoupling scheme.
    pub decoupled: bool,
    /// Boundary half-width is `round(factor · ln N)`.
    pub halfwidth_factor: f64,
}

impl Default for LocalizeSection {
    fn default() -> Self {
        LocalizeSection {
            decoupled: false,
            halfwidth_factor: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecoupleSection {
    pub n_values: Vec<usize>,
    pub theta0: f64,
    pub windows: Vec<[f64; 2]>,
}

impl Default for DecoupleSection {
    fn default() -> Self {
        DecoupleSection {
            n_values: vec![512, 2048],
            theta0: 0.0,
            windows: vec![[0.0, 1.0]],
        }
    }
}

/// Values given on the command line; each one replaces the file's.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<u64>,
    pub n: Option<usize>,
    pub r: Option<f64>,
    pub workers: Option<usize>,
    pub out_dir: Option<PathBuf>,
}

impl LabConfig {
    pub fn from_toml(text: &str) -> LabResult<Self> {
        toml::from_str(text).map_err(|e| LabError::config(e.to_string()))
    }

    pub fn load(path: &Path) -> LabResult<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| LabError::config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = o.trials {
            self.trials = v;
        }
        if let Some(v) = o.n {
            self.n = v;
        }
        if let Some(v) = o.r {
            self.r = v;
        }
        if let Some(v) = o.workers {
            self.workers = v;
        }
        if let Some(v) = &o.out_dir {
            self.out_dir = v.clone();
        }
    }

    pub fn validate(&self) -> LabResult<()> {
        if self.n == 0 {
            return Err(LabError::config("n must be positive"));
        }
        if self.trials == 0 {
            return Err(LabError::config("trials must be positive"));
        }
        if !(0.0..1.0).contains(&self.r) {
            return Err(LabError::config("r must lie in [0, 1)"));
        }
        check_windows(&self.poisson.windows, "poisson")?;
        check_windows(&self.decouple.windows, "decouple")?;
        if !(self.fracmom.s > 0.0 && self.fracmom.s < 1.0) {
            return Err(LabError::config("fracmom.s must lie in (0, 1)"));
        }
        if self.lyapunov.steps == 0 {
            return Err(LabError::config("lyapunov.steps must be positive"));
        }
        if self.decouple.n_values.iter().any(|&n| n < 3) {
            return Err(LabError::config("decouple.n_values must be at least 3"));
        }
        if !(self.localize.halfwidth_factor >= 0.0) {
            return Err(LabError::config("localize.halfwidth_factor must be nonnegative"));
        }
        Ok(())
    }

    /// Ensemble settings for the `poisson` command.
    pub fn poisson_experiment(&self) -> LabResult<ExperimentConfig> {
        let mut cfg = ExperimentConfig::new(self.n, self.r, self.trials, self.seed, windows(&self.poisson.windows))
            .map_err(|e| LabError::config(e.to_string()))?;
        cfg.theta0 = self.poisson.theta0;
        cfg.validate().map_err(|e| LabError::config(e.to_string()))?;
        Ok(cfg)
    }

    /// Ensemble settings for one `decouple` size.
    pub fn decouple_experiment(&self, n: usize) -> LabResult<ExperimentConfig> {
        let scheme = DecoupleScheme::logarithmic(n).map_err(|e| LabError::config(e.to_string()))?;
        let cfg = ExperimentConfig {
            n,
            r: self.r,
            trials: self.trials,
            seed: self.seed,
            theta0: self.decouple.theta0,
            windows: windows(&self.decouple.windows),
            decouple: Some(scheme),
        };
        cfg.validate().map_err(|e| LabError::config(e.to_string()))?;
        Ok(cfg)
    }
}

fn windows(w: &[[f64; 2]]) -> Vec<(f64, f64)> {
    w.iter().map(|&[a, b]| (a, b)).collect()
}

fn check_windows(w: &[[f64; 2]], section: &str) -> LabResult<()> {
    for &[a, b] in w {
        if !(a.is_finite() && b.is_finite()) || b <= a {
            return Err(LabError::config(format!("{section}: malformed window ({a}, {b}), need a < b")));
        }
    }
    Ok(())
}
