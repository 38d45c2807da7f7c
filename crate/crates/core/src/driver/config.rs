//! Training configuration, read from TOML and overridable per key.
//!
//! ```toml
//! [model]
//! r = 3          # filter width; defaults to d (fully connected)
//! m = 808        # neurons; defaults to (n + 1)(d - r + 1)
//!
//! [regularizer]
//! lam0 = 46.0    # defaults to max(sqrt(n) ln n, sqrt(n))
//! c_budget = 46.0
//!
//! [solver]
//! kind = "auto"  # auto | exhaustive | random
//! directions = 1024
//! r_pert = 0.1
//! grid_cap = 1e8
//!
//! [run]
//! seed = 0
//! stale_retries = 3
//! timing = false
//! delta = 0.05
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perturb::DEFAULT_GRID_CAP;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SolverChoice {
    /// Exhaustive grid when it fits under the cap, randomized otherwise.
    #[default]
    Auto,
    Exhaustive,
    Random,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub r: Option<usize>,
    pub m: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegularizerConfig {
    pub lam0: Option<f64>,
    pub c_budget: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub kind: SolverChoice,
    /// `M`; the randomized solver draws `2M` directions.
    pub directions: u64,
    pub r_pert: f64,
    pub grid_cap: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { kind: SolverChoice::Auto, directions: 1024, r_pert: 0.1, grid_cap: DEFAULT_GRID_CAP }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub stale_retries: usize,
    /// Record wall-clock time in the report (makes reports differ between runs).
    pub timing: bool,
    /// Confidence parameter for the generalization bound diagnostic.
    pub delta: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { seed: 0, stale_retries: 3, timing: false, delta: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub regularizer: RegularizerConfig,
    pub solver: SolverConfig,
    pub run: RunConfig,
}

/// `max(sqrt(n) ln n, sqrt(n))`.
pub fn default_lam0(n: usize) -> f64 {
    let rn = (n as f64).sqrt();
    (rn * (n as f64).ln()).max(rn)
}

impl TrainConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Fills defaults for a dataset of `n` points in `d` dimensions and
    /// checks `lam0 >= sqrt(n)`, `m >= (n + 1)(d - r + 1)` and `C >= lam0`.
    pub fn resolve(&self, n: usize, d: usize) -> Result<Resolved> {
        let r = self.model.r.unwrap_or(d);
        if r < 1 || r > d {
            return Err(Error::InvalidTopology { d, r });
        }
        let period = d - r + 1;
        let min_m = (n + 1) * period;
        let m = self.model.m.unwrap_or(min_m);
        if m < min_m {
            return Err(Error::Config(format!("m = {m} is below (n + 1)(d - r + 1) = {min_m}")));
        }
        let lam0 = self.regularizer.lam0.unwrap_or_else(|| default_lam0(n));
        if !(lam0 >= (n as f64).sqrt()) || !lam0.is_finite() {
            return Err(Error::Config(format!("lam0 = {lam0} must be finite and at least sqrt(n) = {}", (n as f64).sqrt())));
        }
        let c_budget = self.regularizer.c_budget.unwrap_or(lam0);
        if !(c_budget >= lam0) {
            return Err(Error::Config(format!("C = {c_budget} must be at least lam0 = {lam0}")));
        }
        let s = &self.solver;
        if s.directions == 0 {
            return Err(Error::Config("solver.directions must be at least 1".into()));
        }
        if !(s.r_pert > 0.0 && s.r_pert < 1.0) {
            return Err(Error::Config(format!("solver.r_pert = {} must lie in (0, 1)", s.r_pert)));
        }
        if !(self.run.delta > 0.0 && self.run.delta < 1.0) {
            return Err(Error::Config(format!("run.delta = {} must lie in (0, 1)", self.run.delta)));
        }
        Ok(Resolved {
            n,
            d,
            r,
            m,
            lam0,
            c_budget,
            solver: s.kind,
            directions: s.directions,
            r_pert: s.r_pert,
            grid_cap: s.grid_cap,
            seed: self.run.seed,
            stale_retries: self.run.stale_retries,
            timing: self.run.timing,
            delta: self.run.delta,
        })
    }
}

/// A configuration with every default filled in for one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resolved {
    pub n: usize,
    pub d: usize,
    pub r: usize,
    pub m: usize,
    pub lam0: f64,
    pub c_budget: f64,
    pub solver: SolverChoice,
    pub directions: u64,
    pub r_pert: f64,
    pub grid_cap: f64,
    pub seed: u64,
    pub stale_retries: usize,
    pub timing: bool,
    pub delta: f64,
}
