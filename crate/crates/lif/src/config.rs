//! Experiment configuration, read from TOML.
//!
//! ```toml
//! seed = 7
//! replicates = 100
//!
//! [lattice]
//! per_axis = 30
//! dim = 2
//! side = 5.0
//! delta = 1.0
//!
//! [truth]
//! phi = 1.0
//! rho = [5.0]
//! nu = 0.5
//!
//! [partition]
//! scheme = "uniform"   # uniform | nonuniform | rectangular | singleton
//! bins = 1
//!
//! [estimation]
//! mode = "fixed"       # fixed | profile
//! rho = [10.0]
//! ```

use std::path::{Path, PathBuf};

use lif_core::optimize::{EstimationMode, OptimizerConfig};
use lif_core::MaternParams;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub replicates: usize,
    /// Reuse one lattice (replicate 0's) for every replicate.
    #[serde(default)]
    pub fix_lattice: bool,
    pub lattice: LatticeConfig,
    pub truth: TruthConfig,
    #[serde(default)]
    pub precondition: PreconditionConfig,
    #[serde(default)]
    pub partition: PartitionConfig,
    pub estimation: EstimationConfig,
    #[serde(default)]
    pub simulation: SimulationConfig,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    pub per_axis: usize,
    pub dim: usize,
    pub side: f64,
    #[serde(default)]
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthConfig {
    pub phi: f64,
    pub rho: Vec<f64>,
    pub nu: f64,
}

impl TruthConfig {
    pub fn params(&self) -> Result<MaternParams> {
        Ok(MaternParams::new(self.phi, self.rho.clone(), self.nu)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreconditionConfig {
    pub m: usize,
}

impl Default for PreconditionConfig {
    fn default() -> Self {
        Self { m: 2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Uniform,
    Nonuniform,
    Rectangular,
    Singleton,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionConfig {
    pub scheme: Scheme,
    /// Requested bin count for the random schemes.
    #[serde(default = "one")]
    pub bins: usize,
    /// Boxes per axis for the rectangular scheme.
    #[serde(default)]
    pub grid: Vec<usize>,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        Self { scheme: Scheme::Uniform, bins: 1, grid: Vec::new() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Fixed,
    Profile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimationConfig {
    pub mode: Mode,
    /// Range for fixed mode.
    #[serde(default)]
    pub rho: Vec<f64>,
    /// Starting point for profile mode.
    #[serde(default)]
    pub x0: Vec<f64>,
    #[serde(default)]
    pub lower: Vec<f64>,
    #[serde(default)]
    pub upper: Vec<f64>,
    #[serde(default = "fd_step")]
    pub fd_step: f64,
    #[serde(default = "rel_tol")]
    pub rel_tol: f64,
    #[serde(default = "max_iter")]
    pub max_iter: usize,
    #[serde(default = "memory")]
    pub memory: usize,
}

fn fd_step() -> f64 {
    1e-3
}
fn rel_tol() -> f64 {
    1e-5
}
fn max_iter() -> usize {
    50
}
fn memory() -> usize {
    10
}

impl EstimationConfig {
    pub fn mode(&self) -> EstimationMode {
        match self.mode {
            Mode::Fixed => EstimationMode::FixedRho(self.rho.clone()),
            Mode::Profile => EstimationMode::Profile { x0: self.x0.clone() },
        }
    }

    pub fn optimizer(&self) -> OptimizerConfig {
        OptimizerConfig {
            bounds: self.lower.iter().copied().zip(self.upper.iter().copied()).collect(),
            fd_step: self.fd_step,
            rel_tol: self.rel_tol,
            max_iter: self.max_iter,
            memory: self.memory,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    #[serde(default = "jitter")]
    pub jitter: f64,
    #[serde(default = "max_n")]
    pub max_n: usize,
}

fn jitter() -> f64 {
    crate::simulate::DEFAULT_JITTER
}
fn max_n() -> usize {
    crate::simulate::DEFAULT_MAX_N
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self { jitter: jitter(), max_n: max_n() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsConfig {
    /// Sites sampled by the regularity check.
    #[serde(default = "regularity_sites")]
    pub regularity_sites: usize,
    /// Size limit for the dense Ψ computation.
    #[serde(default = "psi_max_n")]
    pub psi_max_n: usize,
    /// Center sites used by the entry-decay fit.
    #[serde(default = "decay_centers")]
    pub decay_centers: usize,
}

fn regularity_sites() -> usize {
    100
}
fn psi_max_n() -> usize {
    lif_core::lif::PSI_MAX_N
}
fn decay_centers() -> usize {
    20
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self { regularity_sites: regularity_sites(), psi_max_n: psi_max_n(), decay_centers: decay_centers() }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Checks everything that can be checked without building a lattice.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.replicates == 0 {
            return bad("replicates must be at least 1".into());
        }
        let l = &self.lattice;
        if !(1..=3).contains(&l.dim) {
            return bad(format!("lattice.dim must be 1, 2 or 3, got {}", l.dim));
        }
        if l.per_axis < 2 || !(l.side > 0.0) || !(l.delta >= 0.0) {
            return bad("lattice needs per_axis >= 2, side > 0 and delta >= 0".into());
        }
        let truth = self.truth.params().map_err(|e| Error::Config(format!("truth: {e}")))?;
        if truth.check_dim(l.dim).is_err() {
            return bad(format!("truth.rho must have 1 or {} entries", l.dim));
        }
        if self.precondition.m == 0 {
            return bad("precondition.m must be at least 1".into());
        }
        let n = l.per_axis.pow(l.dim as u32);
        let p = &self.partition;
        match p.scheme {
            Scheme::Uniform | Scheme::Nonuniform if p.bins == 0 || p.bins > n => {
                return bad(format!("partition.bins must be in 1..={n}"));
            }
            Scheme::Rectangular if p.grid.len() != l.dim || p.grid.contains(&0) => {
                return bad(format!("partition.grid needs {} positive entries", l.dim));
            }
            _ => {}
        }
        let e = &self.estimation;
        let range_len_ok = |v: &[f64]| v.len() == 1 || v.len() == l.dim;
        match e.mode {
            Mode::Fixed => {
                if !range_len_ok(&e.rho) || e.rho.iter().any(|r| !(*r > 0.0)) {
                    return bad("fixed mode needs estimation.rho with positive entries".into());
                }
            }
            Mode::Profile => {
                if !range_len_ok(&e.x0) {
                    return bad(format!("profile mode needs estimation.x0 with 1 or {} entries", l.dim));
                }
                if e.lower.len() != e.upper.len() || (!e.lower.is_empty() && e.lower.len() != e.x0.len()) {
                    return bad("estimation.lower/upper must match x0 in length".into());
                }
                if e.lower.is_empty() && e.x0.iter().any(|r| !(*r > 0.0)) {
                    return bad("estimation.x0 must be positive".into());
                }
                e.optimizer()
                    .validate(e.x0.len())
                    .map_err(|err| Error::Config(format!("estimation: {err}")))?;
            }
        }
        if !(self.simulation.jitter >= 0.0) {
            return bad("simulation.jitter must be nonnegative".into());
        }
        Ok(())
    }

    /// Output directory default when none is given on the command line.
    pub fn default_out_dir() -> PathBuf {
        PathBuf::from("out")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"
        seed = 3
        replicates = 2
        [lattice]
        per_axis = 10
        dim = 2
        side = 5.0
        delta = 1.0
        [truth]
        phi = 1.0
        rho = [5.0]
        nu = 0.5
        [estimation]
        mode = "fixed"
        rho = [10.0]
    "#;

    #[test]
    fn parses_with_defaults() {
        let cfg = ExperimentConfig::from_toml(BASIC).unwrap();
        assert_eq!(cfg.precondition.m, 2);
        assert_eq!(cfg.partition.scheme, Scheme::Uniform);
        assert_eq!(cfg.estimation.max_iter, 50);
        let again = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn rejects_bad_values() {
        let bad = BASIC.replace("dim = 2", "dim = 4");
        assert!(matches!(ExperimentConfig::from_toml(&bad), Err(Error::Config(_))));
        let bad = BASIC.replace("rho = [10.0]", "rho = [-1.0]");
        assert!(ExperimentConfig::from_toml(&bad).is_err());
        let bad = BASIC.replace("seed = 3", "seed = 3\nbogus = 1");
        assert!(ExperimentConfig::from_toml(&bad).is_err());
    }
}
