//! Lattice regularity, effective rank and decay diagnostics for one
//! configuration.

use lif_core::covariance::{entry_decay_fit, DecayFit};
use lif_core::lif::effective_rank_psi;
use lif_core::precondition::precondition_all;
use lif_core::RegularityReport;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::experiment::{build_lattice, build_partition};

/// Entries below this fraction of the largest diagonal entry are treated as
/// rounding noise by the decay fit.
pub const DECAY_FLOOR: f64 = 1e-11;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub n: usize,
    pub regularity: RegularityReport,
    /// Ψ of the block-diagonal filtered covariance at the true range, or the
    /// reason it was skipped.
    pub psi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi_skipped: Option<String>,
    pub decay: Option<DecayFit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay_skipped: Option<String>,
    /// Largest moment residual over all sites.
    pub max_moment_residual: f64,
}

/// Diagnostics for replicate 0 of `cfg`.
pub fn diagnose(cfg: &ExperimentConfig) -> Result<Diagnostics> {
    cfg.validate()?;
    let lat = build_lattice(cfg, 0)?;
    let truth = cfg.truth.params()?;
    let regularity = lat.verify_regularity(cfg.diagnostics.regularity_sites);
    let pc = precondition_all(&lat, cfg.precondition.m, truth.nu)?;
    let max_moment_residual = (0..lat.len()).map(|s| pc.moment_residual(&lat, s)).fold(0.0, f64::max);
    let part = build_partition(cfg, &lat, 0)?;
    let (psi, psi_skipped) = match effective_rank_psi(&lat, &pc, &part, &truth.rho, cfg.diagnostics.psi_max_n) {
        Ok(v) => (Some(v), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let (decay, decay_skipped) =
        match entry_decay_fit(&lat, &pc, &truth.rho, cfg.diagnostics.decay_centers, DECAY_FLOOR) {
            Ok(f) => (Some(f), None),
            Err(e) => (None, Some(e.to_string())),
        };
    Ok(Diagnostics { n: lat.len(), regularity, psi, psi_skipped, decay, decay_skipped, max_moment_residual })
}
