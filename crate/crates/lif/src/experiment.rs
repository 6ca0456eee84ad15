//! Monte Carlo replicates of simulate → precondition → partition → estimate.
//!
//! Replicate `r` derives its lattice, field and partition seeds from the
//! master seed and `r`, so results do not depend on the thread count or on
//! which replicates run together.

use std::path::Path;
use std::time::Instant;

use lif_core::lattice::build_perturbed_lattice;
use lif_core::partition::{partition_nonuniform, partition_rectangular, partition_singleton, partition_uniform};
use lif_core::precondition::precondition_all;
use lif_core::rng::{derive_seed, DOMAIN_FIELD, DOMAIN_LATTICE, DOMAIN_PARTITION};
use lif_core::{optimize, EstimationResult, Lattice, Partition, PreconditionerCoeffs};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Scheme};
use crate::error::{Error, Result};
use crate::io;
use crate::simulate::Sampler;

pub fn lattice_seed(cfg: &ExperimentConfig, r: usize) -> u64 {
    derive_seed(cfg.seed, DOMAIN_LATTICE, if cfg.fix_lattice { 0 } else { r as u64 })
}

pub fn field_seed(cfg: &ExperimentConfig, r: usize) -> u64 {
    derive_seed(cfg.seed, DOMAIN_FIELD, r as u64)
}

pub fn partition_seed(cfg: &ExperimentConfig, r: usize) -> u64 {
    derive_seed(cfg.seed, DOMAIN_PARTITION, r as u64)
}

pub fn build_lattice(cfg: &ExperimentConfig, r: usize) -> Result<Lattice> {
    let l = &cfg.lattice;
    Ok(build_perturbed_lattice(l.per_axis, l.dim, l.side, l.delta, lattice_seed(cfg, r))?)
}

pub fn build_partition(cfg: &ExperimentConfig, lat: &Lattice, r: usize) -> Result<Partition> {
    let p = &cfg.partition;
    let n = lat.len();
    let seed = partition_seed(cfg, r);
    Ok(match p.scheme {
        Scheme::Uniform => partition_uniform(n, p.bins, seed)?,
        Scheme::Nonuniform => partition_nonuniform(n, p.bins, seed)?,
        Scheme::Rectangular => partition_rectangular(lat, &p.grid)?,
        Scheme::Singleton => partition_singleton(n)?,
    })
}

/// Lattice, filters and factored covariance for one replicate.
pub struct Setup {
    pub lattice: Lattice,
    pub coeffs: PreconditionerCoeffs,
    pub sampler: Sampler,
}

pub fn setup(cfg: &ExperimentConfig, r: usize) -> Result<Setup> {
    let lattice = build_lattice(cfg, r)?;
    let truth = cfg.truth.params()?;
    let coeffs = precondition_all(&lattice, cfg.precondition.m, truth.nu)?;
    let sampler = Sampler::with_cap(&lattice, &truth, cfg.simulation.jitter, cfg.simulation.max_n)?;
    Ok(Setup { lattice, coeffs, sampler })
}

/// Draws replicate `r`'s field on `s` and estimates from it.
pub fn estimate_replicate(cfg: &ExperimentConfig, s: &Setup, r: usize) -> Result<EstimationResult> {
    let truth = cfg.truth.params()?;
    let raw = s.sampler.sample(field_seed(cfg, r), 0);
    let y = s.coeffs.apply(&raw)?;
    let part = build_partition(cfg, &s.lattice, r)?;
    Ok(optimize::estimate(
        &s.lattice,
        &y,
        &s.coeffs,
        &part,
        &cfg.estimation.optimizer(),
        &cfg.estimation.mode(),
        Some(&truth),
    )?)
}

/// One row of `replicates.csv`. Failed replicates keep their row with NaN
/// estimates and the error in `status`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateRecord {
    pub replicate: usize,
    pub phi_hat: f64,
    pub rho_hat: Vec<f64>,
    pub xi_hat: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub status: String,
}

impl ReplicateRecord {
    /// Whether the replicate produced an estimate (possibly nonpositive).
    pub fn ok(&self) -> bool {
        self.status == "ok" || self.status == "nonpositive"
    }

    fn failed(replicate: usize, rho_len: usize, xi_len: usize, err: &Error) -> Self {
        Self {
            replicate,
            phi_hat: f64::NAN,
            rho_hat: vec![f64::NAN; rho_len],
            xi_hat: vec![f64::NAN; xi_len],
            iterations: 0,
            converged: false,
            status: err.to_string().replace(['\n', '\r'], " "),
        }
    }

    fn from_result(replicate: usize, res: &EstimationResult) -> Self {
        Self {
            replicate,
            phi_hat: res.phi_hat,
            rho_hat: res.rho_hat.clone(),
            xi_hat: res.xi_hat.clone().unwrap_or_default(),
            iterations: res.iterations,
            converged: res.converged,
            status: if res.phi_nonpositive { "nonpositive".into() } else { "ok".into() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub replicates: usize,
    pub succeeded: usize,
    pub failures: usize,
    pub xi_mean: Vec<f64>,
    /// Sample standard deviation; absent with fewer than two successes.
    pub xi_sd: Option<Vec<f64>>,
    pub phi_mean: f64,
    pub rho_mean: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_seconds: Option<f64>,
}

fn mean_sd(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, None);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, Some(var.sqrt()))
}

/// Summary statistics over the successful records.
pub fn summarize(records: &[ReplicateRecord]) -> Summary {
    let ok: Vec<&ReplicateRecord> = records.iter().filter(|r| r.ok()).collect();
    let k_xi = records.first().map_or(0, |r| r.xi_hat.len());
    let k_rho = records.first().map_or(0, |r| r.rho_hat.len());
    let column = |f: &dyn Fn(&ReplicateRecord) -> f64| ok.iter().map(|r| f(r)).collect::<Vec<f64>>();
    let mut xi_mean = Vec::new();
    let mut xi_sd = Vec::new();
    for k in 0..k_xi {
        let (m, s) = mean_sd(&column(&|r| r.xi_hat[k]));
        xi_mean.push(m);
        xi_sd.push(s);
    }
    let rho_mean = (0..k_rho).map(|k| mean_sd(&column(&|r| r.rho_hat[k])).0).collect();
    Summary {
        replicates: records.len(),
        succeeded: ok.len(),
        failures: records.len() - ok.len(),
        xi_mean,
        xi_sd: xi_sd.into_iter().collect(),
        phi_mean: mean_sd(&column(&|r| r.phi_hat)).0,
        rho_mean,
        wall_seconds: None,
    }
}

pub struct ExperimentOutput {
    pub records: Vec<ReplicateRecord>,
    /// Wall time of each replicate, in replicate order.
    pub seconds: Vec<f64>,
    pub summary: Summary,
}

/// Runs every replicate of `cfg`. Per-replicate failures are recorded, not
/// propagated; configuration errors are.
pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let start = Instant::now();
    let rho_len = match cfg.estimation.mode {
        crate::config::Mode::Fixed => cfg.estimation.rho.len(),
        crate::config::Mode::Profile => cfg.estimation.x0.len(),
    };
    let xi_len = rho_len.max(cfg.truth.rho.len());
    let shared = if cfg.fix_lattice { Some(setup(cfg, 0)?) } else { None };
    let rows: Vec<(ReplicateRecord, f64)> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            let t = Instant::now();
            let res = match &shared {
                Some(s) => estimate_replicate(cfg, s, r),
                None => setup(cfg, r).and_then(|s| estimate_replicate(cfg, &s, r)),
            };
            let rec = match res {
                Ok(res) => ReplicateRecord::from_result(r, &res),
                Err(e) => {
                    log::warn!("replicate {r} failed: {e}");
                    ReplicateRecord::failed(r, rho_len, xi_len, &e)
                }
            };
            (rec, t.elapsed().as_secs_f64())
        })
        .collect();
    let (records, seconds): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    let mut summary = summarize(&records);
    summary.wall_seconds = Some(start.elapsed().as_secs_f64());
    Ok(ExperimentOutput { records, seconds, summary })
}

/// Writes `replicates.csv`, `timing.csv`, `summary.json` and the resolved
/// `config.toml` into `dir`, which must exist.
pub fn write_outputs(dir: &Path, cfg: &ExperimentConfig, out: &ExperimentOutput) -> Result<()> {
    if !dir.is_dir() {
        return Err(Error::Config(format!("output directory {} does not exist", dir.display())));
    }
    write_replicates(&dir.join("replicates.csv"), &out.records)?;
    let path = dir.join("timing.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| Error::csv(&path, e))?;
    w.write_record(["replicate", "seconds"]).map_err(|e| Error::csv(&path, e))?;
    for (r, s) in out.seconds.iter().enumerate() {
        w.write_record([r.to_string(), format!("{s:.6}")]).map_err(|e| Error::csv(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    io::write_json(&dir.join("summary.json"), &out.summary)?;
    let path = dir.join("config.toml");
    std::fs::write(&path, cfg.to_toml()).map_err(|e| Error::io(&path, e))
}

pub fn write_replicates(path: &Path, records: &[ReplicateRecord]) -> Result<()> {
    let k_rho = records.first().map_or(0, |r| r.rho_hat.len());
    let k_xi = records.first().map_or(0, |r| r.xi_hat.len());
    let mut header = vec!["replicate".to_string(), "phi_hat".into()];
    header.extend((1..=k_rho).map(|k| format!("rho_hat_{k}")));
    header.extend((1..=k_xi).map(|k| format!("xi_hat_{k}")));
    header.extend(["iterations".into(), "converged".into(), "status".into()]);
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record(&header).map_err(|e| Error::csv(path, e))?;
    for r in records {
        let mut row = vec![r.replicate.to_string(), r.phi_hat.to_string()];
        row.extend(r.rho_hat.iter().map(f64::to_string));
        row.extend(r.xi_hat.iter().map(f64::to_string));
        row.extend([r.iterations.to_string(), r.converged.to_string(), r.status.clone()]);
        w.write_record(&row).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_replicates(path: &Path) -> Result<Vec<ReplicateRecord>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let header = rdr.headers().map_err(|e| Error::csv(path, e))?.clone();
    let k_rho = header.iter().filter(|h| h.starts_with("rho_hat_")).count();
    let k_xi = header.iter().filter(|h| h.starts_with("xi_hat_")).count();
    if header.len() != 5 + k_rho + k_xi {
        return Err(Error::format(path, format!("unexpected header {header:?}")));
    }
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let f = |i: usize| -> Result<f64> {
            rec[i].parse().map_err(|_| Error::format(path, format!("row {}: bad number {:?}", row + 1, &rec[i])))
        };
        let int = |i: usize| -> Result<usize> {
            rec[i].parse().map_err(|_| Error::format(path, format!("row {}: bad integer {:?}", row + 1, &rec[i])))
        };
        let base = 2 + k_rho + k_xi;
        out.push(ReplicateRecord {
            replicate: int(0)?,
            phi_hat: f(1)?,
            rho_hat: (2..2 + k_rho).map(f).collect::<Result<_>>()?,
            xi_hat: (2 + k_rho..base).map(f).collect::<Result<_>>()?,
            iterations: int(base)?,
            converged: &rec[base + 1] == "true",
            status: rec[base + 2].to_string(),
        });
    }
    Ok(out)
}
