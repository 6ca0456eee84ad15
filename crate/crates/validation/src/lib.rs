//! Shared helpers for the acceptance checks: preset loading and the
//! pass/fail ledger that the `acceptance` target prints.

use std::path::PathBuf;
use std::time::Instant;

use lif::config::ExperimentConfig;

/// Path of a preset under the workspace `configs/` directory.
pub fn preset_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

pub fn preset(name: &str) -> ExperimentConfig {
    ExperimentConfig::load(&preset_path(name)).unwrap_or_else(|e| panic!("preset {name}: {e}"))
}

/// Mean and sample standard deviation.
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Collects one outcome per criterion and prints it as soon as it is known.
#[derive(Default)]
pub struct Report {
    results: Vec<(String, bool)>,
}

impl Report {
    pub fn record(&mut self, id: &str, pass: bool, detail: &str, started: Instant) {
        let tag = if pass { "PASS" } else { "FAIL" };
        println!("{tag} {id}: {detail} ({:.1}s)", started.elapsed().as_secs_f64());
        self.results.push((id.to_string(), pass));
    }

    pub fn failed(&self) -> Vec<&str> {
        self.results.iter().filter(|r| !r.1).map(|r| r.0.as_str()).collect()
    }

    pub fn len(&self) -> usize {
        self.results.len()
    }

    pub fn is_empty(&self) -> bool {
        self.results.is_empty()
    }
}
