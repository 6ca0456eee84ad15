//! Exact simulation of zero-mean Matérn fields through a dense factor of the
//! covariance matrix.

use faer::{Mat, Par, Side};
use lif_core::covariance::MaternParams;
use lif_core::rng;
use lif_core::special::Matern;
use lif_core::Lattice;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Largest lattice the dense simulator accepts by default.
pub const DEFAULT_MAX_N: usize = 20_000;
/// Initial diagonal jitter, relative to the mean variance.
pub const DEFAULT_JITTER: f64 = 1e-10;
/// Largest jitter tried before falling back to an eigendecomposition.
pub const MAX_JITTER: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct SimulationSpec<'a> {
    pub lattice: &'a Lattice,
    pub params: MaternParams,
    pub seed: u64,
    pub jitter: f64,
}

/// Dense `n × n` covariance `φ f_ν(r(s, t))`. Each off-diagonal entry is
/// computed once and mirrored.
pub fn dense_cov(lat: &Lattice, p: &MaternParams, max_n: usize) -> Result<Mat<f64>> {
    p.validate()?;
    p.check_dim(lat.dim())?;
    let n = lat.len();
    if n > max_n {
        return Err(lif_core::Error::InstanceTooLarge { n, max: max_n }.into());
    }
    let kernel = Matern::new(p.nu)?;
    let mut c = Mat::<f64>::zeros(n, n);
    for j in 0..n {
        c[(j, j)] = p.phi;
        for i in j + 1..n {
            let r = p.scaled_distance(lat.point(i), lat.point(j))?;
            let v = p.phi * kernel.eval(r);
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    Ok(c)
}

/// How the covariance was factored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FactorKind {
    /// Cholesky factor of `Σ + jitter · mean(diag) · I`.
    Cholesky { jitter: f64 },
    /// `U diag(√max(λ, 0))` from a symmetric eigendecomposition.
    Eigen { clipped: usize, min_eigenvalue: f64 },
}

/// A reusable square-root factor `L` with `L Lᵀ ≈ Σ`.
#[derive(Debug, Clone)]
pub struct Sampler {
    factor: Mat<f64>,
    kind: FactorKind,
}

impl Sampler {
    /// Factors the covariance of `p` on `lat`, escalating the jitter by
    /// factors of ten from `jitter` up to [`MAX_JITTER`] and falling back to
    /// an eigendecomposition with negative eigenvalues clipped.
    pub fn new(lat: &Lattice, p: &MaternParams, jitter: f64) -> Result<Self> {
        Self::with_cap(lat, p, jitter, DEFAULT_MAX_N)
    }

    pub fn with_cap(lat: &Lattice, p: &MaternParams, jitter: f64, max_n: usize) -> Result<Self> {
        if !(jitter >= 0.0) {
            return Err(Error::Config(format!("jitter must be nonnegative, got {jitter}")));
        }
        // Sequential kernels keep the factor identical for every thread count.
        faer::set_global_parallelism(Par::Seq);
        let cov = dense_cov(lat, p, max_n)?;
        Self::from_covariance(cov, jitter)
    }

    pub fn from_covariance(cov: Mat<f64>, jitter: f64) -> Result<Self> {
        let n = cov.nrows();
        let mean_diag = (0..n).map(|i| cov[(i, i)]).sum::<f64>() / n as f64;
        let mut level = jitter;
        loop {
            let mut shifted = cov.clone();
            for i in 0..n {
                shifted[(i, i)] += level * mean_diag;
            }
            if let Ok(llt) = shifted.llt(Side::Lower) {
                let factor = llt.L().to_owned();
                return Ok(Self { factor, kind: FactorKind::Cholesky { jitter: level } });
            }
            if level >= MAX_JITTER {
                break;
            }
            level = if level == 0.0 { DEFAULT_JITTER } else { (level * 10.0).min(MAX_JITTER) };
        }
        log::warn!("Cholesky failed up to jitter {MAX_JITTER}; using an eigendecomposition");
        let evd = cov
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Factorization(format!("eigendecomposition did not converge: {e:?}")))?;
        let s = evd.S().column_vector();
        let u = evd.U();
        let mut clipped = 0;
        let mut min_eigenvalue = f64::INFINITY;
        let mut factor = Mat::<f64>::zeros(n, n);
        for k in 0..n {
            let lam = s[k];
            min_eigenvalue = min_eigenvalue.min(lam);
            if lam <= 0.0 {
                clipped += 1;
                continue;
            }
            let r = lam.sqrt();
            for i in 0..n {
                factor[(i, k)] = u[(i, k)] * r;
            }
        }
        if !factor.as_ref().is_all_finite() {
            return Err(Error::Factorization(format!(
                "non-finite factor (smallest eigenvalue {min_eigenvalue:e})"
            )));
        }
        Ok(Self { factor, kind: FactorKind::Eigen { clipped, min_eigenvalue } })
    }

    pub fn len(&self) -> usize {
        self.factor.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> FactorKind {
        self.kind
    }

    pub fn factor(&self) -> &Mat<f64> {
        &self.factor
    }

    /// `L z` with `z` drawn from stream `index` of `(seed, field domain)`.
    pub fn sample(&self, seed: u64, index: u64) -> Vec<f64> {
        let n = self.len();
        let mut stream = rng::stream(seed, rng::DOMAIN_FIELD, index);
        let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut stream)).collect();
        let cols = match self.kind {
            FactorKind::Cholesky { .. } => None,
            FactorKind::Eigen { .. } => Some(n),
        };
        let mut out = vec![0.0; n];
        for (j, &zj) in z.iter().enumerate() {
            let col = self.factor.col(j);
            let start = if cols.is_none() { j } else { 0 };
            for i in start..n {
                out[i] += col[i] * zj;
            }
        }
        out
    }
}

/// One exact draw of the field described by `spec`.
pub fn sample_gp(spec: &SimulationSpec<'_>) -> Result<Vec<f64>> {
    let sampler = Sampler::new(spec.lattice, &spec.params, spec.jitter)?;
    Ok(sampler.sample(spec.seed, 0))
}
