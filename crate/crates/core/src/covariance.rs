//! Matérn covariance and the covariance of filtered observations.
//!
//! `K_m(s, t; ρ) = N^{2ν} Σ_{s'} Σ_{t'} a_s(s') a_t(t') f_ν(r(s', t'))` with
//! `r` the range-scaled distance. Bin matrices are computed through the
//! kernel matrix on the union `U` of all neighborhoods touched by the bin:
//! row `i` first forms `w_i = Σ_{s'} a_i(s') C[s', U]` and then reads off
//! `K_ij = Σ_{t'} a_j(t') w_i[t']`.

use alloc::vec;
use alloc::vec::Vec;

use crate::lattice::Lattice;
use crate::linalg::DenseMatrix;
use crate::par;
use crate::precondition::PreconditionerCoeffs;
use crate::special::Matern;
use crate::{Error, Result};

/// Rows per bin above which bin rows are evaluated in parallel.
const PAR_ROWS: usize = 64;

/// Variance `phi`, range `rho` (one entry, or one per axis) and smoothness
/// `nu` of a Matérn covariance.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MaternParams {
    pub phi: f64,
    pub rho: Vec<f64>,
    pub nu: f64,
}

impl MaternParams {
    pub fn new(phi: f64, rho: Vec<f64>, nu: f64) -> Result<Self> {
        let p = Self { phi, rho, nu };
        p.validate()?;
        Ok(p)
    }

    pub fn isotropic(phi: f64, rho: f64, nu: f64) -> Result<Self> {
        Self::new(phi, vec![rho], nu)
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if !pos(self.phi) {
            return Err(Error::InvalidParameter(alloc::format!("variance must be positive, got {}", self.phi)));
        }
        if !pos(self.nu) {
            return Err(Error::InvalidParameter(alloc::format!("smoothness must be positive, got {}", self.nu)));
        }
        if self.rho.is_empty() || self.rho.len() > 3 || !self.rho.iter().all(|&r| pos(r)) {
            return Err(Error::InvalidParameter(alloc::format!("invalid range vector {:?}", self.rho)));
        }
        Ok(())
    }

    pub fn is_isotropic(&self) -> bool {
        self.rho.len() == 1
    }

    /// Checks that the range vector fits points of dimension `dim`.
    pub fn check_dim(&self, dim: usize) -> Result<()> {
        if self.rho.len() == 1 || self.rho.len() == dim {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { left: self.rho.len(), right: dim })
        }
    }

    /// `φ ρ^{-2ν}`, componentwise.
    pub fn microergodic(&self) -> Vec<f64> {
        microergodic(self.phi, &self.rho, self.nu)
    }

    /// Range-scaled distance between two points.
    pub fn scaled_distance(&self, s: &[f64], t: &[f64]) -> Result<f64> {
        if s.len() != t.len() {
            return Err(Error::DimensionMismatch { left: s.len(), right: t.len() });
        }
        self.check_dim(s.len())?;
        Ok(scaled_distance(&self.rho, s, t))
    }
}

/// `φ ρ_i^{-2ν}` for each range component.
pub fn microergodic(phi: f64, rho: &[f64], nu: f64) -> Vec<f64> {
    rho.iter().map(|r| phi * libm::pow(*r, -2.0 * nu)).collect()
}

fn scaled_distance(rho: &[f64], s: &[f64], t: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (i, (a, b)) in s.iter().zip(t).enumerate() {
        let r = if rho.len() == 1 { rho[0] } else { rho[i] };
        let d = (a - b) / r;
        acc += d * d;
    }
    libm::sqrt(acc)
}

/// `φ f_ν(r)` at the scaled distance between `s` and `t`.
pub fn matern_cov(s: &[f64], t: &[f64], p: &MaternParams) -> Result<f64> {
    let r = p.scaled_distance(s, t)?;
    Ok(p.phi * Matern::new(p.nu)?.eval(r))
}

/// `φ ρ^{-2ν} π^{-d/2} (ρ^{-2} + ‖ω‖²)^{-(ν + d/2)}` for isotropic
/// parameters, with `d = omega.len()`. Multiply by
/// [`spectral_normalizer`] to obtain the Fourier transform of
/// [`matern_cov`].
pub fn matern_spectral_density(omega: &[f64], p: &MaternParams) -> Result<f64> {
    if !p.is_isotropic() {
        return Err(Error::AnisotropicUnsupported);
    }
    let d = omega.len() as f64;
    let rho = p.rho[0];
    let w2: f64 = omega.iter().map(|w| w * w).sum();
    Ok(p.phi * libm::pow(rho, -2.0 * p.nu) * libm::pow(core::f64::consts::PI, -d / 2.0)
        * libm::pow(1.0 / (rho * rho) + w2, -(p.nu + d / 2.0)))
}

/// `Γ(ν + d/2) / Γ(ν)`.
pub fn spectral_normalizer(nu: f64, d: usize) -> f64 {
    libm::exp(libm::lgamma(nu + d as f64 / 2.0) - libm::lgamma(nu))
}

/// Dense covariance of the filtered observations restricted to one bin,
/// without the variance factor.
#[derive(Debug, Clone, PartialEq)]
pub struct BinCovMatrix {
    pub bin: usize,
    pub sites: Vec<usize>,
    pub rho: Vec<f64>,
    pub matrix: DenseMatrix,
}

/// Evaluates `K_m` entries for fixed lattice, filters and range.
#[derive(Debug, Clone)]
pub struct FilteredCovariance<'a> {
    lat: &'a Lattice,
    pc: &'a PreconditionerCoeffs,
    kernel: Matern,
    rho: Vec<f64>,
    amp2: f64,
}

/// Sums over one bin: `a = yᵀ K y`, `b = ‖K‖_F²` and the number of distinct
/// entries evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BinSums {
    pub a: f64,
    pub b: f64,
    pub entries: u64,
}

impl<'a> FilteredCovariance<'a> {
    pub fn new(lat: &'a Lattice, pc: &'a PreconditionerCoeffs, rho: &[f64]) -> Result<Self> {
        if pc.len() != lat.len() {
            return Err(Error::LengthMismatch { expected: lat.len(), got: pc.len() });
        }
        let p = MaternParams::new(1.0, rho.to_vec(), pc.nu())?;
        p.check_dim(lat.dim())?;
        let amp = pc.amplitude();
        Ok(Self { lat, pc, kernel: Matern::new(pc.nu())?, rho: rho.to_vec(), amp2: amp * amp })
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    #[inline]
    fn corr(&self, i: usize, j: usize) -> f64 {
        self.kernel.eval(scaled_distance(&self.rho, self.lat.point(i), self.lat.point(j)))
    }

    /// `K_m(s, t; ρ)` by the direct double sum; the pair is ordered so the
    /// result is exactly symmetric.
    pub fn entry(&self, s: usize, t: usize) -> f64 {
        let (s, t) = if s <= t { (s, t) } else { (t, s) };
        let (ns, cs) = self.pc.site(s);
        let (nt, ct) = self.pc.site(t);
        let mut acc = 0.0;
        for (&u, &a) in ns.iter().zip(cs) {
            let mut row = 0.0;
            for (&v, &b) in nt.iter().zip(ct) {
                row += b * self.corr(u, v);
            }
            acc += a * row;
        }
        self.amp2 * acc
    }

    fn prepare(&self, bin: &[usize]) -> Result<BinWork> {
        if bin.is_empty() {
            return Err(Error::EmptyBin);
        }
        let n = self.pc.len();
        let mut union: Vec<usize> = Vec::new();
        for &s in bin {
            if s >= n {
                return Err(Error::SiteOutOfRange { site: s, n });
            }
            union.extend_from_slice(self.pc.site(s).0);
        }
        union.sort_unstable();
        union.dedup();
        let u = union.len();
        let rows = par::map_range_min(u, PAR_ROWS, |i| {
            (i..u).map(|j| self.corr(union[i], union[j])).collect::<Vec<f64>>()
        });
        let mut c = vec![0.0; u * u];
        for (i, row) in rows.into_iter().enumerate() {
            for (k, v) in row.into_iter().enumerate() {
                let j = i + k;
                c[i * u + j] = v;
                c[j * u + i] = v;
            }
        }
        let stencils = bin
            .iter()
            .map(|&s| {
                let (nb, co) = self.pc.site(s);
                nb.iter()
                    .zip(co)
                    .map(|(t, &a)| (union.binary_search(t).unwrap_or_else(|_| unreachable!()), a))
                    .collect()
            })
            .collect();
        Ok(BinWork { u, c, stencils })
    }

    /// Row `i` of the bin matrix from column `i` onwards.
    fn upper_row(&self, work: &BinWork, i: usize, w: &mut [f64]) -> Vec<f64> {
        w.iter_mut().for_each(|v| *v = 0.0);
        for &(p, a) in &work.stencils[i] {
            let row = &work.c[p * work.u..(p + 1) * work.u];
            for (wv, cv) in w.iter_mut().zip(row) {
                *wv += a * cv;
            }
        }
        work.stencils[i..]
            .iter()
            .map(|st| {
                let mut acc = 0.0;
                for &(p, a) in st {
                    acc += a * w[p];
                }
                self.amp2 * acc
            })
            .collect()
    }

    /// Dense bin matrix.
    pub fn bin_matrix(&self, bin_id: usize, bin: &[usize]) -> Result<BinCovMatrix> {
        let work = self.prepare(bin)?;
        let k = bin.len();
        let rows = par::map_range_min(k, PAR_ROWS, |i| {
            let mut w = vec![0.0; work.u];
            self.upper_row(&work, i, &mut w)
        });
        let mut m = DenseMatrix::zeros(k);
        for (i, row) in rows.into_iter().enumerate() {
            for (off, v) in row.into_iter().enumerate() {
                m.set(i, i + off, v);
                m.set(i + off, i, v);
            }
        }
        Ok(BinCovMatrix { bin: bin_id, sites: bin.to_vec(), rho: self.rho.clone(), matrix: m })
    }

    /// `yᵀ K y` (with `y` indexed by site) and `‖K‖_F²` over one bin without
    /// storing the bin matrix.
    pub fn bin_sums(&self, bin: &[usize], y: &[f64]) -> Result<BinSums> {
        if y.len() != self.pc.len() {
            return Err(Error::LengthMismatch { expected: self.pc.len(), got: y.len() });
        }
        if bin.len() == 1 {
            let s = bin[0];
            if s >= y.len() {
                return Err(Error::SiteOutOfRange { site: s, n: y.len() });
            }
            let c = self.entry(s, s);
            return Ok(BinSums { a: c * y[s] * y[s], b: c * c, entries: 1 });
        }
        let work = self.prepare(bin)?;
        let k = bin.len();
        let partial = par::map_range_min(k, PAR_ROWS, |i| {
            let mut w = vec![0.0; work.u];
            let row = self.upper_row(&work, i, &mut w);
            let yi = y[bin[i]];
            let (mut a, mut b) = (row[0] * yi * yi, row[0] * row[0]);
            for (off, v) in row.iter().enumerate().skip(1) {
                a += 2.0 * v * yi * y[bin[i + off]];
                b += 2.0 * v * v;
            }
            (a, b)
        });
        let (mut a, mut b) = (0.0, 0.0);
        for (pa, pb) in partial {
            a += pa;
            b += pb;
        }
        Ok(BinSums { a, b, entries: (k * (k + 1) / 2) as u64 })
    }
}

struct BinWork {
    u: usize,
    /// Kernel matrix on the neighborhood union, row-major `u × u`.
    c: Vec<f64>,
    /// Per bin member: (position in the union, coefficient).
    stencils: Vec<Vec<(usize, f64)>>,
}

/// `K_m(s, t; ρ)` by the direct double sum.
pub fn preconditioned_cov_entry(
    lat: &Lattice,
    pc: &PreconditionerCoeffs,
    s: usize,
    t: usize,
    rho: &[f64],
) -> Result<f64> {
    let n = lat.len();
    for x in [s, t] {
        if x >= n {
            return Err(Error::SiteOutOfRange { site: x, n });
        }
    }
    Ok(FilteredCovariance::new(lat, pc, rho)?.entry(s, t))
}

/// Dense `K_m` restricted to `bin`.
pub fn bin_cov_matrix(
    lat: &Lattice,
    pc: &PreconditionerCoeffs,
    bin: &[usize],
    rho: &[f64],
) -> Result<BinCovMatrix> {
    FilteredCovariance::new(lat, pc, rho)?.bin_matrix(0, bin)
}

/// Least-squares fit of `ln |K_m(s,t)|` against `ln(1 + N ‖t - s‖)` on the
/// upper envelope of the entries.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    /// Envelope points `(ln(1 + N d), ln max |K|)` used in the fit.
    pub points: Vec<(f64, f64)>,
}

/// Width of the distance buckets of [`entry_decay_fit`], in `ln(1 + N d)`.
pub const DECAY_BUCKET: f64 = 0.25;

/// Fits the decay rate of off-diagonal entries.
///
/// Rows are taken at `centers` sites spread evenly over the site order. For
/// every row all other sites contribute; distances are bucketed on the log
/// scale and the largest magnitude per bucket forms the envelope. Entries
/// below `floor` times the largest diagonal entry seen are dropped as
/// rounding noise, as are buckets closer than `ln 3` (overlapping
/// neighborhoods).
pub fn entry_decay_fit(
    lat: &Lattice,
    pc: &PreconditionerCoeffs,
    rho: &[f64],
    centers: usize,
    floor: f64,
) -> Result<DecayFit> {
    let cov = FilteredCovariance::new(lat, pc, rho)?;
    let n = lat.len();
    let centers = centers.clamp(1, n);
    let scale = pc.n_scale() as f64;
    let rows = par::map_range(centers, |c| {
        let s = c * n / centers;
        let diag = cov.entry(s, s);
        let pts: Vec<(f64, f64)> = (0..n)
            .filter(|&t| t != s)
            .map(|t| (libm::log(1.0 + scale * libm::sqrt(lat.dist2(s, t))), cov.entry(s, t).abs()))
            .collect();
        (diag, pts)
    });
    let max_diag = rows.iter().fold(0.0f64, |m, (d, _)| m.max(*d));
    let cutoff = floor * max_diag;
    let min_x = libm::log(3.0);
    let mut buckets: Vec<f64> = Vec::new();
    for (_, pts) in &rows {
        for &(x, v) in pts {
            if x < min_x || !(v > cutoff) {
                continue;
            }
            let k = ((x - min_x) / DECAY_BUCKET) as usize;
            if buckets.len() <= k {
                buckets.resize(k + 1, 0.0);
            }
            buckets[k] = buckets[k].max(v);
        }
    }
    let points: Vec<(f64, f64)> = buckets
        .iter()
        .enumerate()
        .filter(|(_, v)| **v > 0.0)
        .map(|(k, v)| (min_x + (k as f64 + 0.5) * DECAY_BUCKET, libm::log(*v)))
        .collect();
    if points.len() < 2 {
        return Err(Error::InvalidParameter("too few envelope points for a decay fit".into()));
    }
    let m = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / m;
    let my = points.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let slope = sxy / sxx;
    Ok(DecayFit { slope, intercept: my - slope * mx, points })
}
