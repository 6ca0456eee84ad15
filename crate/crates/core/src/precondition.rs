//! Local difference filters that annihilate low-order polynomials.
//!
//! For a site `s` the filter uses `s` and its nearest neighbors. With the
//! center coefficient pinned to one, the remaining coefficients solve the
//! square system `Σ_t a(t) (t - s)^r = 0` for every multi-index `|r|₁ ≤ m`,
//! after which the coefficients are scaled to unit Euclidean norm. The
//! filtered observation at `s` is `N^ν Σ_t a(t) Z(t)`.

use alloc::vec;
use alloc::vec::Vec;

use crate::lattice::{integer_root, Lattice};
use crate::linalg::solve_min_norm;
use crate::par;
use crate::{Error, Result};

/// Largest allowed moment residual of a solved filter (in `N`-scaled offsets).
pub const RESIDUAL_TOL: f64 = 1e-8;
/// Coefficients at most this fraction of the largest one are treated as zero
/// and their sites dropped from the neighborhood.
pub const ZERO_COEFF_RATIO: f64 = 1e-12;
const RANK_TOL: f64 = 1e-10;

/// Filter coefficients for every site of a lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct PreconditionerCoeffs {
    m: usize,
    nu: f64,
    dim: usize,
    n_scale: usize,
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    coeffs: Vec<f64>,
}

/// Filtered observations aligned with site order.
#[derive(Debug, Clone, PartialEq)]
pub struct PreconditionedSample {
    pub values: Vec<f64>,
    pub m: usize,
    pub nu: f64,
}

/// Output of the regular-grid Laplacian filter on interior sites.
#[derive(Debug, Clone, PartialEq)]
pub struct InteriorSample {
    /// Site indices (into the full grid) of the interior, in site order.
    pub sites: Vec<usize>,
    pub values: Vec<f64>,
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// Number of sites (center included) in an order-`m` neighborhood.
pub fn neighborhood_size(m: usize, d: usize) -> Result<usize> {
    if !(1..=3).contains(&d) {
        return Err(Error::InvalidDimension(d));
    }
    if m == 0 {
        return Err(Error::InvalidParameter("preconditioning order must be at least 1".into()));
    }
    Ok(binomial(m + d, d) + 1)
}

/// Multi-indices with `|r|₁ ≤ m`, by total degree then lexicographically.
pub fn monomials(m: usize, d: usize) -> Vec<[u32; 3]> {
    let mut out = Vec::new();
    for deg in 0..=m as u32 {
        for r0 in (0..=deg).rev() {
            if d == 1 {
                if r0 == deg {
                    out.push([r0, 0, 0]);
                }
                continue;
            }
            for r1 in (0..=deg - r0).rev() {
                let r2 = deg - r0 - r1;
                if d == 2 && r2 != 0 {
                    continue;
                }
                out.push([r0, r1, r2]);
            }
        }
    }
    out
}

fn monomial(offset: &[f64], r: &[u32; 3]) -> f64 {
    offset.iter().zip(r).map(|(x, &p)| libm::pow(*x, p as f64)).product()
}

/// Solves the filter for explicit offsets.
///
/// `offsets` holds `k × dim` coordinates relative to the center (the center
/// itself is implicit, with coefficient pinned to one before
/// normalization). Returns `[center, a_1, …, a_k]` with unit norm, or `None`
/// when the system is rank deficient or its residual exceeds
/// [`RESIDUAL_TOL`].
pub fn solve_stencil(offsets: &[f64], dim: usize, m: usize) -> Option<Vec<f64>> {
    let k = offsets.len() / dim;
    let mons = monomials(m, dim);
    let rows = mons.len();
    let mut a = Vec::with_capacity(rows * k);
    let mut rhs = vec![0.0; rows];
    for (i, r) in mons.iter().enumerate() {
        for off in offsets.chunks_exact(dim) {
            a.push(monomial(off, r));
        }
        if r.iter().all(|&p| p == 0) {
            rhs[i] = -1.0;
        }
    }
    let sol = solve_min_norm(&a, rows, k, &rhs, RANK_TOL);
    if k == rows && sol.rank < rows {
        return None;
    }
    let mut full = Vec::with_capacity(k + 1);
    full.push(1.0);
    full.extend_from_slice(&sol.x);
    // Residual with the center included.
    for (i, r) in mons.iter().enumerate() {
        let mut acc = if i == 0 { 1.0 } else { 0.0 };
        for (off, c) in offsets.chunks_exact(dim).zip(&sol.x) {
            acc += c * monomial(off, r);
        }
        if !(acc.abs() <= RESIDUAL_TOL) {
            return None;
        }
    }
    let norm = libm::sqrt(full.iter().map(|v| v * v).sum());
    for v in &mut full {
        *v /= norm;
    }
    Some(full)
}

/// Neighborhood and unit-norm coefficients of the order-`m` filter at `s`.
/// The first entry is the center site.
pub fn solve_coefficients(lat: &Lattice, m: usize, s: usize) -> Result<(Vec<usize>, Vec<f64>)> {
    let d = lat.dim();
    let size = neighborhood_size(m, d)?;
    let n = lat.len();
    if n < size {
        return Err(Error::TooFewSites { m, d, needed: size, n });
    }
    if s >= n {
        return Err(Error::SiteOutOfRange { site: s, n });
    }
    let scale = integer_root(n, d) as f64;
    let nominal = size - 1;
    let pool_max = (2 * nominal).min(n - 1);
    let pool = lat.nearest_neighbors(s, pool_max)?;
    let center = lat.point(s);
    let mut offsets = Vec::with_capacity(pool_max * d);
    for &t in &pool {
        for (x, c) in lat.point(t).iter().zip(center) {
            offsets.push((x - c) * scale);
        }
    }
    for k in nominal..=pool_max {
        if let Some(coeffs) = solve_stencil(&offsets[..k * d], d, m) {
            let mut sites = Vec::with_capacity(k + 1);
            sites.push(s);
            sites.extend_from_slice(&pool[..k]);
            return Ok(drop_zeros(sites, coeffs));
        }
    }
    Err(Error::SingularSystem { site: s })
}

fn drop_zeros(sites: Vec<usize>, coeffs: Vec<f64>) -> (Vec<usize>, Vec<f64>) {
    let max = coeffs.iter().fold(0.0f64, |a, c| a.max(c.abs()));
    if coeffs.iter().all(|c| c.abs() > ZERO_COEFF_RATIO * max) {
        return (sites, coeffs);
    }
    let (sites, mut coeffs): (Vec<usize>, Vec<f64>) = sites
        .into_iter()
        .zip(coeffs)
        .filter(|(_, c)| c.abs() > ZERO_COEFF_RATIO * max)
        .unzip();
    let norm = libm::sqrt(coeffs.iter().map(|v| v * v).sum());
    for v in &mut coeffs {
        *v /= norm;
    }
    (sites, coeffs)
}

/// Solves the order-`m` filter at every site.
pub fn precondition_all(lat: &Lattice, m: usize, nu: f64) -> Result<PreconditionerCoeffs> {
    let d = lat.dim();
    let size = neighborhood_size(m, d)?;
    if !(nu > 0.0) || !nu.is_finite() {
        return Err(Error::InvalidParameter(alloc::format!("smoothness must be positive, got {nu}")));
    }
    if lat.len() < size {
        return Err(Error::TooFewSites { m, d, needed: size, n: lat.len() });
    }
    if (m as f64) < nu + d as f64 / 2.0 {
        log::warn!("preconditioning order {m} is below nu + d/2 = {}", nu + d as f64 / 2.0);
    }
    let per_site = par::map_range_min(lat.len(), 64, |s| solve_coefficients(lat, m, s));
    let mut offsets = Vec::with_capacity(lat.len() + 1);
    let mut neighbors = Vec::with_capacity(lat.len() * size);
    let mut coeffs = Vec::with_capacity(lat.len() * size);
    offsets.push(0);
    for rec in per_site {
        let (nb, c) = rec?;
        neighbors.extend_from_slice(&nb);
        coeffs.extend_from_slice(&c);
        offsets.push(neighbors.len());
    }
    Ok(PreconditionerCoeffs {
        m,
        nu,
        dim: d,
        n_scale: integer_root(lat.len(), d),
        offsets,
        neighbors,
        coeffs,
    })
}

impl PreconditionerCoeffs {
    /// Assembles coefficients from explicit per-site records (center first).
    pub fn from_records(
        m: usize,
        nu: f64,
        dim: usize,
        records: impl IntoIterator<Item = (Vec<usize>, Vec<f64>)>,
    ) -> Result<Self> {
        let mut offsets = vec![0];
        let mut neighbors = Vec::new();
        let mut coeffs = Vec::new();
        for (s, (nb, c)) in records.into_iter().enumerate() {
            if nb.len() != c.len() {
                return Err(Error::LengthMismatch { expected: nb.len(), got: c.len() });
            }
            if nb.first() != Some(&s) {
                return Err(Error::InvalidParameter(alloc::format!("record {s} must start with its own site")));
            }
            neighbors.extend_from_slice(&nb);
            coeffs.extend_from_slice(&c);
            offsets.push(neighbors.len());
        }
        let n = offsets.len() - 1;
        if let Some(&bad) = neighbors.iter().find(|&&t| t >= n) {
            return Err(Error::SiteOutOfRange { site: bad, n });
        }
        Ok(Self { m, nu, dim, n_scale: integer_root(n, dim), offsets, neighbors, coeffs })
    }

    pub fn order(&self) -> usize {
        self.m
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `N = floor(n^{1/d})`.
    pub fn n_scale(&self) -> usize {
        self.n_scale
    }

    /// `N^ν`.
    pub fn amplitude(&self) -> f64 {
        libm::pow(self.n_scale as f64, self.nu)
    }

    /// Neighborhood (center first) and coefficients of site `s`.
    pub fn site(&self, s: usize) -> (&[usize], &[f64]) {
        let r = self.offsets[s]..self.offsets[s + 1];
        (&self.neighbors[r.clone()], &self.coeffs[r])
    }

    /// Records as `(site, neighbor, coefficient)` triples in storage order.
    pub fn triples(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.len()).flat_map(move |s| {
            let (nb, c) = self.site(s);
            nb.iter().zip(c).map(move |(&t, &a)| (s, t, a))
        })
    }

    /// Largest `|Σ_t a(t) (t - s)^r|` over `|r|₁ ≤ m` at site `s`, in
    /// unscaled coordinates.
    pub fn moment_residual(&self, lat: &Lattice, s: usize) -> f64 {
        self.moment_residual_at(lat, s, self.m)
    }

    /// Like [`Self::moment_residual`] but over monomials of exactly degree
    /// `degree` (or all degrees up to it when `degree ≤ m`).
    pub fn moment_residual_at(&self, lat: &Lattice, s: usize, degree: usize) -> f64 {
        let (nb, c) = self.site(s);
        let center = lat.point(s);
        let mut off = [0.0; 3];
        monomials(degree, self.dim)
            .iter()
            .filter(|r| degree <= self.m || r.iter().sum::<u32>() as usize == degree)
            .map(|r| {
                let mut acc = 0.0;
                for (&t, &a) in nb.iter().zip(c) {
                    for ((o, x), y) in off.iter_mut().zip(lat.point(t)).zip(center) {
                        *o = x - y;
                    }
                    acc += a * monomial(&off[..self.dim], r);
                }
                acc.abs()
            })
            .fold(0.0, f64::max)
    }

    /// `Y(s) = N^ν Σ_t a(t) raw(t)`, summed in neighborhood order.
    pub fn apply(&self, raw: &[f64]) -> Result<PreconditionedSample> {
        if raw.len() != self.len() {
            return Err(Error::LengthMismatch { expected: self.len(), got: raw.len() });
        }
        let amp = self.amplitude();
        let values = (0..self.len())
            .map(|s| {
                let (nb, c) = self.site(s);
                let mut acc = 0.0;
                for (&t, &a) in nb.iter().zip(c) {
                    acc += a * raw[t];
                }
                amp * acc
            })
            .collect();
        Ok(PreconditionedSample { values, m: self.m, nu: self.nu })
    }
}

/// Applies the discrete Laplacian `m_prime` times to a complete regular grid
/// (`per_axis^dim` values in site order) and returns the interior values,
/// scaled by `N^ν` and by the inverse norm of the equivalent stencil.
pub fn laplacian_precondition_regular(
    values: &[f64],
    per_axis: usize,
    dim: usize,
    m_prime: usize,
    nu: f64,
) -> Result<InteriorSample> {
    if !(1..=3).contains(&dim) {
        return Err(Error::InvalidDimension(dim));
    }
    if m_prime == 0 {
        return Err(Error::InvalidParameter("at least one Laplacian application is required".into()));
    }
    let n = per_axis.pow(dim as u32);
    if values.len() != n {
        return Err(Error::LengthMismatch { expected: n, got: values.len() });
    }
    if per_axis < 2 * m_prime + 1 {
        return Err(Error::GridTooSmall { per_axis, applications: m_prime });
    }
    let mut cur = values.to_vec();
    for k in 1..=m_prime {
        cur = laplacian_once(&cur, per_axis, dim, k);
    }
    let norm = laplacian_stencil_norm(dim, m_prime);
    let amp = libm::pow(per_axis as f64, nu) / norm;
    let mut sites = Vec::new();
    let mut out = Vec::new();
    for (site, v) in cur.iter().enumerate() {
        if interior(site, per_axis, dim, m_prime) {
            sites.push(site);
            out.push(amp * v);
        }
    }
    Ok(InteriorSample { sites, values: out })
}

fn interior(site: usize, per_axis: usize, dim: usize, margin: usize) -> bool {
    let mut rest = site;
    for _ in 0..dim {
        let digit = rest % per_axis;
        rest /= per_axis;
        if digit < margin || digit + margin >= per_axis {
            return false;
        }
    }
    true
}

/// One Laplacian pass; values within `margin` of the boundary are left at
/// zero since they are never read by an interior point afterwards.
fn laplacian_once(v: &[f64], per_axis: usize, dim: usize, margin: usize) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    for (site, o) in out.iter_mut().enumerate() {
        if !interior(site, per_axis, dim, margin) {
            continue;
        }
        let mut acc = 0.0;
        let mut stride = 1;
        for _ in 0..dim {
            acc += v[site + stride] - 2.0 * v[site] + v[site - stride];
            stride *= per_axis;
        }
        *o = acc;
    }
    out
}

fn laplacian_stencil_norm(dim: usize, m_prime: usize) -> f64 {
    let width = 4 * m_prime + 1;
    let n = width.pow(dim as u32);
    let mut delta = vec![0.0; n];
    delta[n / 2] = 1.0;
    let mut cur = delta;
    for k in 1..=m_prime {
        cur = laplacian_once(&cur, width, dim, k);
    }
    libm::sqrt(cur.iter().map(|v| v * v).sum())
}
