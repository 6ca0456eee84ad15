//! Sampling-site geometry: regular and randomly perturbed lattices, nearest
//! neighbor queries and an empirical check of lattice regularity.
//!
//! Sites are stored in lexicographic grid order with the first axis varying
//! slowest. For a perturbed lattice site `i` is always the perturbation of
//! grid anchor `i`.

use alloc::vec;
use alloc::vec::Vec;

use crate::rng;
use crate::{Error, Result};

/// Ratio below which a regularity report flags near-duplicate sites.
pub const DEGENERATE_RATIO: f64 = 1e-3;

/// An immutable set of `n ≥ 2` distinct sites in `d ≤ 3` dimensions.
#[derive(Debug, Clone)]
pub struct Lattice {
    dim: usize,
    side: f64,
    coords: Vec<f64>,
    index: GridIndex,
}

/// Empirical constants of the two-sided regularity bound
/// `c_min (i/n)^{1/d} ≤ r_{s,i} ≤ c_max (i/n)^{1/d}`, where `r_{s,i}` is the
/// distance from `s` to its `i`-th closest other site.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RegularityReport {
    pub c_min_hat: f64,
    pub c_max_hat: f64,
    /// `c_max_hat / c_min_hat`; infinite when sites nearly coincide.
    pub max_ratio_violation: f64,
    pub sampled_sites: usize,
    pub sampled_pairs: usize,
    /// Set when `c_min_hat` falls below [`DEGENERATE_RATIO`].
    pub degenerate: bool,
}

/// Largest integer `N` with `N^d ≤ n`.
pub fn integer_root(n: usize, d: usize) -> usize {
    if d == 1 {
        return n;
    }
    let mut r = libm::round(libm::pow(n as f64, 1.0 / d as f64)) as usize;
    while r > 0 && r.checked_pow(d as u32).is_none_or(|p| p > n) {
        r -= 1;
    }
    while (r + 1).checked_pow(d as u32).is_some_and(|p| p <= n) {
        r += 1;
    }
    r
}

/// Builds `N^d` sites `t = s + delta * p` with `s` on the grid
/// `{T/N, 2T/N, …, T}^d` and `p` uniform on `[-T/N, T/N]^d`.
///
/// Each site draws its `d` perturbation components from its own stream, so
/// the result depends only on `(N, d, T, delta, seed)`. `delta = 0` gives the
/// grid exactly.
pub fn build_perturbed_lattice(
    per_axis: usize,
    dim: usize,
    side: f64,
    delta: f64,
    seed: u64,
) -> Result<Lattice> {
    if !(1..=3).contains(&dim) {
        return Err(Error::InvalidDimension(dim));
    }
    if per_axis < 2 || !(side > 0.0) || !side.is_finite() {
        return Err(Error::NonPositiveSize);
    }
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(Error::InvalidParameter("perturbation delta must be finite and >= 0".into()));
    }
    let n = per_axis.pow(dim as u32);
    let spacing = side / per_axis as f64;
    let mut coords = Vec::with_capacity(n * dim);
    let mut digits = [0usize; 3];
    for site in 0..n {
        let mut rest = site;
        for axis in (0..dim).rev() {
            digits[axis] = rest % per_axis;
            rest /= per_axis;
        }
        let mut stream = (delta > 0.0).then(|| rng::stream(seed, rng::DOMAIN_LATTICE, site as u64));
        for &digit in &digits[..dim] {
            let anchor = (digit + 1) as f64 * side / per_axis as f64;
            let x = match stream.as_mut() {
                Some(s) => anchor + delta * spacing * (2.0 * rng::unit_f64(s) - 1.0),
                None => anchor,
            };
            coords.push(x);
        }
    }
    Lattice::from_coords(dim, side, coords)
}

impl Lattice {
    /// Wraps an explicit point set given as a flat `n × dim` coordinate list.
    pub fn from_coords(dim: usize, side: f64, coords: Vec<f64>) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidDimension(dim));
        }
        if !(side > 0.0) {
            return Err(Error::NonPositiveSize);
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(Error::LengthMismatch {
                expected: (coords.len() / dim + 1) * dim,
                got: coords.len(),
            });
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("coordinates must be finite".into()));
        }
        let n = coords.len() / dim;
        if n < 2 {
            return Err(Error::TooFewPoints(n));
        }
        check_distinct(dim, &coords)?;
        let index = GridIndex::build(dim, &coords);
        Ok(Self { dim, side, coords, index })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Domain edge length `T`.
    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// `N = floor(n^{1/d})`.
    pub fn per_axis(&self) -> usize {
        integer_root(self.len(), self.dim)
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    /// Squared Euclidean distance, accumulated in axis order.
    pub fn dist2(&self, i: usize, j: usize) -> f64 {
        dist2(self.point(i), self.point(j))
    }

    /// The `k` sites closest to site `s`, excluding `s`, by ascending
    /// distance with ties broken by ascending site index.
    pub fn nearest_neighbors(&self, s: usize, k: usize) -> Result<Vec<usize>> {
        let n = self.len();
        if s >= n {
            return Err(Error::SiteOutOfRange { site: s, n });
        }
        if k == 0 || k > n - 1 {
            return Err(Error::NeighborCountOutOfRange { k, n });
        }
        Ok(self.index.knn(&self.coords, self.dim, s, k))
    }

    /// Checks the regularity bound at `sample_sites` evenly spaced sites
    /// against every rank `i = 1..n-1`.
    pub fn verify_regularity(&self, sample_sites: usize) -> RegularityReport {
        let n = self.len();
        let sampled = sample_sites.clamp(1, n);
        let inv_d = 1.0 / self.dim as f64;
        let mut c_min = f64::INFINITY;
        let mut c_max = 0.0f64;
        let mut dists = Vec::with_capacity(n - 1);
        for k in 0..sampled {
            let s = k * n / sampled;
            dists.clear();
            dists.extend((0..n).filter(|&t| t != s).map(|t| libm::sqrt(self.dist2(s, t))));
            dists.sort_by(f64::total_cmp);
            for (rank0, &r) in dists.iter().enumerate() {
                let i = (rank0 + 1) as f64;
                let ratio = r * libm::pow(n as f64 / i, inv_d);
                c_min = c_min.min(ratio);
                c_max = c_max.max(ratio);
            }
        }
        RegularityReport {
            c_min_hat: c_min,
            c_max_hat: c_max,
            max_ratio_violation: if c_min > 0.0 { c_max / c_min } else { f64::INFINITY },
            sampled_sites: sampled,
            sampled_pairs: sampled * (n - 1),
            degenerate: c_min < DEGENERATE_RATIO,
        }
    }
}

pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        acc += d * d;
    }
    acc
}

fn check_distinct(dim: usize, coords: &[f64]) -> Result<()> {
    let n = coords.len() / dim;
    let mut order: Vec<usize> = (0..n).collect();
    let pt = |i: usize| &coords[i * dim..(i + 1) * dim];
    order.sort_by(|&a, &b| {
        pt(a)
            .iter()
            .zip(pt(b))
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(core::cmp::Ordering::Equal)
    });
    for w in order.windows(2) {
        if pt(w[0]) == pt(w[1]) {
            let (first, second) = (w[0].min(w[1]), w[0].max(w[1]));
            return Err(Error::DuplicatePoint { first, second });
        }
    }
    Ok(())
}

/// Uniform bucket grid over the bounding box, roughly one site per cell.
#[derive(Debug, Clone)]
struct GridIndex {
    lo: [f64; 3],
    cell: f64,
    cells: [usize; 3],
    starts: Vec<usize>,
    items: Vec<usize>,
}

impl GridIndex {
    fn build(dim: usize, coords: &[f64]) -> Self {
        let n = coords.len() / dim;
        let mut lo = [0.0; 3];
        let mut hi = [0.0; 3];
        for axis in 0..dim {
            let vals = coords.iter().skip(axis).step_by(dim);
            lo[axis] = vals.clone().fold(f64::INFINITY, |a, &b| a.min(b));
            hi[axis] = vals.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        }
        let extent = (0..dim).map(|a| hi[a] - lo[a]).fold(0.0, f64::max);
        let per_axis = integer_root(n, dim).max(1);
        let cell = if extent > 0.0 { extent / per_axis as f64 } else { 1.0 };
        let mut cells = [1usize; 3];
        for axis in 0..dim {
            cells[axis] = ((hi[axis] - lo[axis]) / cell) as usize + 1;
        }
        let total: usize = cells[..dim].iter().product();
        let mut this = Self {
            lo,
            cell,
            cells,
            starts: vec![0; total + 1],
            items: vec![0; n],
        };
        let ids: Vec<usize> = (0..n).map(|i| this.flat(&this.cell_of(&coords[i * dim..(i + 1) * dim]))).collect();
        for &c in &ids {
            this.starts[c + 1] += 1;
        }
        for c in 0..total {
            this.starts[c + 1] += this.starts[c];
        }
        let mut fill = this.starts.clone();
        for (i, &c) in ids.iter().enumerate() {
            this.items[fill[c]] = i;
            fill[c] += 1;
        }
        this
    }

    fn cell_of(&self, p: &[f64]) -> [usize; 3] {
        let mut c = [0usize; 3];
        for (axis, &x) in p.iter().enumerate() {
            let k = ((x - self.lo[axis]) / self.cell) as usize;
            c[axis] = k.min(self.cells[axis] - 1);
        }
        c
    }

    fn flat(&self, c: &[usize; 3]) -> usize {
        (c[0] * self.cells[1] + c[1]) * self.cells[2] + c[2]
    }

    fn knn(&self, coords: &[f64], dim: usize, s: usize, k: usize) -> Vec<usize> {
        let p = &coords[s * dim..(s + 1) * dim];
        let home = self.cell_of(p);
        let max_ring = (0..dim)
            .map(|a| home[a].max(self.cells[a] - 1 - home[a]))
            .max()
            .unwrap_or(0);
        let mut cand: Vec<(f64, usize)> = Vec::with_capacity(4 * k);
        let mut scratch: Vec<f64> = Vec::new();
        for ring in 0..=max_ring {
            self.visit_ring(&home, dim, ring, |cell| {
                for &t in &self.items[self.starts[cell]..self.starts[cell + 1]] {
                    if t != s {
                        cand.push((dist2(p, &coords[t * dim..(t + 1) * dim]), t));
                    }
                }
            });
            if cand.len() >= k {
                scratch.clear();
                scratch.extend(cand.iter().map(|c| c.0));
                let (_, kth, _) = scratch.select_nth_unstable_by(k - 1, f64::total_cmp);
                let reach = ring as f64 * self.cell;
                if *kth < reach * reach {
                    break;
                }
            }
        }
        cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        cand.truncate(k);
        cand.into_iter().map(|c| c.1).collect()
    }

    fn visit_ring(&self, home: &[usize; 3], dim: usize, ring: usize, mut f: impl FnMut(usize)) {
        let r = ring as isize;
        let range = |axis: usize| -> (isize, isize) {
            if axis >= dim {
                return (0, 0);
            }
            let h = home[axis] as isize;
            ((h - r).max(0), (h + r).min(self.cells[axis] as isize - 1))
        };
        let (x0, x1) = range(0);
        let (y0, y1) = range(1);
        let (z0, z1) = range(2);
        for x in x0..=x1 {
            for y in y0..=y1 {
                for z in z0..=z1 {
                    let c = [x as usize, y as usize, z as usize];
                    let cheb = (0..dim)
                        .map(|a| (c[a] as isize - home[a] as isize).abs())
                        .max()
                        .unwrap_or(0);
                    if cheb == r {
                        f(self.flat(&c));
                    }
                }
            }
        }
    }
}
