//! Disjoint partitions of the sites into bins.
//!
//! Bin ids are `0..num_bins()`. Random schemes may leave some of the
//! requested labels unused; those bins are dropped and the rest relabeled in
//! order of their original label.

use alloc::vec;
use alloc::vec::Vec;

use crate::lattice::Lattice;
use crate::rng;
use crate::{Error, Result};

/// Relative slack used when locating a coordinate on a box boundary.
const BOX_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    bin_of: Vec<usize>,
    bins: Vec<Vec<usize>>,
    b_requested: usize,
}

impl Partition {
    /// Builds a partition from per-site labels in `0..b_requested`.
    pub fn from_labels(labels: &[usize], b_requested: usize) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::TooFewPoints(0));
        }
        let mut groups: Vec<Vec<usize>> = vec![Vec::new(); b_requested];
        for (s, &l) in labels.iter().enumerate() {
            if l >= b_requested {
                return Err(Error::BinCountOutOfRange { b: l + 1, n: b_requested });
            }
            groups[l].push(s);
        }
        let bins: Vec<Vec<usize>> = groups.into_iter().filter(|g| !g.is_empty()).collect();
        let mut bin_of = vec![0; n];
        for (t, bin) in bins.iter().enumerate() {
            for &s in bin {
                bin_of[s] = t;
            }
        }
        Ok(Self { bin_of, bins, b_requested })
    }

    pub fn len(&self) -> usize {
        self.bin_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bin_of.is_empty()
    }

    /// Number of nonempty bins.
    pub fn num_bins(&self) -> usize {
        self.bins.len()
    }

    pub fn b_requested(&self) -> usize {
        self.b_requested
    }

    pub fn bin_of(&self, s: usize) -> usize {
        self.bin_of[s]
    }

    pub fn labels(&self) -> &[usize] {
        &self.bin_of
    }

    pub fn bin(&self, t: usize) -> &[usize] {
        &self.bins[t]
    }

    pub fn bins(&self) -> &[Vec<usize>] {
        &self.bins
    }

    /// `Σ_t |B_t| (|B_t| + 1) / 2`, the number of distinct matrix entries a
    /// loss evaluation computes.
    pub fn entry_count(&self) -> u64 {
        self.bins.iter().map(|b| (b.len() * (b.len() + 1) / 2) as u64).sum()
    }
}

fn check_b(n: usize, b: usize) -> Result<()> {
    if b == 0 || b > n {
        return Err(Error::BinCountOutOfRange { b, n });
    }
    Ok(())
}

/// Each site draws its bin uniformly from `b` labels.
pub fn partition_uniform(n: usize, b: usize, seed: u64) -> Result<Partition> {
    check_b(n, b)?;
    let labels: Vec<usize> = (0..n)
        .map(|s| {
            let mut r = rng::stream(seed, rng::DOMAIN_PARTITION, s as u64);
            rng::below(&mut r, b as u64) as usize
        })
        .collect();
    Partition::from_labels(&labels, b)
}

/// Probabilities of the non-uniform scheme: the first `⌈b/2⌉` labels have
/// weight one and the rest weight two.
pub fn nonuniform_weights(b: usize) -> Vec<f64> {
    let light = b.div_ceil(2);
    let total = (light + 2 * (b - light)) as f64;
    (0..b).map(|t| if t < light { 1.0 / total } else { 2.0 / total }).collect()
}

/// Each site draws its bin from `b` labels with [`nonuniform_weights`].
pub fn partition_nonuniform(n: usize, b: usize, seed: u64) -> Result<Partition> {
    check_b(n, b)?;
    let light = b.div_ceil(2);
    let total = (light + 2 * (b - light)) as u64;
    let labels: Vec<usize> = (0..n)
        .map(|s| {
            let mut r = rng::stream(seed, rng::DOMAIN_PARTITION, s as u64);
            let u = rng::below(&mut r, total) as usize;
            if u < light {
                u
            } else {
                light + (u - light) / 2
            }
        })
        .collect();
    Partition::from_labels(&labels, b)
}

/// Splits `[0, T]^d` into `Π g_i` equal boxes. Box `k` along an axis covers
/// `(k w, (k+1) w]` (the first box also takes its lower edge); sites outside
/// the domain go to the nearest box. Boxes are labeled in site order, first
/// axis slowest.
pub fn partition_rectangular(lat: &Lattice, grid: &[usize]) -> Result<Partition> {
    let d = lat.dim();
    if grid.len() != d {
        return Err(Error::DimensionMismatch { left: grid.len(), right: d });
    }
    if grid.contains(&0) {
        return Err(Error::BinCountOutOfRange { b: 0, n: lat.len() });
    }
    let total: usize = grid.iter().product();
    let labels: Vec<usize> = lat
        .points()
        .map(|p| {
            let mut label = 0;
            for (x, &g) in p.iter().zip(grid) {
                let w = lat.side() / g as f64;
                let k = libm::ceil(x / w - BOX_EPS) - 1.0;
                let k = if k < 0.0 { 0 } else { (k as usize).min(g - 1) };
                label = label * g + k;
            }
            label
        })
        .collect();
    Partition::from_labels(&labels, total)
}

/// One bin per site.
pub fn partition_singleton(n: usize) -> Result<Partition> {
    let labels: Vec<usize> = (0..n).collect();
    Partition::from_labels(&labels, n)
}
