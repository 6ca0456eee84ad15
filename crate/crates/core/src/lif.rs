//! The LIF loss `Σ_t (φ y_tᵀ K_t y_t - φ²/2 ‖K_t‖_F²)` over the bins of a
//! partition, its profile in `φ`, and related diagnostics.

use alloc::vec::Vec;

use crate::covariance::{BinSums, FilteredCovariance};
use crate::lattice::Lattice;
use crate::linalg::DenseMatrix;
use crate::par;
use crate::partition::{partition_singleton, Partition};
use crate::precondition::{PreconditionedSample, PreconditionerCoeffs};
use crate::{Error, Result};

pub use crate::covariance::microergodic;

/// Default size limit for the dense Ψ diagnostic.
pub const PSI_MAX_N: usize = 4000;

/// `a = Σ_t y_tᵀ K_t y_t` and `b = Σ_t ‖K_t‖_F²` at range `rho`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProfileStats {
    pub a: f64,
    pub b: f64,
    pub rho: Vec<f64>,
    /// Distinct matrix entries evaluated.
    pub entries: u64,
}

impl ProfileStats {
    /// Profile loss `a / √b`.
    pub fn profile_loss(&self) -> f64 {
        self.a / libm::sqrt(self.b)
    }

    pub fn phi_hat(&self) -> PhiEstimate {
        phi_hat(self)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LifEvaluation {
    pub loss: f64,
    pub per_bin: Vec<f64>,
}

/// `φ̂ = a / b`, flagged rather than clamped when `a ≤ 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiEstimate {
    pub value: f64,
    pub nonpositive: bool,
}

fn check_inputs(lat: &Lattice, y: &PreconditionedSample, pc: &PreconditionerCoeffs, part: &Partition) -> Result<()> {
    let n = lat.len();
    for got in [y.values.len(), pc.len(), part.len()] {
        if got != n {
            return Err(Error::LengthMismatch { expected: n, got });
        }
    }
    Ok(())
}

/// Per-bin sums in bin order.
pub fn bin_sums(
    lat: &Lattice,
    y: &PreconditionedSample,
    pc: &PreconditionerCoeffs,
    part: &Partition,
    rho: &[f64],
) -> Result<Vec<BinSums>> {
    check_inputs(lat, y, pc, part)?;
    let cov = FilteredCovariance::new(lat, pc, rho)?;
    par::map_range_min(part.num_bins(), 2, |t| cov.bin_sums(part.bin(t), &y.values))
        .into_iter()
        .collect()
}

/// Accumulates `a` and `b` over all bins in bin order.
pub fn profile_stats(
    lat: &Lattice,
    y: &PreconditionedSample,
    pc: &PreconditionerCoeffs,
    part: &Partition,
    rho: &[f64],
) -> Result<ProfileStats> {
    let sums = bin_sums(lat, y, pc, part, rho)?;
    let (mut a, mut b, mut entries) = (0.0, 0.0, 0);
    for s in &sums {
        a += s.a;
        b += s.b;
        entries += s.entries;
    }
    Ok(ProfileStats { a, b, rho: rho.to_vec(), entries })
}

/// LIF loss at `(phi, rho)`, summed over bins in bin order.
pub fn lif_loss(
    lat: &Lattice,
    y: &PreconditionedSample,
    pc: &PreconditionerCoeffs,
    part: &Partition,
    phi: f64,
    rho: &[f64],
) -> Result<LifEvaluation> {
    let per_bin: Vec<f64> = bin_sums(lat, y, pc, part, rho)?
        .iter()
        .map(|s| phi * s.a - 0.5 * phi * phi * s.b)
        .collect();
    let loss = per_bin.iter().sum();
    Ok(LifEvaluation { loss, per_bin })
}

pub fn phi_hat(ps: &ProfileStats) -> PhiEstimate {
    PhiEstimate { value: ps.a / ps.b, nonpositive: !(ps.a > 0.0) }
}

/// Singleton-bin estimate of `φ ρ^{-2ν}` at an arbitrary range.
pub fn singleton_estimate(
    lat: &Lattice,
    y: &PreconditionedSample,
    pc: &PreconditionerCoeffs,
    rho: &[f64],
) -> Result<Vec<f64>> {
    let part = partition_singleton(lat.len())?;
    let ps = profile_stats(lat, y, pc, &part, rho)?;
    Ok(microergodic(phi_hat(&ps).value, rho, pc.nu()))
}

/// `Ψ = max_t ‖K_t‖_op · √n / ‖K^B‖_F` from explicit blocks.
pub fn psi_from_blocks(blocks: &[DenseMatrix]) -> f64 {
    let n: usize = blocks.iter().map(DenseMatrix::order).sum();
    let mut op = 0.0f64;
    let mut fro2 = 0.0;
    for b in blocks {
        fro2 += b.frobenius_norm_sq();
        let ev = b.symmetric_eigenvalues();
        if let (Some(lo), Some(hi)) = (ev.first(), ev.last()) {
            op = op.max(lo.abs()).max(hi.abs());
        }
    }
    op * libm::sqrt(n as f64) / libm::sqrt(fro2)
}

/// Effective-rank diagnostic of the block-diagonal filtered covariance.
pub fn effective_rank_psi(
    lat: &Lattice,
    pc: &PreconditionerCoeffs,
    part: &Partition,
    rho: &[f64],
    max_n: usize,
) -> Result<f64> {
    if lat.len() > max_n {
        return Err(Error::InstanceTooLarge { n: lat.len(), max: max_n });
    }
    if part.len() != lat.len() {
        return Err(Error::LengthMismatch { expected: lat.len(), got: part.len() });
    }
    let cov = FilteredCovariance::new(lat, pc, rho)?;
    let blocks = (0..part.num_bins())
        .map(|t| cov.bin_matrix(t, part.bin(t)).map(|m| m.matrix))
        .collect::<Result<Vec<_>>>()?;
    Ok(psi_from_blocks(&blocks))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psi_extremes() {
        let ones = DenseMatrix::from_fn(4, |_, _| 1.0);
        assert!((psi_from_blocks(&[ones]) - 2.0).abs() < 1e-12);
        let id = DenseMatrix::identity(6);
        assert!((psi_from_blocks(&[id]) - 1.0).abs() < 1e-12);
        let unit: Vec<DenseMatrix> = (0..5).map(|_| DenseMatrix::identity(1)).collect();
        assert!((psi_from_blocks(&unit) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn phi_hat_flags_nonpositive() {
        let ps = ProfileStats { a: 2.0, b: 4.0, rho: alloc::vec![1.0], entries: 0 };
        assert_eq!(phi_hat(&ps), PhiEstimate { value: 0.5, nonpositive: false });
        let ps = ProfileStats { a: -1.0, ..ps };
        assert!(phi_hat(&ps).nonpositive);
        assert_eq!(phi_hat(&ps).value, -0.25);
    }

    #[test]
    fn microergodic_examples() {
        assert_eq!(microergodic(1.0, &[1.0], 0.5), alloc::vec![1.0]);
        assert!((microergodic(1.0, &[5.0], 0.5)[0] - 0.2).abs() < 1e-15);
        assert_eq!(microergodic(1.0, &[2.0, 4.0], 0.5), alloc::vec![0.5, 0.25]);
    }
}
