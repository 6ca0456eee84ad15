//! Local inversion-free (LIF) estimation of Matérn covariance parameters for
//! Gaussian processes sampled on regular and randomly perturbed lattices.
//!
//! The pipeline is:
//!
//! 1. [`lattice`] builds the sampling sites and answers neighbor queries.
//! 2. [`precondition`] solves per-site difference filters that annihilate
//!    low-order polynomials and applies them to the raw observations.
//! 3. [`covariance`] evaluates the Matérn kernel and the covariance of the
//!    filtered observations, one bin at a time.
//! 4. [`partition`] groups sites into disjoint bins.
//! 5. [`lif`] accumulates the per-bin quadratic forms into the LIF loss and
//!    its closed-form variance estimate.
//! 6. [`optimize`] maximizes the profile loss over the range parameter.
//!
//! The crate is `no_std` (with `alloc`) when built without the `std`
//! feature. The `parallel` feature evaluates bins and matrix rows on the
//! rayon pool; reductions always run in a fixed order so results do not
//! depend on the thread count.

#![cfg_attr(not(feature = "std"), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod covariance;
mod error;
pub mod lattice;
pub mod lif;
pub mod linalg;
pub mod optimize;
mod par;
pub mod partition;
pub mod precondition;
pub mod rng;
pub mod special;

pub use covariance::{BinCovMatrix, MaternParams};
pub use error::{Error, Result};
pub use lattice::{Lattice, RegularityReport};
pub use lif::{LifEvaluation, PhiEstimate, ProfileStats};
pub use optimize::{EstimationMode, EstimationResult, OptimizerConfig};
pub use partition::Partition;
pub use precondition::{PreconditionedSample, PreconditionerCoeffs};
