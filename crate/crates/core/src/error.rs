use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension must be 1, 2 or 3, got {0}")]
    InvalidDimension(usize),

    #[error("sites per axis must be at least 2 and the edge length positive")]
    NonPositiveSize,

    #[error("lattice needs at least 2 sites, got {0}")]
    TooFewPoints(usize),

    #[error("sites {first} and {second} coincide")]
    DuplicatePoint { first: usize, second: usize },

    #[error("neighbor count {k} out of range for a lattice of {n} sites")]
    NeighborCountOutOfRange { k: usize, n: usize },

    #[error("site index {site} out of range for a lattice of {n} sites")]
    SiteOutOfRange { site: usize, n: usize },

    #[error("order-{m} preconditioning in {d} dimensions needs {needed} sites, lattice has {n}")]
    TooFewSites {
        m: usize,
        d: usize,
        needed: usize,
        n: usize,
    },

    #[error("preconditioning system at site {site} is singular even after enlarging the neighborhood")]
    SingularSystem { site: usize },

    #[error("expected a vector of length {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("grid with {per_axis} sites per axis has no interior after {applications} Laplacian applications")]
    GridTooSmall { per_axis: usize, applications: usize },

    #[error("Bessel function argument must be positive, got {0}")]
    NonPositiveArgument(f64),

    #[error("point dimensions differ: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("the spectral density is only available for isotropic parameters")]
    AnisotropicUnsupported,

    #[error("bin is empty")]
    EmptyBin,

    #[error("bin count {b} out of range 1..={n}")]
    BinCountOutOfRange { b: usize, n: usize },

    #[error("instance with {n} sites exceeds the dense limit of {max}")]
    InstanceTooLarge { n: usize, max: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("objective is not finite at the requested point")]
    NonFiniteObjective,
}
