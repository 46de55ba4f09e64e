use alloc::string::String;

/// Errors raised by the algebraic and analysis routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("orbital index {index} outside basis of dimension {dim}")]
    OrbitalOutOfRange { index: usize, dim: usize },
    #[error("occupation indices must be strictly increasing: {0:?}")]
    NotIncreasing(alloc::vec::Vec<usize>),
    #[error("basis dimension must be at least 1")]
    EmptyBasis,
    #[error("basis mismatch: dimension {left} vs {right}")]
    BasisMismatch { left: usize, right: usize },
    #[error("particle number mismatch: expected {expected}, found {found}")]
    ParticleNumberMismatch { expected: usize, found: usize },
    #[error("rank {value} outside admissible range {min}..={max}")]
    RankOutOfRange { value: usize, min: usize, max: usize },
    #[error("sector of {size} determinants exceeds the ceiling of {ceiling}")]
    SectorTooLarge { size: u128, ceiling: u128 },
    #[error("internal space is zero-dimensional")]
    EmptySubspace,
    #[error("state is not normalized (norm {norm})")]
    NotNormalized { norm: f64 },
    #[error("invalid mixture: {0}")]
    InvalidMixture(String),
    #[error("invalid group product: {0}")]
    InvalidGroup(String),
    #[error("factor partitions differ: bra {bra:?}, ket {ket:?}")]
    PartitionMismatch {
        bra: alloc::vec::Vec<usize>,
        ket: alloc::vec::Vec<usize>,
    },
    #[error("operator is not Hermitian: {0}")]
    NotHermitian(String),
    #[error("invalid operator: {0}")]
    InvalidOperator(String),
    #[error("declared {q}-orthogonality violated at p = {p} (max overlap {max_overlap:e})")]
    ConstraintViolated { q: usize, p: usize, max_overlap: f64 },
}

pub type Result<T> = core::result::Result<T, Error>;
