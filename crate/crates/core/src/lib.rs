//! Graded orthogonality of fermionic states over a finite orthonormal basis.
//!
//! * [`fock`]: exterior algebra, interior products, annihilation strings and the
//!   coproduct split of determinants.
//! * [`density`]: reduced density matrices and p-internal / p-external spaces.
//! * [`ortho`]: p-orthogonality verdicts, orthogonality grade and Araki angles.
//! * [`groupfn`]: antisymmetrized group functions, overlap and operator matrix
//!   elements with orthogonality-based pruning.
//! * [`oracle`]: brute-force reference implementations.
//!
//! The crate is `no_std` (with `alloc`) when built without the default `std`
//! feature; `std` only adds threaded plan evaluation.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod density;
pub mod error;
pub mod fock;
pub mod groupfn;
mod linalg;
pub mod oracle;
pub mod ortho;

pub use density::{external_space, internal_space, rdm, MixedState, RdmMatrix, Subspace};
pub use error::{Error, Result};
pub use fock::{interior_right, split, Occupation, OrbitalBasis, SplitTerm, StateVector};
pub use groupfn::{GroupProduct, QOperator};
pub use num_complex::Complex64;
pub use ortho::{AngleSpectrum, GradeReport};

/// Largest `p`-particle sector (`C(dim, p)` determinants) that dense routines accept.
pub const SECTOR_CEILING: u128 = 20_000;

/// Numerical thresholds shared by the analysis routines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Relative eigenvalue cutoff (times the largest eigenvalue) separating the
    /// internal space from the kernel of a reduced density matrix.
    pub rank: f64,
    /// Largest cross overlap still counted as orthogonal.
    pub ortho: f64,
    /// Eigenvalues of `(COSΘ)²` closer than this share one angle block.
    pub angle_bin: f64,
    /// Sines below this mark a vector common to both subspaces.
    pub intersection: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rank: 1e-10,
            ortho: 1e-8,
            angle_bin: 1e-9,
            intersection: 1e-8,
        }
    }
}
