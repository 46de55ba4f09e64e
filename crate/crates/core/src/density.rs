//! Reduced density matrices and the p-internal / p-external spaces of pure and
//! ensemble states.
//!
//! The p-order reduced density operator of a pure state acts on a p-particle
//! function as `D(Φ) = Ψ ↪ (Φ ↩ Ψ)`; ensembles average it with their weights.
//! With ordered determinants orthonormal, `tr D^p = C(n, p)` for a normalized
//! state.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::{interior_right, split, Occupation, OrbitalBasis, StateVector};
use crate::linalg::{self, OccIndex};
use crate::{Tolerances, SECTOR_CEILING};

const NORM_TOL: f64 = 1e-12;
const GRAM_TOL: f64 = 1e-10;

/// Convex combination `Σ c_i |Ψ_i⟩⟨Ψ_i|` of normalized n-particle states.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedState {
    basis: OrbitalBasis,
    n: usize,
    components: Vec<(f64, StateVector)>,
}

impl MixedState {
    pub fn new(components: Vec<(f64, StateVector)>) -> Result<Self> {
        let Some((_, first)) = components.first() else {
            return Err(Error::InvalidMixture("no components".into()));
        };
        let (basis, n) = (first.basis(), first.n());
        let mut total = 0.0;
        for (w, psi) in &components {
            if !w.is_finite() || *w <= 0.0 {
                return Err(Error::InvalidMixture(format!("non-positive weight {w}")));
            }
            if psi.basis() != basis {
                return Err(Error::BasisMismatch {
                    left: basis.dim(),
                    right: psi.basis().dim(),
                });
            }
            if psi.n() != n {
                return Err(Error::ParticleNumberMismatch {
                    expected: n,
                    found: psi.n(),
                });
            }
            let norm = psi.norm();
            if (norm - 1.0).abs() > NORM_TOL {
                return Err(Error::NotNormalized { norm });
            }
            total += w;
        }
        if (total - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidMixture(format!("weights sum to {total}")));
        }
        Ok(Self {
            basis,
            n,
            components,
        })
    }

    /// Pure state; `psi` must already be normalized.
    pub fn pure(psi: StateVector) -> Result<Self> {
        Self::new(alloc::vec![(1.0, psi)])
    }

    /// Pure state from an arbitrary nonzero vector, normalizing it first.
    pub fn pure_normalized(psi: &StateVector) -> Result<Self> {
        let unit = psi.normalized().ok_or(Error::NotNormalized { norm: 0.0 })?;
        Self::pure(unit)
    }

    pub fn basis(&self) -> OrbitalBasis {
        self.basis
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn components(&self) -> &[(f64, StateVector)] {
        &self.components
    }
}

/// Orthonormal basis of a subspace of the p-particle sector.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    basis: OrbitalBasis,
    sector: usize,
    vectors: Vec<StateVector>,
}

impl Subspace {
    /// Wraps vectors that are already orthonormal (Gram matrix within 1e-10
    /// of the identity).
    pub fn from_orthonormal(basis: OrbitalBasis, sector: usize, vectors: Vec<StateVector>) -> Result<Self> {
        for v in &vectors {
            if v.basis() != basis {
                return Err(Error::BasisMismatch {
                    left: basis.dim(),
                    right: v.basis().dim(),
                });
            }
            if v.n() != sector {
                return Err(Error::ParticleNumberMismatch {
                    expected: sector,
                    found: v.n(),
                });
            }
        }
        let s = Self {
            basis,
            sector,
            vectors,
        };
        let residual = s.gram_residual();
        if residual > GRAM_TOL {
            return Err(Error::NotNormalized { norm: residual });
        }
        Ok(s)
    }

    /// Orthonormal basis of the span of `vectors`, dropping directions with
    /// singular value at or below `cutoff`.
    pub fn span(basis: OrbitalBasis, sector: usize, vectors: &[StateVector], cutoff: f64) -> Self {
        let index = OccIndex::from_states(vectors);
        let q = linalg::column_space(&index.columns(vectors), cutoff);
        Self {
            basis,
            sector,
            vectors: index.states(basis, sector, &q),
        }
    }

    pub(crate) fn from_parts(basis: OrbitalBasis, sector: usize, vectors: Vec<StateVector>) -> Self {
        Self {
            basis,
            sector,
            vectors,
        }
    }

    pub fn basis(&self) -> OrbitalBasis {
        self.basis
    }

    /// Particle number of the sector this subspace lives in.
    pub fn sector(&self) -> usize {
        self.sector
    }

    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    pub fn vectors(&self) -> &[StateVector] {
        &self.vectors
    }

    /// Largest entry of `G - I` for the Gram matrix `G`.
    pub fn gram_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, a) in self.vectors.iter().enumerate() {
            for (j, b) in self.vectors.iter().enumerate() {
                let g = a.inner(b).unwrap_or_default();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g - target).norm());
            }
        }
        worst
    }

    pub(crate) fn dense(&self, index: &OccIndex) -> DMatrix<Complex64> {
        index.columns(&self.vectors)
    }

    /// Orthogonal projection of `v` onto the subspace.
    pub fn project(&self, v: &StateVector) -> Result<StateVector> {
        let mut out = StateVector::zero(self.basis, self.sector);
        for u in &self.vectors {
            out.add_scaled(u, u.inner(v)?)?;
        }
        Ok(out)
    }

    /// Norm of the component of `v` orthogonal to the subspace.
    pub fn residual(&self, v: &StateVector) -> Result<f64> {
        let p = self.project(v)?;
        Ok((v - &p).norm())
    }

    /// Frobenius norm of the difference of the two orthogonal projectors.
    pub fn projector_distance(&self, other: &Subspace) -> Result<f64> {
        self.check_compatible(other)?;
        let index = OccIndex::from_states(self.vectors.iter().chain(&other.vectors));
        Ok(linalg::projector_distance(&self.dense(&index), &other.dense(&index)))
    }

    /// Largest residual of a basis vector of `other` outside `self`.
    pub fn containment_residual(&self, other: &Subspace) -> Result<f64> {
        self.check_compatible(other)?;
        let mut worst: f64 = 0.0;
        for v in &other.vectors {
            worst = worst.max(self.residual(v)?);
        }
        Ok(worst)
    }

    /// Orthonormalized sum `self + other`.
    pub fn sum(&self, other: &Subspace, cutoff: f64) -> Result<Subspace> {
        self.check_compatible(other)?;
        let all: Vec<StateVector> = self.vectors.iter().chain(&other.vectors).cloned().collect();
        Ok(Self::span(self.basis, self.sector, &all, cutoff))
    }

    /// `self ∩ other`: directions of `self` whose principal sine with `other`
    /// is at most `sine_cutoff`.
    pub fn intersection(&self, other: &Subspace, sine_cutoff: f64) -> Result<Subspace> {
        self.check_compatible(other)?;
        let index = OccIndex::from_states(self.vectors.iter().chain(&other.vectors));
        let a = self.dense(&index);
        let b = other.dense(&index);
        // residual of a's columns off span(b)
        let r = &a - &b * (b.adjoint() * &a);
        let gram = r.adjoint() * &r;
        let (vals, vecs) = linalg::hermitian_eigen(gram);
        let keep: Vec<usize> = (0..vals.len())
            .filter(|&i| vals[i].max(0.0) <= sine_cutoff * sine_cutoff)
            .collect();
        let mut coeffs = DMatrix::zeros(a.ncols(), keep.len());
        for (j, &i) in keep.iter().enumerate() {
            coeffs.set_column(j, &vecs.column(i));
        }
        let q = &a * coeffs;
        Ok(Self {
            basis: self.basis,
            sector: self.sector,
            vectors: index.states(self.basis, self.sector, &q),
        })
    }

    fn check_compatible(&self, other: &Subspace) -> Result<()> {
        if self.basis != other.basis {
            return Err(Error::BasisMismatch {
                left: self.basis.dim(),
                right: other.basis.dim(),
            });
        }
        if self.sector != other.sector {
            return Err(Error::ParticleNumberMismatch {
                expected: self.sector,
                found: other.sector,
            });
        }
        Ok(())
    }
}

/// p-order reduced density matrix.
///
/// Only determinants reachable by annihilating `n - p` orbitals from some term
/// carry rows; every other row and column of the sector matrix is zero.
#[derive(Debug, Clone)]
pub struct RdmMatrix {
    basis: OrbitalBasis,
    p: usize,
    support: OccIndex,
    matrix: DMatrix<Complex64>,
}

impl RdmMatrix {
    pub fn p(&self) -> usize {
        self.p
    }

    pub fn basis(&self) -> OrbitalBasis {
        self.basis
    }

    /// Occupations labelling the rows of [`RdmMatrix::matrix`].
    pub fn occupations(&self) -> &[Occupation] {
        self.support.occupations()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    /// `⟨row|D^p|col⟩`.
    pub fn get(&self, row: &Occupation, col: &Occupation) -> Complex64 {
        match (self.support.position(row), self.support.position(col)) {
            (Some(i), Some(j)) => self.matrix[(i, j)],
            _ => Complex64::default(),
        }
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    /// Dense matrix over the full sector in lexicographic determinant order.
    pub fn to_dense(&self) -> (Vec<Occupation>, DMatrix<Complex64>) {
        let sector: Vec<Occupation> = self.basis.sector(self.p).collect();
        let m = DMatrix::from_fn(sector.len(), sector.len(), |i, j| self.get(&sector[i], &sector[j]));
        (sector, m)
    }

    /// Largest entry of `D - D†`.
    pub fn hermiticity_residual(&self) -> f64 {
        (&self.matrix - self.matrix.adjoint()).camax()
    }

    /// Eigenvalues in decreasing order with eigenvectors as states.
    pub fn eigen(&self) -> (Vec<f64>, Vec<StateVector>) {
        let (vals, vecs) = linalg::hermitian_eigen(self.matrix.clone());
        (vals, self.support.states(self.basis, self.p, &vecs))
    }
}

fn check_sector(basis: OrbitalBasis, p: usize) -> Result<()> {
    let size = basis.sector_size(p);
    if size > SECTOR_CEILING {
        return Err(Error::SectorTooLarge {
            size,
            ceiling: SECTOR_CEILING,
        });
    }
    Ok(())
}

/// `D^p = Σ c_i D^p_{Ψ_i}` with `⟨Θ|D_Ψ|Φ⟩ = ⟨Θ|Ψ ↪ (Φ ↩ Ψ)⟩`.
pub fn rdm(state: &MixedState, p: usize) -> Result<RdmMatrix> {
    let n = state.n();
    if p > n {
        return Err(Error::RankOutOfRange { value: p, min: 0, max: n });
    }
    let basis = state.basis();
    check_sector(basis, p)?;

    let mut support = BTreeSet::new();
    for (_, psi) in state.components() {
        for t in split(psi, p)? {
            support.insert(t.left);
        }
    }
    let support = OccIndex::from_sorted(support.into_iter().collect());
    let dim = support.len();
    let mut matrix = DMatrix::zeros(dim, dim);
    for (j, occ) in support.occupations().iter().enumerate() {
        let phi = StateVector::from_occupation(basis, occ.clone(), Complex64::new(1.0, 0.0))?;
        for (w, psi) in state.components() {
            let image = interior_right(psi, &phi.interior_left(psi)?)?;
            for (row, c) in image.terms() {
                let i = support
                    .position(row)
                    .expect("image of the density operator stays in its support");
                matrix[(i, j)] += c * *w;
            }
        }
    }
    Ok(RdmMatrix {
        basis,
        p,
        support,
        matrix,
    })
}

fn check_range(state: &MixedState, p: usize) -> Result<()> {
    if p == 0 || p > state.n() {
        return Err(Error::RankOutOfRange {
            value: p,
            min: 1,
            max: state.n(),
        });
    }
    Ok(())
}

/// p-internal space: span of the eigenvectors of `D^p` with eigenvalue above
/// `tol.rank` times the largest one.
pub fn internal_space(state: &MixedState, p: usize, tol: &Tolerances) -> Result<Subspace> {
    check_range(state, p)?;
    let d = rdm(state, p)?;
    let (vals, vecs) = d.eigen();
    let cutoff = tol.rank * vals.first().copied().unwrap_or(0.0).max(0.0);
    let kept = vals
        .iter()
        .zip(vecs)
        .filter(|(v, _)| **v > cutoff)
        .map(|(_, s)| s)
        .collect();
    Ok(Subspace::from_parts(state.basis(), p, kept))
}

/// p-external space: the kernel of `D^p`, i.e. the orthogonal complement of
/// the internal space in the p-particle sector.
pub fn external_space(state: &MixedState, p: usize, tol: &Tolerances) -> Result<Subspace> {
    check_range(state, p)?;
    let d = rdm(state, p)?;
    let (vals, vecs) = d.eigen();
    let cutoff = tol.rank * vals.first().copied().unwrap_or(0.0).max(0.0);
    let mut kernel: Vec<StateVector> = vals
        .iter()
        .zip(vecs)
        .filter(|(v, _)| **v <= cutoff)
        .map(|(_, s)| s)
        .collect();
    for occ in state.basis().sector(p) {
        if d.support.position(&occ).is_none() {
            kernel.push(StateVector::from_occupation(state.basis(), occ, Complex64::new(1.0, 0.0))?);
        }
    }
    Ok(Subspace::from_parts(state.basis(), p, kernel))
}
