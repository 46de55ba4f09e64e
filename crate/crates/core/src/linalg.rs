//! Dense helpers: coordinates of sparse states over a shared occupation index.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::fock::{Occupation, OrbitalBasis, StateVector};

/// Ordered list of occupations used as dense coordinates.
#[derive(Debug, Clone, Default)]
pub(crate) struct OccIndex {
    occs: Vec<Occupation>,
    pos: BTreeMap<Occupation, usize>,
}

impl OccIndex {
    pub(crate) fn from_states<'a, I>(states: I) -> Self
    where
        I: IntoIterator<Item = &'a StateVector>,
    {
        let mut set = BTreeMap::new();
        for s in states {
            for (occ, _) in s.terms() {
                set.insert(occ.clone(), ());
            }
        }
        Self::from_sorted(set.into_keys().collect())
    }

    pub(crate) fn from_sorted(occs: Vec<Occupation>) -> Self {
        let pos = occs.iter().cloned().enumerate().map(|(i, o)| (o, i)).collect();
        Self { occs, pos }
    }

    pub(crate) fn len(&self) -> usize {
        self.occs.len()
    }

    pub(crate) fn occupations(&self) -> &[Occupation] {
        &self.occs
    }

    pub(crate) fn position(&self, occ: &Occupation) -> Option<usize> {
        self.pos.get(occ).copied()
    }

    /// Columns holding the coordinates of `states`.
    pub(crate) fn columns(&self, states: &[StateVector]) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.len(), states.len());
        for (j, s) in states.iter().enumerate() {
            for (occ, c) in s.terms() {
                if let Some(i) = self.position(occ) {
                    m[(i, j)] = *c;
                }
            }
        }
        m
    }

    pub(crate) fn state(&self, basis: OrbitalBasis, n: usize, col: &DVector<Complex64>) -> StateVector {
        let mut s = StateVector::zero(basis, n);
        for (i, c) in col.iter().enumerate() {
            s.accumulate(self.occs[i].clone(), *c);
        }
        s.pruned()
    }

    pub(crate) fn states(&self, basis: OrbitalBasis, n: usize, m: &DMatrix<Complex64>) -> Vec<StateVector> {
        m.column_iter()
            .map(|c| self.state(basis, n, &c.into_owned()))
            .collect()
    }
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues in decreasing order.
pub(crate) fn hermitian_eigen(m: DMatrix<Complex64>) -> (Vec<f64>, DMatrix<Complex64>) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// One-sided Jacobi SVD: returns `A·V`, whose columns are mutually orthogonal
/// with norms equal to the singular values. nalgebra's bidiagonal SVD returns
/// wrong factors on some rank-deficient inputs; plane rotations do not.
fn jacobi_columns(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let mut a = m.clone();
    let cols = a.ncols();
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let alpha = a.column(p).norm_squared();
                let beta = a.column(q).norm_squared();
                let gamma = a.column(p).dotc(&a.column(q));
                let g = gamma.norm();
                if g == 0.0 || g <= 1e-15 * libm::sqrt(alpha * beta) {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = if zeta >= 0.0 { 1.0 } else { -1.0 } / (zeta.abs() + libm::sqrt(1.0 + zeta * zeta));
                let cs = 1.0 / libm::sqrt(1.0 + t * t);
                let sn = cs * t;
                for i in 0..a.nrows() {
                    let x = a[(i, p)];
                    let y = a[(i, q)] * phase.conj();
                    a[(i, p)] = x * cs - y * sn;
                    a[(i, q)] = x * sn + y * cs;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    a
}

/// Singular values in decreasing order; empty for degenerate shapes.
pub(crate) fn singular_values(m: &DMatrix<Complex64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    // rotate the shorter side so at most min(rows, cols) values come back
    let a = if m.ncols() <= m.nrows() { jacobi_columns(m) } else { jacobi_columns(&m.adjoint()) };
    let mut s: Vec<f64> = a.column_iter().map(|c| c.norm()).collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Orthonormal basis of the column space, keeping directions whose singular
/// value exceeds `cutoff`.
pub(crate) fn column_space(m: &DMatrix<Complex64>, cutoff: f64) -> DMatrix<Complex64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return DMatrix::zeros(m.nrows(), 0);
    }
    let a = jacobi_columns(m);
    let mut keep: Vec<(f64, usize)> = a
        .column_iter()
        .enumerate()
        .map(|(j, c)| (c.norm(), j))
        .filter(|&(s, _)| s > cutoff)
        .collect();
    keep.sort_by(|x, y| y.0.total_cmp(&x.0));
    let mut out = DMatrix::zeros(m.nrows(), keep.len());
    for (k, &(s, j)) in keep.iter().enumerate() {
        out.set_column(k, &a.column(j).unscale(s));
    }
    out
}

/// Frobenius distance between the orthogonal projectors onto the column spaces
/// of two matrices with orthonormal columns.
pub(crate) fn projector_distance(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    // ‖P_a − P_b‖² = ‖(I − P_b)A‖² + ‖(I − P_a)B‖², summed from residuals to
    // avoid the cancellation in `k_a + k_b − 2‖A†B‖²`
    let ra = a - b * (b.adjoint() * a);
    let rb = b - a * (a.adjoint() * b);
    libm::sqrt(ra.norm_squared() + rb.norm_squared())
}
