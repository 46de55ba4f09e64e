//! p-orthogonality, orthogonality grade and Araki angles between p-internal
//! spaces.

use alloc::vec::Vec;
use core::f64::consts::FRAC_PI_2;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::density::{internal_space, MixedState, Subspace};
use crate::error::{Error, Result};
use crate::linalg::{self, OccIndex};
use crate::Tolerances;

/// Verdict for one rank `p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PVerdict {
    pub p: usize,
    pub orthogonal: bool,
    /// Largest `|⟨u|v⟩|` over the orthonormal bases of the two internal spaces.
    pub max_overlap: f64,
}

/// Per-rank p-orthogonality table of a pair of states.
#[derive(Debug, Clone, PartialEq)]
pub struct GradeReport {
    pub n1: usize,
    pub n2: usize,
    /// One entry for each `p` in `1..=min(n1, n2)`.
    pub verdicts: Vec<PVerdict>,
    /// Smallest `p` at which the states are p-orthogonal.
    pub grade: Option<usize>,
}

impl GradeReport {
    /// Orthogonal at `p` implies orthogonal at every larger `p`.
    pub fn is_monotone(&self) -> bool {
        self.verdicts.windows(2).all(|w| !w[0].orthogonal || w[1].orthogonal)
    }
}

/// Largest modulus of an entry of the cross-Gram matrix.
pub fn max_cross_overlap(a: &Subspace, b: &Subspace) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for u in a.vectors() {
        for v in b.vectors() {
            worst = worst.max(u.inner(v)?.norm());
        }
    }
    Ok(worst)
}

fn check_pair(s1: &MixedState, s2: &MixedState, p: usize) -> Result<()> {
    if s1.basis() != s2.basis() {
        return Err(Error::BasisMismatch {
            left: s1.basis().dim(),
            right: s2.basis().dim(),
        });
    }
    let max = s1.n().min(s2.n());
    if p == 0 || p > max {
        return Err(Error::RankOutOfRange { value: p, min: 1, max });
    }
    Ok(())
}

pub fn p_verdict(s1: &MixedState, s2: &MixedState, p: usize, tol: &Tolerances) -> Result<PVerdict> {
    check_pair(s1, s2, p)?;
    let i1 = internal_space(s1, p, tol)?;
    let i2 = internal_space(s2, p, tol)?;
    let max_overlap = max_cross_overlap(&i1, &i2)?;
    Ok(PVerdict {
        p,
        orthogonal: max_overlap < tol.ortho,
        max_overlap,
    })
}

/// Whether the p-internal spaces of the two states are orthogonal.
pub fn is_p_orthogonal(s1: &MixedState, s2: &MixedState, p: usize, tol: &Tolerances) -> Result<bool> {
    Ok(p_verdict(s1, s2, p, tol)?.orthogonal)
}

/// Strong orthogonality, i.e. 1-orthogonality.
pub fn is_strongly_orthogonal(s1: &MixedState, s2: &MixedState, tol: &Tolerances) -> Result<bool> {
    is_p_orthogonal(s1, s2, 1, tol)
}

/// Full verdict table for `p = 1..=min(n1, n2)`.
pub fn grade(s1: &MixedState, s2: &MixedState, tol: &Tolerances) -> Result<GradeReport> {
    let max = s1.n().min(s2.n());
    if max == 0 {
        return Err(Error::RankOutOfRange { value: 0, min: 1, max: 0 });
    }
    let verdicts = (1..=max)
        .map(|p| p_verdict(s1, s2, p, tol))
        .collect::<Result<Vec<_>>>()?;
    let grade = verdicts.iter().find(|v| v.orthogonal).map(|v| v.p);
    Ok(GradeReport {
        n1: s1.n(),
        n2: s2.n(),
        verdicts,
        grade,
    })
}

/// Smallest orthogonal `p` by bisection; relies on the monotonicity of the
/// verdict table.
pub fn grade_bisect(s1: &MixedState, s2: &MixedState, tol: &Tolerances) -> Result<Option<usize>> {
    let max = s1.n().min(s2.n());
    if max == 0 {
        return Err(Error::RankOutOfRange { value: 0, min: 1, max: 0 });
    }
    if !is_p_orthogonal(s1, s2, max, tol)? {
        return Ok(None);
    }
    let (mut lo, mut hi) = (1, max);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if is_p_orthogonal(s1, s2, mid, tol)? {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(Some(lo))
}

/// One angle `θ` together with its multiplicity as an eigenvalue of
/// `(COSΘ)²` on `E = I₁ + I₂`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleBlock {
    pub theta: f64,
    pub multiplicity: usize,
}

/// Araki angle spectrum between two p-internal spaces.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleSpectrum {
    pub p: usize,
    pub d1: usize,
    pub d2: usize,
    /// Blocks in increasing angle order.
    pub blocks: Vec<AngleBlock>,
}

impl AngleSpectrum {
    /// Dimension of `E`.
    pub fn total_multiplicity(&self) -> usize {
        self.blocks.iter().map(|b| b.multiplicity).sum()
    }

    /// Each angle repeated by its multiplicity, increasing.
    pub fn flattened(&self) -> Vec<f64> {
        self.blocks
            .iter()
            .flat_map(|b| core::iter::repeat_n(b.theta, b.multiplicity))
            .collect()
    }

    /// True when every angle is within `tol` of `π/2`.
    pub fn all_right_angles(&self, tol: f64) -> bool {
        self.blocks.iter().all(|b| (b.theta - FRAC_PI_2).abs() <= tol)
    }

    /// Multiplicity of the zero angle (dimension of `I₁ ∩ I₂`).
    pub fn zero_multiplicity(&self, tol: f64) -> usize {
        self.blocks
            .iter()
            .filter(|b| b.theta <= tol)
            .map(|b| b.multiplicity)
            .sum()
    }
}

/// Eigenspace `V_θ` of `(COSΘ)²` and the parts of the two internal spaces it
/// contains.
#[derive(Debug, Clone)]
pub struct ArakiBlock {
    pub theta: f64,
    pub v: Subspace,
    pub first: Subspace,
    pub second: Subspace,
}

/// The projectors `P₁, P₂` of two subspaces restricted to their sum `E`.
#[derive(Debug, Clone)]
pub struct ArakiOperator {
    first: Subspace,
    second: Subspace,
    index: OccIndex,
    /// Orthonormal basis of `E` in occupation coordinates.
    e_basis: DMatrix<Complex64>,
    p1: DMatrix<Complex64>,
    p2: DMatrix<Complex64>,
    tol: Tolerances,
}

impl ArakiOperator {
    pub fn new(first: &Subspace, second: &Subspace, tol: &Tolerances) -> Result<Self> {
        if first.dim() == 0 || second.dim() == 0 {
            return Err(Error::EmptySubspace);
        }
        if first.basis() != second.basis() {
            return Err(Error::BasisMismatch {
                left: first.basis().dim(),
                right: second.basis().dim(),
            });
        }
        if first.sector() != second.sector() {
            return Err(Error::ParticleNumberMismatch {
                expected: first.sector(),
                found: second.sector(),
            });
        }
        let index = OccIndex::from_states(first.vectors().iter().chain(second.vectors()));
        let b1 = first.dense(&index);
        let b2 = second.dense(&index);
        let r2 = &b2 - &b1 * (b1.adjoint() * &b2);
        let q2 = linalg::column_space(&r2, tol.intersection);
        let mut e_basis = DMatrix::zeros(index.len(), b1.ncols() + q2.ncols());
        e_basis.columns_mut(0, b1.ncols()).copy_from(&b1);
        e_basis.columns_mut(b1.ncols(), q2.ncols()).copy_from(&q2);
        let c1 = e_basis.adjoint() * &b1;
        let c2 = e_basis.adjoint() * &b2;
        let p1 = &c1 * c1.adjoint();
        let p2 = &c2 * c2.adjoint();
        Ok(Self {
            first: first.clone(),
            second: second.clone(),
            index,
            e_basis,
            p1,
            p2,
            tol: *tol,
        })
    }

    pub fn dim_e(&self) -> usize {
        self.e_basis.ncols()
    }

    fn identity(&self) -> DMatrix<Complex64> {
        DMatrix::identity(self.dim_e(), self.dim_e())
    }

    /// `P₁ + P₂ − Id_E`, whose modulus is `COSΘ`.
    pub fn cos_operator(&self) -> DMatrix<Complex64> {
        &self.p1 + &self.p2 - self.identity()
    }

    /// `P₁ − P₂`, whose modulus is `SINΘ`.
    pub fn sin_operator(&self) -> DMatrix<Complex64> {
        &self.p1 - &self.p2
    }

    pub fn cos_squared(&self) -> DMatrix<Complex64> {
        let m = self.cos_operator();
        &m * &m
    }

    pub fn sin_squared(&self) -> DMatrix<Complex64> {
        let m = self.sin_operator();
        &m * &m
    }

    /// Largest entry of `(COSΘ)² + (SINΘ)² − Id_E`.
    pub fn identity_residual(&self) -> f64 {
        (self.cos_squared() + self.sin_squared() - self.identity()).camax()
    }

    /// Eigenvalue bins of `(COSΘ)²` with their eigenvectors (E coordinates)
    /// and the angle of every eigenvector.
    fn bins(&self) -> Vec<(Vec<f64>, DMatrix<Complex64>)> {
        let c2 = self.cos_squared();
        let c2 = (&c2 + c2.adjoint()).scale(0.5);
        let (vals, vecs) = linalg::hermitian_eigen(c2);
        let cos_op = self.cos_operator();
        let sin_op = self.sin_operator();
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for i in 0..vals.len() {
            match groups.last_mut() {
                Some(g) if vals[*g.last().unwrap()] - vals[i] <= self.tol.angle_bin => g.push(i),
                _ => groups.push(alloc::vec![i]),
            }
        }
        groups
            .into_iter()
            .map(|g| {
                let mut block = DMatrix::zeros(self.dim_e(), g.len());
                let mut angles = Vec::with_capacity(g.len());
                for (j, &i) in g.iter().enumerate() {
                    let v = vecs.column(i);
                    // arccos(√λ) evaluated as atan2(sin, cos) with both read off v
                    let cos = (&cos_op * v).norm();
                    let sin = (&sin_op * v).norm();
                    angles.push(libm::atan2(sin, cos));
                    block.set_column(j, &v);
                }
                (angles, block)
            })
            .collect()
    }

    /// Angle spectrum from the eigen-decomposition of `(COSΘ)²`.
    pub fn spectrum(&self, p: usize) -> AngleSpectrum {
        let blocks = self
            .bins()
            .into_iter()
            .map(|(angles, _)| AngleBlock {
                theta: angles.iter().sum::<f64>() / angles.len() as f64,
                multiplicity: angles.len(),
            })
            .collect();
        AngleSpectrum {
            p,
            d1: self.first.dim(),
            d2: self.second.dim(),
            blocks,
        }
    }

    /// Orthogonal decomposition of `E` into eigenspaces of `(COSΘ)²`, each
    /// with its intersections with the two subspaces.
    pub fn decomposition(&self) -> Vec<ArakiBlock> {
        let basis = self.first.basis();
        let sector = self.first.sector();
        let to_subspace = |coords: &DMatrix<Complex64>| {
            let dense = &self.e_basis * coords;
            Subspace::from_parts(basis, sector, self.index.states(basis, sector, &dense))
        };
        self.bins()
            .into_iter()
            .map(|(angles, block)| {
                // a projector restricted to an invariant subspace has singular values 0 or 1
                let first = linalg::column_space(&(&self.p1 * &block), 0.5);
                let second = linalg::column_space(&(&self.p2 * &block), 0.5);
                ArakiBlock {
                    theta: angles.iter().sum::<f64>() / angles.len() as f64,
                    v: to_subspace(&block),
                    first: to_subspace(&first),
                    second: to_subspace(&second),
                }
            })
            .collect()
    }
}

fn internal_pair(s1: &MixedState, s2: &MixedState, p: usize, tol: &Tolerances) -> Result<(Subspace, Subspace)> {
    check_pair(s1, s2, p)?;
    Ok((internal_space(s1, p, tol)?, internal_space(s2, p, tol)?))
}

/// Araki angles of the p-internal spaces from the operator `(COSΘ^p)²` on
/// `E = I^p[s1] + I^p[s2]`.
pub fn araki_angles(s1: &MixedState, s2: &MixedState, p: usize, tol: &Tolerances) -> Result<AngleSpectrum> {
    let (i1, i2) = internal_pair(s1, s2, p, tol)?;
    Ok(ArakiOperator::new(&i1, &i2, tol)?.spectrum(p))
}

/// Eigenspace decomposition `E = ⊕ V_θ` together with `I^p[s_j] ∩ V_θ`.
pub fn araki_decomposition(s1: &MixedState, s2: &MixedState, p: usize, tol: &Tolerances) -> Result<Vec<ArakiBlock>> {
    let (i1, i2) = internal_pair(s1, s2, p, tol)?;
    Ok(ArakiOperator::new(&i1, &i2, tol)?.decomposition())
}

/// Angle spectrum from principal angles (singular values of the cross-Gram
/// matrix), with multiplicities mapped onto `E`: a common direction counts
/// once at angle 0, every other principal pair twice, and each surplus
/// dimension of the larger space once at `π/2`.
pub fn principal_angle_spectrum(first: &Subspace, second: &Subspace, p: usize, tol: &Tolerances) -> Result<AngleSpectrum> {
    if first.dim() == 0 || second.dim() == 0 {
        return Err(Error::EmptySubspace);
    }
    if first.basis() != second.basis() || first.sector() != second.sector() {
        return Err(Error::BasisMismatch {
            left: first.basis().dim(),
            right: second.basis().dim(),
        });
    }
    let (small, large) = if first.dim() <= second.dim() {
        (first, second)
    } else {
        (second, first)
    };
    let index = OccIndex::from_states(small.vectors().iter().chain(large.vectors()));
    let a = small.dense(&index);
    let b = large.dense(&index);
    let cosines = linalg::singular_values(&(a.adjoint() * &b));
    let mut sines = linalg::singular_values(&(&a - &b * (b.adjoint() * &a)));
    sines.reverse();

    // (cos², θ, multiplicity)
    let mut entries: Vec<(f64, f64, usize)> = Vec::new();
    for (cos, sin) in cosines.iter().zip(&sines) {
        let (cos, sin) = (cos.min(1.0), sin.min(1.0));
        let theta = if cos * cos <= 0.5 { libm::acos(cos) } else { libm::asin(sin) };
        let mult = if sin <= tol.intersection { 1 } else { 2 };
        entries.push((cos * cos, theta, mult));
    }
    let surplus = large.dim() - small.dim();
    if surplus > 0 {
        entries.push((0.0, FRAC_PI_2, surplus));
    }
    entries.sort_by(|x, y| y.0.total_cmp(&x.0));

    let mut blocks: Vec<(f64, f64, usize)> = Vec::new(); // (last cos², Σθ·m, Σm)
    for (c2, theta, m) in entries {
        match blocks.last_mut() {
            Some(b) if b.0 - c2 <= tol.angle_bin => {
                b.0 = c2;
                b.1 += theta * m as f64;
                b.2 += m;
            }
            _ => blocks.push((c2, theta * m as f64, m)),
        }
    }
    Ok(AngleSpectrum {
        p,
        d1: first.dim(),
        d2: second.dim(),
        blocks: blocks
            .into_iter()
            .map(|(_, sum, m)| AngleBlock {
                theta: sum / m as f64,
                multiplicity: m,
            })
            .collect(),
    })
}

/// [`principal_angle_spectrum`] of the p-internal spaces of two states.
pub fn principal_angles(s1: &MixedState, s2: &MixedState, p: usize, tol: &Tolerances) -> Result<AngleSpectrum> {
    let (i1, i2) = internal_pair(s1, s2, p, tol)?;
    principal_angle_spectrum(&i1, &i2, p, tol)
}
