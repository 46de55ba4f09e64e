//! Brute-force references. Everything here is written from the fock
//! primitives and a plain Gram-Schmidt, without the dense eigen solvers or the
//! coproduct machinery used elsewhere, and is meant for small instances only.

use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::density::{MixedState, Subspace};
use crate::error::{Error, Result};
use crate::fock::{Occupation, OrbitalBasis, StateVector};
use crate::groupfn::{GroupProduct, QOperator};
use crate::SECTOR_CEILING;

fn check_ceiling(basis: OrbitalBasis, n: usize) -> Result<()> {
    let size = basis.sector_size(n);
    if size > SECTOR_CEILING {
        return Err(Error::SectorTooLarge { size, ceiling: SECTOR_CEILING });
    }
    Ok(())
}

/// Full wedge product of the factors.
pub fn expand(group: &GroupProduct) -> Result<StateVector> {
    check_ceiling(group.basis(), group.n())?;
    let mut out = StateVector::vacuum(group.basis());
    for f in group.factors() {
        out = out.wedge(f)?;
    }
    Ok(out)
}

pub fn overlap_direct(bra: &GroupProduct, ket: &GroupProduct) -> Result<Complex64> {
    expand(bra)?.inner(&expand(ket)?)
}

/// `⟨bra| Σ λ_{I,J} a†_I a_J |ket⟩` on the expanded states.
pub fn matelem_direct(bra: &GroupProduct, op: &QOperator, ket: &GroupProduct) -> Result<Complex64> {
    let b = expand(bra)?;
    let k = expand(ket)?;
    let mut acc = Complex64::default();
    for ((i, j), lam) in op.terms() {
        let reduced = k.annihilate_sequence(j)?;
        if reduced.is_zero() {
            continue;
        }
        acc += lam * b.inner(&reduced.create_sequence(i)?)?;
    }
    Ok(acc)
}

/// Modified Gram-Schmidt, run twice per vector; a vector is dropped when less
/// than `cutoff` of its norm survives.
pub fn gram_schmidt(vectors: &[StateVector], cutoff: f64) -> Result<Vec<StateVector>> {
    let mut out: Vec<StateVector> = Vec::new();
    for v in vectors {
        let scale = v.norm();
        if scale == 0.0 {
            continue;
        }
        let mut w = v.clone();
        for _ in 0..2 {
            for u in &out {
                let c = u.inner(&w)?;
                w.add_scaled(u, -c)?;
            }
        }
        if w.norm() > cutoff * scale {
            out.push(w.normalized().expect("nonzero after the norm check"));
        }
    }
    Ok(out)
}

/// All increasing index tuples of length `k` from `1..=dim`.
fn tuples(dim: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (1..=k).collect();
    if k > dim {
        return out;
    }
    loop {
        out.push(cur.clone());
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cur[i] < dim - (k - 1 - i) {
                cur[i] += 1;
                for t in i + 1..k {
                    cur[t] = cur[t - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Span of `Ω ↩ Ψ_i` over every basis determinant `Ω` with `n − p` particles
/// and every component, orthonormalized.
pub fn internal_space_direct(state: &MixedState, p: usize) -> Result<Subspace> {
    let n = state.n();
    if p == 0 || p > n {
        return Err(Error::RankOutOfRange { value: p, min: 1, max: n });
    }
    let basis = state.basis();
    check_ceiling(basis, p)?;
    let mut images = Vec::new();
    for omega in tuples(basis.dim(), n - p) {
        for (_, psi) in state.components() {
            // a_{ω_k}…a_{ω_1} Ψ, equal to Ω ↩ Ψ
            let img = psi.annihilate_sequence(&omega)?;
            if !img.is_zero() {
                images.push(img);
            }
        }
    }
    let vectors = gram_schmidt(&images, 1e-8)?;
    Ok(Subspace::from_parts(basis, p, vectors))
}

/// Dense `⟨B|D^p|A⟩ = Σ_i w_i Σ_L ⟨B∧L|Ψ_i⟩ conj⟨A∧L|Ψ_i⟩` over the whole
/// p-particle sector in lexicographic order.
pub fn rdm_direct(state: &MixedState, p: usize) -> Result<(Vec<Occupation>, DMatrix<Complex64>)> {
    let n = state.n();
    if p > n {
        return Err(Error::RankOutOfRange { value: p, min: 0, max: n });
    }
    let basis = state.basis();
    check_ceiling(basis, p)?;
    let sector: Vec<Occupation> = tuples(basis.dim(), p)
        .iter()
        .map(|t| Occupation::new(t).expect("increasing tuple"))
        .collect();
    let rest = tuples(basis.dim(), n - p);
    let mut m = DMatrix::zeros(sector.len(), sector.len());
    for (w, psi) in state.components() {
        for l in &rest {
            let l = StateVector::determinant(basis, l)?;
            let amps: Vec<Complex64> = sector
                .iter()
                .map(|b| {
                    let det = StateVector::from_occupation(basis, b.clone(), Complex64::new(1.0, 0.0))?;
                    det.wedge(&l)?.inner(psi)
                })
                .collect::<Result<_>>()?;
            for r in 0..sector.len() {
                for c in 0..sector.len() {
                    m[(r, c)] += amps[r] * amps[c].conj() * *w;
                }
            }
        }
    }
    Ok((sector, m))
}

/// Largest `|⟨u|v⟩|` between Gram-Schmidt bases of the two p-internal spaces.
pub fn max_overlap_direct(s1: &MixedState, s2: &MixedState, p: usize) -> Result<f64> {
    let a = internal_space_direct(s1, p)?;
    let b = internal_space_direct(s2, p)?;
    let mut best = 0.0f64;
    for u in a.vectors() {
        for v in b.vectors() {
            best = best.max(u.inner(v)?.norm());
        }
    }
    Ok(best)
}

/// Strong orthogonality in its basis form: every contraction
/// `Σ_k conj⟨L∧φ_k|Ψ⟩ ⟨M∧φ_k|Φ⟩` over all `n₁−1` and `n₂−1` determinants
/// `L`, `M` and all pairs of components vanishes.
pub fn strongly_orthogonal_direct(s1: &MixedState, s2: &MixedState, tol: f64) -> Result<bool> {
    let basis = s1.basis();
    if basis != s2.basis() {
        return Err(Error::BasisMismatch { left: basis.dim(), right: s2.basis().dim() });
    }
    let one_particle = |state: &MixedState| -> Result<Vec<StateVector>> {
        let mut out = Vec::new();
        for l in tuples(basis.dim(), state.n().saturating_sub(1)) {
            for (_, psi) in state.components() {
                let v = psi.annihilate_sequence(&l)?;
                if !v.is_zero() {
                    out.push(v);
                }
            }
        }
        Ok(out)
    };
    let a = one_particle(s1)?;
    let b = one_particle(s2)?;
    for u in &a {
        for v in &b {
            if u.inner(v)?.norm() > tol {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
