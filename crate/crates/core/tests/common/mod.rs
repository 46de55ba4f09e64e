#![allow(dead_code)]

use fermigrade_core::{Complex64, GroupProduct, MixedState, OrbitalBasis, QOperator, StateVector};
use nalgebra::DMatrix;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn random_complex(rng: &mut StdRng) -> Complex64 {
    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

/// Random increasing `n`-subset of `orbitals`.
pub fn random_subset(rng: &mut StdRng, orbitals: &[usize], n: usize) -> Vec<usize> {
    let mut pool = orbitals.to_vec();
    pool.shuffle(rng);
    let mut out = pool[..n].to_vec();
    out.sort_unstable();
    out
}

/// Normalized state with up to `terms` random determinants over `orbitals`.
pub fn random_state_on(rng: &mut StdRng, basis: OrbitalBasis, orbitals: &[usize], n: usize, terms: usize) -> StateVector {
    assert!(n <= orbitals.len());
    loop {
        let list: Vec<_> = (0..terms.max(1))
            .map(|_| (random_complex(rng), random_subset(rng, orbitals, n)))
            .collect();
        let s = StateVector::from_terms(basis, n, list).unwrap();
        if let Some(s) = s.normalized() {
            return s;
        }
    }
}

pub fn random_state(rng: &mut StdRng, basis: OrbitalBasis, n: usize, terms: usize) -> StateVector {
    let all: Vec<usize> = (1..=basis.dim()).collect();
    random_state_on(rng, basis, &all, n, terms)
}

pub fn random_mixed_on(rng: &mut StdRng, basis: OrbitalBasis, orbitals: &[usize], n: usize, components: usize, terms: usize) -> MixedState {
    let raw: Vec<f64> = (0..components).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let comps = raw
        .iter()
        .map(|w| (w / total, random_state_on(rng, basis, orbitals, n, terms)))
        .collect();
    MixedState::new(comps).unwrap()
}

/// Random unitary from the QR factor of a complex Gaussian-ish matrix.
pub fn random_unitary(rng: &mut StdRng, dim: usize) -> DMatrix<Complex64> {
    let m = DMatrix::from_fn(dim, dim, |_, _| random_complex(rng));
    m.qr().q()
}

/// Unitary acting as a random unitary on `orbitals` and as the identity elsewhere.
pub fn random_unitary_on(rng: &mut StdRng, dim: usize, orbitals: &[usize]) -> DMatrix<Complex64> {
    let block = random_unitary(rng, orbitals.len());
    let mut u = DMatrix::identity(dim, dim);
    for (a, &i) in orbitals.iter().enumerate() {
        for (b, &j) in orbitals.iter().enumerate() {
            u[(i - 1, j - 1)] = block[(a, b)];
        }
    }
    u
}

/// Applies the one-particle map `φ_i ↦ Σ_a u[a,i] φ_a` to every orbital.
pub fn rotate(state: &StateVector, u: &DMatrix<Complex64>) -> StateVector {
    let basis = state.basis();
    let images: Vec<StateVector> = (0..basis.dim())
        .map(|i| {
            let terms = (0..basis.dim())
                .map(|a| (u[(a, i)], vec![a + 1]))
                .collect::<Vec<_>>();
            StateVector::from_terms(basis, 1, terms).unwrap()
        })
        .collect();
    let mut out = StateVector::zero(basis, state.n());
    for (occ, coeff) in state.terms() {
        let mut term = StateVector::vacuum(basis);
        for i in occ.iter() {
            term = term.wedge(&images[i - 1]).unwrap();
        }
        out.add_scaled(&term, *coeff).unwrap();
    }
    out
}

pub fn rotate_mixed(state: &MixedState, u: &DMatrix<Complex64>) -> MixedState {
    let comps = state
        .components()
        .iter()
        .map(|(w, s)| (*w, rotate(s, u).normalized().unwrap()))
        .collect();
    MixedState::new(comps).unwrap()
}

/// Orbital blocks `(A, B, S)` of a basis of size `a + b + s`.
pub fn blocks(a: usize, b: usize, s: usize) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
    let first: Vec<usize> = (1..=a).collect();
    let second: Vec<usize> = (a + 1..=a + b).collect();
    let shared: Vec<usize> = (a + b + 1..=a + b + s).collect();
    (first, second, shared)
}

pub fn union(x: &[usize], y: &[usize]) -> Vec<usize> {
    let mut v: Vec<usize> = x.iter().chain(y).copied().collect();
    v.sort_unstable();
    v
}

/// Pair of states over `A ∪ S` and `B ∪ S` with `|S| = p − 1`, hence p-orthogonal.
pub fn p_orthogonal_pair(rng: &mut StdRng, n1: usize, n2: usize, p: usize, mixed: bool) -> (MixedState, MixedState) {
    let s = p - 1;
    let a = n1 + 1;
    let b = n2 + 1;
    let basis = OrbitalBasis::new(a + b + s).unwrap();
    let (ab, bb, sb) = blocks(a, b, s);
    let comps = if mixed { 2 } else { 1 };
    let s1 = random_mixed_on(rng, basis, &union(&ab, &sb), n1, comps, 3);
    let s2 = random_mixed_on(rng, basis, &union(&bb, &sb), n2, comps, 3);
    (s1, s2)
}

/// Random Hermitian q-particle operator with about `terms` independent entries.
pub fn random_operator(rng: &mut StdRng, basis: OrbitalBasis, q: usize, terms: usize) -> QOperator {
    let all: Vec<usize> = (1..=basis.dim()).collect();
    let mut list: Vec<fermigrade_core::groupfn::OperatorTerm> = Vec::new();
    for _ in 0..terms {
        let mut i = random_subset(rng, &all, q);
        let mut j = random_subset(rng, &all, q);
        i.shuffle(rng);
        j.shuffle(rng);
        if list.iter().any(|((a, b), _)| (a == &i && b == &j) || (a == &j && b == &i)) {
            continue;
        }
        let lam = if i == j { c(rng.random_range(-1.0..1.0)) } else { random_complex(rng) };
        list.push(((i, j), lam));
    }
    QOperator::hermitian_closure(basis, q, list).unwrap()
}

/// Group product with factors of the given sizes over `orbitals`.
pub fn random_group_on(rng: &mut StdRng, basis: OrbitalBasis, orbitals: &[Vec<usize>], sizes: &[usize], terms: usize) -> GroupProduct {
    let factors = sizes
        .iter()
        .zip(orbitals)
        .map(|(&n, orb)| {
            let t = rng.random_range(1..=terms);
            random_state_on(rng, basis, orb, n, t)
        })
        .collect();
    GroupProduct::new(factors).unwrap()
}

pub fn random_group(rng: &mut StdRng, basis: OrbitalBasis, sizes: &[usize], terms: usize) -> GroupProduct {
    let all: Vec<usize> = (1..=basis.dim()).collect();
    let orbitals = vec![all; sizes.len()];
    random_group_on(rng, basis, &orbitals, sizes, terms)
}

pub fn close(a: Complex64, b: Complex64, rel: f64) -> bool {
    (a - b).norm() <= rel * b.norm().max(1.0)
}
