//! Exterior algebra over a finite orthonormal one-particle basis.
//!
//! Determinants are stored as bit masks over orbitals `1..=dim` and states as
//! sparse maps from occupations to complex coefficients. The ordered
//! determinants `φ_{i1} ∧ … ∧ φ_{ip}` with `i1 < … < ip` form an orthonormal
//! basis of the `p`-particle sector; there are no `p!` prefactors anywhere.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;
use core::ops::{Add, Mul, Neg, Sub};

use itertools::Itertools;
use num_complex::Complex64;
use smallvec::SmallVec;

use crate::error::{Error, Result};

/// Coefficients with modulus below this are dropped after every operation.
pub const ZERO_CUTOFF: f64 = 1e-14;

const WORD: usize = 64;

/// Finite orthonormal one-particle basis `φ_1, …, φ_dim`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct OrbitalBasis {
    dim: usize,
}

impl OrbitalBasis {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::EmptyBasis);
        }
        Ok(Self { dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of determinants in the `p`-particle sector, `C(dim, p)`.
    pub fn sector_size(&self, p: usize) -> u128 {
        if p > self.dim {
            0
        } else {
            num_integer::binomial(self.dim as u128, p as u128)
        }
    }

    /// All ordered `p`-particle determinants in lexicographic order.
    pub fn sector(&self, p: usize) -> impl Iterator<Item = Occupation> {
        (1..=self.dim)
            .combinations(p)
            .map(|idx| Occupation::from_sorted_unchecked(&idx))
    }

    fn check(&self, other: &OrbitalBasis) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::BasisMismatch {
                left: self.dim,
                right: other.dim,
            });
        }
        Ok(())
    }
}

/// A set of occupied orbitals, i.e. one ordered determinant.
///
/// Bit `i - 1` marks orbital `i`. One inline word covers `dim <= 64`; wider
/// bases spill to the heap. Trailing zero words are always trimmed so that
/// equal sets compare equal.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Occupation {
    words: SmallVec<[u64; 1]>,
}

impl Occupation {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds an occupation from strictly increasing 1-based indices.
    pub fn new(indices: &[usize]) -> Result<Self> {
        if indices.contains(&0) {
            return Err(Error::OrbitalOutOfRange { index: 0, dim: 0 });
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::NotIncreasing(indices.to_vec()));
        }
        Ok(Self::from_sorted_unchecked(indices))
    }

    /// Builds an occupation from indices in arbitrary order, returning the sign
    /// of the sorting permutation, or `None` if an index repeats.
    pub fn from_unordered(indices: &[usize]) -> Option<(i8, Self)> {
        let mut occ = Self::empty();
        let mut sign = 1i8;
        // φ_{i1} ∧ … ∧ φ_{ik}: build from the right so each insertion is a left wedge
        for &i in indices.iter().rev() {
            if i == 0 || occ.contains(i) {
                return None;
            }
            if occ.count_below(i) % 2 == 1 {
                sign = -sign;
            }
            occ.insert(i);
        }
        Some((sign, occ))
    }

    fn from_sorted_unchecked(indices: &[usize]) -> Self {
        let mut occ = Self::empty();
        for &i in indices {
            occ.insert(i);
        }
        occ
    }

    fn insert(&mut self, i: usize) {
        let (w, b) = ((i - 1) / WORD, (i - 1) % WORD);
        if self.words.len() <= w {
            self.words.resize(w + 1, 0);
        }
        self.words[w] |= 1u64 << b;
    }

    fn trim(mut self) -> Self {
        while self.words.last() == Some(&0) {
            self.words.pop();
        }
        self
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        if i == 0 {
            return false;
        }
        let (w, b) = ((i - 1) / WORD, (i - 1) % WORD);
        self.words.get(w).is_some_and(|x| x >> b & 1 == 1)
    }

    /// Number of occupied orbitals with index strictly below `i`.
    pub fn count_below(&self, i: usize) -> usize {
        if i <= 1 {
            return 0;
        }
        let (w, b) = ((i - 1) / WORD, (i - 1) % WORD);
        let mut count = 0;
        for (k, word) in self.words.iter().enumerate() {
            match k.cmp(&w) {
                Ordering::Less => count += word.count_ones() as usize,
                Ordering::Equal => count += (word & ((1u64 << b) - 1)).count_ones() as usize,
                Ordering::Greater => break,
            }
        }
        count
    }

    /// Largest occupied index, if any.
    pub fn max_index(&self) -> Option<usize> {
        let last = self.words.len().checked_sub(1)?;
        let w = self.words[last];
        Some(last * WORD + (WORD - w.leading_zeros() as usize))
    }

    /// Occupied orbitals in increasing order.
    pub fn indices(&self) -> Vec<usize> {
        self.iter().collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(k, &word)| {
            let mut rest = word;
            core::iter::from_fn(move || {
                if rest == 0 {
                    return None;
                }
                let b = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(k * WORD + b + 1)
            })
        })
    }

    pub fn is_disjoint(&self, other: &Self) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & b == 0)
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.words
            .iter()
            .enumerate()
            .all(|(k, a)| a & !other.words.get(k).copied().unwrap_or(0) == 0)
    }

    pub fn union(&self, other: &Self) -> Self {
        let n = self.words.len().max(other.words.len());
        let words = (0..n)
            .map(|k| self.words.get(k).copied().unwrap_or(0) | other.words.get(k).copied().unwrap_or(0))
            .collect();
        Self { words }
    }

    pub fn difference(&self, other: &Self) -> Self {
        let words = self
            .words
            .iter()
            .enumerate()
            .map(|(k, a)| a & !other.words.get(k).copied().unwrap_or(0))
            .collect();
        Self { words }.trim()
    }

    /// Sign of the permutation sorting the concatenation `self // other`;
    /// the sets must be disjoint.
    pub fn wedge_sign(&self, other: &Self) -> i8 {
        let own = self.len();
        let inversions: usize = other.iter().map(|y| own - self.count_below(y)).sum();
        if inversions.is_multiple_of(2) {
            1
        } else {
            -1
        }
    }

    /// `self ∧ other` as `(sign, union)`, or `None` when an orbital repeats.
    pub fn wedge(&self, other: &Self) -> Option<(i8, Self)> {
        if !self.is_disjoint(other) {
            return None;
        }
        Some((self.wedge_sign(other), self.union(other)))
    }
}

impl Ord for Occupation {
    /// Shorter occupations first, then lexicographic on the sorted index lists.
    fn cmp(&self, other: &Self) -> Ordering {
        match self.len().cmp(&other.len()) {
            Ordering::Equal => {}
            ord => return ord,
        }
        let n = self.words.len().max(other.words.len());
        for k in 0..n {
            let a = self.words.get(k).copied().unwrap_or(0);
            let b = other.words.get(k).copied().unwrap_or(0);
            let diff = a ^ b;
            if diff != 0 {
                let low = diff & diff.wrapping_neg();
                return if a & low != 0 {
                    Ordering::Less
                } else {
                    Ordering::Greater
                };
            }
        }
        Ordering::Equal
    }
}

impl PartialOrd for Occupation {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Occupation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Occupation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}]", self.iter().format(" "))
    }
}

/// Sparse `n`-particle state: a linear combination of ordered determinants.
#[derive(Clone, PartialEq)]
pub struct StateVector {
    basis: OrbitalBasis,
    n: usize,
    terms: BTreeMap<Occupation, Complex64>,
}

impl StateVector {
    pub fn zero(basis: OrbitalBasis, n: usize) -> Self {
        Self {
            basis,
            n,
            terms: BTreeMap::new(),
        }
    }

    /// The 0-particle state with coefficient 1.
    pub fn vacuum(basis: OrbitalBasis) -> Self {
        Self::scalar(basis, Complex64::new(1.0, 0.0))
    }

    pub fn scalar(basis: OrbitalBasis, value: Complex64) -> Self {
        let mut s = Self::zero(basis, 0);
        s.accumulate(Occupation::empty(), value);
        s
    }

    /// Single ordered determinant with coefficient 1.
    pub fn determinant(basis: OrbitalBasis, indices: &[usize]) -> Result<Self> {
        let occ = Occupation::new(indices)?;
        Self::from_occupation(basis, occ, Complex64::new(1.0, 0.0))
    }

    /// One-particle basis function `φ_i`.
    pub fn orbital(basis: OrbitalBasis, i: usize) -> Result<Self> {
        Self::determinant(basis, &[i])
    }

    pub fn from_occupation(basis: OrbitalBasis, occ: Occupation, coeff: Complex64) -> Result<Self> {
        if let Some(max) = occ.max_index() {
            if max > basis.dim {
                return Err(Error::OrbitalOutOfRange {
                    index: max,
                    dim: basis.dim,
                });
            }
        }
        let mut s = Self::zero(basis, occ.len());
        s.accumulate(occ, coeff);
        Ok(s)
    }

    /// Sums `coeff · φ_{i1} ∧ … ∧ φ_{in}` over the given index lists. Lists may
    /// be unordered; repeated orbitals contribute nothing.
    pub fn from_terms<I>(basis: OrbitalBasis, n: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Complex64, Vec<usize>)>,
    {
        let mut s = Self::zero(basis, n);
        for (coeff, idx) in terms {
            if idx.len() != n {
                return Err(Error::ParticleNumberMismatch {
                    expected: n,
                    found: idx.len(),
                });
            }
            if let Some(&bad) = idx.iter().find(|&&i| i == 0 || i > basis.dim) {
                return Err(Error::OrbitalOutOfRange {
                    index: bad,
                    dim: basis.dim,
                });
            }
            if let Some((sign, occ)) = Occupation::from_unordered(&idx) {
                s.accumulate(occ, coeff * f64::from(sign));
            }
        }
        s.prune();
        Ok(s)
    }

    pub fn basis(&self) -> OrbitalBasis {
        self.basis
    }

    /// Particle number.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Occupation, &Complex64)> {
        self.terms.iter()
    }

    pub fn coeff(&self, occ: &Occupation) -> Complex64 {
        self.terms.get(occ).copied().unwrap_or_default()
    }

    /// Value of a 0-particle state; zero for other sectors.
    pub fn scalar_value(&self) -> Complex64 {
        if self.n == 0 {
            self.coeff(&Occupation::empty())
        } else {
            Complex64::default()
        }
    }

    pub(crate) fn accumulate(&mut self, occ: Occupation, coeff: Complex64) {
        *self.terms.entry(occ).or_default() += coeff;
    }

    pub(crate) fn prune(&mut self) {
        self.terms.retain(|_, c| c.norm() >= ZERO_CUTOFF);
    }

    pub(crate) fn pruned(mut self) -> Self {
        self.prune();
        self
    }

    pub fn norm_sqr(&self) -> f64 {
        self.terms.values().map(|c| c.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.norm_sqr())
    }

    /// Unit-norm copy, or `None` for the zero state.
    pub fn normalized(&self) -> Option<Self> {
        let norm = self.norm();
        if norm < ZERO_CUTOFF {
            return None;
        }
        Some(self.scale(Complex64::new(1.0 / norm, 0.0)))
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c *= factor;
        }
        out.pruned()
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.basis.check(&other.basis)?;
        self.check_n(other.n)?;
        let mut out = self.clone();
        for (occ, c) in &other.terms {
            out.accumulate(occ.clone(), *c);
        }
        Ok(out.pruned())
    }

    /// `self += factor · other` in place.
    pub fn add_scaled(&mut self, other: &Self, factor: Complex64) -> Result<()> {
        self.basis.check(&other.basis)?;
        self.check_n(other.n)?;
        for (occ, c) in &other.terms {
            self.accumulate(occ.clone(), c * factor);
        }
        self.prune();
        Ok(())
    }

    fn check_n(&self, n: usize) -> Result<()> {
        if self.n != n {
            return Err(Error::ParticleNumberMismatch {
                expected: self.n,
                found: n,
            });
        }
        Ok(())
    }

    /// `⟨self|other⟩`, conjugate-linear in `self`.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        self.basis.check(&other.basis)?;
        self.check_n(other.n)?;
        let (small, large, flip) = if self.terms.len() <= other.terms.len() {
            (self, other, false)
        } else {
            (other, self, true)
        };
        let mut acc = Complex64::default();
        for (occ, a) in &small.terms {
            if let Some(b) = large.terms.get(occ) {
                acc += if flip { b.conj() * a } else { a.conj() * b };
            }
        }
        Ok(acc)
    }

    /// Grassmann product `self ∧ other`.
    pub fn wedge(&self, other: &Self) -> Result<Self> {
        self.basis.check(&other.basis)?;
        let mut out = Self::zero(self.basis, self.n + other.n);
        for (a, ca) in &self.terms {
            for (b, cb) in &other.terms {
                if let Some((sign, occ)) = a.wedge(b) {
                    out.accumulate(occ, ca * cb * f64::from(sign));
                }
            }
        }
        Ok(out.pruned())
    }

    /// Left interior product `self ↩ phi`, the adjoint of `self ∧ ·`:
    /// `⟨Θ|Ψ↩Φ⟩ = ⟨Ψ∧Θ|Φ⟩`.
    pub fn interior_left(&self, phi: &Self) -> Result<Self> {
        self.contract(phi, true)
    }

    fn contract(&self, phi: &Self, left: bool) -> Result<Self> {
        self.basis.check(&phi.basis)?;
        if self.n > phi.n {
            return Err(Error::RankOutOfRange {
                value: self.n,
                min: 0,
                max: phi.n,
            });
        }
        let mut out = Self::zero(self.basis, phi.n - self.n);
        for (a, ca) in &self.terms {
            for (c, cc) in &phi.terms {
                if !a.is_subset(c) {
                    continue;
                }
                let rest = c.difference(a);
                let sign = if left { a.wedge_sign(&rest) } else { rest.wedge_sign(a) };
                out.accumulate(rest, ca.conj() * cc * f64::from(sign));
            }
        }
        Ok(out.pruned())
    }

    /// Single annihilation `a_j`: removes `j` with sign `(-1)^{#occupied below j}`.
    pub fn annihilate(&self, j: usize) -> Self {
        let mut out = Self::zero(self.basis, self.n.saturating_sub(1));
        for (occ, c) in &self.terms {
            if occ.contains(j) {
                let sign = if occ.count_below(j) % 2 == 0 { 1.0 } else { -1.0 };
                let mut single = Occupation::empty();
                single.insert(j);
                out.accumulate(occ.difference(&single), c * sign);
            }
        }
        out
    }

    /// Single creation `a†_i = φ_i ∧ ·`.
    pub fn create(&self, i: usize) -> Result<Self> {
        if i == 0 || i > self.basis.dim {
            return Err(Error::OrbitalOutOfRange {
                index: i,
                dim: self.basis.dim,
            });
        }
        let mut out = Self::zero(self.basis, self.n + 1);
        for (occ, c) in &self.terms {
            if !occ.contains(i) {
                let sign = if occ.count_below(i) % 2 == 0 { 1.0 } else { -1.0 };
                let mut grown = occ.clone();
                grown.insert(i);
                out.accumulate(grown, c * sign);
            }
        }
        Ok(out)
    }

    /// `a_{jq} … a_{j1} Ψ` for the tuple `(j1, …, jq)`: `a_{j1}` acts first.
    pub fn annihilate_sequence(&self, tuple: &[usize]) -> Result<Self> {
        if tuple.len() > self.n {
            return Err(Error::RankOutOfRange {
                value: tuple.len(),
                min: 0,
                max: self.n,
            });
        }
        let mut out = self.clone();
        for &j in tuple {
            out = out.annihilate(j);
            if out.is_zero() {
                return Ok(Self::zero(self.basis, self.n - tuple.len()));
            }
        }
        Ok(out.pruned())
    }

    /// `a†_{i1} … a†_{iq} Ψ = φ_{i1} ∧ … ∧ φ_{iq} ∧ Ψ`.
    pub fn create_sequence(&self, tuple: &[usize]) -> Result<Self> {
        let mut out = self.clone();
        for &i in tuple.iter().rev() {
            out = out.create(i)?;
        }
        Ok(out.pruned())
    }

    /// Coproduct component of bidegree `(m, n - m)`, one entry per term and
    /// per position subset. See [`split`].
    pub fn split(&self, m: usize) -> Result<Vec<SplitTerm>> {
        split(self, m)
    }
}

/// Right interior product `phi ↪ psi`: `⟨Θ|Φ↪Ψ⟩ = ⟨Θ∧Ψ|Φ⟩`.
pub fn interior_right(phi: &StateVector, psi: &StateVector) -> Result<StateVector> {
    psi.contract(phi, false)
}

/// Left interior product `psi ↩ phi`.
pub fn interior_left(psi: &StateVector, phi: &StateVector) -> Result<StateVector> {
    psi.interior_left(phi)
}

pub fn wedge(a: &StateVector, b: &StateVector) -> Result<StateVector> {
    a.wedge(b)
}

pub fn inner(a: &StateVector, b: &StateVector) -> Result<Complex64> {
    a.inner(b)
}

/// One term of the coproduct split `(Φ)_I ⊗ (Φ)_Ī`.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitTerm {
    /// Reordering sign `ρ_{I,Ī}` of the position subset.
    pub sign: i8,
    /// Coefficient `λ_K` of the split determinant (sign not included).
    pub coeff: Complex64,
    pub left: Occupation,
    pub right: Occupation,
}

impl SplitTerm {
    pub fn weight(&self) -> Complex64 {
        self.coeff * f64::from(self.sign)
    }
}

/// Splits each determinant `ψ_{k1} ∧ … ∧ ψ_{kp}` of `phi` over every position
/// subset `I` of size `m`: left part `ψ_{k_I}`, right part `ψ_{k_Ī}`, sign of
/// the permutation sorting `I // Ī`. Subsets are visited lexicographically.
pub fn split(phi: &StateVector, m: usize) -> Result<Vec<SplitTerm>> {
    let p = phi.n;
    if m > p {
        return Err(Error::RankOutOfRange {
            value: m,
            min: 0,
            max: p,
        });
    }
    let mut out = Vec::new();
    for (occ, c) in &phi.terms {
        let idx = occ.indices();
        for positions in (0..p).combinations(m) {
            let left = Occupation::from_sorted_unchecked(
                &positions.iter().map(|&k| idx[k]).collect::<SmallVec<[usize; 8]>>(),
            );
            let right = occ.difference(&left);
            out.push(SplitTerm {
                sign: left.wedge_sign(&right),
                coeff: *c,
                left,
                right,
            });
        }
    }
    Ok(out)
}

/// Split terms collected by their left part: `left ↦ Σ sign·λ·right`.
/// Equals `Σ_L |L⟩ ⊗ (L ↩ Φ)`.
pub fn split_by_left(phi: &StateVector, m: usize) -> Result<BTreeMap<Occupation, StateVector>> {
    let mut out: BTreeMap<Occupation, StateVector> = BTreeMap::new();
    for t in split(phi, m)? {
        let w = t.weight();
        out.entry(t.left)
            .or_insert_with(|| StateVector::zero(phi.basis, phi.n - m))
            .accumulate(t.right, w);
    }
    out.retain(|_, s| {
        s.prune();
        !s.is_zero()
    });
    Ok(out)
}

/// Split terms collected by their right part: `right ↦ Σ sign·λ·left`.
/// Equals `Σ_R (Φ ↪ R) ⊗ |R⟩`.
pub fn split_by_right(phi: &StateVector, m: usize) -> Result<BTreeMap<Occupation, StateVector>> {
    let mut out: BTreeMap<Occupation, StateVector> = BTreeMap::new();
    for t in split(phi, m)? {
        let w = t.weight();
        out.entry(t.right)
            .or_insert_with(|| StateVector::zero(phi.basis, m))
            .accumulate(t.left, w);
    }
    out.retain(|_, s| {
        s.prune();
        !s.is_zero()
    });
    Ok(out)
}

impl fmt::Debug for StateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for StateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts = self
            .terms
            .iter()
            .format_with(" + ", |(occ, c), g| g(&format_args!("({}){}", c, occ)));
        write!(f, "{}", parts)
    }
}

impl Add for &StateVector {
    type Output = StateVector;

    /// Panics on basis or particle-number mismatch; use [`StateVector::try_add`]
    /// for a fallible version.
    fn add(self, rhs: &StateVector) -> StateVector {
        self.try_add(rhs).expect("adding states of different sectors")
    }
}

impl Sub for &StateVector {
    type Output = StateVector;

    fn sub(self, rhs: &StateVector) -> StateVector {
        let mut out = self.clone();
        out.add_scaled(rhs, Complex64::new(-1.0, 0.0))
            .expect("subtracting states of different sectors");
        out
    }
}

impl Neg for &StateVector {
    type Output = StateVector;

    fn neg(self) -> StateVector {
        self.scale(Complex64::new(-1.0, 0.0))
    }
}

impl Mul<Complex64> for &StateVector {
    type Output = StateVector;

    fn mul(self, rhs: Complex64) -> StateVector {
        self.scale(rhs)
    }
}
