//! Antisymmetrized group functions `Ψ = Ψ₁ ∧ ⋯ ∧ Ψ_r`: overlaps and operator
//! matrix elements through the coproduct expansion, with the sums over index
//! sequences restricted when the active group is declared q-orthogonal to the
//! spectator groups.
//!
//! The overlap `⟨Ψ₁' ∧ Ψ₁̂' | Ψ₁ ∧ ⋯ ∧ Ψ_r⟩` is expanded by peeling the first
//! bra factor: every ket factor is split into a left part of length `|I^j|`
//! and a right part, the left parts meet `Ψ₁'` and the right parts form the
//! ket of the remaining overlap, which is expanded the same way. For a fixed
//! length plan the split of a factor is collected by its left determinant
//! `L`, whose right partner is `L ↩ Ψ_j`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::density::MixedState;
use crate::error::{Error, Result};
use crate::fock::{split_by_right, Occupation, OrbitalBasis, StateVector};
use crate::ortho;
use crate::Tolerances;

const HERMITIAN_TOL: f64 = 1e-12;

/// Ordered list of factor wave functions standing for their wedge product.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupProduct {
    basis: OrbitalBasis,
    factors: Vec<StateVector>,
}

impl GroupProduct {
    pub fn new(factors: Vec<StateVector>) -> Result<Self> {
        let Some(first) = factors.first() else {
            return Err(Error::InvalidGroup("no factors".into()));
        };
        let basis = first.basis();
        for (i, f) in factors.iter().enumerate() {
            if f.basis() != basis {
                return Err(Error::BasisMismatch {
                    left: basis.dim(),
                    right: f.basis().dim(),
                });
            }
            if f.n() == 0 {
                return Err(Error::InvalidGroup(format!("factor {} has no particles", i + 1)));
            }
        }
        Ok(Self { basis, factors })
    }

    pub fn basis(&self) -> OrbitalBasis {
        self.basis
    }

    pub fn factors(&self) -> &[StateVector] {
        &self.factors
    }

    /// Particle numbers `n₁, …, n_r`.
    pub fn sizes(&self) -> Vec<usize> {
        self.factors.iter().map(StateVector::n).collect()
    }

    /// Total particle number.
    pub fn n(&self) -> usize {
        self.factors.iter().map(StateVector::n).sum()
    }

    pub fn r(&self) -> usize {
        self.factors.len()
    }

    /// The wedge of all factors.
    pub fn wedge_all(&self) -> Result<StateVector> {
        let mut out = StateVector::vacuum(self.basis);
        for f in &self.factors {
            out = out.wedge(f)?;
        }
        Ok(out)
    }

    /// Spectator product `Ψ₂ ∧ ⋯ ∧ Ψ_r`, if there is one.
    pub fn spectators(&self) -> Option<GroupProduct> {
        (self.factors.len() > 1).then(|| Self {
            basis: self.basis,
            factors: self.factors[1..].to_vec(),
        })
    }

    /// Reorders the factors so that new factor `k` is old factor `order[k]`.
    /// Returns the sign `σ` with `old = σ · new` as states.
    pub fn permuted(&self, order: &[usize]) -> Result<(i8, GroupProduct)> {
        let r = self.factors.len();
        let mut seen = vec![false; r];
        if order.len() != r || order.iter().any(|&i| i >= r || core::mem::replace(&mut seen[i], true)) {
            return Err(Error::InvalidGroup(format!("{order:?} is not a permutation of 0..{r}")));
        }
        let mut odd = 0usize;
        for a in 0..r {
            for b in a + 1..r {
                if order[a] > order[b] {
                    odd += self.factors[order[a]].n() * self.factors[order[b]].n();
                }
            }
        }
        let sign = if odd.is_multiple_of(2) { 1 } else { -1 };
        let factors = order.iter().map(|&i| self.factors[i].clone()).collect();
        Ok((sign, Self { basis: self.basis, factors }))
    }

    /// Moves factor `index` to the front, keeping the others in order.
    pub fn with_active(&self, index: usize) -> Result<(i8, GroupProduct)> {
        let mut order: Vec<usize> = vec![index];
        order.extend((0..self.factors.len()).filter(|&i| i != index));
        self.permuted(&order)
    }
}

/// Hermitian q-particle operator `Σ λ_{I,J} a†_{i1}…a†_{iq} a_{jq}…a_{j1}` over
/// ordered index tuples.
#[derive(Debug, Clone, PartialEq)]
pub struct QOperator {
    basis: OrbitalBasis,
    q: usize,
    terms: BTreeMap<(Vec<usize>, Vec<usize>), Complex64>,
}

pub type OperatorTerm = ((Vec<usize>, Vec<usize>), Complex64);

impl QOperator {
    /// Validates tuple lengths, orbital ranges, duplicate keys and
    /// `λ_{I,J} = λ*_{J,I}` within 1e-12.
    pub fn new(basis: OrbitalBasis, q: usize, terms: Vec<OperatorTerm>) -> Result<Self> {
        let op = Self::collect(basis, q, terms)?;
        for ((i, j), lam) in &op.terms {
            let partner = op.terms.get(&(j.clone(), i.clone())).copied().unwrap_or_default();
            if (partner.conj() - lam).norm() > HERMITIAN_TOL {
                return Err(Error::NotHermitian(format!("λ({i:?},{j:?}) = {lam} but λ({j:?},{i:?}) = {partner}")));
            }
        }
        Ok(op)
    }

    /// Adds the missing conjugate partners `λ_{J,I} = λ*_{I,J}`; partners
    /// already present must agree within 1e-12.
    pub fn hermitian_closure(basis: OrbitalBasis, q: usize, terms: Vec<OperatorTerm>) -> Result<Self> {
        let mut op = Self::collect(basis, q, terms)?;
        let missing: Vec<_> = op
            .terms
            .iter()
            .filter(|((i, j), _)| !op.terms.contains_key(&(j.clone(), i.clone())))
            .map(|((i, j), lam)| ((j.clone(), i.clone()), lam.conj()))
            .collect();
        op.terms.extend(missing);
        Self::new(basis, q, op.terms.into_iter().collect())
    }

    fn collect(basis: OrbitalBasis, q: usize, terms: Vec<OperatorTerm>) -> Result<Self> {
        if q == 0 {
            return Err(Error::InvalidOperator("rank must be at least 1".into()));
        }
        let mut map = BTreeMap::new();
        for ((i, j), lam) in terms {
            if i.len() != q || j.len() != q {
                return Err(Error::InvalidOperator(format!("tuples {i:?}, {j:?} do not have length {q}")));
            }
            if let Some(&bad) = i.iter().chain(&j).find(|&&k| k == 0 || k > basis.dim()) {
                return Err(Error::OrbitalOutOfRange { index: bad, dim: basis.dim() });
            }
            if map.insert((i.clone(), j.clone()), lam).is_some() {
                return Err(Error::InvalidOperator(format!("duplicate entry for ({i:?},{j:?})")));
            }
        }
        Ok(Self { basis, q, terms: map })
    }

    /// `N̂ = Σ_i a†_i a_i`.
    pub fn number_operator(basis: OrbitalBasis) -> Self {
        let terms = (1..=basis.dim())
            .map(|i| ((vec![i], vec![i]), Complex64::new(1.0, 0.0)))
            .collect();
        Self { basis, q: 1, terms }
    }

    pub fn basis(&self) -> OrbitalBasis {
        self.basis
    }

    /// Particle rank.
    pub fn q(&self) -> usize {
        self.q
    }

    pub fn terms(&self) -> impl Iterator<Item = (&(Vec<usize>, Vec<usize>), &Complex64)> {
        self.terms.iter()
    }

    /// Second-quantized action on an n-particle state, `n ≥ q`.
    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        if psi.basis() != self.basis {
            return Err(Error::BasisMismatch {
                left: self.basis.dim(),
                right: psi.basis().dim(),
            });
        }
        if self.q > psi.n() {
            return Err(Error::RankOutOfRange { value: self.q, min: 0, max: psi.n() });
        }
        let mut out = StateVector::zero(self.basis, psi.n());
        let mut reduced: BTreeMap<&Vec<usize>, StateVector> = BTreeMap::new();
        for ((i, j), lam) in &self.terms {
            if !reduced.contains_key(j) {
                reduced.insert(j, psi.annihilate_sequence(j)?);
            }
            let rest = &reduced[j];
            if rest.is_zero() {
                continue;
            }
            out.add_scaled(&rest.create_sequence(i)?, *lam)?;
        }
        Ok(out)
    }
}

/// Sign `(-1)^{Σ_{j≥2} Σ_{k<j} |I^j|·(n_k − |I^k|)}` for the pairs
/// `(|I^j|, n_j − |I^j|)`.
pub fn rho_sign(pairs: &[(usize, usize)]) -> i8 {
    let mut exponent = 0usize;
    let mut right_before = 0usize;
    for &(left, right) in pairs {
        exponent += left * right_before;
        right_before += right;
    }
    parity(exponent)
}

/// Sign `(-1)^{Σ_{j<l} Σ_{i>k} n_k^l · n_i^j}` of the block matrix with rows
/// `i = 1..p` and columns `j = 1..q`, `rows[i][j] = n_{i+1}^{j+1}`: the sign of
/// regrouping `q` factors, each cut into `p` consecutive blocks, block-row by
/// block-row.
pub fn rho_twist(rows: &[Vec<usize>]) -> i8 {
    let p = rows.len();
    let q = rows.first().map_or(0, Vec::len);
    assert!(rows.iter().all(|r| r.len() == q), "block matrix must be rectangular");
    let mut exponent = 0usize;
    for j in 0..q {
        for l in j + 1..q {
            for i in 0..p {
                for k in 0..i {
                    exponent += rows[k][l] * rows[i][j];
                }
            }
        }
    }
    parity(exponent)
}

fn parity(exponent: usize) -> i8 {
    if exponent.is_multiple_of(2) {
        1
    } else {
        -1
    }
}

/// Lengths `|I^1|, …, |I^r|` of one family of index sequences over factors
/// of sizes `n_1, …, n_r`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexSequencePlan {
    pub sizes: Vec<usize>,
    pub lengths: Vec<usize>,
}

impl IndexSequencePlan {
    pub fn rho(&self) -> i8 {
        let pairs: Vec<_> = self
            .sizes
            .iter()
            .zip(&self.lengths)
            .map(|(&n, &m)| (m, n - m))
            .collect();
        rho_sign(&pairs)
    }

    /// Number of index-sequence tuples `(I^1, …, I^r)` with these lengths.
    pub fn sequence_count(&self) -> u128 {
        self.sizes
            .iter()
            .zip(&self.lengths)
            .map(|(&n, &m)| num_integer::binomial(n as u128, m as u128))
            .product()
    }
}

/// All plans with `Σ|I^j| = total`, `0 ≤ |I^j| ≤ n_j` and `|I^1| ≥ min_first`,
/// in lexicographic order of the length vector.
pub fn enumerate_plans(sizes: &[usize], total: usize, min_first: usize) -> Vec<IndexSequencePlan> {
    fn go(sizes: &[usize], k: usize, left: usize, suffix_cap: &[usize], min_first: usize, cur: &mut Vec<usize>, out: &mut Vec<IndexSequencePlan>) {
        if k == sizes.len() {
            if left == 0 {
                out.push(IndexSequencePlan {
                    sizes: sizes.to_vec(),
                    lengths: cur.clone(),
                });
            }
            return;
        }
        let lo = if k == 0 { min_first } else { 0 };
        let lo = lo.max(left.saturating_sub(suffix_cap[k + 1]));
        let hi = sizes[k].min(left);
        for m in lo..=hi {
            cur.push(m);
            go(sizes, k + 1, left - m, suffix_cap, min_first, cur, out);
            cur.pop();
        }
    }
    let mut suffix_cap = vec![0; sizes.len() + 1];
    for k in (0..sizes.len()).rev() {
        suffix_cap[k] = suffix_cap[k + 1] + sizes[k];
    }
    let mut out = Vec::new();
    go(sizes, 0, total, &suffix_cap, min_first, &mut Vec::new(), &mut out);
    out
}

/// Number of `I¹`-sequence tuples without and with the q-orthogonality
/// restriction: `(C(n, n₁), Σ_{i=n₁−q+1}^{n₁} C(n₁, i)·C(n−n₁, n₁−i))`.
pub fn term_count(n: usize, n1: usize, q: usize) -> Result<(u128, u128)> {
    if !(1 <= q && q <= n1 && n1 <= n) {
        return Err(Error::RankOutOfRange { value: q, min: 1, max: n1.min(n) });
    }
    let b = |a: usize, k: usize| -> u128 {
        if k > a {
            0
        } else {
            num_integer::binomial(a as u128, k as u128)
        }
    };
    let total = b(n, n1);
    let pruned = (n1 + 1 - q..=n1).map(|i| b(n1, i) * b(n - n1, n1 - i)).sum();
    Ok((total, pruned))
}

/// Counters of one evaluation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TermStats {
    /// Top-level length plans enumerated.
    pub plans: u64,
    /// Top-level index-sequence tuples covered by those plans.
    pub sequences: u128,
    /// Index-sequence tuples of the inner overlaps of a matrix element.
    pub inner_sequences: u128,
}

/// Evaluation settings shared by overlaps and matrix elements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    /// Declared orthogonality grade `q` enabling the restricted sums.
    pub q: Option<usize>,
    /// Check the declared orthogonality before using it.
    pub verify: bool,
    /// Worker threads for the top-level plan sum (ignored without `std`).
    pub threads: usize,
    pub tol: Tolerances,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            q: None,
            verify: false,
            threads: 1,
            tol: Tolerances::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub value: Complex64,
    pub stats: TermStats,
}

fn check_partitions(bra: &GroupProduct, ket: &GroupProduct) -> Result<()> {
    if bra.basis != ket.basis {
        return Err(Error::BasisMismatch {
            left: bra.basis.dim(),
            right: ket.basis.dim(),
        });
    }
    if bra.sizes() != ket.sizes() {
        return Err(Error::PartitionMismatch {
            bra: bra.sizes(),
            ket: ket.sizes(),
        });
    }
    Ok(())
}

/// `⟨bra[0] ∧ ⋯ | ket[0] ∧ ⋯⟩` by recursive coproduct expansion. Ket factors
/// all carry at least one particle; `min_first` bounds `|I^1|` of this level.
fn peel(bra: &[StateVector], ket: &[StateVector], min_first: usize) -> Result<Complex64> {
    let Some((active, rest)) = bra.split_first() else {
        return Ok(Complex64::new(if ket.is_empty() { 1.0 } else { 0.0 }, 0.0));
    };
    let sizes: Vec<usize> = ket.iter().map(StateVector::n).collect();
    let mut acc = Complex64::default();
    for plan in enumerate_plans(&sizes, active.n(), min_first) {
        acc += plan_term(active, rest, ket, &plan)?;
    }
    Ok(acc)
}

/// Contribution of one length plan to the peeled overlap.
fn plan_term(active: &StateVector, rest: &[StateVector], ket: &[StateVector], plan: &IndexSequencePlan) -> Result<Complex64> {
    let basis = active.basis();
    let mut cache: BTreeMap<(usize, Occupation), StateVector> = BTreeMap::new();
    let mut acc = Complex64::default();
    let mut blocks: Vec<Occupation> = Vec::with_capacity(ket.len());
    for (occ, coeff) in active.terms() {
        distribute(occ, &plan.lengths, 0, 1, &mut blocks, &mut |sign, blocks| {
            let mut scalar = coeff.conj() * f64::from(sign);
            let mut residuals = Vec::with_capacity(ket.len());
            for (j, left) in blocks.iter().enumerate() {
                let key = (j, left.clone());
                if !cache.contains_key(&key) {
                    let l = StateVector::from_occupation(basis, left.clone(), Complex64::new(1.0, 0.0))?;
                    cache.insert(key.clone(), l.interior_left(&ket[j])?);
                }
                let res = &cache[&key];
                if res.is_zero() {
                    return Ok(());
                }
                if res.n() == 0 {
                    scalar *= res.scalar_value();
                } else {
                    residuals.push(res.clone());
                }
            }
            acc += scalar * peel(rest, &residuals, 0)?;
            Ok(())
        })?;
    }
    Ok(acc * f64::from(plan.rho()))
}

/// Visits every ordered partition of `occ` into blocks of the given lengths,
/// passing the sign of the permutation sorting their concatenation.
fn distribute<F>(occ: &Occupation, lengths: &[usize], k: usize, sign: i8, blocks: &mut Vec<Occupation>, visit: &mut F) -> Result<()>
where
    F: FnMut(i8, &[Occupation]) -> Result<()>,
{
    if k == lengths.len() {
        return visit(sign, blocks);
    }
    let idx = occ.indices();
    for chosen in itertools::Itertools::combinations(idx.iter().copied(), lengths[k]) {
        let block = Occupation::new(&chosen).expect("combinations are increasing");
        let remaining = occ.difference(&block);
        let s = sign * block.wedge_sign(&remaining);
        blocks.push(block);
        distribute(&remaining, lengths, k + 1, s, blocks, visit)?;
        blocks.pop();
    }
    Ok(())
}

/// Sums `f` over `items`: contiguous chunks per worker, each summed in order,
/// then the chunk sums in worker order.
fn ordered_sum<T, F>(items: &[T], threads: usize, f: F) -> Result<Complex64>
where
    T: Sync,
    F: Fn(&T) -> Result<Complex64> + Sync,
{
    let serial = |chunk: &[T]| -> Result<Complex64> {
        let mut acc = Complex64::default();
        for item in chunk {
            acc += f(item)?;
        }
        Ok(acc)
    };
    #[cfg(feature = "std")]
    if threads > 1 && items.len() > 1 {
        let chunk = items.len().div_ceil(threads);
        let partials: Vec<Result<Complex64>> = std::thread::scope(|scope| {
            let handles: Vec<_> = items
                .chunks(chunk)
                .map(|c| scope.spawn(move || serial(c)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("plan worker panicked"))
                .collect()
        });
        let mut acc = Complex64::default();
        for p in partials {
            acc += p?;
        }
        return Ok(acc);
    }
    #[cfg(not(feature = "std"))]
    let _ = threads;
    serial(items)
}

fn q_bound(q: usize, active_len: usize) -> usize {
    (active_len + 1).saturating_sub(q)
}

/// Checks that `first` is q-orthogonal to `second`; a zero or too small state
/// satisfies any declaration.
fn verify_orthogonality(first: &StateVector, second: &StateVector, q: usize, tol: &Tolerances) -> Result<()> {
    if first.is_zero() || second.is_zero() || q > first.n().min(second.n()) {
        return Ok(());
    }
    let s1 = MixedState::pure_normalized(first)?;
    let s2 = MixedState::pure_normalized(second)?;
    let verdict = ortho::p_verdict(&s1, &s2, q, tol)?;
    if !verdict.orthogonal {
        return Err(Error::ConstraintViolated {
            q,
            p: q,
            max_overlap: verdict.max_overlap,
        });
    }
    Ok(())
}

fn check_q(q: usize, n1: usize) -> Result<()> {
    if q == 0 || q > n1 {
        return Err(Error::RankOutOfRange { value: q, min: 1, max: n1 });
    }
    Ok(())
}

/// Overlap of two group products with equal factor partitions.
pub fn overlap_group(bra: &GroupProduct, ket: &GroupProduct) -> Result<Complex64> {
    Ok(overlap_group_with(bra, ket, &EvalOptions::default())?.value)
}

/// Overlap keeping only index sequences with `|I¹| > n₁ − q`; exact when the
/// active bra factor is q-orthogonal to the ket spectators.
pub fn overlap_group_pruned(bra: &GroupProduct, ket: &GroupProduct, q: usize) -> Result<Complex64> {
    let opts = EvalOptions {
        q: Some(q),
        ..EvalOptions::default()
    };
    Ok(overlap_group_with(bra, ket, &opts)?.value)
}

pub fn overlap_group_with(bra: &GroupProduct, ket: &GroupProduct, opts: &EvalOptions) -> Result<Evaluation> {
    check_partitions(bra, ket)?;
    let n1 = bra.factors[0].n();
    let min_first = match opts.q {
        Some(q) => {
            check_q(q, n1)?;
            if opts.verify {
                if let Some(spect) = ket.spectators() {
                    verify_orthogonality(&bra.factors[0], &spect.wedge_all()?, q, &opts.tol)?;
                }
            }
            q_bound(q, n1)
        }
        None => 0,
    };
    let (active, rest) = bra.factors.split_first().expect("group products are nonempty");
    let plans = enumerate_plans(&ket.sizes(), n1, min_first);
    let stats = TermStats {
        plans: plans.len() as u64,
        sequences: plans.iter().map(IndexSequencePlan::sequence_count).sum(),
        inner_sequences: 0,
    };
    let value = ordered_sum(&plans, opts.threads, |plan| plan_term(active, rest, &ket.factors, plan))?;
    Ok(Evaluation { value, stats })
}

/// One length plan `(|J^1|, …, |J^r|)` of the operator action with the ket
/// factors split accordingly: right determinant `R ↦ Ψ_j ↪ R`.
struct ActionPlan {
    plan: IndexSequencePlan,
    splits: Vec<BTreeMap<Occupation, StateVector>>,
}

fn action_plans(op: &QOperator, ket: &GroupProduct) -> Result<Vec<ActionPlan>> {
    if op.basis != ket.basis {
        return Err(Error::BasisMismatch {
            left: op.basis.dim(),
            right: ket.basis.dim(),
        });
    }
    let n = ket.n();
    if op.q > n {
        return Err(Error::RankOutOfRange { value: op.q, min: 0, max: n });
    }
    enumerate_plans(&ket.sizes(), n - op.q, 0)
        .into_iter()
        .map(|plan| {
            let splits = ket
                .factors
                .iter()
                .zip(&plan.lengths)
                .map(|(f, &l)| split_by_right(f, l))
                .collect::<Result<Vec<_>>>()?;
            Ok(ActionPlan { plan, splits })
        })
        .collect()
}

/// Visits every choice of one right determinant per factor, with the combined
/// determinant `R₁ ∧ ⋯ ∧ R_r` (sign included), skipping Pauli-excluded ones.
fn for_each_right<F>(splits: &[BTreeMap<Occupation, StateVector>], visit: &mut F) -> Result<()>
where
    F: FnMut(&[&StateVector], i8, &Occupation) -> Result<()>,
{
    fn go<'a, F>(splits: &'a [BTreeMap<Occupation, StateVector>], k: usize, sign: i8, joined: Occupation, lefts: &mut Vec<&'a StateVector>, visit: &mut F) -> Result<()>
    where
        F: FnMut(&[&StateVector], i8, &Occupation) -> Result<()>,
    {
        if k == splits.len() {
            return visit(lefts, sign, &joined);
        }
        for (right, left) in &splits[k] {
            let Some((s, next)) = joined.wedge(right) else {
                continue;
            };
            lefts.push(left);
            go(splits, k + 1, sign * s, next, lefts, visit)?;
            lefts.pop();
        }
        Ok(())
    }
    go(splits, 0, 1, Occupation::empty(), &mut Vec::new(), visit)
}

/// Induced action `H[Ψ₁ ∧ ⋯ ∧ Ψ_r] = Σ_J ρ (Ψ₁)_{J¹} ∧ ⋯ ∧ (Ψ_r)_{J^r} ∧
/// ĥ[(Ψ₁)_{J̄¹} ∧ ⋯ ∧ (Ψ_r)_{J̄^r}]` with `Σ|J^j| = n − s`.
pub fn apply_operator(op: &QOperator, ket: &GroupProduct) -> Result<StateVector> {
    let basis = ket.basis;
    let mut out = StateVector::zero(basis, ket.n());
    let mut images: BTreeMap<Occupation, StateVector> = BTreeMap::new();
    for ap in action_plans(op, ket)? {
        let rho = f64::from(ap.plan.rho());
        for_each_right(&ap.splits, &mut |lefts, sign, joined| {
            let image = cached_image(op, basis, joined, &mut images)?;
            if image.is_zero() {
                return Ok(());
            }
            let mut term = StateVector::vacuum(basis);
            for left in lefts {
                term = term.wedge(left)?;
            }
            term = term.wedge(&image)?;
            out.add_scaled(&term, Complex64::new(rho * f64::from(sign), 0.0))
        })?;
    }
    Ok(out)
}

fn cached_image(op: &QOperator, basis: OrbitalBasis, joined: &Occupation, images: &mut BTreeMap<Occupation, StateVector>) -> Result<StateVector> {
    if let Some(img) = images.get(joined) {
        return Ok(img.clone());
    }
    let det = StateVector::from_occupation(basis, joined.clone(), Complex64::new(1.0, 0.0))?;
    let img = op.apply(&det)?;
    images.insert(joined.clone(), img.clone());
    Ok(img)
}

/// `⟨bra|H|ket⟩` through the operator action and the coproduct overlap.
pub fn matelem(bra: &GroupProduct, op: &QOperator, ket: &GroupProduct) -> Result<Complex64> {
    Ok(matelem_with(bra, op, ket, &EvalOptions::default())?.value)
}

/// Matrix element with every inner sum restricted to
/// `|I¹| ∈ {|J¹|−q+1, …, |J¹|}`. The restriction drops only vanishing terms
/// when the active ket factor `Ψ₁` is q-orthogonal to the bra spectators
/// `Ψ₂' ∧ ⋯ ∧ Ψ_r'`; `opts.verify` checks exactly that.
pub fn matelem_pruned(bra: &GroupProduct, op: &QOperator, ket: &GroupProduct, q: usize) -> Result<Complex64> {
    let opts = EvalOptions {
        q: Some(q),
        ..EvalOptions::default()
    };
    Ok(matelem_with(bra, op, ket, &opts)?.value)
}

pub fn matelem_with(bra: &GroupProduct, op: &QOperator, ket: &GroupProduct, opts: &EvalOptions) -> Result<Evaluation> {
    check_partitions(bra, ket)?;
    if let Some(q) = opts.q {
        check_q(q, ket.factors[0].n())?;
        if opts.verify {
            if let Some(spect) = bra.spectators() {
                verify_orthogonality(&ket.factors[0], &spect.wedge_all()?, q, &opts.tol)?;
            }
        }
    }
    let basis = ket.basis;
    let plans = action_plans(op, ket)?;
    let mut stats = TermStats {
        plans: plans.len() as u64,
        sequences: plans.iter().map(|p| p.plan.sequence_count()).sum(),
        inner_sequences: 0,
    };

    // Inner sequence counts are tallied serially; they do not depend on values.
    let mut images: BTreeMap<Occupation, StateVector> = BTreeMap::new();
    for ap in &plans {
        let l1 = ap.plan.lengths[0];
        for_each_right(&ap.splits, &mut |lefts, _, joined| {
            let image = cached_image(op, basis, joined, &mut images)?;
            if image.is_zero() {
                return Ok(());
            }
            let mut sizes: Vec<usize> = lefts.iter().map(|l| l.n()).filter(|&n| n > 0).collect();
            sizes.push(image.n());
            let min_first = match opts.q {
                Some(q) if l1 > 0 => q_bound(q, l1),
                _ => 0,
            };
            stats.inner_sequences += enumerate_plans(&sizes, bra.factors[0].n(), min_first)
                .iter()
                .map(IndexSequencePlan::sequence_count)
                .sum::<u128>();
            Ok(())
        })?;
    }

    let value = ordered_sum(&plans, opts.threads, |ap| {
        let rho = f64::from(ap.plan.rho());
        let l1 = ap.plan.lengths[0];
        let mut acc = Complex64::default();
        let mut local: BTreeMap<Occupation, StateVector> = BTreeMap::new();
        for_each_right(&ap.splits, &mut |lefts, sign, joined| {
            let image = cached_image(op, basis, joined, &mut local)?;
            if image.is_zero() {
                return Ok(());
            }
            let mut scalar = Complex64::new(rho * f64::from(sign), 0.0);
            let mut groups = Vec::with_capacity(lefts.len() + 1);
            for left in lefts {
                if left.n() == 0 {
                    scalar *= left.scalar_value();
                } else {
                    groups.push((*left).clone());
                }
            }
            groups.push(image);
            // the bound only concerns the ket's first group, present iff |J¹| > 0
            let min_first = match opts.q {
                Some(q) if l1 > 0 => q_bound(q, l1),
                _ => 0,
            };
            acc += scalar * peel(&bra.factors, &groups, min_first)?;
            Ok(())
        })?;
        Ok(acc)
    })?;
    Ok(Evaluation { value, stats })
}

impl core::fmt::Display for GroupProduct {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        let parts: Vec<_> = self.factors.iter().map(|s| format!("({s})")).collect();
        write!(f, "{}", parts.join(" ∧ "))
    }
}

impl From<GroupProduct> for Vec<StateVector> {
    fn from(g: GroupProduct) -> Self {
        g.factors
    }
}
