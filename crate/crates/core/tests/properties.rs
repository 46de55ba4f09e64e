mod common;

use common::*;
use fermigrade_core::density::Subspace;
use fermigrade_core::groupfn::{self, EvalOptions};
use fermigrade_core::ortho;
use fermigrade_core::{
    external_space, interior_right, internal_space, oracle, rdm, split, Complex64, MixedState, OrbitalBasis, StateVector,
    QOperator, Tolerances,
};
use proptest::prelude::*;
use rand::Rng;

fn cfg(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, failure_persistence: None, ..ProptestConfig::default() }
}

fn basis(dim: usize) -> OrbitalBasis {
    OrbitalBasis::new(dim).unwrap()
}

/// `(dim, n, m)` with `m <= n <= dim`.
fn ranks(max_dim: usize) -> impl Strategy<Value = (usize, usize, usize)> {
    (2..=max_dim).prop_flat_map(|d| (Just(d), 1..=d)).prop_flat_map(|(d, n)| (Just(d), Just(n), 0..=n))
}

fn unnormalized(rng: &mut rand::rngs::StdRng, b: OrbitalBasis, n: usize, terms: usize) -> StateVector {
    random_state(rng, b, n, terms).scale(random_complex(rng))
}

proptest! {
    #![proptest_config(cfg(96))]

    #[test]
    fn left_interior_is_adjoint_of_left_wedge(seed in any::<u64>(), (dim, n, m) in ranks(7)) {
        let mut r = rng(seed);
        let b = basis(dim);
        let psi = unnormalized(&mut r, b, n, 5);
        let omega = unnormalized(&mut r, b, m, 3);
        let phi = unnormalized(&mut r, b, n - m, 4);
        let lhs = omega.wedge(&phi).unwrap().inner(&psi).unwrap();
        let rhs = phi.inner(&omega.interior_left(&psi).unwrap()).unwrap();
        prop_assert!((lhs - rhs).norm() < 1e-12, "{lhs} vs {rhs}");
    }

    #[test]
    fn right_interior_is_adjoint_of_right_wedge(seed in any::<u64>(), (dim, n, m) in ranks(7)) {
        let mut r = rng(seed);
        let b = basis(dim);
        let psi = unnormalized(&mut r, b, n, 5);
        let omega = unnormalized(&mut r, b, m, 3);
        let phi = unnormalized(&mut r, b, n - m, 4);
        let lhs = phi.wedge(&omega).unwrap().inner(&psi).unwrap();
        let rhs = phi.inner(&interior_right(&psi, &omega).unwrap()).unwrap();
        prop_assert!((lhs - rhs).norm() < 1e-12, "{lhs} vs {rhs}");
    }

    #[test]
    fn wedge_is_graded_commutative(seed in any::<u64>(), dim in 2usize..=8, p in 0usize..=4, q in 0usize..=4) {
        prop_assume!(p + q <= dim);
        let mut r = rng(seed);
        let b = basis(dim);
        let a = unnormalized(&mut r, b, p, 4);
        let c = unnormalized(&mut r, b, q, 4);
        let sign = if (p * q) % 2 == 0 { 1.0 } else { -1.0 };
        let mut diff = a.wedge(&c).unwrap();
        diff.add_scaled(&c.wedge(&a).unwrap(), Complex64::new(-sign, 0.0)).unwrap();
        prop_assert!(diff.norm() < 1e-12);
    }

    #[test]
    fn wedge_is_associative(seed in any::<u64>(), dim in 3usize..=8) {
        let mut r = rng(seed);
        let b = basis(dim);
        let sizes: Vec<usize> = (0..3).map(|_| r.random_range(0..=dim / 3)).collect();
        let [x, y, z] = [0, 1, 2].map(|k| unnormalized(&mut r, b, sizes[k], 3));
        let mut diff = x.wedge(&y).unwrap().wedge(&z).unwrap();
        diff.add_scaled(&x.wedge(&y.wedge(&z).unwrap()).unwrap(), Complex64::new(-1.0, 0.0)).unwrap();
        prop_assert!(diff.norm() < 1e-12);
    }

    #[test]
    fn split_rewedges_to_the_original(seed in any::<u64>(), (dim, n, m) in ranks(8)) {
        let mut r = rng(seed);
        let b = basis(dim);
        let phi = unnormalized(&mut r, b, n, 5);
        let mut acc = StateVector::zero(b, n);
        for t in split(&phi, m).unwrap() {
            let left = StateVector::from_occupation(b, t.left.clone(), Complex64::new(1.0, 0.0)).unwrap();
            let right = StateVector::from_occupation(b, t.right.clone(), Complex64::new(1.0, 0.0)).unwrap();
            acc.add_scaled(&left.wedge(&right).unwrap(), t.weight()).unwrap();
        }
        let expected = Complex64::new(num_integer::binomial(n, m) as f64, 0.0);
        let mut diff = phi.scale(expected);
        diff.add_scaled(&acc, Complex64::new(-1.0, 0.0)).unwrap();
        prop_assert!(diff.norm() < 1e-12 * expected.re.max(1.0));
    }

    #[test]
    fn nested_interior_products_compose(seed in any::<u64>(), dim in 3usize..=8) {
        // φ ↩ (Ω ↩ Ψ) = (Ω ∧ φ) ↩ Ψ
        let mut r = rng(seed);
        let b = basis(dim);
        let n = r.random_range(2..=dim);
        let m = r.random_range(0..n);
        let k = r.random_range(0..=n - m);
        let psi = unnormalized(&mut r, b, n, 5);
        let omega = unnormalized(&mut r, b, m, 3);
        let phi = unnormalized(&mut r, b, k, 3);
        let lhs = phi.interior_left(&omega.interior_left(&psi).unwrap()).unwrap();
        let rhs = omega.wedge(&phi).unwrap().interior_left(&psi).unwrap();
        let mut diff = lhs;
        diff.add_scaled(&rhs, Complex64::new(-1.0, 0.0)).unwrap();
        prop_assert!(diff.norm() < 1e-12);
    }

    #[test]
    fn annihilation_is_an_antiderivation(seed in any::<u64>(), dim in 2usize..=8) {
        // a_j (Ω ∧ Φ) = (a_j Ω) ∧ Φ + (−1)^{|Ω|} Ω ∧ (a_j Φ)
        let mut r = rng(seed);
        let b = basis(dim);
        let m = r.random_range(1..=dim / 2);
        let k = r.random_range(1..=dim - m);
        let omega = unnormalized(&mut r, b, m, 3);
        let phi = unnormalized(&mut r, b, k, 3);
        let j = r.random_range(1..=dim);
        let lhs = omega.wedge(&phi).unwrap().annihilate(j);
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        let mut rhs = omega.annihilate(j).wedge(&phi).unwrap();
        rhs.add_scaled(&omega.wedge(&phi.annihilate(j)).unwrap(), Complex64::new(sign, 0.0)).unwrap();
        let mut diff = lhs;
        diff.add_scaled(&rhs, Complex64::new(-1.0, 0.0)).unwrap();
        prop_assert!(diff.norm() < 1e-12);
    }

    #[test]
    fn annihilation_string_is_interior_by_ordered_wedge(seed in any::<u64>(), dim in 2usize..=8) {
        let mut r = rng(seed);
        let b = basis(dim);
        let n = r.random_range(1..=dim);
        let k = r.random_range(1..=n);
        let psi = unnormalized(&mut r, b, n, 5);
        let mut tuple = random_subset(&mut r, &(1..=dim).collect::<Vec<_>>(), k);
        rand::seq::SliceRandom::shuffle(tuple.as_mut_slice(), &mut r);
        let mut det = StateVector::vacuum(b);
        for &j in &tuple {
            det = det.wedge(&StateVector::orbital(b, j).unwrap()).unwrap();
        }
        let mut diff = psi.annihilate_sequence(&tuple).unwrap();
        diff.add_scaled(&det.interior_left(&psi).unwrap(), Complex64::new(-1.0, 0.0)).unwrap();
        prop_assert!(diff.norm() < 1e-12);
        // creation is the adjoint of annihilation along the same tuple
        let theta = unnormalized(&mut r, b, n - k, 4);
        let lhs = theta.create_sequence(&tuple).unwrap().inner(&psi).unwrap();
        let rhs = theta.inner(&psi.annihilate_sequence(&tuple).unwrap()).unwrap();
        prop_assert!((lhs - rhs).norm() < 1e-12);
    }
}

/// Inversion count of the permutation taking factor-major order to
/// block-row-major order, computed by listing the labels.
fn twist_by_inversions(rows: &[Vec<usize>]) -> i8 {
    let q = rows.first().map_or(0, Vec::len);
    let mut original = Vec::new();
    for j in 0..q {
        for (i, row) in rows.iter().enumerate() {
            for k in 0..row[j] {
                original.push((i, j, k));
            }
        }
    }
    let mut target = original.clone();
    target.sort();
    let pos: Vec<usize> = target.iter().map(|t| original.iter().position(|o| o == t).unwrap()).collect();
    let mut inv = 0usize;
    for a in 0..pos.len() {
        for b in a + 1..pos.len() {
            if pos[a] > pos[b] {
                inv += 1;
            }
        }
    }
    if inv.is_multiple_of(2) { 1 } else { -1 }
}

proptest! {
    #![proptest_config(cfg(256))]

    #[test]
    fn twist_sign_matches_inversion_count(rows in (1usize..=3, 1usize..=4).prop_flat_map(|(p, q)| {
        proptest::collection::vec(proptest::collection::vec(0usize..=3, q), p)
    })) {
        prop_assert_eq!(groupfn::rho_twist(&rows), twist_by_inversions(&rows));
    }

    #[test]
    fn plan_counts_add_up(n in 2usize..=9, split_at in 1usize..=8, q in 1usize..=4) {
        prop_assume!(split_at < n && q <= split_at);
        let sizes = [split_at, n - split_at];
        let (total, pruned) = groupfn::term_count(n, split_at, q).unwrap();
        prop_assert_eq!(total, num_integer::binomial(n as u128, split_at as u128));
        prop_assert!(pruned <= total);
        let plans = groupfn::enumerate_plans(&sizes, split_at, 0);
        let covered: u128 = plans.iter().map(|p| p.sequence_count()).sum();
        prop_assert_eq!(covered, total);
        let min_first = (split_at + 1).saturating_sub(q);
        let restricted: u128 = groupfn::enumerate_plans(&sizes, split_at, min_first).iter().map(|p| p.sequence_count()).sum();
        prop_assert_eq!(restricted, pruned);
    }
}

fn state_strategy() -> impl Strategy<Value = (u64, usize, usize, usize)> {
    // seed, dim, n, components
    (any::<u64>(), 3usize..=7)
        .prop_flat_map(|(s, d)| (Just(s), Just(d), 1..d, 1usize..=3))
}

proptest! {
    #![proptest_config(cfg(48))]

    #[test]
    fn rdm_matches_dense_oracle((seed, dim, n, comps) in state_strategy(), p_raw in 0usize..8) {
        let mut r = rng(seed);
        let b = basis(dim);
        let all: Vec<usize> = (1..=dim).collect();
        let state = random_mixed_on(&mut r, b, &all, n, comps, 4);
        let p = p_raw % (n + 1);
        let d = rdm(&state, p).unwrap();
        let (occ, dense) = d.to_dense();
        let (occ_ref, reference) = oracle::rdm_direct(&state, p).unwrap();
        prop_assert_eq!(occ, occ_ref);
        prop_assert!((&dense - &reference).camax() < 1e-12);
        prop_assert!(d.hermiticity_residual() < 1e-13);
        let expected = num_integer::binomial(n, p) as f64;
        prop_assert!((d.trace() - Complex64::new(expected, 0.0)).norm() < 1e-10 * expected);
        let (vals, _) = d.eigen();
        prop_assert!(vals.iter().all(|&v| v > -1e-10));
    }

    #[test]
    fn internal_space_matches_annihilation_span((seed, dim, n, comps) in state_strategy(), p_raw in 0usize..8) {
        let mut r = rng(seed);
        let b = basis(dim);
        let all: Vec<usize> = (1..=dim).collect();
        let state = random_mixed_on(&mut r, b, &all, n, comps, 3);
        let p = 1 + p_raw % n;
        let tol = Tolerances::default();
        let fast = internal_space(&state, p, &tol).unwrap();
        let slow = oracle::internal_space_direct(&state, p).unwrap();
        prop_assert_eq!(fast.dim(), slow.dim());
        prop_assert!(fast.projector_distance(&slow).unwrap() < 1e-8);
        prop_assert!(fast.gram_residual() < 1e-12);
        let ext = external_space(&state, p, &tol).unwrap();
        prop_assert_eq!(fast.dim() + ext.dim(), b.sector_size(p) as usize);
        prop_assert!(ortho::max_cross_overlap(&fast, &ext).unwrap() < 1e-10);
    }

    #[test]
    fn mixture_internal_space_is_sum_of_components((seed, dim, n, comps) in state_strategy(), p_raw in 0usize..8) {
        let mut r = rng(seed);
        let b = basis(dim);
        let all: Vec<usize> = (1..=dim).collect();
        let state = random_mixed_on(&mut r, b, &all, n, comps.max(2), 3);
        let p = 1 + p_raw % n;
        let tol = Tolerances::default();
        let whole = internal_space(&state, p, &tol).unwrap();
        let mut acc: Option<Subspace> = None;
        for (_, psi) in state.components() {
            let part = internal_space(&MixedState::pure(psi.clone()).unwrap(), p, &tol).unwrap();
            prop_assert!(whole.containment_residual(&part).unwrap() < 1e-8);
            acc = Some(match acc {
                None => part,
                Some(s) => s.sum(&part, 1e-8).unwrap(),
            });
        }
        prop_assert!(whole.projector_distance(&acc.unwrap()).unwrap() < 1e-8);
    }

    #[test]
    fn orthogonality_verdicts_are_symmetric_and_monotone(seed in any::<u64>(), dim in 4usize..=7) {
        let mut r = rng(seed);
        let b = basis(dim);
        let n1 = r.random_range(1..dim);
        let n2 = r.random_range(1..dim);
        let all: Vec<usize> = (1..=dim).collect();
        let k1 = r.random_range(n1..=dim);
        let o1 = random_subset(&mut r, &all, k1);
        let k2 = r.random_range(n2..=dim);
        let o2 = random_subset(&mut r, &all, k2);
        let s1 = random_mixed_on(&mut r, b, &o1, n1, 1, 2);
        let s2 = random_mixed_on(&mut r, b, &o2, n2, 2, 2);
        let tol = Tolerances::default();
        let report = ortho::grade(&s1, &s2, &tol).unwrap();
        prop_assert!(report.is_monotone());
        let flipped = ortho::grade(&s2, &s1, &tol).unwrap();
        prop_assert_eq!(report.grade, flipped.grade);
        prop_assert_eq!(ortho::grade_bisect(&s1, &s2, &tol).unwrap(), report.grade);
        if report.grade == Some(1) {
            prop_assert!(ortho::is_strongly_orthogonal(&s1, &s2, &tol).unwrap());
        }
    }

    #[test]
    fn araki_operators_satisfy_the_trig_identity(seed in any::<u64>(), dim in 4usize..=6) {
        let mut r = rng(seed);
        let b = basis(dim);
        let n1 = r.random_range(2..dim);
        let n2 = r.random_range(2..dim);
        let s1 = random_mixed_on(&mut r, b, &(1..=dim).collect::<Vec<_>>(), n1, 1, 2);
        let s2 = random_mixed_on(&mut r, b, &(1..=dim).collect::<Vec<_>>(), n2, 1, 2);
        let p = r.random_range(1..=n1.min(n2));
        let tol = Tolerances::default();
        let i1 = internal_space(&s1, p, &tol).unwrap();
        let i2 = internal_space(&s2, p, &tol).unwrap();
        let op = ortho::ArakiOperator::new(&i1, &i2, &tol).unwrap();
        prop_assert!(op.identity_residual() < 1e-10);
        let faithful = op.spectrum(p);
        prop_assert!(faithful.flattened().iter().all(|t| (-1e-12..=core::f64::consts::FRAC_PI_2 + 1e-12).contains(t)));
        prop_assert_eq!(faithful.total_multiplicity(), op.dim_e());
        let blocks = op.decomposition();
        for (a, x) in blocks.iter().enumerate() {
            for y in &blocks[a + 1..] {
                prop_assert!(ortho::max_cross_overlap(&x.v, &y.v).unwrap() < 1e-8);
            }
        }
    }
}

proptest! {
    #![proptest_config(cfg(40))]

    #[test]
    fn group_overlap_matches_expansion(seed in any::<u64>(), dim in 4usize..=8, r_groups in 2usize..=3) {
        let mut r = rng(seed);
        let b = basis(dim);
        let total = r.random_range(r_groups..=dim.min(6));
        let mut sizes = vec![1; r_groups];
        for _ in r_groups..total {
            let k = r.random_range(0..r_groups);
            sizes[k] += 1;
        }
        let bra = random_group(&mut r, b, &sizes, 3);
        let ket = random_group(&mut r, b, &sizes, 3);
        let fast = groupfn::overlap_group(&bra, &ket).unwrap();
        let slow = oracle::overlap_direct(&bra, &ket).unwrap();
        prop_assert!(close(fast, slow, 1e-12), "{fast} vs {slow}");
    }

    #[test]
    fn operator_action_and_matrix_elements_match_expansion(seed in any::<u64>(), dim in 4usize..=7, q in 1usize..=2) {
        let mut r = rng(seed);
        let b = basis(dim);
        let sizes = [r.random_range(1..=2), r.random_range(1..=2)];
        let bra = random_group(&mut r, b, &sizes, 3);
        let ket = random_group(&mut r, b, &sizes, 3);
        let op = random_operator(&mut r, b, q, 4);
        let image = groupfn::apply_operator(&op, &ket).unwrap();
        let mut diff = op.apply(&oracle::expand(&ket).unwrap()).unwrap();
        diff.add_scaled(&image, Complex64::new(-1.0, 0.0)).unwrap();
        prop_assert!(diff.norm() < 1e-12);
        let fast = groupfn::matelem(&bra, &op, &ket).unwrap();
        let slow = oracle::matelem_direct(&bra, &op, &ket).unwrap();
        prop_assert!(close(fast, slow, 1e-12), "{fast} vs {slow}");
        let swapped = groupfn::matelem(&ket, &op, &bra).unwrap();
        prop_assert!(close(swapped.conj(), fast, 1e-12));
    }

    #[test]
    fn number_operator_counts_particles(seed in any::<u64>(), dim in 4usize..=7) {
        let mut r = rng(seed);
        let b = basis(dim);
        let sizes = [r.random_range(1..=2), r.random_range(1..=2)];
        let bra = random_group(&mut r, b, &sizes, 3);
        let ket = random_group(&mut r, b, &sizes, 3);
        let n = (sizes[0] + sizes[1]) as f64;
        let value = groupfn::matelem(&bra, &QOperator::number_operator(b), &ket).unwrap();
        let overlap = groupfn::overlap_group(&bra, &ket).unwrap();
        prop_assert!(close(value, overlap * n, 1e-12));
    }

    #[test]
    fn thread_count_changes_only_rounding(seed in any::<u64>(), threads in 2usize..=5) {
        let mut r = rng(seed);
        let b = basis(8);
        let sizes = [3, 2, 1];
        let bra = random_group(&mut r, b, &sizes, 3);
        let ket = random_group(&mut r, b, &sizes, 3);
        let op = random_operator(&mut r, b, 2, 5);
        let serial = EvalOptions::default();
        let parallel = EvalOptions { threads, ..serial };
        // bitwise repeatable for a fixed worker count, tolerance-stable across counts
        let a = groupfn::overlap_group_with(&bra, &ket, &serial).unwrap();
        let c = groupfn::overlap_group_with(&bra, &ket, &parallel).unwrap();
        prop_assert_eq!(c, groupfn::overlap_group_with(&bra, &ket, &parallel).unwrap());
        prop_assert_eq!(a.stats, c.stats);
        prop_assert!(close(a.value, c.value, 1e-13));
        let a = groupfn::matelem_with(&bra, &op, &ket, &serial).unwrap();
        let c = groupfn::matelem_with(&bra, &op, &ket, &parallel).unwrap();
        prop_assert_eq!(c, groupfn::matelem_with(&bra, &op, &ket, &parallel).unwrap());
        prop_assert_eq!(a.stats, c.stats);
        prop_assert!(close(a.value, c.value, 1e-13));
    }

    #[test]
    fn permuting_factors_preserves_the_overlap(seed in any::<u64>()) {
        let mut r = rng(seed);
        let b = basis(7);
        let sizes = [2, 1, 2];
        let bra = random_group(&mut r, b, &sizes, 3);
        let ket = random_group(&mut r, b, &sizes, 3);
        let mut order = vec![0, 1, 2];
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut r);
        let (sb, pb) = bra.permuted(&order).unwrap();
        let (sk, pk) = ket.permuted(&order).unwrap();
        let before = groupfn::overlap_group(&bra, &ket).unwrap();
        let after = groupfn::overlap_group(&pb, &pk).unwrap() * f64::from(sb * sk);
        prop_assert!(close(after, before, 1e-12));
    }
}
