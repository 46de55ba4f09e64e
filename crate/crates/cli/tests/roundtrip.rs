use fermigrade::input::{format_complex, parse_complex, NamedGroup, NamedMixture, NamedState, StateFile};
use fermigrade_core::Complex64;
use proptest::prelude::*;

fn any_finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO,
        -1.0f64..1.0,
    ]
}

fn state_file() -> impl Strategy<Value = StateFile> {
    (1usize..=10)
        .prop_flat_map(|dim| {
            let state = (0usize..=dim).prop_flat_map(move |n| {
                proptest::collection::btree_set(proptest::sample::subsequence((1..=dim).collect::<Vec<_>>(), n), 1..=4)
                    .prop_flat_map(move |occs| {
                        let k = occs.len();
                        (Just(occs), proptest::collection::vec((any_finite(), any_finite()), k))
                    })
                    .prop_map(move |(occs, coeffs)| {
                        let terms = coeffs.into_iter().map(|(re, im)| Complex64::new(re, im)).zip(occs).collect();
                        (n, terms)
                    })
            });
            (Just(dim), proptest::collection::vec(state, 1..=4))
        })
        .prop_map(|(dim, raw)| {
            let mut states: Vec<NamedState> = raw
                .into_iter()
                .enumerate()
                .map(|(k, (n, terms))| NamedState { name: format!("s{k}"), n, terms })
                .collect();
            // mixtures need a state with nonzero norm
            states.push(NamedState { name: "anchor".into(), n: 1, terms: vec![(Complex64::new(1.0, 0.0), vec![dim])] });
            let groups = states
                .iter()
                .filter(|s| s.n > 0)
                .map(|s| NamedGroup { name: format!("g_{}", s.name), factors: vec![s.name.clone(), s.name.clone()] })
                .collect();
            let mixtures = vec![NamedMixture {
                name: "m".into(),
                components: vec![(0.25, "anchor".into()), (0.75, "anchor".into())],
            }];
            StateFile { dim, states, mixtures, groups }
        })
}

proptest! {
    #[test]
    fn complex_text_round_trips_bit_exactly(re in any_finite(), im in any_finite()) {
        let z = Complex64::new(re, im);
        let back = parse_complex(&format_complex(z)).unwrap();
        prop_assert_eq!(back.re.to_bits(), re.to_bits());
        prop_assert_eq!(back.im.to_bits(), im.to_bits());
    }

    #[test]
    fn written_state_files_parse_back_identically(file in state_file()) {
        let text = file.write();
        let back = StateFile::parse(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        for (a, b) in file.states.iter().zip(&back.states) {
            for ((x, _), (y, _)) in a.terms.iter().zip(&b.terms) {
                prop_assert_eq!((x.re.to_bits(), x.im.to_bits()), (y.re.to_bits(), y.im.to_bits()));
            }
        }
        prop_assert_eq!(back, file);
    }
}
