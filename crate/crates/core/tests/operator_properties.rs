//! Structural properties of the semantic operators: unitarity, involution,
//! norm preservation, and the tagged-set counting laws.

use std::sync::Arc;

use proptest::prelude::*;

use reflectron_core::dense::{involution_defect, max_amp_diff, unitarity_defect};
use reflectron_core::operators::{
    make_diffusion, make_m_f, make_q, make_q_conjugated, make_q_prime, make_tag_full,
    make_tag_pair, make_u_f, OperatorHandle,
};
use reflectron_core::perm::{GeneratorKind, PermutationTable};
use reflectron_core::state::random_state;
use reflectron_core::{RegisterLayout, StateVector};

const TOL: f64 = 1e-9;

fn table(kind: GeneratorKind, n: usize, seed: u64) -> Arc<PermutationTable> {
    Arc::new(PermutationTable::generate(kind, n, seed).unwrap())
}

/// Every handle buildable at width n, with whether it claims involution.
fn catalog(f: &Arc<PermutationTable>) -> Vec<(OperatorHandle, bool)> {
    let n = f.width();
    let mut ops = vec![
        (make_u_f(f.clone()), true),
        (make_tag_full(f.clone(), (n * 7 + 1) % (1 << n)).unwrap(), true),
        (make_diffusion(n).unwrap(), true),
        (make_m_f(f.clone()), false),
    ];
    for k in 1..n {
        ops.push((make_tag_pair(f.clone(), k).unwrap(), true));
    }
    for j in 0..n / 2 {
        ops.push((make_q(f.clone(), j).unwrap(), true));
        ops.push((make_q_prime(n, j).unwrap(), true));
        ops.push((make_q_conjugated(f.clone(), j).unwrap(), true));
    }
    ops
}

fn kind_strategy() -> impl Strategy<Value = GeneratorKind> {
    prop_oneof![
        Just(GeneratorKind::Identity),
        Just(GeneratorKind::BitReverse),
        Just(GeneratorKind::AffineGf2),
        Just(GeneratorKind::Random),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn operators_are_unitary_and_mostly_involutions(
        n in 2usize..=3,
        seed in 0u64..1_000,
        kind in kind_strategy(),
    ) {
        let f = table(kind, n, seed);
        for (op, is_involution) in catalog(&f) {
            let u = op.dense().unwrap();
            prop_assert!(
                unitarity_defect(&u) < TOL,
                "{} not unitary (n={n} seed={seed})", op.name()
            );
            if is_involution {
                prop_assert!(
                    involution_defect(&u) < TOL,
                    "{} not an involution (n={n} seed={seed})", op.name()
                );
            }
        }
    }

    #[test]
    fn operators_preserve_the_norm(
        n in 2usize..=3,
        seed in 0u64..1_000,
        state_seed in 0u64..1_000,
        kind in kind_strategy(),
    ) {
        let f = table(kind, n, seed);
        for (op, _) in catalog(&f) {
            let mut st = random_state(op.layout(), state_seed);
            op.apply(&mut st).unwrap();
            prop_assert!(
                (st.norm_sqr() - 1.0).abs() < 1e-12,
                "{} changed the norm", op.name()
            );
        }
    }

    #[test]
    fn pair_tag_marks_exactly_a_quarter(
        n in 2usize..=4,
        seed in 0u64..1_000,
        x_seed in 0u64..1_000,
    ) {
        let f = table(GeneratorKind::Random, n, seed);
        let x = (x_seed as usize) % (1 << n);
        for k in 1..n {
            let op = make_tag_pair(f.clone(), k).unwrap();
            let layout = RegisterLayout::new(&[("y", n)]).unwrap();
            let mut st = StateVector::zeroed(layout);
            st.hadamard_all("y").unwrap();
            let before = st.amplitudes().to_vec();
            op.apply_with_input(&mut st, x).unwrap();
            let flipped = st
                .amplitudes()
                .iter()
                .zip(&before)
                .filter(|(a, b)| (**a + **b).norm() < 1e-12)
                .count();
            prop_assert_eq!(flipped, 1 << (n - 2), "k={}", k);
        }
    }

    #[test]
    fn full_tag_marks_exactly_one_state(
        n in 2usize..=4,
        seed in 0u64..1_000,
        x in 0usize..16,
    ) {
        let x = x % (1 << n);
        let f = table(GeneratorKind::Random, n, seed);
        let op = make_tag_full(f.clone(), x).unwrap();
        let mut st = StateVector::zeroed(op.layout());
        st.hadamard_all("y").unwrap();
        let before = st.amplitudes().to_vec();
        op.apply(&mut st).unwrap();
        let flipped: Vec<usize> = st
            .amplitudes()
            .iter()
            .zip(&before)
            .enumerate()
            .filter(|(_, (a, b))| (**a + **b).norm() < 1e-12)
            .map(|(i, _)| i)
            .collect();
        prop_assert_eq!(flipped, vec![f.preimage(x)]);
    }
}

#[test]
fn involutions_hold_on_random_states_beyond_dense_widths() {
    // n=6 puts the two-register operators at 12 qubits, past the dense
    // guard, so the check runs pointwise on sampled states instead
    let f = table(GeneratorKind::Random, 6, 40);
    let handles = [
        make_u_f(f.clone()),
        make_tag_pair(f.clone(), 3).unwrap(),
        make_q(f.clone(), 1).unwrap(),
        make_q(f.clone(), 2).unwrap(),
        make_q_prime(6, 2).unwrap(),
        make_q_conjugated(f.clone(), 2).unwrap(),
    ];
    for op in handles {
        for seed in 0..100u64 {
            let mut st = random_state(op.layout(), 7_000 + seed);
            let before = st.clone();
            op.apply(&mut st).unwrap();
            op.apply(&mut st).unwrap();
            assert!(
                max_amp_diff(st.amplitudes(), before.amplitudes()) < 1e-12,
                "{} twice is not the identity (seed {seed})",
                op.name()
            );
        }
    }
}

#[test]
fn relabel_composed_with_its_inverse_is_the_identity() {
    let f = table(GeneratorKind::Random, 5, 17);
    let f_inv = Arc::new(f.inverse());
    let forward = make_m_f(f);
    let backward = make_m_f(f_inv);
    for seed in 0..50u64 {
        let mut st = random_state(forward.layout(), 9_000 + seed);
        let before = st.clone();
        forward.apply(&mut st).unwrap();
        backward.apply(&mut st).unwrap();
        assert!(max_amp_diff(st.amplitudes(), before.amplitudes()) < 1e-12);
    }
}
