use dirac_index::clifford::{build_gamma, build_interface_gamma, two_i_pow, verify_relations};
use dirac_index::linalg::{anticommutator, identity, max_abs, permutation_sign};
use proptest::prelude::*;

fn shuffled(n: usize, keys: &[u32]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by_key(|&i| (keys[i], i));
    idx
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn even_trace_of_product_is_signed(dh in 1usize..=3, keys in prop::collection::vec(any::<u32>(), 7)) {
        let d = 2 * dh;
        let rep = build_gamma(d).unwrap();
        let order = shuffled(d + 1, &keys);
        let sign = permutation_sign(&order) as f64;
        let got = rep.trace_of_product(&order);
        let want = two_i_pow(d / 2) * sign;
        prop_assert!((got - want).norm() < 1e-9, "d={d} order={order:?} got={got} want={want}");
    }

    #[test]
    fn odd_chiral_trace_is_signed(dh in 0usize..=2, keys in prop::collection::vec(any::<u32>(), 6)) {
        let d = 2 * dh + 1;
        let rep = build_gamma(d).unwrap();
        let order = shuffled(d + 1, &keys);
        let sign = permutation_sign(&order) as f64;
        let got = rep.chiral_trace_of_product(&order).unwrap();
        let want = two_i_pow(d.div_ceil(2)) * sign;
        prop_assert!((got - want).norm() < 1e-9, "d={d} order={order:?} got={got} want={want}");
    }

    #[test]
    fn contraction_squares_to_norm(d in 1usize..=6, v in prop::collection::vec(-3.0f64..3.0, 7)) {
        let rep = build_gamma(d).unwrap();
        let v = &v[..rep.gammas.len()];
        let m = rep.contract(v);
        let n2: f64 = v.iter().map(|x| x * x).sum();
        let defect = max_abs(&(&m * &m - identity(rep.size()) * dirac_index::linalg::c(n2, 0.0)));
        prop_assert!(defect < 1e-10 * (1.0 + n2));
    }
}

#[test]
fn representations_satisfy_relations() {
    for d in 1..=8 {
        let rep = build_gamma(d).unwrap();
        assert!(verify_relations(&rep).is_clean(), "bulk d={d}");
        assert_eq!(rep.size(), 1 << d.div_ceil(2));
        if d >= 2 {
            let irep = build_interface_gamma(d).unwrap();
            assert!(verify_relations(&irep).is_clean(), "interface d={d}");
        }
    }
}

#[test]
fn odd_chiral_matrix_anticommutes_with_all_generators() {
    for d in [1, 3, 5, 7] {
        let rep = build_gamma(d).unwrap();
        let g0 = rep.chiral.as_ref().expect("odd d has a chiral matrix");
        assert!(max_abs(&(g0 * g0 - identity(rep.size()))) < 1e-12);
        for g in &rep.gammas {
            assert!(max_abs(&anticommutator(g0, g)) < 1e-12);
        }
    }
    for d in [2, 4, 6] {
        assert!(build_gamma(d).unwrap().chiral.is_none());
    }
}

#[test]
fn zero_dimension_is_rejected() {
    assert!(build_gamma(0).is_err());
}
