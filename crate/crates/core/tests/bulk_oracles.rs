//! Bulk invariants against an independent preimage-counting degree and
//! against each other.

use dirac_index::invariants::{closed_form_index, curvature_chern, degree_index, winding_quadrature, InvariantResult};
use dirac_index::symbol::{h_field, DiracBlock, SymbolField};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Degree of k ↦ h/|h| by counting the preimages of a random direction v.
///
/// h(k) = t·v with t > 0 means Ak = t·v' and η|v'|²t² + v_{d+1}t − m = 0;
/// each preimage contributes the sign of det(∂₁h, …, ∂_d h, h), with the
/// derivatives taken by central differences.
fn preimage_degree(field: &SymbolField, seed: u64) -> i64 {
    let d = field.d;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v: Vec<f64> = loop {
        let g: Vec<f64> = (0..=d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 0.1 && n < 1.0 {
            break g.iter().map(|x| x / n).collect();
        }
    };
    let vp = &v[..d];
    let vl = v[d];
    let vp2: f64 = vp.iter().map(|x| x * x).sum();
    let (qa, qb, qc) = (field.eta * vp2, vl, -field.m);
    let roots: Vec<f64> = if qa.abs() < 1e-300 {
        vec![-qc / qb]
    } else {
        let disc = qb * qb - 4.0 * qa * qc;
        if disc < 0.0 {
            vec![]
        } else {
            let s = disc.sqrt();
            vec![(-qb + s) / (2.0 * qa), (-qb - s) / (2.0 * qa)]
        }
    };
    let a = DMatrix::from_row_slice(d, d, &field.a);
    let a_inv = a.try_inverse().expect("invertible cone");
    let mut degree = 0;
    for t in roots.into_iter().filter(|&t| t > 0.0) {
        let k = &a_inv * DVector::from_iterator(d, vp.iter().map(|x| t * x));
        let k: Vec<f64> = k.iter().copied().collect();
        let h = field.value(&k);
        for (x, y) in h.iter().zip(&v) {
            assert!((x - t * y).abs() < 1e-8 * (1.0 + t), "not a preimage");
        }
        let step = 1e-6 * (1.0 + k.iter().map(|x| x.abs()).fold(0.0, f64::max));
        let mut cols = Vec::with_capacity((d + 1) * (d + 1));
        for j in 0..d {
            let mut kp = k.clone();
            let mut km = k.clone();
            kp[j] += step;
            km[j] -= step;
            let (hp, hm) = (field.value(&kp), field.value(&km));
            cols.extend((0..=d).map(|c| (hp[c] - hm[c]) / (2.0 * step)));
        }
        cols.extend_from_slice(&h);
        let det = DMatrix::from_column_slice(d + 1, d + 1, &cols).determinant();
        degree += if det > 0.0 { 1 } else { -1 };
    }
    degree
}

fn cone_strategy(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.5f64..1.5, d * d).prop_filter("invertible", move |a| {
        DMatrix::from_row_slice(d, d, a).determinant().abs() > 0.1
    })
}

fn nonzero(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    prop_oneof![-hi..-lo, lo..hi]
}

fn agree(a: &InvariantResult, b: &InvariantResult) -> bool {
    (a.value - b.value).abs() <= a.est_error + b.est_error
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn preimage_count_matches_closed_form(
        (d, a) in (2usize..=4).prop_flat_map(|d| (Just(d), cone_strategy(d))),
        m in nonzero(0.1, 3.0),
        eta in nonzero(0.05, 1.0),
        seed in any::<u64>(),
    ) {
        let block = DiracBlock::new(d, a, m, eta).unwrap();
        let field = h_field(&block).unwrap();
        let oracle = preimage_degree(&field, seed);
        let closed = closed_form_index(&block).unwrap();
        prop_assert_eq!(oracle as f64, closed.value);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn degree_quadrature_matches_preimage_count(
        a in cone_strategy(2),
        m in nonzero(0.2, 2.0),
        eta in nonzero(0.1, 0.8),
    ) {
        let block = DiracBlock::new(2, a, m, eta).unwrap();
        let field = h_field(&block).unwrap();
        let deg = degree_index(&field, 1e-8).unwrap();
        let oracle = preimage_degree(&field, 11);
        prop_assert!((deg.value - oracle as f64).abs() <= deg.est_error.max(1e-7), "{} vs {oracle}", deg.value);
    }
}

#[test]
fn planar_methods_agree_across_sweep() {
    let cones = [vec![1.0, 0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0, -1.0], vec![1.0, 1.0, 0.0, 1.0]];
    for a in &cones {
        for &m_abs in &[0.5, 1.0, 2.0] {
            for &eta_abs in &[0.1, 0.4] {
                for (sm, se) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                    let block = DiracBlock::new(2, a.clone(), sm * m_abs, se * eta_abs).unwrap();
                    let closed = closed_form_index(&block).unwrap();
                    let curv = curvature_chern(&block, 1e-8).unwrap();
                    let deg = degree_index(&h_field(&block).unwrap(), 1e-8).unwrap();
                    let tag = format!("A={a:?} m={} eta={}", sm * m_abs, se * eta_abs);
                    assert!(agree(&closed, &curv), "{tag}: curvature {} ± {}", curv.value, curv.est_error);
                    assert!(agree(&closed, &deg), "{tag}: degree {} ± {}", deg.value, deg.est_error);
                    assert!(!closed.half_integer && !curv.half_integer);
                }
            }
        }
    }
}

#[test]
fn three_dimensional_winding_equals_degree() {
    let shear = vec![1.0, 0.5, 0.0, 0.0, 1.0, 0.0, 0.2, 0.0, -1.0];
    for (m, eta) in [(1.0, 0.3), (-1.0, 0.3), (1.0, -0.3), (-0.7, -0.5)] {
        let block = DiracBlock::new(3, shear.clone(), m, eta).unwrap();
        let closed = closed_form_index(&block).unwrap();
        let w = winding_quadrature(&block, 1e-6).unwrap();
        let deg = degree_index(&h_field(&block).unwrap(), 1e-6).unwrap();
        assert!(agree(&closed, &w), "m={m} eta={eta}: winding {} ± {}", w.value, w.est_error);
        assert!(agree(&deg, &w), "m={m} eta={eta}: degree {} winding {}", deg.value, w.value);
        let raw = deg.metadata.raw_integral.unwrap();
        assert!((w.value + raw).abs() <= w.est_error + deg.est_error);
        assert_eq!(preimage_degree(&h_field(&block).unwrap(), 5) as f64, closed.value);
    }
}

#[test]
fn index_is_invariant_under_eta_scaling() {
    let block = DiracBlock::new(2, vec![1.0, 0.3, -0.2, 0.9], 0.8, 0.4).unwrap();
    let base = curvature_chern(&block, 1e-8).unwrap();
    for s in [0.1, 0.5, 2.0, 10.0] {
        let scaled = DiracBlock::new(2, block.a.clone(), 0.8, 0.4 * s).unwrap();
        let r = curvature_chern(&scaled, 1e-8).unwrap();
        assert!(agree(&base, &r), "scale {s}: {} vs {}", r.value, base.value);
        assert_eq!(closed_form_index(&scaled).unwrap().value, 1.0);
    }
}

#[test]
fn vanishing_eta_gives_flagged_half_integers() {
    for (a, m, want) in [
        (vec![1.0, 0.0, 0.0, 1.0], 1.0, 0.5),
        (vec![1.0, 0.0, 0.0, 1.0], -1.0, -0.5),
        (vec![1.0, 0.0, 0.0, -1.0], 1.0, -0.5),
    ] {
        let block = DiracBlock::new(2, a, m, 0.0).unwrap();
        let closed = closed_form_index(&block).unwrap();
        assert!(closed.half_integer);
        assert_eq!(closed.value, want);
        let deg = degree_index(&h_field(&block).unwrap(), 1e-6).unwrap();
        assert!(deg.half_integer);
        assert!((deg.value - want).abs() <= deg.est_error.max(1e-6), "degree {}", deg.value);
    }
}

#[test]
fn zero_mass_is_rejected() {
    let block = DiracBlock::new(2, vec![1.0, 0.0, 0.0, 1.0], 0.0, 0.5).unwrap();
    assert!(closed_form_index(&block).is_err());
    assert!(curvature_chern(&block, 1e-8).is_err());
}
