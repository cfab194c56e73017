use dirac_index::calculus::{
    hs_apply, hs_strip, operator_norm, perturbation_response, unitary_of, Bump, Constant, HsQuadrature, SmoothFn,
    SmoothSwitch,
};
use dirac_index::linalg::{frobenius, hermitian_apply, hermitian_eigh, identity, random_hermitian, CMat, C64};
use proptest::prelude::*;
use std::f64::consts::PI;

fn exact(h: &CMat, f: &dyn SmoothFn) -> CMat {
    hermitian_apply(h, |e| C64::new(f.value(e), 0.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn error_estimate_bounds_the_true_error(seed in any::<u64>(), dim in 2usize..8, delta in 0.2f64..0.8) {
        let h = random_hermitian(dim, seed);
        let chi = SmoothSwitch::new(delta).unwrap();
        let r = hs_apply(&h, &chi, 3, &HsQuadrature::adaptive(1e-7)).unwrap();
        let e = frobenius(&(&r.matrix - exact(&h, &chi)));
        prop_assert!(e < 1e-6, "error {e:.2e}");
        prop_assert!(e <= r.est_error.max(1e-12), "error {e:.2e} above estimate {:.2e}", r.est_error);
    }

    #[test]
    fn tolerance_ladder_is_monotone(seed in any::<u64>()) {
        let h = random_hermitian(6, seed);
        let chi = SmoothSwitch::new(0.5).unwrap();
        let reference = exact(&h, &chi);
        let mut prev = f64::INFINITY;
        for tol in [1e-3, 1e-4, 1e-5, 1e-6] {
            let e = frobenius(&(hs_apply(&h, &chi, 3, &HsQuadrature::adaptive(tol)).unwrap().matrix - &reference));
            prop_assert!(e <= prev * 1.05 + 1e-13, "error rose to {e:.2e} at tol {tol}");
            prev = e;
        }
    }
}

#[test]
fn higher_order_extension_is_no_worse_on_a_fixed_rule() {
    let chi = SmoothSwitch::new(0.5).unwrap();
    // Fine enough that the rule resolves the larger n = 3 integrand.
    let quad = HsQuadrature::tensor(256, 24);
    for seed in 0..4 {
        let h = random_hermitian(6, 100 + seed);
        let reference = exact(&h, &chi);
        let e1 = frobenius(&(hs_apply(&h, &chi, 1, &quad).unwrap().matrix - &reference));
        let e3 = frobenius(&(hs_apply(&h, &chi, 3, &quad).unwrap().matrix - &reference));
        assert!(e3 <= e1, "seed {seed}: n=3 error {e3:.2e} above n=1 error {e1:.2e}");
    }
}

#[test]
fn strip_density_scales_with_the_extension_order() {
    // The spectrum sits where χ″ ≠ 0, otherwise the leading term vanishes.
    let (_, v) = hermitian_eigh(&random_hermitian(4, 7));
    let spectrum = [-0.3, -0.1, 0.15, 0.35].map(|e| C64::new(e, 0.0));
    let h = &v * CMat::from_diagonal(&nalgebra::DVector::from_row_slice(&spectrum)) * v.adjoint();
    let h = (&h + h.adjoint()) * C64::new(0.5, 0.0);
    let chi = SmoothSwitch::new(0.5).unwrap();
    for n in [1usize, 2, 3] {
        let density = |eps: f64| {
            let m = hs_strip(&h, &chi, n, 0.5 * eps, eps, 2, 6, 1e-12).unwrap();
            operator_norm(&m) / (0.5 * eps)
        };
        let exponent = (density(1e-2) / density(1e-3)).log10();
        assert!((exponent - n as f64).abs() < 0.5, "n={n}: measured exponent {exponent:.2}");
    }
}

#[test]
fn bumps_and_constants() {
    let h = random_hermitian(5, 3);
    let bump = Bump { center: 0.1, radius: 0.6 };
    let r = hs_apply(&h, &bump, 3, &HsQuadrature::adaptive(1e-9)).unwrap();
    assert!(frobenius(&(&r.matrix - exact(&h, &bump))) < 1e-7);
    let one = hs_apply(&h, &Constant(2.0), 3, &HsQuadrature::adaptive(1e-9)).unwrap();
    assert!(frobenius(&(&one.matrix - identity(5) * C64::new(2.0, 0.0))) < 1e-7);
}

#[test]
fn response_matches_difference_of_functions() {
    let chi = SmoothSwitch::new(0.5).unwrap();
    for seed in 0..3 {
        let h = random_hermitian(6, seed);
        let v = random_hermitian(6, 50 + seed) * C64::new(0.1, 0.0);
        let r = perturbation_response(&h, &v, &chi, 3, &HsQuadrature::adaptive(1e-9)).unwrap();
        let want = exact(&(&h + &v), &chi) - exact(&h, &chi);
        assert!(frobenius(&(&r.matrix - &want)) < 1e-6, "seed {seed}");
        assert!((r.constant - operator_norm(&want) / operator_norm(&v)).abs() < 1e-5);
    }
}

#[test]
fn unitary_maps_the_spectrum() {
    let chi = SmoothSwitch::new(0.4).unwrap();
    for seed in 0..5 {
        let h = random_hermitian(8, 200 + seed);
        let u = unitary_of(&h, &chi).unwrap();
        assert!(frobenius(&(u.adjoint() * &u - identity(8))) < 1e-12);
        let (vals, vecs) = hermitian_eigh(&h);
        for (k, &lam) in vals.iter().enumerate() {
            let v = vecs.column(k).into_owned();
            let phase = (2.0 * PI * C64::new(0.0, 1.0) * chi.value(lam)).exp();
            let res = (&u * &v - &v * phase).norm();
            assert!(res < 1e-10, "seed {seed} eigenvalue {lam}: residual {res:.1e}");
        }
        // Same unitary from the resolvent calculus.
        let f = hs_apply(&h, &chi, 3, &HsQuadrature::adaptive(1e-9)).unwrap().matrix;
        let f = (&f + f.adjoint()) * C64::new(0.5, 0.0);
        let via_hs = hermitian_apply(&f, |e| (2.0 * PI * C64::new(0.0, 1.0) * e).exp());
        assert!(frobenius(&(via_hs - &u)) < 1e-6, "seed {seed}");
    }
}

#[test]
fn non_hermitian_input_is_rejected() {
    let mut h = random_hermitian(3, 1);
    h[(0, 1)] += C64::new(1.0, 0.0);
    assert!(hs_apply(&h, &SmoothSwitch::new(0.5).unwrap(), 2, &HsQuadrature::adaptive(1e-6)).is_err());
}
