use dirac_index::calculus::SmoothSwitch;
use dirac_index::interface1d::{
    branch_winding, delta_bound, gap_spectrum, higher_d_zero_mode, symmetric_samples, trace_branch, zero_modes,
    zero_modes_with, Grid1D, InterfaceProblem, MassProfile, Stabilizer, StencilOrder,
};
use proptest::prelude::*;

fn profile_strategy() -> impl Strategy<Value = MassProfile> {
    (0usize..3, 0.6f64..2.5, any::<bool>(), 0.6f64..1.4).prop_map(|(kind, width, flip, scale)| {
        let (lo, hi) = if flip { (scale, -1.0) } else { (-scale, 1.0) };
        match kind {
            0 => MassProfile::tanh(lo, hi, width),
            1 => MassProfile::erf(lo, hi, width),
            _ => MassProfile::piecewise_linear(lo, hi, width),
        }
        .unwrap()
    })
}

/// Least-squares slope of ln|ψ| against x over the nodes in [a, b].
fn log_slope(x: &[f64], psi: &[f64], a: f64, b: f64) -> f64 {
    let peak = psi.iter().fold(0.0f64, |m, p| m.max(p.abs()));
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(psi)
        .filter(|(&xi, &p)| xi >= a && xi <= b && p.abs() > 1e-9 * peak)
        .map(|(&xi, &p)| (xi, p.abs().ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

fn sech_shape_error(order: StencilOrder, h: f64) -> f64 {
    let profile = MassProfile::tanh(-1.0, 1.0, 1.0).unwrap();
    let grid = Grid1D::for_profile(&profile, h).unwrap();
    let problem = InterfaceProblem::new(profile, 0.0).with_order(order);
    let z = zero_modes_with(&problem, &grid, Stabilizer::Off).unwrap();
    let psi = &z.kernel_a[0];
    let sum: f64 = grid
        .nodes()
        .iter()
        .zip(psi)
        .map(|(&x, &p)| (p - 1.0 / (x.cosh() * 2f64.sqrt())).powi(2))
        .sum();
    (sum * grid.h()).sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn index_does_not_depend_on_the_profile(profile in profile_strategy(), eta in prop_oneof![Just(0.0), 0.02f64..0.2]) {
        let grid = Grid1D::for_profile(&profile, 1.0 / 16.0).unwrap();
        let problem = InterfaceProblem::new(profile.clone(), eta);
        let z = zero_modes(&problem, &grid).unwrap();
        prop_assert_eq!(z.eps, profile.eps());
        prop_assert_eq!(z.dim_ker_a as i32 - z.dim_ker_a_star as i32, profile.eps());
        let half = 0.95 * problem.default_delta().unwrap();
        let branch = trace_branch(&problem, &grid, &symmetric_samples(half, 21)).unwrap();
        let chi = SmoothSwitch::new(0.5 * problem.default_delta().unwrap()).unwrap();
        prop_assert_eq!(branch_winding(&branch, &chi).unwrap(), profile.eps() as i64);
    }

    #[test]
    fn gapped_states_pair_up(profile in profile_strategy(), zeta in 0.05f64..0.4, eta in 0.0f64..0.2) {
        let grid = Grid1D::for_profile(&profile, 1.0 / 16.0).unwrap();
        let problem = InterfaceProblem::new(profile, eta);
        let delta = problem.default_delta().unwrap();
        let gap = gap_spectrum(&problem, zeta, &grid, delta).unwrap();
        prop_assert!(gap.pair_asymmetry(problem.ay, 1e-3) < 1e-8);
        prop_assert!(gap.interface_states().count() >= 1);
    }
}

#[test]
fn wells_do_not_change_the_kernel_count() {
    let wall = MassProfile::tanh(-1.0, 1.0, 1.0).unwrap().with_well(0.5, 1.0).unwrap();
    let grid = Grid1D::for_profile(&wall, 1.0 / 16.0).unwrap();
    let z = zero_modes(&InterfaceProblem::new(wall, 0.1), &grid).unwrap();
    assert_eq!(z.dim_ker_a as i32 - z.dim_ker_a_star as i32, 1);

    let flat = MassProfile::tanh(1.0, 1.0, 1.0).unwrap().with_well(0.5, 1.0).unwrap();
    let grid = Grid1D::for_profile(&flat, 1.0 / 16.0).unwrap();
    let z = zero_modes(&InterfaceProblem::new(flat, 0.1), &grid).unwrap();
    assert_eq!(z.eps, 0);
    assert_eq!(z.dim_ker_a, z.dim_ker_a_star);
}

#[test]
fn zero_mode_decays_at_the_asymptotic_masses() {
    for (lo, hi) in [(-0.5, 1.0), (1.0, -0.5)] {
        let profile = MassProfile::tanh(lo, hi, 1.0).unwrap();
        let grid = Grid1D::for_profile(&profile, 1.0 / 32.0).unwrap();
        let z = zero_modes_with(&InterfaceProblem::new(profile, 0.0), &grid, Stabilizer::Off).unwrap();
        let psi = if z.eps > 0 { &z.kernel_a[0] } else { &z.kernel_a_star[0] };
        let x = grid.nodes();
        let third = (grid.x_max - grid.x_min) / 3.0;
        let right = log_slope(&x, psi, grid.x_max - third, grid.x_max);
        let left = log_slope(&x, psi, grid.x_min, grid.x_min + third);
        let (m_minus, m_plus) = (f64::abs(lo), f64::abs(hi));
        assert!((right + m_plus).abs() < 0.05 * m_plus, "({lo}, {hi}): right slope {right}");
        assert!((left - m_minus).abs() < 0.05 * m_minus, "({lo}, {hi}): left slope {left}");
    }
}

#[test]
fn branch_slope_is_exact_on_every_grid() {
    for (eta, ax, ay) in [(0.0, 1.0, 1.0), (0.1, 1.0, 1.5), (0.05, -1.0, 0.7)] {
        let profile = MassProfile::tanh(-1.0, 1.0, 1.0).unwrap();
        let problem = InterfaceProblem::new(profile.clone(), eta).with_cone(ax, ay).unwrap();
        let half = 0.5 * problem.default_delta().unwrap() / ay;
        let zetas = symmetric_samples(half, 9);
        for h in [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0] {
            let grid = Grid1D::for_profile(&profile, h).unwrap();
            let slope = trace_branch(&problem, &grid, &zetas).unwrap().slope().unwrap();
            let err = (slope - problem.expected_slope()).abs();
            assert!(err < 1e-10, "eta={eta} ax={ax} ay={ay} h={h}: slope error {err:.2e}");
        }
    }
}

#[test]
fn second_order_shape_error_converges_quadratically() {
    let errs: Vec<f64> =
        [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0].iter().map(|&h| sech_shape_error(StencilOrder::Second, h)).collect();
    for w in errs.windows(2) {
        assert!(w[0] / w[1] >= 3.5, "errors {errs:?}");
    }
    assert!(sech_shape_error(StencilOrder::Fourth, 1.0 / 32.0) < errs[1]);
}

#[test]
fn gap_bound_matches_formula() {
    for (m0, eta) in [(1.0, 0.0), (1.0, 0.3), (0.5, -0.6), (2.0, 0.2)] {
        let b = delta_bound(m0, eta).unwrap();
        assert!((b - m0 / (1.0 + 2.0 * f64::abs(eta) * m0).sqrt()).abs() < 1e-15);
    }
    assert!(delta_bound(1.0, 0.5).is_err());
    assert!(delta_bound(0.0, 0.1).is_err());
}

#[test]
fn transverse_modes_in_higher_dimensions() {
    for (lo, hi) in [(-1.0, 1.0), (1.0, -1.0)] {
        let profile = MassProfile::tanh(lo, hi, 1.0).unwrap();
        let grid = Grid1D::for_profile(&profile, 1.0 / 32.0).unwrap();
        for d in [3, 4] {
            let mode = higher_d_zero_mode(&profile, d, &grid).unwrap();
            assert_eq!(mode.eps, profile.eps());
            assert_eq!(mode.sigma3_sector, -profile.eps());
            assert!(mode.residual < 1e-6, "d={d}: residual {}", mode.residual);
        }
    }
    let trivial = MassProfile::tanh(1.0, 2.0, 1.0).unwrap();
    let grid = Grid1D::for_profile(&trivial, 1.0 / 32.0).unwrap();
    assert_eq!(higher_d_zero_mode(&trivial, 3, &grid).unwrap().eps, 0);
    assert!(higher_d_zero_mode(&trivial, 5, &grid).is_err());
}
