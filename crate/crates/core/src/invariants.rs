//! Bulk invariants of Dirac blocks by closed form, curvature or winding
//! quadrature, and the degree integral.
//!
//! All values are reported in the −Ind convention: a block with m, η > 0
//! and det A > 0 has index +1 in every dimension.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{identity, permutations, CMat, C64, I};
use crate::quadrature::{integrate_adaptive, sphere_rule, QuadResult};
use crate::symbol::{
    edge_projector_with_derivatives, edge_regularized_field, edge_unitary_with_derivatives, identity_flat, BlockSymbol,
    DiracBlock, DiracModel, Side, SymbolField,
};

/// Default evaluation budget of the compactified quadrature.
pub const DEFAULT_BUDGET: usize = 10_000_000;

/// Smallest error estimate reported; double-precision sums of this length
/// cannot do better.
const ROUNDOFF_FLOOR: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    CurvatureQuadrature,
    DegreeQuadrature,
    WindingQuadrature,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct InvariantMetadata {
    pub description: String,
    pub evaluations: usize,
    /// Angular resolution parameter of the final sphere rule.
    pub angular_resolution: Option<usize>,
    /// Integral before the convention sign is applied.
    pub raw_integral: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct InvariantResult {
    pub value: f64,
    pub method: Method,
    pub est_error: f64,
    /// Set when η = 0, where the value is a half-integer.
    pub half_integer: bool,
    pub metadata: InvariantMetadata,
}

impl InvariantResult {
    pub fn nearest_integer(&self) -> i64 {
        self.value.round() as i64
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BulkQuadOptions {
    pub tol: f64,
    pub max_evals: usize,
}

impl BulkQuadOptions {
    pub fn with_tol(tol: f64) -> Self {
        BulkQuadOptions { tol, max_evals: DEFAULT_BUDGET }
    }
}

fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Area of the unit sphere S^d.
pub fn sphere_area(d: usize) -> f64 {
    // |S^d| = 2π^{(d+1)/2} / Γ((d+1)/2)
    match d {
        0 => 2.0,
        1 => 2.0 * PI,
        _ => 2.0 * PI / (d as f64 - 1.0) * sphere_area(d - 2),
    }
}

fn describe(block: &DiracBlock, m: f64) -> String {
    format!("d={} A={:?} m={} eta={}", block.d, block.a, m, block.eta)
}

fn bulk_mass(block: &DiracBlock) -> Result<f64> {
    let m = block.mass_on(Side::Bulk)?;
    if m == 0.0 {
        return Err(Error::ZeroMass);
    }
    Ok(m)
}

/// ½(sgn m + sgn η)·sgn det A, or ½ sgn m · sgn det A flagged when η = 0.
pub fn closed_form_index(block: &DiracBlock) -> Result<InvariantResult> {
    let m = bulk_mass(block)?;
    Ok(closed_form_at(block, m))
}

fn closed_form_at(block: &DiracBlock, m: f64) -> InvariantResult {
    let value = 0.5 * (sgn(m) + sgn(block.eta)) * sgn(block.det_a());
    InvariantResult {
        value,
        method: Method::ClosedForm,
        est_error: 0.0,
        half_integer: block.eta == 0.0,
        metadata: InvariantMetadata { description: describe(block, m), ..Default::default() },
    }
}

fn check_quad_dimension(d: usize) -> Result<()> {
    if d > 4 {
        return Err(Error::DimensionOutOfRange {
            d,
            reason: "bulk quadrature is limited to d <= 4".into(),
        });
    }
    Ok(())
}

/// Integrates `f` over ℝ^d in polar form with the radius compactified as
/// r = t/(1−t); the sphere rule is refined until successive levels agree.
///
/// `radii` gives, per direction, radii where the integrand changes scale;
/// they become breakpoints of the radial integration.
fn integrate_compactified<F, R>(
    d: usize,
    f: F,
    radii: R,
    opts: BulkQuadOptions,
) -> Result<(QuadResult<f64>, usize)>
where
    F: Fn(&[f64]) -> f64 + Sync,
    R: Fn(&[f64]) -> Vec<f64> + Sync,
{
    let levels: Vec<usize> = match d {
        1 => vec![1],
        2 => vec![8, 16, 32, 64, 128, 256],
        3 => vec![4, 8, 16, 32, 64],
        4 => vec![3, 6, 12, 24, 48],
        _ => unreachable!(),
    };
    let area = sphere_area(d - 1);
    let radial_tol = 0.1 * opts.tol / area;
    let mut evaluations = 0;
    let mut previous: Option<f64> = None;
    let mut last = (0.0, f64::INFINITY);
    for &n in &levels {
        let rule = sphere_rule(d, n);
        let parts: Vec<Result<QuadResult<f64>>> = rule
            .par_iter()
            .map(|(omega, _)| radial_integral(d, &f, omega, &radii(omega), radial_tol, opts.max_evals))
            .collect();
        let mut value = 0.0;
        let mut radial_err = 0.0;
        for ((_, w), part) in rule.iter().zip(parts) {
            let part = part?;
            value += w * part.value;
            radial_err += w * part.error;
            evaluations += part.evaluations;
        }
        if !value.is_finite() {
            return Err(Error::GaplessSymbol { norm: 0.0 });
        }
        let angular_err = match previous {
            Some(p) => (value - p).abs(),
            None if d == 1 => 0.0,
            None => f64::INFINITY,
        };
        let err = (angular_err + radial_err).max(ROUNDOFF_FLOOR * value.abs().max(1.0));
        last = (value, err);
        if err <= opts.tol {
            return Ok((QuadResult { value, error: err, evaluations }, n));
        }
        if evaluations > opts.max_evals {
            break;
        }
        previous = Some(value);
    }
    Err(Error::QuadratureNotConverged { achieved: last.1, requested: opts.tol, evaluations })
}

fn radial_integral<F: Fn(&[f64]) -> f64>(
    d: usize,
    f: &F,
    omega: &[f64],
    radii: &[f64],
    tol: f64,
    max_evals: usize,
) -> Result<QuadResult<f64>> {
    let mut breaks = vec![0.0, 1.0];
    for &r in radii {
        if r.is_finite() && r > 0.0 {
            breaks.push(r / (1.0 + r));
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    let mut k = vec![0.0; d];
    let integrand = |t: f64| {
        if t >= 1.0 {
            return 0.0;
        }
        let s = 1.0 - t;
        let r = t / s;
        for (ki, wi) in k.iter_mut().zip(omega) {
            *ki = r * wi;
        }
        let v = f(&k) * r.powi(d as i32 - 1) / (s * s);
        if v.is_finite() {
            v
        } else if r > 1e12 {
            0.0
        } else {
            f64::NAN
        }
    };
    integrate_adaptive(integrand, &breaks, tol, max_evals)
}

/// Radii where the symbol of `field` changes scale along direction ω.
/// Integrates `f` over k ∈ ℝ^d in the coordinates q = Ak, where the block
/// integrands are isotropic: ∫ f(k) dk = |det A|⁻¹ ∫ f(A⁻¹q) dq.
fn integrate_field<F>(field: &SymbolField, f: F, opts: BulkQuadOptions) -> Result<(QuadResult<f64>, usize)>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let d = field.d;
    let a = DMatrix::from_row_slice(d, d, &field.a);
    let det = a.determinant();
    let inv = a.try_inverse().ok_or(Error::SingularCone { det })?;
    let jac = 1.0 / det.abs();
    let isotropic = SymbolField { a: identity_flat(d), ..field.clone() };
    let integrand = |q: &[f64]| {
        let k: Vec<f64> = (0..d).map(|i| (0..d).map(|j| inv[(i, j)] * q[j]).sum()).collect();
        jac * f(&k)
    };
    integrate_compactified(d, integrand, field_radii(&isotropic), opts)
}

fn field_radii(field: &SymbolField) -> impl Fn(&[f64]) -> Vec<f64> + Sync + '_ {
    move |omega: &[f64]| {
        let d = field.d;
        let aw: f64 = (0..d)
            .map(|i| (0..d).map(|j| field.a[i * d + j] * omega[j]).sum::<f64>().powi(2))
            .sum::<f64>()
            .sqrt();
        let mut out = vec![field.m.abs() / aw, 0.2 * field.m.abs() / aw, 5.0 * field.m.abs() / aw];
        if field.eta != 0.0 {
            let rs = (field.m / field.eta).abs().sqrt() / aw;
            out.extend([rs, 0.5 * rs, 2.0 * rs, 1.0 / (field.eta.abs() * aw)]);
        }
        out
    }
}

/// Degree of k ↦ h(k)/|h(k)|, measured by the Jacobian det(∂₁h, …, ∂_d h, h).
///
/// This equals (−1)^d (1/A_d) ∫ Det(L)/|h|^{d+1} dk with L the matrix whose
/// first row is h; the unsigned integral is kept as `raw_integral`.
pub fn degree_index(field: &SymbolField, tol: f64) -> Result<InvariantResult> {
    degree_index_with(field, BulkQuadOptions::with_tol(tol))
}

pub fn degree_index_with(field: &SymbolField, opts: BulkQuadOptions) -> Result<InvariantResult> {
    let d = field.d;
    check_quad_dimension(d)?;
    if field.m == 0.0 {
        return Err(Error::ZeroMass);
    }
    let norm = 1.0 / sphere_area(d);
    let integrand = |k: &[f64]| {
        let h = field.value(k);
        let jac = field.jacobian(k);
        let n2: f64 = h.iter().map(|x| x * x).sum();
        let mut l = Vec::with_capacity((d + 1) * (d + 1));
        l.extend_from_slice(&h);
        for row in &jac {
            l.extend_from_slice(row);
        }
        crate::linalg::det_real(&l, d + 1) * norm / n2.powf(0.5 * (d + 1) as f64)
    };
    let (res, n) = integrate_field(field, integrand, opts)?;
    let sign = if d.is_multiple_of(2) { 1.0 } else { -1.0 };
    Ok(InvariantResult {
        value: sign * res.value,
        method: Method::DegreeQuadrature,
        est_error: res.error,
        half_integer: field.eta == 0.0,
        metadata: InvariantMetadata {
            description: format!("d={} A={:?} m={} eta={}", d, field.a, field.m, field.eta),
            evaluations: res.evaluations,
            angular_resolution: Some(n),
            raw_integral: Some(res.value),
        },
    })
}

/// Sign ε_d relating the Chern number of P̂ to the index: index = ε_d Ch_d.
pub fn chern_sign(d: usize) -> f64 {
    if d.is_multiple_of(4) {
        -1.0
    } else {
        1.0
    }
}

/// Σ_ρ sgn ρ · tr(X₀ Y_ρ(1) ⋯ Y_ρ(n)), reusing prefix products.
fn antisymmetrized_trace(x0: &CMat, ys: &[CMat]) -> C64 {
    let n = ys.len();
    let mut total = C64::new(0.0, 0.0);
    let perms = permutations(n);
    let mut cache: Vec<(Vec<usize>, CMat)> = Vec::new();
    for (p, s) in perms {
        // prefix products share leading factors with the previous permutation
        let mut depth = 0;
        while depth < cache.len() && depth < n && cache[depth].0 == p[..=depth] {
            depth += 1;
        }
        cache.truncate(depth);
        let mut acc = if depth == 0 { x0.clone() } else { cache[depth - 1].1.clone() };
        for i in depth..n {
            acc = &acc * &ys[p[i]];
            cache.push((p[..=i].to_vec(), acc.clone()));
        }
        total += acc.trace() * s as f64;
    }
    total
}

/// Chern number of the projector symbol, returned as ε_d Ch_d.
///
/// Ch_d = i^{d/2}/((2π)^{d/2}(d/2)!) ∫ tr P̂ (dP̂)^d; the unsigned Ch_d is
/// kept as `raw_integral`.
pub fn curvature_chern(block: &DiracBlock, tol: f64) -> Result<InvariantResult> {
    curvature_chern_with(block, BulkQuadOptions::with_tol(tol))
}

pub fn curvature_chern_with(block: &DiracBlock, opts: BulkQuadOptions) -> Result<InvariantResult> {
    let d = block.d;
    if d % 2 == 1 {
        return Err(Error::DimensionOutOfRange { d, reason: "Chern numbers need even d".into() });
    }
    check_quad_dimension(d)?;
    let m = bulk_mass(block)?;
    let sym = BlockSymbol::from_block(block)?;
    let half = d / 2;
    let factorial: f64 = (1..=half).map(|x| x as f64).product();
    let prefactor = I.powu(half as u32) / ((2.0 * PI).powi(half as i32) * factorial);
    let integrand = |k: &[f64]| match sym.projector_with_derivatives(k) {
        Ok((p, dps)) => (prefactor * antisymmetrized_trace(&p, &dps)).re,
        Err(_) => f64::NAN,
    };
    let (res, n) = integrate_field(&sym.field, integrand, opts)?;
    let sign = chern_sign(d);
    Ok(InvariantResult {
        value: sign * res.value,
        method: Method::CurvatureQuadrature,
        est_error: res.error,
        half_integer: block.eta == 0.0,
        metadata: InvariantMetadata {
            description: describe(block, m),
            evaluations: res.evaluations,
            angular_resolution: Some(n),
            raw_integral: Some(res.value),
        },
    })
}

/// c_d = (1/(2^d d!!)) (i/π)^{(d+1)/2} for odd d.
pub fn winding_prefactor(d: usize) -> C64 {
    let double_fact: f64 = (1..=d).rev().step_by(2).map(|x| x as f64).product();
    (I / PI).powu(d.div_ceil(2) as u32) / (2f64.powi(d as i32) * double_fact)
}

/// W_d[U] = c_d ∫ tr(U* dU)^d for the flat unitary of an odd-d block.
pub fn winding_quadrature(block: &DiracBlock, tol: f64) -> Result<InvariantResult> {
    winding_quadrature_with(block, BulkQuadOptions::with_tol(tol))
}

pub fn winding_quadrature_with(block: &DiracBlock, opts: BulkQuadOptions) -> Result<InvariantResult> {
    let d = block.d;
    if d.is_multiple_of(2) || d < 3 {
        return Err(Error::DimensionOutOfRange {
            d,
            reason: "winding quadrature covers odd d >= 3".into(),
        });
    }
    check_quad_dimension(d)?;
    let m = bulk_mass(block)?;
    let sym = BlockSymbol::from_block(block)?;
    let c = winding_prefactor(d);
    let size = sym.reduced.as_ref().map(|g| g[0].nrows()).unwrap_or(1);
    let id = identity(size);
    let integrand = |k: &[f64]| match sym.flat_unitary_with_derivatives(k) {
        Ok((u, dus)) => {
            let ua = u.adjoint();
            let bs: Vec<CMat> = dus.iter().map(|du| &ua * du).collect();
            (c * antisymmetrized_trace(&id, &bs)).re
        }
        Err(_) => f64::NAN,
    };
    let (res, n) = integrate_field(&sym.field, integrand, opts)?;
    Ok(InvariantResult {
        value: res.value,
        method: Method::WindingQuadrature,
        est_error: res.error,
        half_integer: block.eta == 0.0,
        metadata: InvariantMetadata {
            description: describe(block, m),
            evaluations: res.evaluations,
            angular_resolution: Some(n),
            raw_integral: Some(res.value),
        },
    })
}

/// Chern number (i/2π)∫ tr 𝖯[∂₁𝖯, ∂₂𝖯] of the edge projector 𝖯ₐ(−εH_I) on ℝ².
pub fn edge_projector_chern(eps: i32, tol: f64) -> Result<InvariantResult> {
    let field = edge_regularized_field(2);
    let prefactor = I / (2.0 * PI);
    let integrand = |k: &[f64]| match edge_projector_with_derivatives(k, eps) {
        Ok((p, dps)) => (prefactor * antisymmetrized_trace(&p, &dps)).re,
        Err(_) => f64::NAN,
    };
    let (res, n) = integrate_field(&field, integrand, BulkQuadOptions::with_tol(tol))?;
    Ok(InvariantResult {
        value: res.value,
        method: Method::CurvatureQuadrature,
        est_error: res.error,
        half_integer: false,
        metadata: InvariantMetadata {
            description: format!("edge projector, interface dimension 2, eps={eps}"),
            evaluations: res.evaluations,
            angular_resolution: Some(n),
            raw_integral: Some(res.value),
        },
    })
}

/// Winding (1/2πi)∫ tr U*∂U of the edge unitary on ℝ.
pub fn edge_unitary_winding(eps: i32, tol: f64) -> Result<InvariantResult> {
    let field = edge_regularized_field(1);
    let integrand = |k: &[f64]| match edge_unitary_with_derivatives(k, eps) {
        Ok((u, dus)) => ((u.adjoint() * &dus[0]).trace() / (2.0 * PI * I)).re,
        Err(_) => f64::NAN,
    };
    let (res, n) = integrate_field(&field, integrand, BulkQuadOptions::with_tol(tol))?;
    Ok(InvariantResult {
        value: res.value,
        method: Method::WindingQuadrature,
        est_error: res.error,
        half_integer: false,
        metadata: InvariantMetadata {
            description: format!("edge unitary, interface dimension 1, eps={eps}"),
            evaluations: res.evaluations,
            angular_resolution: Some(n),
            raw_integral: Some(res.value),
        },
    })
}

/// Σ_j I[A_j, m_j, η] using the bulk mass or one side of each wall.
pub fn total_bulk_index(model: &DiracModel, side: Side) -> Result<InvariantResult> {
    let mut value = 0.0;
    let mut half_integer = false;
    let mut parts = Vec::new();
    for block in &model.blocks {
        let m = block.mass_on(side)?;
        if m == 0.0 {
            return Err(Error::ZeroMass);
        }
        let r = closed_form_at(block, m);
        value += r.value;
        half_integer |= r.half_integer;
        parts.push(r.value.to_string());
    }
    Ok(InvariantResult {
        value,
        method: Method::ClosedForm,
        est_error: 0.0,
        half_integer,
        metadata: InvariantMetadata {
            description: format!("{:?} side, block indices [{}]", side, parts.join(", ")),
            ..Default::default()
        },
    })
}

/// N₊ − N₋ for a model of walls with diagonal cone matrices.
pub fn interface_index_prediction(model: &DiracModel) -> Result<i64> {
    if model.blocks.iter().any(|b| b.diagonal_cone().is_none()) {
        return Err(Error::InvalidParameter(
            "interface index needs diagonal cone matrices".into(),
        ));
    }
    let plus = total_bulk_index(model, Side::Plus)?;
    let minus = total_bulk_index(model, Side::Minus)?;
    Ok((plus.value - minus.value).round() as i64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbol::h_field;

    #[test]
    fn edge_constructions() {
        for eps in [1, -1] {
            let c = edge_projector_chern(eps, 1e-9).unwrap();
            assert!((c.value + eps as f64).abs() < 1e-7, "chern {} for eps {eps}", c.value);
            let w = edge_unitary_winding(eps, 1e-9).unwrap();
            assert!((w.value - eps as f64).abs() < 1e-7, "winding {} for eps {eps}", w.value);
        }
    }

    #[test]
    fn sphere_areas() {
        assert!((sphere_area(1) - 2.0 * PI).abs() < 1e-15);
        assert!((sphere_area(2) - 4.0 * PI).abs() < 1e-15);
        assert!((sphere_area(3) - 2.0 * PI * PI).abs() < 1e-14);
        assert!((sphere_area(4) - 8.0 * PI * PI / 3.0).abs() < 1e-13);
    }

    #[test]
    fn closed_form_examples() {
        let r = closed_form_index(&DiracBlock::isotropic(2, 1.0, 0.5)).unwrap();
        assert_eq!(r.value, 1.0);
        let r = closed_form_index(&DiracBlock::isotropic(2, 1.0, 0.0)).unwrap();
        assert_eq!(r.value, 0.5);
        assert!(r.half_integer);
        let b = DiracBlock::new(2, vec![1.0, 0.0, 0.0, -1.0], 1.0, 1.0).unwrap();
        assert_eq!(closed_form_index(&b).unwrap().value, -1.0);
        assert_eq!(closed_form_index(&DiracBlock::isotropic(2, 0.0, 1.0)).unwrap_err(), Error::ZeroMass);
    }

    #[test]
    fn winding_prefactor_d3() {
        let c = winding_prefactor(3);
        assert!((c - C64::new(-1.0 / (24.0 * PI * PI), 0.0)).norm() < 1e-16);
    }

    #[test]
    fn chern_d2_examples() {
        let r = curvature_chern(&DiracBlock::isotropic(2, 1.0, 0.5), 1e-7).unwrap();
        assert!((r.value - 1.0).abs() < 1e-6, "{r:?}");
        let r = curvature_chern(&DiracBlock::isotropic(2, -1.0, 0.5), 1e-7).unwrap();
        assert!(r.value.abs() < 1e-6, "{r:?}");
        let r = curvature_chern(&DiracBlock::isotropic(2, 1.0, 0.0), 1e-7).unwrap();
        assert!((r.value - 0.5).abs() < 1e-6 && r.half_integer, "{r:?}");
    }

    #[test]
    fn degree_d1_and_d2() {
        let f = h_field(&DiracBlock::isotropic(1, 1.0, 0.5)).unwrap();
        let r = degree_index(&f, 1e-9).unwrap();
        assert!((r.value - 1.0).abs() < 1e-8, "{r:?}");
        let f = h_field(&DiracBlock::isotropic(2, -1.0, -0.5)).unwrap();
        let r = degree_index(&f, 1e-8).unwrap();
        assert!((r.value + 1.0).abs() < 1e-7, "{r:?}");
    }

    #[test]
    fn totals_and_prediction() {
        let a2 = vec![1.0, 0.0, 0.0, -1.0];
        let m = DiracModel::new(vec![
            DiracBlock::isotropic(2, 1.0, 0.5),
            DiracBlock::new(2, a2.clone(), 1.0, 0.5).unwrap(),
        ])
        .unwrap();
        assert_eq!(total_bulk_index(&m, Side::Bulk).unwrap().value, 0.0);
        let walls = DiracModel::new(vec![
            DiracBlock::wall(2, vec![1.0, 0.0, 0.0, 1.0], 1.0, -1.0, 0.3).unwrap(),
            DiracBlock::wall(2, a2, -1.0, 1.0, 0.3).unwrap(),
        ])
        .unwrap();
        assert_eq!(interface_index_prediction(&walls).unwrap(), -2);
        let one = DiracModel::new(vec![DiracBlock::wall(2, vec![1.0, 0.0, 0.0, 1.0], -1.0, 1.0, 0.0).unwrap()]).unwrap();
        assert_eq!(interface_index_prediction(&one).unwrap(), 1);
    }
}
