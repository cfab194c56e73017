//! Momentum-space symbols of Dirac blocks.
//!
//! A block with cone matrix `A`, mass `m` and regularisation `η` has symbol
//! `h(k) = (Ak, m − η|Ak|²)` and Hamiltonian `Ĥ(k) = h(k)·Γ`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::clifford::{build_gamma, CliffordRep};
use crate::error::{Error, Result};
use crate::linalg::{det_real, identity, kron, sigma_minus, sigma_plus, CMat, C64, I};

/// Below this norm the symbol is treated as gapless.
pub const GAPLESS_THRESHOLD: f64 = 1e-12;

/// Mass of a block: constant in the bulk, or the two asymptotes of a wall.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MassSpec {
    Constant(f64),
    Wall { minus: f64, plus: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Plus,
    Minus,
    Bulk,
}

/// One elementary Dirac operator.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiracBlock {
    pub d: usize,
    /// Row-major d×d cone matrix.
    pub a: Vec<f64>,
    pub mass: MassSpec,
    pub eta: f64,
}

impl DiracBlock {
    pub fn new(d: usize, a: Vec<f64>, m: f64, eta: f64) -> Result<Self> {
        Self::with_mass(d, a, MassSpec::Constant(m), eta)
    }

    pub fn wall(d: usize, a: Vec<f64>, m_minus: f64, m_plus: f64, eta: f64) -> Result<Self> {
        Self::with_mass(d, a, MassSpec::Wall { minus: m_minus, plus: m_plus }, eta)
    }

    pub fn with_mass(d: usize, a: Vec<f64>, mass: MassSpec, eta: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::DimensionOutOfRange { d, reason: "d must be positive".into() });
        }
        if a.len() != d * d {
            return Err(Error::InvalidParameter(format!(
                "cone matrix has {} entries, expected {}",
                a.len(),
                d * d
            )));
        }
        if !a.iter().all(|x| x.is_finite()) || !eta.is_finite() {
            return Err(Error::InvalidParameter("non-finite model parameter".into()));
        }
        let det = det_real(&a, d);
        if det.abs() <= 1e-12 {
            return Err(Error::SingularCone { det });
        }
        Ok(DiracBlock { d, a, mass, eta })
    }

    /// Isotropic block A = I.
    pub fn isotropic(d: usize, m: f64, eta: f64) -> Self {
        Self::new(d, identity_flat(d), m, eta).expect("identity cone is regular")
    }

    pub fn det_a(&self) -> f64 {
        det_real(&self.a, self.d)
    }

    pub fn mass_on(&self, side: Side) -> Result<f64> {
        match (self.mass, side) {
            (MassSpec::Constant(m), _) => Ok(m),
            (MassSpec::Wall { plus, .. }, Side::Plus) => Ok(plus),
            (MassSpec::Wall { minus, .. }, Side::Minus) => Ok(minus),
            (MassSpec::Wall { .. }, Side::Bulk) => Err(Error::InvalidParameter(
                "a wall block has no single bulk mass; choose the plus or minus side".into(),
            )),
        }
    }

    /// Diagonal entries when A is diagonal.
    pub fn diagonal_cone(&self) -> Option<Vec<f64>> {
        let d = self.d;
        for i in 0..d {
            for j in 0..d {
                if i != j && self.a[i * d + j] != 0.0 {
                    return None;
                }
            }
        }
        Some((0..d).map(|i| self.a[i * d + i]).collect())
    }

    /// Copy of the block with constant mass `m`.
    pub fn at_mass(&self, m: f64) -> DiracBlock {
        DiracBlock { mass: MassSpec::Constant(m), ..self.clone() }
    }
}

pub fn identity_flat(d: usize) -> Vec<f64> {
    let mut a = vec![0.0; d * d];
    for i in 0..d {
        a[i * d + i] = 1.0;
    }
    a
}

/// Direct sum of blocks sharing a dimension and a regularisation.
#[derive(Debug, Clone, Serialize)]
pub struct DiracModel {
    pub blocks: Vec<DiracBlock>,
    pub eta: f64,
}

impl DiracModel {
    pub fn new(blocks: Vec<DiracBlock>) -> Result<Self> {
        let first = blocks
            .first()
            .ok_or_else(|| Error::InvalidParameter("a model needs at least one block".into()))?;
        let (d, eta) = (first.d, first.eta);
        if blocks.iter().any(|b| b.d != d) {
            return Err(Error::InvalidParameter("all blocks must share the dimension".into()));
        }
        if blocks.iter().any(|b| b.eta != eta) {
            return Err(Error::InvalidParameter("all blocks must share eta".into()));
        }
        Ok(DiracModel { blocks, eta })
    }

    pub fn d(&self) -> usize {
        self.blocks[0].d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    Block,
    EdgeRegularized,
}

/// The quadratic vector field k ↦ (Ak, m − η|Ak|²) on ℝ^d.
#[derive(Debug, Clone, Serialize)]
pub struct SymbolField {
    pub d: usize,
    pub a: Vec<f64>,
    pub m: f64,
    pub eta: f64,
    pub kind: FieldKind,
}

impl SymbolField {
    pub fn value(&self, k: &[f64]) -> Vec<f64> {
        let d = self.d;
        let ak = self.apply_a(k);
        let r2: f64 = ak.iter().map(|x| x * x).sum();
        let mut h = ak;
        h.push(self.m - self.eta * r2);
        debug_assert_eq!(h.len(), d + 1);
        h
    }

    fn apply_a(&self, k: &[f64]) -> Vec<f64> {
        let d = self.d;
        (0..d).map(|i| (0..d).map(|j| self.a[i * d + j] * k[j]).sum()).collect()
    }

    /// ∂_{k_j} h for j = 0..d, each a vector of length d+1.
    pub fn jacobian(&self, k: &[f64]) -> Vec<Vec<f64>> {
        let d = self.d;
        let ak = self.apply_a(k);
        (0..d)
            .map(|j| {
                let col: Vec<f64> = (0..d).map(|i| self.a[i * d + j]).collect();
                let dphi = -2.0 * self.eta * ak.iter().zip(&col).map(|(x, y)| x * y).sum::<f64>();
                let mut v = col;
                v.push(dphi);
                v
            })
            .collect()
    }
}

pub fn h_field(block: &DiracBlock) -> Result<SymbolField> {
    let m = block.mass_on(Side::Bulk)?;
    Ok(SymbolField { d: block.d, a: block.a.clone(), m, eta: block.eta, kind: FieldKind::Block })
}

/// The regularised edge symbol h^R(k') = (k', (1 − |k'|²)/2).
pub fn edge_regularized_field(interface_dim: usize) -> SymbolField {
    SymbolField {
        d: interface_dim,
        a: identity_flat(interface_dim),
        m: 0.5,
        eta: 0.5,
        kind: FieldKind::EdgeRegularized,
    }
}

/// Matrix L with first row h(k) and row j+1 equal to ∂_{k_j} h(k).
pub fn l_matrix(field: &SymbolField, k: &[f64]) -> DMatrix<f64> {
    let d = field.d;
    let h = field.value(k);
    let jac = field.jacobian(k);
    DMatrix::from_fn(d + 1, d + 1, |r, c| if r == 0 { h[c] } else { jac[r - 1][c] })
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn checked_norm(h: &[f64]) -> Result<f64> {
    let n = norm(h);
    if n < GAPLESS_THRESHOLD {
        Err(Error::GaplessSymbol { norm: n })
    } else {
        Ok(n)
    }
}

/// A symbol field together with its gamma matrices, for repeated evaluation.
#[derive(Debug, Clone)]
pub struct BlockSymbol {
    pub field: SymbolField,
    pub rep: CliffordRep,
    /// Matrices used by the flat unitary in odd d (the even representation one dimension down).
    pub reduced: Option<Vec<CMat>>,
}

impl BlockSymbol {
    pub fn new(field: SymbolField) -> Result<Self> {
        let rep = build_gamma(field.d)?;
        let reduced = if field.d % 2 == 1 { Some(reduced_gammas(field.d)?) } else { None };
        Ok(BlockSymbol { field, rep, reduced })
    }

    pub fn from_block(block: &DiracBlock) -> Result<Self> {
        Self::new(h_field(block)?)
    }

    pub fn hamiltonian(&self, k: &[f64]) -> CMat {
        self.rep.contract(&self.field.value(k))
    }

    pub fn projector(&self, k: &[f64]) -> Result<CMat> {
        let h = self.field.value(k);
        let nh = checked_norm(&h)?;
        let n = self.rep.size();
        Ok(identity(n) * C64::new(0.5, 0.0) - self.rep.contract(&h) * C64::new(0.5 / nh, 0.0))
    }

    /// P̂(k) and its partial derivatives ∂_j P̂.
    pub fn projector_with_derivatives(&self, k: &[f64]) -> Result<(CMat, Vec<CMat>)> {
        let h = self.field.value(k);
        let nh = checked_norm(&h)?;
        let n = self.rep.size();
        let hm = self.rep.contract(&h);
        let p = identity(n) * C64::new(0.5, 0.0) - &hm * C64::new(0.5 / nh, 0.0);
        let dps = self
            .field
            .jacobian(k)
            .iter()
            .map(|dh| {
                let dhm = self.rep.contract(dh);
                let s = dot(&h, dh) / (2.0 * nh * nh * nh);
                &hm * C64::new(s, 0.0) - dhm * C64::new(0.5 / nh, 0.0)
            })
            .collect();
        Ok((p, dps))
    }

    fn unitary_numerator(&self, h: &[f64]) -> CMat {
        let d = self.field.d;
        let g = self.reduced.as_ref().expect("flat unitary needs odd d");
        let n = g[0].nrows();
        let mut out = identity(n) * (I * h[d]);
        for j in 0..d {
            if h[j] != 0.0 {
                out += &g[j] * C64::new(h[j], 0.0);
            }
        }
        out
    }

    pub fn flat_unitary(&self, k: &[f64]) -> Result<CMat> {
        let h = self.field.value(k);
        let nh = checked_norm(&h)?;
        Ok(self.unitary_numerator(&h) * C64::new(1.0 / nh, 0.0))
    }

    /// U(k) and ∂_j U(k) for odd d.
    pub fn flat_unitary_with_derivatives(&self, k: &[f64]) -> Result<(CMat, Vec<CMat>)> {
        let h = self.field.value(k);
        let nh = checked_norm(&h)?;
        let num = self.unitary_numerator(&h);
        let u = &num * C64::new(1.0 / nh, 0.0);
        let d = self.field.d;
        let g = self.reduced.as_ref().unwrap();
        let n = g[0].nrows();
        let dus = self
            .field
            .jacobian(k)
            .iter()
            .map(|dh| {
                let mut dn = identity(n) * (I * dh[d]);
                for j in 0..d {
                    if dh[j] != 0.0 {
                        dn += &g[j] * C64::new(dh[j], 0.0);
                    }
                }
                let s = dot(&h, dh) / (nh * nh * nh);
                dn * C64::new(1.0 / nh, 0.0) - &num * C64::new(s, 0.0)
            })
            .collect();
        Ok((u, dus))
    }
}

/// First d matrices of the even representation in dimension d−1 (scalar 1 for d = 1).
fn reduced_gammas(d: usize) -> Result<Vec<CMat>> {
    if d == 1 {
        return Ok(vec![identity(1)]);
    }
    let r = build_gamma(d - 1)?;
    Ok(r.gammas.into_iter().take(d).collect())
}

pub fn hamiltonian_symbol(block: &DiracBlock, k: &[f64]) -> Result<CMat> {
    Ok(BlockSymbol::from_block(block)?.hamiltonian(k))
}

pub fn projector_symbol(block: &DiracBlock, k: &[f64]) -> Result<CMat> {
    BlockSymbol::from_block(block)?.projector(k)
}

pub fn flat_unitary_symbol(block: &DiracBlock, k: &[f64]) -> Result<CMat> {
    if block.d.is_multiple_of(2) {
        return Err(Error::DimensionOutOfRange {
            d: block.d,
            reason: "the flat unitary is defined for odd d".into(),
        });
    }
    BlockSymbol::from_block(block)?.flat_unitary(k)
}

/// F = σ₋ ⊗ U + σ₊ ⊗ U*, the flattened Hamiltonian of an odd-d block.
pub fn flat_hamiltonian_from_unitary(u: &CMat) -> CMat {
    kron(&sigma_minus(), u) + kron(&sigma_plus(), &u.adjoint())
}

/// Projector 𝖯ₐ(−εH_I) of the edge construction for an even interface
/// dimension `kprime.len()`, where H_I = k'·γ'.
///
/// The chirality acting on the edge component is ε·γ₀, the restriction of
/// the bulk chiral matrix to the kernel it lives in; at k' = 0 the result
/// is (I + εγ₀)/2.
pub fn edge_projector_symbol(kprime: &[f64], eps: i32) -> Result<CMat> {
    Ok(edge_projector_with_derivatives(kprime, eps)?.0)
}

/// 𝖯ₐ(−εH_I) and its partial derivatives in k'.
pub fn edge_projector_with_derivatives(kprime: &[f64], eps: i32) -> Result<(CMat, Vec<CMat>)> {
    let n = kprime.len();
    if n < 2 || n % 2 == 1 {
        return Err(Error::DimensionOutOfRange {
            d: n + 1,
            reason: "edge projector needs odd d >= 3 (even interface dimension)".into(),
        });
    }
    check_eps(eps)?;
    let rep = build_gamma(n)?;
    let g0 = &rep.gammas[n];
    let size = rep.size();
    let k2: f64 = kprime.iter().map(|x| x * x).sum();
    let s = 1.0 + k2;
    let e = eps as f64;
    let g0h = g0 * rep.contract(kprime);
    let p = identity(size) * C64::new(0.5, 0.0) - &g0h * (I / s) + g0 * C64::new(0.5 * e * (1.0 - k2) / s, 0.0);
    let dps = (0..n)
        .map(|j| {
            let kj = kprime[j];
            -(g0 * &rep.gammas[j]) * (I / s) + &g0h * (I * (2.0 * kj / (s * s)))
                - g0 * C64::new(2.0 * e * kj / (s * s), 0.0)
        })
        .collect();
    Ok((p, dps))
}

/// Flat unitary of the regularised edge symbol with H_I replaced by −εH_I,
/// for an odd interface dimension `kprime.len()`.
pub fn edge_unitary_symbol(kprime: &[f64], eps: i32) -> Result<CMat> {
    Ok(edge_unitary_with_derivatives(kprime, eps)?.0)
}

/// The edge unitary and its partial derivatives in k'.
pub fn edge_unitary_with_derivatives(kprime: &[f64], eps: i32) -> Result<(CMat, Vec<CMat>)> {
    let n = kprime.len();
    if n == 0 || n.is_multiple_of(2) {
        return Err(Error::DimensionOutOfRange {
            d: n + 1,
            reason: "edge unitary needs even d >= 2 (odd interface dimension)".into(),
        });
    }
    check_eps(eps)?;
    let sym = BlockSymbol::new(edge_regularized_field(n))?;
    let e = eps as f64;
    let flipped: Vec<f64> = kprime.iter().map(|x| -e * x).collect();
    let (u, dus) = sym.flat_unitary_with_derivatives(&flipped)?;
    Ok((u, dus.into_iter().map(|du| du * C64::new(-e, 0.0)).collect()))
}

fn check_eps(eps: i32) -> Result<()> {
    if eps == 1 || eps == -1 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("eps must be +1 or -1, got {eps}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs, pauli};

    #[test]
    fn field_examples() {
        let b = DiracBlock::isotropic(2, 1.0, 0.5);
        let f = h_field(&b).unwrap();
        assert_eq!(f.value(&[1.0, 1.0]), vec![1.0, 1.0, 0.0]);
        assert_eq!(f.value(&[0.0, 0.0]), vec![0.0, 0.0, 1.0]);
        let b = DiracBlock::new(2, vec![2.0, 0.0, 0.0, 1.0], 1.0, 0.25).unwrap();
        assert_eq!(h_field(&b).unwrap().value(&[1.0, 0.0]), vec![2.0, 0.0, 0.0]);
    }

    #[test]
    fn singular_cone_rejected() {
        let e = DiracBlock::new(2, vec![1.0, 2.0, 2.0, 4.0], 1.0, 0.1).unwrap_err();
        assert!(e.to_string().contains("det A below threshold"));
    }

    #[test]
    fn hamiltonian_examples() {
        let [s1, s2, s3] = pauli();
        let b = DiracBlock::isotropic(2, 1.0, 0.5);
        assert_eq!(hamiltonian_symbol(&b, &[0.0, 0.0]).unwrap(), s3);
        let h = hamiltonian_symbol(&b, &[1.0, 0.0]).unwrap();
        assert!(max_abs(&(h - (&s1 + &s3 * C64::new(0.5, 0.0)))) < 1e-15);
        let b3 = DiracBlock::isotropic(3, 1.0, 0.5);
        let h3 = hamiltonian_symbol(&b3, &[0.0; 3]).unwrap();
        assert_eq!(h3, kron(&s2, &identity(2)));
    }

    #[test]
    fn projector_at_origin_and_infinity() {
        let b = DiracBlock::isotropic(2, 1.0, 0.0);
        let p = projector_symbol(&b, &[0.0, 0.0]).unwrap();
        assert!(max_abs(&(p - CMat::from_diagonal(&nalgebra::dvector![C64::new(0.0, 0.0), C64::new(1.0, 0.0)]))) < 1e-15);
        let [s1, _, s3] = pauli();
        let half = C64::new(0.5, 0.0);
        let far = projector_symbol(&b, &[1e6, 0.0]).unwrap();
        assert!(max_abs(&(far - (identity(2) - &s1) * half)) < 1e-6);
        let far_neg = projector_symbol(&b, &[-1e6, 0.0]).unwrap();
        assert!(max_abs(&(far_neg - (identity(2) + &s1) * half)) < 1e-6);
        let reg = DiracBlock::isotropic(2, 1.0, 0.5);
        let far_reg = projector_symbol(&reg, &[1e8, 0.0]).unwrap();
        assert!(max_abs(&(far_reg - (identity(2) + &s3) * half)) < 1e-6);
    }

    #[test]
    fn gapless_point_reported() {
        let b = DiracBlock::isotropic(2, 0.0, 0.5);
        assert!(matches!(projector_symbol(&b, &[0.0, 0.0]), Err(Error::GaplessSymbol { .. })));
    }

    #[test]
    fn flat_unitary_examples() {
        let b = DiracBlock::isotropic(3, 1.0, 0.5);
        let u = flat_unitary_symbol(&b, &[0.0; 3]).unwrap();
        assert!(max_abs(&(u - identity(2) * I)) < 1e-15);
        let massless = DiracBlock::isotropic(3, 0.0, 0.0);
        let u = flat_unitary_symbol(&massless, &[1.0, 0.0, 0.0]).unwrap();
        assert!(max_abs(&(u - &pauli()[0])) < 1e-15);
    }

    #[test]
    fn flat_hamiltonian_is_normalised_bulk_hamiltonian() {
        let b = DiracBlock::isotropic(3, 1.0, 0.5);
        let s = BlockSymbol::from_block(&b).unwrap();
        let k = [0.3, -0.7, 1.1];
        let u = s.flat_unitary(&k).unwrap();
        let f = flat_hamiltonian_from_unitary(&u);
        let h = s.hamiltonian(&k);
        let nh = norm(&s.field.value(&k));
        assert!(max_abs(&(f - h * C64::new(1.0 / nh, 0.0))) < 1e-14);
    }

    #[test]
    fn l_matrix_at_origin() {
        let f = h_field(&DiracBlock::isotropic(2, 1.5, 0.3)).unwrap();
        let l = l_matrix(&f, &[0.0, 0.0]);
        assert_eq!(l, DMatrix::from_row_slice(3, 3, &[0., 0., 1.5, 1., 0., 0., 0., 1., 0.]));
        assert!((l.determinant() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn edge_derivatives_match_finite_differences() {
        let k = [0.3, -0.7];
        let h = 1e-6;
        let (_, dps) = edge_projector_with_derivatives(&k, -1).unwrap();
        for j in 0..2 {
            let mut kp = k;
            let mut km = k;
            kp[j] += h;
            km[j] -= h;
            let fd = (edge_projector_symbol(&kp, -1).unwrap() - edge_projector_symbol(&km, -1).unwrap())
                * C64::new(0.5 / h, 0.0);
            assert!(max_abs(&(fd - &dps[j])) < 1e-8);
        }
        let (_, dus) = edge_unitary_with_derivatives(&[0.4], 1).unwrap();
        let fd = (edge_unitary_symbol(&[0.4 + h], 1).unwrap() - edge_unitary_symbol(&[0.4 - h], 1).unwrap())
            * C64::new(0.5 / h, 0.0);
        assert!(max_abs(&(fd - &dus[0])) < 1e-8);
    }

    #[test]
    fn edge_examples() {
        let g0 = build_gamma(2).unwrap().gammas[2].clone();
        let p = edge_projector_symbol(&[0.0, 0.0], 1).unwrap();
        assert!(max_abs(&(p - (identity(2) + &g0) * C64::new(0.5, 0.0))) < 1e-15);
        let far = edge_projector_symbol(&[1e7, 0.0], 1).unwrap();
        assert!(max_abs(&(far - (identity(2) - &g0) * C64::new(0.5, 0.0))) < 1e-6);
        let u = edge_unitary_symbol(&[0.0], 1).unwrap();
        assert!((u[(0, 0)] - I).norm() < 1e-15);
    }
}
