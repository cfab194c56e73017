//! Gamma matrices built by the tensor recursion on Pauli matrices.
//!
//! For even `d` the representation has `d + 1` matrices of size `2^{d/2}`
//! whose last element is `(−i)^κ γ¹⋯γ^d`. For odd `d` it has `d + 1`
//! matrices of size `2^{(d+1)/2}` plus a chiral matrix γ₀ anticommuting with
//! all of them.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{anticommutator, identity, kron, max_abs, pauli, CMat, C64, I, ONE};

/// Default cap on the matrix size of a representation.
pub const DEFAULT_SIZE_CAP: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RepresentationKind {
    Bulk,
    Interface,
}

#[derive(Debug, Clone)]
pub struct CliffordRep {
    pub d: usize,
    pub kappa: usize,
    pub gammas: Vec<CMat>,
    pub chiral: Option<CMat>,
    pub kind: RepresentationKind,
}

impl CliffordRep {
    /// Matrix size of every element.
    pub fn size(&self) -> usize {
        self.gammas[0].nrows()
    }

    /// Σ_j v_j γ^j over the first `v.len()` matrices.
    pub fn contract(&self, v: &[f64]) -> CMat {
        let n = self.size();
        let mut out = CMat::zeros(n, n);
        for (g, &x) in self.gammas.iter().zip(v) {
            if x != 0.0 {
                out += g * C64::new(x, 0.0);
            }
        }
        out
    }

    /// tr(γ^{order[0]} ⋯ γ^{order[k−1]}), indices zero-based.
    pub fn trace_of_product(&self, order: &[usize]) -> C64 {
        product(&self.gammas, order).trace()
    }

    /// tr(γ₀ γ^{order[0]} ⋯), odd dimensions only.
    pub fn chiral_trace_of_product(&self, order: &[usize]) -> Option<C64> {
        let g0 = self.chiral.as_ref()?;
        Some((g0 * product(&self.gammas, order)).trace())
    }
}

fn product(gammas: &[CMat], order: &[usize]) -> CMat {
    let n = gammas[0].nrows();
    order.iter().fold(identity(n), |acc, &j| acc * &gammas[j])
}

fn size_for(d: usize) -> usize {
    1usize << d.div_ceil(2)
}

fn check_dimension(d: usize, cap: usize) -> Result<()> {
    if d == 0 {
        return Err(Error::DimensionOutOfRange { d, reason: "dimension must be at least 1".into() });
    }
    if d > 2 * usize::BITS as usize - 4 || size_for(d) > cap {
        return Err(Error::DimensionOutOfRange {
            d,
            reason: format!("matrix size 2^{} exceeds the cap {cap}", d.div_ceil(2)),
        });
    }
    Ok(())
}

/// (−i)^k.
fn minus_i_pow(k: usize) -> C64 {
    match k % 4 {
        0 => ONE,
        1 => -I,
        2 => -ONE,
        _ => I,
    }
}

/// The d+1 matrices of the even-dimensional bulk representation.
fn even_gammas(d: usize) -> Vec<CMat> {
    debug_assert!(d >= 2 && d.is_multiple_of(2));
    let [s1, s2, s3] = pauli();
    let mut g = vec![s1.clone(), s2.clone(), s3.clone()];
    let mut dim = 2;
    while dim < d {
        let id = identity(g[0].nrows());
        let mut next: Vec<CMat> = g.iter().map(|m| kron(&s1, m)).collect();
        next.push(kron(&s2, &id));
        next.push(kron(&s3, &id));
        g = next;
        dim += 2;
    }
    g
}

pub fn build_gamma(d: usize) -> Result<CliffordRep> {
    build_gamma_with_cap(d, DEFAULT_SIZE_CAP)
}

pub fn build_gamma_with_cap(d: usize, cap: usize) -> Result<CliffordRep> {
    check_dimension(d, cap)?;
    let kappa = d.div_ceil(2);
    if d == 1 {
        let [s1, s2, s3] = pauli();
        return Ok(CliffordRep {
            d,
            kappa,
            gammas: vec![s1, s2],
            chiral: Some(s3),
            kind: RepresentationKind::Bulk,
        });
    }
    if d.is_multiple_of(2) {
        return Ok(CliffordRep {
            d,
            kappa,
            gammas: even_gammas(d),
            chiral: None,
            kind: RepresentationKind::Bulk,
        });
    }
    let mut g = even_gammas(d + 1);
    let chiral = g.pop();
    g.truncate(d + 1);
    Ok(CliffordRep { d, kappa, gammas: g, chiral, kind: RepresentationKind::Bulk })
}

/// Representation adapted to an interface normal to one coordinate.
///
/// In `d = 2` the normal is x₁ and the matrices are (σ₂, σ₃, σ₁). For
/// `d ≥ 3` the normal is x_d: the tangential matrices are σ₃ ⊗ γ', the
/// normal derivative couples through −σ₂ ⊗ I and the mass through σ₁ ⊗ I, so
/// the normal part of the Hamiltonian is off-diagonal in the first factor.
pub fn build_interface_gamma(d: usize) -> Result<CliffordRep> {
    build_interface_gamma_with_cap(d, DEFAULT_SIZE_CAP)
}

pub fn build_interface_gamma_with_cap(d: usize, cap: usize) -> Result<CliffordRep> {
    if d < 2 {
        return Err(Error::DimensionOutOfRange {
            d,
            reason: "interface representation needs d >= 2".into(),
        });
    }
    check_dimension(d, cap)?;
    let kappa = d.div_ceil(2);
    let [s1, s2, s3] = pauli();
    if d == 2 {
        return Ok(CliffordRep {
            d,
            kappa,
            gammas: vec![s2, s3, s1],
            chiral: None,
            kind: RepresentationKind::Interface,
        });
    }
    let inner = if d.is_multiple_of(2) { even_gammas(d - 2) } else { even_gammas(d - 1) };
    let id = identity(inner[0].nrows());
    let mut g: Vec<CMat> = inner.iter().take(d - 1).map(|m| kron(&s3, m)).collect();
    g.push(-kron(&s2, &id));
    g.push(kron(&s1, &id));
    let chiral = if d % 2 == 1 {
        let all: Vec<usize> = (0..=d).collect();
        Some(product(&g, &all) * minus_i_pow(kappa))
    } else {
        None
    };
    Ok(CliffordRep { d, kappa, gammas: g, chiral, kind: RepresentationKind::Interface })
}

#[derive(Debug, Clone, Serialize)]
pub struct Violation {
    pub relation: String,
    pub max_deviation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub d: usize,
    pub kind: RepresentationKind,
    pub checked: usize,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks every defining relation and lists the violated ones.
///
/// Squares and anticommutators of generators are compared exactly; the
/// composite product relations use an entry-wise tolerance of 1e−14.
pub fn verify_relations(rep: &CliffordRep) -> ValidationReport {
    let n = rep.size();
    let id = identity(n);
    let mut violations = Vec::new();
    let mut checked = 0;
    let mut record = |relation: String, dev: f64, tol: f64| {
        if dev > tol {
            violations.push(Violation { relation, max_deviation: dev });
        }
    };
    let m = rep.gammas.len();
    for j in 0..m {
        let g = &rep.gammas[j];
        checked += 2;
        record(format!("gamma{} hermitian", j + 1), max_abs(&(g - g.adjoint())), 0.0);
        for k in j..m {
            checked += 1;
            let target = if j == k { &id * C64::new(2.0, 0.0) } else { CMat::zeros(n, n) };
            let dev = max_abs(&(anticommutator(g, &rep.gammas[k]) - target));
            record(format!("{{gamma{}, gamma{}}} = 2 delta", j + 1, k + 1), dev, 0.0);
        }
    }
    let d = rep.d;
    if d.is_multiple_of(2) {
        checked += 1;
        let order: Vec<usize> = (0..d).collect();
        let prod = product(&rep.gammas, &order) * minus_i_pow(rep.kappa);
        record(
            format!("gamma{} = (-i)^kappa gamma1...gamma{}", d + 1, d),
            max_abs(&(prod - &rep.gammas[d])),
            1e-14,
        );
    } else {
        match &rep.chiral {
            None => record("chiral matrix present".into(), f64::INFINITY, 0.0),
            Some(g0) => {
                checked += 2;
                record("gamma0 hermitian".into(), max_abs(&(g0 - g0.adjoint())), 0.0);
                for (j, g) in rep.gammas.iter().enumerate() {
                    checked += 1;
                    record(format!("{{gamma0, gamma{}}} = 0", j + 1), max_abs(&anticommutator(g0, g)), 0.0);
                }
                let order: Vec<usize> = (0..=d).collect();
                let prod = product(&rep.gammas, &order) * minus_i_pow(rep.kappa);
                record(
                    format!("gamma0 = (-i)^kappa gamma1...gamma{}", d + 1),
                    max_abs(&(prod - g0)),
                    1e-14,
                );
            }
        }
    }
    ValidationReport { d, kind: rep.kind, checked, violations }
}

/// (2i)^k as a complex number.
pub fn two_i_pow(k: usize) -> C64 {
    C64::new(0.0, 2.0).powu(k as u32)
}
