//! Helffer–Sjöstrand functional calculus on finite Hermitian matrices, the
//! smooth switch χ_δ with its unitary e^{2πiχ_δ(H)}, and Schatten norms.
//!
//! The calculus uses f(H) = −(1/π) ∫_ℂ ∂f̃/∂z̄ (z − H)⁻¹ dx dy with the
//! almost-analytic extension f̃(z) = Σ_{r≤n} f⁽ʳ⁾(x)(iy)ʳ/r! · τ(y/⟨x⟩).

use std::f64::consts::PI;
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{frobenius, hermitian_apply, identity, CMat, C64, I};
use crate::quadrature::{gauss_legendre_on, integrate_adaptive, integrate_adaptive_vec, tanh_sinh, QuadResult};

/// Largest matrix accepted by the resolvent quadrature.
pub const MAX_DIM: usize = 512;

/// Width over which non-compact functions are cut off outside the spectrum.
const WINDOW_RAMP: f64 = 2.0;

/// A real function with derivatives of every order on demand.
pub trait SmoothFn: Sync {
    fn derivative(&self, order: usize, x: f64) -> f64;

    fn value(&self, x: f64) -> f64 {
        self.derivative(0, x)
    }

    /// Compact support of the function itself, `None` when it is not compactly supported.
    fn support(&self) -> Option<(f64, f64)>;

    /// Points where the derivatives stop being analytic; used as quadrature breakpoints.
    fn breakpoints(&self) -> Vec<f64> {
        self.support().map(|(a, b)| vec![a, b]).unwrap_or_default()
    }
}

/// Coefficients p_k of g⁽ᵏ⁾(u) = p_k(u)(1−u²)^{−2k} g(u) for g(u) = exp(−1/(1−u²)).
fn bump_polynomials(max_order: usize) -> Vec<Vec<f64>> {
    let mut ps = vec![vec![1.0]];
    for k in 0..max_order {
        let p = &ps[k];
        // p_{k+1} = p_k' q² + 4k u q p_k − 2u p_k with q = 1 − u²
        let mut next = vec![0.0; p.len() + 4];
        let q2 = [1.0, 0.0, -2.0, 0.0, 1.0];
        for (i, c) in p.iter().enumerate().skip(1) {
            for (j, qc) in q2.iter().enumerate() {
                next[i - 1 + j] += i as f64 * c * qc;
            }
        }
        let uq = [0.0, 1.0, 0.0, -1.0];
        for (i, c) in p.iter().enumerate() {
            for (j, qc) in uq.iter().enumerate() {
                next[i + j] += 4.0 * k as f64 * c * qc;
            }
            next[i + 1] -= 2.0 * c;
        }
        while next.len() > 1 && *next.last().unwrap() == 0.0 {
            next.pop();
        }
        ps.push(next);
    }
    ps
}

const MAX_ORDER: usize = 16;

fn polys() -> &'static [Vec<f64>] {
    static P: OnceLock<Vec<Vec<f64>>> = OnceLock::new();
    P.get_or_init(|| bump_polynomials(MAX_ORDER))
}

/// k-th derivative of exp(−1/(1−u²)) (zero outside (−1, 1)).
fn bump_derivative(k: usize, u: f64) -> f64 {
    assert!(k <= MAX_ORDER, "derivative order {k} above {MAX_ORDER}");
    if u.abs() >= 1.0 {
        return 0.0;
    }
    let q = 1.0 - u * u;
    let g = (-1.0 / q).exp();
    if g == 0.0 {
        return 0.0;
    }
    let p = polys()[k].iter().rev().fold(0.0, |acc, c| acc * u + c);
    p * g / q.powi(2 * k as i32)
}

fn bump_integral_to(u: f64) -> f64 {
    if u <= -1.0 {
        return 0.0;
    }
    let hi = u.min(1.0);
    integrate_adaptive(|s| bump_derivative(0, s), &[-1.0, hi], 1e-17, 100_000)
        .map(|r| r.value)
        .unwrap_or_else(|_| f64::NAN)
}

fn bump_mass() -> f64 {
    static Z: OnceLock<f64> = OnceLock::new();
    *Z.get_or_init(|| bump_integral_to(1.0))
}

/// Smooth step χ_δ: 0 below −δ, 1 above δ, with χ'_δ a normalised bump on (−δ, δ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmoothSwitch {
    pub delta: f64,
    /// Highest derivative order callers are expected to use.
    pub n_max: usize,
}

impl SmoothSwitch {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidParameter(format!("delta must be positive, got {delta}")));
        }
        Ok(SmoothSwitch { delta, n_max: 4 })
    }
}

impl SmoothFn for SmoothSwitch {
    fn derivative(&self, order: usize, x: f64) -> f64 {
        let u = x / self.delta;
        if order == 0 {
            if u <= -1.0 {
                0.0
            } else if u >= 1.0 {
                1.0
            } else if u <= 0.0 {
                bump_integral_to(u) / bump_mass()
            } else {
                1.0 - bump_integral_to(-u) / bump_mass()
            }
        } else {
            bump_derivative(order - 1, u) / (bump_mass() * self.delta.powi(order as i32))
        }
    }

    fn support(&self) -> Option<(f64, f64)> {
        None
    }

    fn breakpoints(&self) -> Vec<f64> {
        vec![-self.delta, self.delta]
    }
}

/// The bump exp(−1/(1−u²)) with u = (x − center)/radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    pub center: f64,
    pub radius: f64,
}

impl SmoothFn for Bump {
    fn derivative(&self, order: usize, x: f64) -> f64 {
        bump_derivative(order, (x - self.center) / self.radius) / self.radius.powi(order as i32)
    }

    fn support(&self) -> Option<(f64, f64)> {
        Some((self.center - self.radius, self.center + self.radius))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constant(pub f64);

impl SmoothFn for Constant {
    fn derivative(&self, order: usize, _x: f64) -> f64 {
        if order == 0 {
            self.0
        } else {
            0.0
        }
    }

    fn support(&self) -> Option<(f64, f64)> {
        None
    }
}

/// Plateau cutoff τ: 1 on |u| ≤ 1, 0 on |u| ≥ 2, smooth and monotone in between.
pub fn plateau(order: usize, u: f64) -> f64 {
    // τ(u) = S(2 − |u|) with S(t) = χ_{1/2}(t − 1/2)
    let s = SmoothSwitch { delta: 0.5, n_max: MAX_ORDER };
    if u >= 0.0 {
        let v = s.derivative(order, 1.5 - u);
        if order % 2 == 1 {
            -v
        } else {
            v
        }
    } else {
        s.derivative(order, 1.5 + u)
    }
}

/// Smooth step S: 0 for t ≤ 0, 1 for t ≥ 1.
fn step(order: usize, t: f64) -> f64 {
    SmoothSwitch { delta: 0.5, n_max: MAX_ORDER }.derivative(order, t - 0.5)
}

/// f multiplied by a window equal to 1 on [lo, hi] that falls to 0 over `ramp`.
pub struct Windowed<'a> {
    pub f: &'a dyn SmoothFn,
    pub lo: f64,
    pub hi: f64,
    pub ramp: f64,
}

impl Windowed<'_> {
    fn window(&self, order: usize, x: f64) -> f64 {
        let scale = self.ramp.powi(order as i32);
        if x <= 0.5 * (self.lo + self.hi) {
            step(order, (x - self.lo + self.ramp) / self.ramp) / scale
        } else {
            let v = step(order, (self.hi + self.ramp - x) / self.ramp) / scale;
            if order % 2 == 1 {
                -v
            } else {
                v
            }
        }
    }
}

impl SmoothFn for Windowed<'_> {
    fn derivative(&self, order: usize, x: f64) -> f64 {
        if x <= self.lo - self.ramp || x >= self.hi + self.ramp {
            return 0.0;
        }
        let mut binom = 1.0;
        let mut total = 0.0;
        for j in 0..=order {
            let t = self.window(order - j, x);
            if t != 0.0 {
                total += binom * self.f.derivative(j, x) * t;
            }
            binom = binom * (order - j) as f64 / (j + 1) as f64;
        }
        total
    }

    fn support(&self) -> Option<(f64, f64)> {
        Some((self.lo - self.ramp, self.hi + self.ramp))
    }

    fn breakpoints(&self) -> Vec<f64> {
        let (a, b) = (self.lo - self.ramp, self.hi + self.ramp);
        let mut out = vec![a, self.lo, self.hi, b];
        out.extend(self.f.breakpoints().into_iter().filter(|x| (a..=b).contains(x)));
        out
    }
}

/// The almost-analytic extension of order n of a compactly supported f.
///
/// The cutoff is σ(z) = τ(y/(L⟨x⟩)) with L = `scale`; L = 1 is the usual
/// choice, smaller L keeps the Taylor terms small when f varies quickly.
pub struct QuasiAnalyticExtension<'a> {
    pub n: usize,
    pub f: &'a dyn SmoothFn,
    pub scale: f64,
}

impl QuasiAnalyticExtension<'_> {
    /// ∂f̃/∂z̄ at x + iy given f⁽⁰⁾(x), …, f⁽ⁿ⁺¹⁾(x).
    pub fn dbar_with(&self, derivs: &[f64], x: f64, y: f64) -> C64 {
        let n = self.n;
        let bracket = self.scale * (1.0 + x * x).sqrt();
        let u = y / bracket;
        let sigma = plateau(0, u);
        let dtau = plateau(1, u);
        let sx = -dtau * y * x * self.scale * self.scale / bracket.powi(3);
        let sy = dtau / bracket;
        let mut poly = C64::new(0.0, 0.0);
        let mut iy_r = C64::new(1.0, 0.0);
        let mut fact = 1.0;
        for (r, d) in derivs.iter().enumerate().take(n + 1) {
            if r > 0 {
                iy_r *= I * y;
                fact *= r as f64;
            }
            poly += iy_r * (*d / fact);
        }
        // iy_r = (iy)^n, fact = n!
        0.5 * poly * C64::new(sx, sy) + 0.5 * derivs[n + 1] * iy_r * (sigma / fact)
    }

    pub fn derivatives_at(&self, x: f64) -> Vec<f64> {
        (0..=self.n + 1).map(|r| self.f.derivative(r, x)).collect()
    }

    pub fn dbar(&self, x: f64, y: f64) -> C64 {
        self.dbar_with(&self.derivatives_at(x), x, y)
    }

    /// The extension f̃ itself.
    pub fn value(&self, x: f64, y: f64) -> C64 {
        let sigma = plateau(0, y / (self.scale * (1.0 + x * x).sqrt()));
        let mut acc = C64::new(0.0, 0.0);
        let mut iy_r = C64::new(1.0, 0.0);
        let mut fact = 1.0;
        for r in 0..=self.n {
            if r > 0 {
                iy_r *= I * y;
                fact *= r as f64;
            }
            acc += iy_r * (self.f.derivative(r, x) / fact);
        }
        acc * sigma
    }
}

/// How the x-direction of the half-plane integral is discretised.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum XRule {
    /// Fixed Gauss–Legendre panels; the error is estimated against a coarser rule.
    Tensor { panels: usize },
    /// Adaptive Gauss–Kronrod per y-node, refined until `tol` is met.
    Adaptive { max_evals: usize },
}

/// Quadrature for the upper half-plane part of the integral; the lower half
/// follows by symmetry.
///
/// The y-direction uses u = y/(L⟨x⟩).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HsQuadrature {
    pub x_rule: XRule,
    pub y_panels: usize,
    /// Gauss points per panel.
    pub points: usize,
    /// Graded panels on [y_min, 1] in u; the cutoff region u ∈ [1, 2] uses tanh–sinh nodes.
    /// The strip 0 < u < y_min is skipped and bounded analytically.
    pub y_min: f64,
    /// Scale L of the cutoff σ(z) = τ(y/(L⟨x⟩)).
    pub cutoff_scale: f64,
    /// Target error; required by the adaptive rule, optional for the tensor rule.
    pub tol: Option<f64>,
}

impl Default for HsQuadrature {
    fn default() -> Self {
        HsQuadrature {
            x_rule: XRule::Adaptive { max_evals: 4_000_000 },
            y_panels: 12,
            points: 8,
            y_min: 1e-4,
            cutoff_scale: 0.1,
            tol: Some(1e-8),
        }
    }
}

impl HsQuadrature {
    pub fn tensor(x_panels: usize, y_panels: usize) -> Self {
        HsQuadrature { x_rule: XRule::Tensor { panels: x_panels }, y_panels, tol: None, ..Default::default() }
    }

    pub fn adaptive(tol: f64) -> Self {
        HsQuadrature { tol: Some(tol), ..Default::default() }
    }

    fn coarsened(&self) -> Self {
        let x_rule = match self.x_rule {
            XRule::Tensor { panels } => XRule::Tensor { panels: (panels / 2).max(1) },
            other => other,
        };
        HsQuadrature { x_rule, y_panels: (self.y_panels * 3 / 4).max(2), ..*self }
    }
}

#[derive(Debug, Clone)]
pub struct HsResult {
    pub matrix: CMat,
    pub est_error: f64,
    /// Analytic bound on the skipped strip 0 < |y| < y_min.
    pub sliver_bound: f64,
    pub nodes: usize,
}

fn check_hermitian(h: &CMat) -> Result<()> {
    if h.nrows() != h.ncols() || h.nrows() == 0 {
        return Err(Error::InvalidParameter("matrix must be square and non-empty".into()));
    }
    if h.nrows() > MAX_DIM {
        return Err(Error::InvalidParameter(format!(
            "matrix dimension {} exceeds {MAX_DIM}",
            h.nrows()
        )));
    }
    let defect = frobenius(&(h - h.adjoint()));
    if defect > 1e-10 * frobenius(h).max(1.0) {
        return Err(Error::InvalidParameter(format!("matrix is not Hermitian (defect {defect:e})")));
    }
    Ok(())
}

/// Spectral radius, used only to place the window of non-compact functions.
fn spectral_bound(h: &CMat) -> f64 {
    let sym = (h + h.adjoint()) * C64::new(0.5, 0.0);
    sym.symmetric_eigenvalues().iter().fold(0.0, |acc: f64, v| acc.max(v.abs()))
}

fn resolvent(h: &CMat, z: C64) -> Result<CMat> {
    let n = h.nrows();
    let a = identity(n) * z - h;
    a.try_inverse().ok_or_else(|| Error::SingularMatrix(format!("resolvent at z = {z}")))
}

/// Panels on [lo, hi] whose ratio of consecutive endpoints is constant.
fn graded_panels(lo: f64, hi: f64, count: usize) -> Vec<(f64, f64)> {
    let ratio = (hi / lo).powf(1.0 / count as f64);
    (0..count)
        .map(|j| (lo * ratio.powi(j as i32), lo * ratio.powi(j as i32 + 1)))
        .collect()
}

fn uniform_panels(lo: f64, hi: f64, count: usize) -> Vec<(f64, f64)> {
    let h = (hi - lo) / count as f64;
    (0..count).map(|j| (lo + j as f64 * h, lo + (j + 1) as f64 * h)).collect()
}

/// About `count` panels on [a, b] with the given breakpoints as panel ends.
fn broken_panels(a: f64, b: f64, breaks: &[f64], count: usize) -> Vec<(f64, f64)> {
    let mut pts: Vec<f64> = breaks.iter().copied().filter(|x| *x > a && *x < b).collect();
    pts.push(a);
    pts.push(b);
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|x, y| (*x - *y).abs() < 1e-12);
    let mut out = Vec::new();
    for w in pts.windows(2) {
        let share = ((w[1] - w[0]) / (b - a) * count as f64).round().max(1.0) as usize;
        out.extend(uniform_panels(w[0], w[1], share));
    }
    out
}

fn nodes_of(panels: &[(f64, f64)], points: usize) -> Vec<(f64, f64)> {
    panels
        .iter()
        .flat_map(|&(a, b)| {
            let (x, w) = gauss_legendre_on(points, a, b);
            x.into_iter().zip(w)
        })
        .collect()
}

/// Nodes in u = y/(L⟨x⟩): graded Gauss–Legendre on [u_lo, 1] where σ = 1,
/// tanh–sinh on [1, 2] where the cutoff varies.
fn u_nodes(u_lo: f64, panels: usize, points: usize) -> Vec<(f64, f64)> {
    let mut out = nodes_of(&graded_panels(u_lo, 1.0, panels), points);
    let (x, w) = tanh_sinh(1.0, 2.0, 1.0 / 16.0);
    out.extend(x.into_iter().zip(w));
    out
}

/// Σ over the grid of w ∂f̃/∂z̄ · K(z) in the upper half-plane; `us` are
/// nodes in u = y/⟨x⟩.
fn half_plane_sum<K>(
    ext: &QuasiAnalyticExtension,
    xs: &[(f64, f64)],
    us: &[(f64, f64)],
    kernel: K,
    dim: usize,
) -> Result<CMat>
where
    K: Fn(C64) -> Result<CMat> + Sync,
{
    let parts: Vec<Result<CMat>> = xs
        .par_iter()
        .map(|&(x, wx)| {
            let derivs = ext.derivatives_at(x);
            let mut acc = CMat::zeros(dim, dim);
            if derivs.iter().all(|d| *d == 0.0) {
                return Ok(acc);
            }
            let bracket = ext.scale * (1.0 + x * x).sqrt();
            for &(u, wu) in us {
                let y = u * bracket;
                let db = ext.dbar_with(&derivs, x, y);
                if db == C64::new(0.0, 0.0) {
                    continue;
                }
                acc += kernel(C64::new(x, y))? * (db * (wx * wu * bracket));
            }
            Ok(acc)
        })
        .collect();
    let mut total = CMat::zeros(dim, dim);
    for p in parts {
        total += p?;
    }
    Ok(total)
}

struct Prepared<'a> {
    windowed: Option<Windowed<'a>>,
    f: &'a dyn SmoothFn,
}

impl<'a> Prepared<'a> {
    fn new(f: &'a dyn SmoothFn, radius: f64) -> Self {
        match f.support() {
            Some(_) => Prepared { windowed: None, f },
            None => Prepared { windowed: Some(Windowed { f, lo: -radius - 0.5, hi: radius + 0.5, ramp: WINDOW_RAMP }), f },
        }
    }

    fn get(&self) -> &dyn SmoothFn {
        match &self.windowed {
            Some(w) => w,
            None => self.f,
        }
    }
}

/// Σ_t w_t ∫ ∂f̃/∂z̄(x + iy_t(x)) K(x + iy_t(x)) dx with adaptive x-integration.
///
/// With `scaled`, the nodes are in u and y = uL⟨x⟩; otherwise they are y itself.
#[allow(clippy::too_many_arguments)]
fn adaptive_rows<K>(
    ext: &QuasiAnalyticExtension,
    breaks: &[f64],
    nodes: &[(f64, f64)],
    scaled: bool,
    kernel: &K,
    dim: usize,
    per_node: f64,
    max_evals: usize,
    tol: f64,
) -> Result<(CMat, f64, usize)>
where
    K: Fn(C64) -> Result<CMat> + Sync,
{
    let parts: Vec<Result<QuadResult<Vec<C64>>>> = nodes
        .par_iter()
        .map(|&(t, wt)| {
            let mut failure = None;
            let r = integrate_adaptive_vec(
                |x, buf: &mut [C64]| {
                    let jac = if scaled { ext.scale * (1.0 + x * x).sqrt() } else { 1.0 };
                    let y = t * jac;
                    let db = ext.dbar(x, y) * (wt * jac);
                    if db == C64::new(0.0, 0.0) {
                        buf.fill(C64::new(0.0, 0.0));
                        return;
                    }
                    match kernel(C64::new(x, y)) {
                        Ok(r) => {
                            for (o, v) in buf.iter_mut().zip(r.iter()) {
                                *o = v * db;
                            }
                        }
                        Err(e) => {
                            failure.get_or_insert(e);
                            buf.fill(C64::new(0.0, 0.0));
                        }
                    }
                },
                dim * dim,
                breaks,
                per_node,
                max_evals,
            );
            match failure {
                Some(e) => Err(e),
                None => r,
            }
        })
        .collect();
    let mut m = CMat::zeros(dim, dim);
    let mut err = 0.0;
    let mut evaluations = 0;
    for p in parts {
        let p = p?;
        m += CMat::from_column_slice(dim, dim, &p.value);
        err += p.error;
        evaluations += p.evaluations;
    }
    if evaluations > max_evals {
        return Err(Error::QuadratureNotConverged { achieved: err, requested: tol, evaluations });
    }
    Ok((m, err, evaluations))
}

fn sorted_breaks(g: &dyn SmoothFn) -> (f64, f64, Vec<f64>) {
    let (a, b) = g.support().unwrap();
    let mut pts = g.breakpoints();
    pts.extend([a, b]);
    pts.retain(|x| *x >= a && *x <= b);
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|x, y| (*x - *y).abs() < 1e-12);
    (a, b, pts)
}

fn hs_integral<K>(
    f: &dyn SmoothFn,
    n: usize,
    radius: f64,
    quad: &HsQuadrature,
    kernel: K,
    dim: usize,
) -> Result<HsResult>
where
    K: Fn(C64) -> Result<CMat> + Sync,
{
    if n == 0 {
        return Err(Error::InvalidParameter("extension order n must be at least 1".into()));
    }
    let x_ok = match quad.x_rule {
        XRule::Tensor { panels } => panels > 0,
        XRule::Adaptive { max_evals } => max_evals > 0 && quad.tol.is_some_and(|t| t > 0.0),
    };
    if !x_ok || quad.y_panels < 2 || quad.points == 0 || !(quad.y_min > 0.0 && quad.y_min < 1.0) {
        return Err(Error::InvalidParameter(
            "quadrature needs positive panel counts, 0 < y_min < 1 and a tolerance for adaptive x".into(),
        ));
    }
    if !(quad.cutoff_scale > 0.0) {
        return Err(Error::InvalidParameter("cutoff scale must be positive".into()));
    }
    let prepared = Prepared::new(f, radius);
    let g = prepared.get();
    let (a, b) = g.support().unwrap();
    let ext = QuasiAnalyticExtension { n, f: g, scale: quad.cutoff_scale };
    let breaks = g.breakpoints();
    // The skipped strip is 0 < y < y_min L⟨x⟩, where |∂f̃/∂z̄| ≤ |f⁽ⁿ⁺¹⁾| yⁿ/(2 n!)
    // and ‖(z−H)⁻¹‖ ≤ 1/y.
    let fact: f64 = (1..=n).map(|x| x as f64).product();
    let mass = integrate_adaptive(
        |x| g.derivative(n + 1, x).abs() * (1.0 + x * x).powf(0.5 * n as f64),
        &[a, b],
        1e-6,
        1_000_000,
    )
    .map(|r| r.value)
    .unwrap_or(f64::INFINITY);
    let sliver_bound = mass * (quad.y_min * quad.cutoff_scale).powi(n as i32) / (PI * n as f64 * fact)
        * (dim as f64).sqrt();
    let combine = |m: CMat| (&m + m.adjoint()) * C64::new(-1.0 / PI, 0.0);

    let (matrix, quad_err, nodes) = match quad.x_rule {
        XRule::Tensor { .. } => {
            let run = |q: &HsQuadrature| -> Result<(CMat, usize)> {
                let XRule::Tensor { panels } = q.x_rule else { unreachable!() };
                let xs = nodes_of(&broken_panels(a, b, &breaks, panels), q.points);
                let us = u_nodes(q.y_min, q.y_panels, q.points);
                Ok((combine(half_plane_sum(&ext, &xs, &us, &kernel, dim)?), xs.len() * us.len()))
            };
            let (fine, nodes) = run(quad)?;
            let (coarse, coarse_nodes) = run(&quad.coarsened())?;
            let err = frobenius(&(&fine - &coarse));
            (fine, err, nodes + coarse_nodes)
        }
        XRule::Adaptive { max_evals } => {
            let tol = quad.tol.unwrap();
            let us = u_nodes(quad.y_min, quad.y_panels, quad.points);
            // weights are inside the integrand; (−1/π)(M + M*) scales errors by at most 2/π
            let per_node = 0.5 * tol * PI / (2.0 * us.len() as f64);
            let (_, _, pts) = sorted_breaks(g);
            let (m, err, nodes) =
                adaptive_rows(&ext, &pts, &us, true, &kernel, dim, per_node, max_evals, tol)?;
            (combine(m), 2.0 / PI * err, nodes)
        }
    };
    let est_error = quad_err + sliver_bound;
    if let Some(tol) = quad.tol {
        if est_error > tol {
            return Err(Error::QuadratureNotConverged { achieved: est_error, requested: tol, evaluations: nodes });
        }
    }
    Ok(HsResult { matrix, est_error, sliver_bound, nodes })
}

/// f(H) by the Helffer–Sjöstrand formula.
///
/// Functions without compact support are multiplied by a plateau equal to 1
/// on a neighbourhood of the spectrum first, which does not change f(H).
pub fn hs_apply(h: &CMat, f: &dyn SmoothFn, n: usize, quad: &HsQuadrature) -> Result<HsResult> {
    check_hermitian(h)?;
    let dim = h.nrows();
    hs_integral(f, n, spectral_bound(h), quad, |z| resolvent(h, z), dim)
}

/// Contribution of the strips y_lo < |y| < y_hi to the Helffer–Sjöstrand
/// integral, for strips inside the region where the cutoff equals 1.
///
/// The x-integration is adaptive to `tol`; y uses `panels` uniform
/// Gauss–Legendre panels of `points` nodes.
#[allow(clippy::too_many_arguments)]
pub fn hs_strip(
    h: &CMat,
    f: &dyn SmoothFn,
    n: usize,
    y_lo: f64,
    y_hi: f64,
    panels: usize,
    points: usize,
    tol: f64,
) -> Result<CMat> {
    check_hermitian(h)?;
    if !(0.0 < y_lo && y_lo < y_hi && y_hi <= 0.1) {
        return Err(Error::InvalidParameter("strip must satisfy 0 < y_lo < y_hi <= 0.1".into()));
    }
    let dim = h.nrows();
    let prepared = Prepared::new(f, spectral_bound(h));
    let g = prepared.get();
    let ext = QuasiAnalyticExtension { n, f: g, scale: 1.0 };
    let (_, _, pts) = sorted_breaks(g);
    let ys = nodes_of(&uniform_panels(y_lo, y_hi, panels.max(1)), points.max(1));
    let (m, _, _) = adaptive_rows(&ext, &pts, &ys, false, &|z| resolvent(h, z), dim, tol, 50_000_000, tol)?;
    Ok((&m + m.adjoint()) * C64::new(-1.0 / PI, 0.0))
}

#[derive(Debug, Clone)]
pub struct ResponseResult {
    pub matrix: CMat,
    pub est_error: f64,
    /// Measured ‖f(H+V) − f(H)‖ / ‖V‖ in operator norm.
    pub constant: f64,
}

/// f(H+V) − f(H) from the resolvent identity (z−H−V)⁻¹ − (z−H)⁻¹ = (z−H−V)⁻¹V(z−H)⁻¹.
pub fn perturbation_response(
    h: &CMat,
    v: &CMat,
    f: &dyn SmoothFn,
    n: usize,
    quad: &HsQuadrature,
) -> Result<ResponseResult> {
    check_hermitian(h)?;
    check_hermitian(v)?;
    if v.shape() != h.shape() {
        return Err(Error::InvalidParameter("H and V must have the same shape".into()));
    }
    let hv = h + v;
    let dim = h.nrows();
    let radius = spectral_bound(h).max(spectral_bound(&hv));
    let res = hs_integral(
        f,
        n,
        radius,
        quad,
        |z| Ok(resolvent(&hv, z)? * v * resolvent(h, z)?),
        dim,
    )?;
    let vn = operator_norm(v);
    let constant = if vn > 0.0 { operator_norm(&res.matrix) / vn } else { 0.0 };
    Ok(ResponseResult { matrix: res.matrix, est_error: res.est_error, constant })
}

/// 𝖴 = e^{2πiχ_δ(H)} by spectral decomposition.
pub fn unitary_of(h: &CMat, chi: &SmoothSwitch) -> Result<CMat> {
    check_hermitian(h)?;
    Ok(hermitian_apply(h, |e| (2.0 * PI * I * chi.value(e)).exp()))
}

fn singular_values(m: &CMat) -> Vec<f64> {
    nalgebra::SVD::new(m.clone(), false, false).singular_values.iter().copied().collect()
}

pub fn operator_norm(m: &CMat) -> f64 {
    singular_values(m).into_iter().fold(0.0, f64::max)
}

/// p-norm of the singular values; p = ∞ gives the operator norm.
pub fn schatten_norm(m: &CMat, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidParameter(format!("Schatten index must be >= 1, got {p}")));
    }
    let s = singular_values(m);
    if p.is_infinite() {
        return Ok(s.into_iter().fold(0.0, f64::max));
    }
    Ok(s.iter().map(|x| x.powf(p)).sum::<f64>().powf(1.0 / p))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_derivatives_match_finite_differences() {
        for k in 0..6 {
            for &u in &[-0.7, -0.2, 0.1, 0.55, 0.9] {
                let h = 1e-5;
                let fd = (bump_derivative(k, u + h) - bump_derivative(k, u - h)) / (2.0 * h);
                let exact = bump_derivative(k + 1, u);
                assert!((fd - exact).abs() < 1e-5 * exact.abs().max(1.0), "k={k} u={u}");
            }
        }
    }

    #[test]
    fn switch_endpoints_and_monotonicity() {
        let chi = SmoothSwitch::new(0.7).unwrap();
        assert_eq!(chi.value(-0.7), 0.0);
        assert_eq!(chi.value(0.7), 1.0);
        assert!((chi.value(0.0) - 0.5).abs() < 1e-14);
        let mut prev = 0.0;
        for j in 0..=100 {
            let v = chi.value(-0.7 + 1.4 * j as f64 / 100.0);
            assert!(v >= prev - 1e-15 && (0.0..=1.0).contains(&v));
            prev = v;
        }
        assert_eq!(chi.derivative(1, 0.7), 0.0);
        let h = 1e-6;
        let fd = (chi.value(0.3 + h) - chi.value(0.3 - h)) / (2.0 * h);
        assert!((fd - chi.derivative(1, 0.3)).abs() < 1e-7);
    }

    #[test]
    fn plateau_shape() {
        assert_eq!(plateau(0, 0.5), 1.0);
        assert_eq!(plateau(0, -1.0), 1.0);
        assert_eq!(plateau(0, 2.0), 0.0);
        assert!((plateau(0, 1.5) - 0.5).abs() < 1e-14);
        assert!((plateau(0, -1.5) - 0.5).abs() < 1e-14);
        assert!(plateau(1, 1.5) < 0.0 && plateau(1, -1.5) > 0.0);
    }

    #[test]
    fn dbar_vanishes_to_order_n_near_axis() {
        let f = Bump { center: 0.0, radius: 2.0 };
        for n in 1..=4 {
            let ext = QuasiAnalyticExtension { n, f: &f, scale: 1.0 };
            let a = ext.dbar(0.4, 1e-2).norm();
            let b = ext.dbar(0.4, 1e-3).norm();
            let order = (a / b).log10();
            assert!((order - n as f64).abs() < 0.05, "n={n} order={order}");
        }
    }

    #[test]
    fn dbar_matches_finite_difference_of_extension() {
        let f = Bump { center: 0.3, radius: 1.5 };
        let ext = QuasiAnalyticExtension { n: 2, f: &f, scale: 0.7 };
        for &(x, y) in &[(0.5, 0.3), (-0.4, 1.2), (1.0, 2.0)] {
            let h = 1e-5;
            let dx = (ext.value(x + h, y) - ext.value(x - h, y)) / (2.0 * h);
            let dy = (ext.value(x, y + h) - ext.value(x, y - h)) / (2.0 * h);
            let fd = 0.5 * (dx + I * dy);
            assert!((fd - ext.dbar(x, y)).norm() < 1e-6, "({x},{y})");
        }
    }

    #[test]
    fn diagonal_case() {
        let h = CMat::from_diagonal(&nalgebra::dvector![C64::new(-1.0, 0.0), C64::new(1.0, 0.0)]);
        let f = Bump { center: 0.0, radius: 2.0 };
        let q = HsQuadrature::adaptive(1e-9);
        let r = hs_apply(&h, &f, 3, &q).unwrap();
        assert!((r.matrix[(0, 0)].re - f.value(-1.0)).abs() < 1e-8, "{}", r.matrix);
        assert!((r.matrix[(1, 1)].re - f.value(1.0)).abs() < 1e-8);
        assert!(r.matrix[(0, 1)].norm() < 1e-8);
    }

    #[test]
    fn constant_function() {
        let h = CMat::from_diagonal(&nalgebra::dvector![C64::new(-0.5, 0.0), C64::new(0.8, 0.0)]);
        let r = hs_apply(&h, &Constant(2.5), 3, &HsQuadrature::default()).unwrap();
        assert!(frobenius(&(r.matrix - identity(2) * C64::new(2.5, 0.0))) < 1e-7);
    }

    #[test]
    fn schatten_examples() {
        assert!((schatten_norm(&identity(4), 1.0).unwrap() - 4.0).abs() < 1e-12);
        let mut p = CMat::zeros(3, 3);
        p[(1, 1)] = C64::new(1.0, 0.0);
        for q in [1.0, 2.0, 3.5, f64::INFINITY] {
            assert!((schatten_norm(&p, q).unwrap() - 1.0).abs() < 1e-12);
        }
        assert!(schatten_norm(&p, 0.5).is_err());
    }

    #[test]
    fn unitary_of_outside_window_is_identity() {
        let h = CMat::from_diagonal(&nalgebra::dvector![C64::new(-2.0, 0.0), C64::new(1.5, 0.0)]);
        let u = unitary_of(&h, &SmoothSwitch::new(1.0).unwrap()).unwrap();
        assert!(frobenius(&(u - identity(2))) < 1e-12);
        let z = unitary_of(&CMat::zeros(3, 3), &SmoothSwitch::new(1.0).unwrap()).unwrap();
        assert!(frobenius(&(z + identity(3))) < 1e-12);
    }
}
