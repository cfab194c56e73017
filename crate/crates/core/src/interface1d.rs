//! The ζ-parametrised interface problem in one normal coordinate.
//!
//! For a mass wall m(x) the interface Hamiltonian at tangential momentum ζ is
//! Ĥ(ζ) = a_y ζ σ₃ + 𝔞 σ₋ + 𝔞ᵀ σ₊ with
//! 𝔞 = a_x ∂ₓ + m(x) + η(a_x² ∂ₓ² − a_y² ζ²). Derivatives are centred finite
//! differences on a uniform grid with zero values outside it, and the adjoint
//! is the exact transpose, so Ĥ(ζ)² = diag(a_y²ζ² + 𝔞ᵀ𝔞, a_y²ζ² + 𝔞𝔞ᵀ) holds
//! to rounding.
//!
//! Truncating the line produces two kinds of spurious gap states next to the
//! physical interface branch: partner modes stuck to the grid ends, and
//! (when η = 0) fermion doublers oscillating at the Nyquist frequency. Every
//! state is tagged with its interior weight and nearest-neighbour parity so
//! the two can be told apart.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::banded::BandMatrix;
use crate::calculus::{SmoothFn, SmoothSwitch};
use crate::clifford::build_interface_gamma;
use crate::eigs::{eigs_window, eigs_window_from, WindowOptions};
use crate::error::{Error, Result};
use crate::linalg::{CMat, C64};

/// Shape of the transition between the two asymptotic masses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProfileKind {
    Tanh,
    Erf,
    /// Linear ramp on [−width, width].
    PiecewiseLinear,
    /// Linear interpolation through the given nodes.
    Tabulated { x: Vec<f64>, m: Vec<f64> },
}

/// An additive well `amplitude · sech(x / width)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Well {
    pub amplitude: f64,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassProfile {
    #[serde(flatten)]
    pub kind: ProfileKind,
    pub m_minus: f64,
    pub m_plus: f64,
    #[serde(default = "default_width")]
    pub width: f64,
    #[serde(default)]
    pub well: Option<Well>,
}

fn default_width() -> f64 {
    1.0
}

impl MassProfile {
    fn smooth(kind: ProfileKind, m_minus: f64, m_plus: f64, width: f64) -> Result<Self> {
        let p = MassProfile { kind, m_minus, m_plus, width, well: None };
        p.validate()?;
        Ok(p)
    }

    pub fn tanh(m_minus: f64, m_plus: f64, width: f64) -> Result<Self> {
        Self::smooth(ProfileKind::Tanh, m_minus, m_plus, width)
    }

    pub fn erf(m_minus: f64, m_plus: f64, width: f64) -> Result<Self> {
        Self::smooth(ProfileKind::Erf, m_minus, m_plus, width)
    }

    pub fn piecewise_linear(m_minus: f64, m_plus: f64, width: f64) -> Result<Self> {
        Self::smooth(ProfileKind::PiecewiseLinear, m_minus, m_plus, width)
    }

    /// Interpolating profile; the asymptotes are the first and last values.
    pub fn tabulated(x: Vec<f64>, m: Vec<f64>) -> Result<Self> {
        if x.len() < 2 || x.len() != m.len() {
            return Err(Error::InvalidParameter("tabulated profile needs >= 2 matching nodes".into()));
        }
        let width = (x[x.len() - 1] - x[0]) / 2.0;
        let p = MassProfile {
            m_minus: m[0],
            m_plus: m[m.len() - 1],
            kind: ProfileKind::Tabulated { x, m },
            width,
            well: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_well(mut self, amplitude: f64, width: f64) -> Result<Self> {
        self.well = Some(Well { amplitude, width });
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m_minus.is_finite() && self.m_plus.is_finite()) {
            return Err(Error::InvalidParameter("asymptotic masses must be finite".into()));
        }
        if self.m0() == 0.0 {
            return Err(Error::ZeroMass);
        }
        if !(self.width > 0.0 && self.width.is_finite()) {
            return Err(Error::InvalidParameter(format!("width must be positive, got {}", self.width)));
        }
        if let Some(w) = self.well {
            if !(w.width > 0.0 && w.amplitude.is_finite()) {
                return Err(Error::InvalidParameter("well needs positive width".into()));
            }
        }
        if let ProfileKind::Tabulated { x, m } = &self.kind {
            if x.len() < 2 || x.len() != m.len() || x.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::InvalidParameter("tabulated nodes must increase strictly".into()));
            }
            if m[0] != self.m_minus || m[m.len() - 1] != self.m_plus {
                return Err(Error::InvalidParameter("tabulated end values must equal m_minus, m_plus".into()));
            }
        }
        Ok(())
    }

    /// min(|m₋|, |m₊|).
    pub fn m0(&self) -> f64 {
        self.m_minus.abs().min(self.m_plus.abs())
    }

    pub fn max_abs_mass(&self) -> f64 {
        let r = self.support_halfwidth();
        (0..=2000)
            .map(|i| self.value(-r + 2.0 * r * i as f64 / 2000.0).abs())
            .fold(self.m_minus.abs().max(self.m_plus.abs()), f64::max)
    }

    /// ½(sgn m₊ − sgn m₋).
    pub fn eps(&self) -> i32 {
        ((self.m_plus.signum() - self.m_minus.signum()) / 2.0).round() as i32
    }

    /// Radius outside which m equals its asymptotes (to 1e−14 for smooth kinds).
    pub fn support_halfwidth(&self) -> f64 {
        let core = match &self.kind {
            ProfileKind::Tanh => 17.0 * self.width,
            ProfileKind::Erf => 6.0 * self.width,
            ProfileKind::PiecewiseLinear => self.width,
            ProfileKind::Tabulated { x, .. } => x[0].abs().max(x[x.len() - 1].abs()),
        };
        match self.well {
            Some(w) => core.max(34.0 * w.width),
            None => core,
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        let mid = 0.5 * (self.m_plus + self.m_minus);
        let half = 0.5 * (self.m_plus - self.m_minus);
        let t = x / self.width;
        let base = match &self.kind {
            ProfileKind::Tanh => mid + half * t.tanh(),
            ProfileKind::Erf => mid + half * libm::erf(t),
            ProfileKind::PiecewiseLinear => mid + half * t.clamp(-1.0, 1.0),
            ProfileKind::Tabulated { x: xs, m } => interpolate(xs, m, x),
        };
        match self.well {
            Some(w) => base + w.amplitude / (x / w.width).cosh(),
            None => base,
        }
    }

    /// Whether m is monotone, checked on a fine sample of its transition region.
    pub fn is_monotone(&self) -> bool {
        let r = self.support_halfwidth();
        let n = 4000;
        let vals: Vec<f64> = (0..=n).map(|i| self.value(-r + 2.0 * r * i as f64 / n as f64)).collect();
        let tol = 1e-13 * self.max_abs_mass().max(1.0);
        let up = vals.windows(2).all(|w| w[1] >= w[0] - tol);
        let down = vals.windows(2).all(|w| w[1] <= w[0] + tol);
        up || down
    }
}

fn interpolate(xs: &[f64], ms: &[f64], x: f64) -> f64 {
    if x <= xs[0] {
        return ms[0];
    }
    if x >= xs[xs.len() - 1] {
        return ms[ms.len() - 1];
    }
    let k = xs.partition_point(|&v| v <= x) - 1;
    let t = (x - xs[k]) / (xs[k + 1] - xs[k]);
    ms[k] + t * (ms[k + 1] - ms[k])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        if !(x_max > x_min) || n < 8 {
            return Err(Error::InvalidParameter("grid needs x_max > x_min and at least 8 nodes".into()));
        }
        Ok(Grid1D { x_min, x_max, n })
    }

    /// Symmetric grid of spacing close to `h` with enough room for the zero
    /// mode tails to fall below 1e−10 in weight.
    pub fn for_profile(profile: &MassProfile, h: f64) -> Result<Self> {
        let m0 = profile.m0();
        let core = match profile.kind {
            ProfileKind::Tanh | ProfileKind::Erf => 3.0 * profile.width,
            _ => profile.support_halfwidth(),
        };
        let half = (core + 12.0 / m0).max(5.0 * profile.width + 5.0 / m0);
        let cells = (2.0 * half / h).ceil() as usize;
        Grid1D::new(-half, half, cells + 1)
    }

    pub fn h(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.h()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    /// Checks the headroom and resolution requirements for `profile`.
    pub fn validate_for(&self, profile: &MassProfile) -> Result<()> {
        let need = 10.0 * profile.width + 10.0 / profile.m0();
        if self.x_max - self.x_min < need {
            return Err(Error::InvalidParameter(format!(
                "grid length {} below required {need}",
                self.x_max - self.x_min
            )));
        }
        let hm = self.h() * profile.max_abs_mass();
        if hm >= 0.1 {
            return Err(Error::InvalidParameter(format!("h·max|m| = {hm} must be below 0.1")));
        }
        Ok(())
    }

    fn interior(&self, i: usize) -> bool {
        let c = 0.5 * (self.x_min + self.x_max);
        (self.x(i) - c).abs() < 0.25 * (self.x_max - self.x_min)
    }

    fn tail_len(&self) -> usize {
        (self.n / 20).max(1)
    }
}

/// Accuracy order of the centred difference stencils.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StencilOrder {
    Second,
    #[default]
    Fourth,
}

impl StencilOrder {
    /// (offset, first-derivative weight, second-derivative weight), unscaled by h.
    pub(crate) fn weights(self) -> &'static [(i64, f64, f64)] {
        match self {
            StencilOrder::Second => &[(-1, -0.5, 1.0), (0, 0.0, -2.0), (1, 0.5, 1.0)],
            StencilOrder::Fourth => &[
                (-2, 1.0 / 12.0, -1.0 / 12.0),
                (-1, -2.0 / 3.0, 4.0 / 3.0),
                (0, 0.0, -2.5),
                (1, 2.0 / 3.0, 4.0 / 3.0),
                (2, -1.0 / 12.0, -1.0 / 12.0),
            ],
        }
    }

    pub(crate) fn reach(self) -> usize {
        match self {
            StencilOrder::Second => 1,
            StencilOrder::Fourth => 2,
        }
    }
}

/// Supremum of admissible gap half-widths, (1 + 2|η|m₀)^{−1/2} m₀.
pub fn delta_bound(m0: f64, eta: f64) -> Result<f64> {
    if !(m0 > 0.0) {
        return Err(Error::InvalidParameter(format!("m0 must be positive, got {m0}")));
    }
    if eta.abs() >= 1.0 / (2.0 * m0) {
        return Err(Error::InvalidParameter(format!("|eta| = {} must be below 1/(2 m0)", eta.abs())));
    }
    Ok(m0 / (1.0 + 2.0 * eta.abs() * m0).sqrt())
}

/// A wall with its regulator, cone velocities and discretisation order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterfaceProblem {
    pub profile: MassProfile,
    pub eta: f64,
    pub ax: f64,
    pub ay: f64,
    #[serde(default)]
    pub order: StencilOrder,
}

impl InterfaceProblem {
    pub fn new(profile: MassProfile, eta: f64) -> Self {
        InterfaceProblem { profile, eta, ax: 1.0, ay: 1.0, order: StencilOrder::default() }
    }

    pub fn with_cone(mut self, ax: f64, ay: f64) -> Result<Self> {
        if ax == 0.0 || ay == 0.0 || !ax.is_finite() || !ay.is_finite() {
            return Err(Error::SingularCone { det: ax * ay });
        }
        self.ax = ax;
        self.ay = ay;
        Ok(self)
    }

    pub fn with_order(mut self, order: StencilOrder) -> Self {
        self.order = order;
        self
    }

    /// Slope of the interface branch, sgn(a_x)·ε·a_y.
    pub fn expected_slope(&self) -> f64 {
        self.ax.signum() * self.profile.eps() as f64 * self.ay
    }

    /// Default gap half-width, 0.9 × delta_bound.
    pub fn default_delta(&self) -> Result<f64> {
        Ok(0.9 * delta_bound(self.profile.m0(), self.eta)?)
    }

    fn masses(&self, grid: &Grid1D) -> Vec<f64> {
        grid.nodes().into_iter().map(|x| self.profile.value(x)).collect()
    }

    /// The matrix of 𝔞 at `zeta` with regulator `eta`.
    fn a_matrix(&self, eta: f64, zeta: f64, grid: &Grid1D) -> BandMatrix {
        let h = grid.h();
        let n = grid.n;
        let r = self.order.reach();
        let masses = self.masses(grid);
        let shift = -eta * self.ay * self.ay * zeta * zeta;
        let mut a = BandMatrix::zeros(n, r, r);
        for i in 0..n {
            for &(o, d1, d2) in self.order.weights() {
                let j = i as i64 + o;
                if j < 0 || j >= n as i64 {
                    continue;
                }
                let mut v = self.ax * d1 / h + eta * self.ax * self.ax * d2 / (h * h);
                if o == 0 {
                    v += masses[i] + shift;
                }
                a.add(i, j as usize, C64::new(v, 0.0));
            }
        }
        a
    }

    /// 𝔞 at `zeta` (real entries stored in a complex band matrix).
    pub fn assemble_a(&self, zeta: f64, grid: &Grid1D) -> Result<BandMatrix> {
        grid.validate_for(&self.profile)?;
        Ok(self.a_matrix(self.eta, zeta, grid))
    }

    /// Ĥ(ζ) in the interleaved ordering (node i, spinor s) ↦ 2i + s, built
    /// from the two-dimensional interface representation (σ₂, σ₃, σ₁).
    pub fn assemble_hamiltonian(&self, zeta: f64, grid: &Grid1D) -> Result<BandMatrix> {
        grid.validate_for(&self.profile)?;
        Ok(self.hamiltonian_with(self.eta, zeta, grid))
    }

    fn hamiltonian_with(&self, eta: f64, zeta: f64, grid: &Grid1D) -> BandMatrix {
        let rep = build_interface_gamma(2).expect("d = 2 interface representation");
        let (g_normal, g_tangent, g_mass) = (&rep.gammas[0], &rep.gammas[1], &rep.gammas[2]);
        let h = grid.h();
        let n = grid.n;
        let r = self.order.reach();
        let bw = 2 * r + 1;
        let masses = self.masses(grid);
        let shift = -eta * self.ay * self.ay * zeta * zeta;
        let mut out = BandMatrix::zeros(2 * n, bw, bw);
        for i in 0..n {
            for &(o, d1, d2) in self.order.weights() {
                let j = i as i64 + o;
                if j < 0 || j >= n as i64 {
                    continue;
                }
                let j = j as usize;
                // −i a_x ∂ₓ contracts with the normal matrix.
                let deriv = C64::new(0.0, -self.ax * d1 / h);
                let mut mass = eta * self.ax * self.ax * d2 / (h * h);
                let mut tangent = 0.0;
                if o == 0 {
                    mass += masses[i] + shift;
                    tangent = self.ay * zeta;
                }
                for s in 0..2 {
                    for t in 0..2 {
                        let v = deriv * g_normal[(s, t)]
                            + g_tangent[(s, t)] * tangent
                            + g_mass[(s, t)] * mass;
                        if v != C64::new(0.0, 0.0) {
                            out.add(2 * i + s, 2 * j + t, C64::new(v.re, 0.0));
                        }
                    }
                }
            }
        }
        out
    }
}

/// Whether to add the grid regulator h/2 when η = 0 while counting kernels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Stabilizer {
    #[default]
    Auto,
    Off,
}

#[derive(Debug, Clone)]
pub struct ZeroModes {
    pub dim_ker_a: usize,
    pub dim_ker_a_star: usize,
    pub eps: i32,
    /// Regulator actually used in 𝔞 (differs from η when the grid regulator was added).
    pub eta_used: f64,
    pub stabilized: bool,
    /// Singular values of 𝔞 below twice the threshold.
    pub small_singular_values: Vec<f64>,
    pub threshold: f64,
    /// Unit grid functions (Σ hψᵢ² = 1) spanning the interior kernel of 𝔞.
    pub kernel_a: Vec<Vec<f64>>,
    pub kernel_a_star: Vec<Vec<f64>>,
}

/// Real orthonormal basis of the span of `cols` (complex vectors of a real problem).
fn real_span(cols: &[Vec<C64>], cut: f64) -> Vec<DVector<f64>> {
    if cols.is_empty() {
        return vec![];
    }
    let n = cols[0].len();
    let mut m = DMatrix::<f64>::zeros(n, 2 * cols.len());
    for (k, v) in cols.iter().enumerate() {
        for i in 0..n {
            m[(i, 2 * k)] = v[i].re;
            m[(i, 2 * k + 1)] = v[i].im;
        }
    }
    let svd = m.svd(true, false);
    let u = svd.u.expect("left singular vectors");
    svd.singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > cut)
        .map(|(k, _)| u.column(k).into_owned())
        .collect()
}

/// Within span(basis), the directions concentrated in the grid interior.
fn interior_modes(basis: &[DVector<f64>], grid: &Grid1D) -> Vec<DVector<f64>> {
    if basis.is_empty() {
        return vec![];
    }
    let k = basis.len();
    let mut p = DMatrix::<f64>::zeros(k, k);
    for a in 0..k {
        for b in 0..k {
            p[(a, b)] = (0..grid.n).filter(|&i| grid.interior(i)).map(|i| basis[a][i] * basis[b][i]).sum();
        }
    }
    let eig = SymmetricEigen::new(p);
    let mut out = vec![];
    for (j, &w) in eig.eigenvalues.iter().enumerate() {
        if w > 0.5 {
            let mut v = DVector::<f64>::zeros(grid.n);
            for a in 0..k {
                v += &basis[a] * eig.eigenvectors[(a, j)];
            }
            out.push(v);
        }
    }
    out
}

/// Σψᵢψᵢ₊₁ / Σψᵢ²: near +1 for smooth functions, near −1 for doublers.
fn neighbour_parity(v: &[f64]) -> f64 {
    let num: f64 = v.windows(2).map(|w| w[0] * w[1]).sum();
    let den: f64 = v.iter().map(|x| x * x).sum();
    num / den
}

fn normalise_grid_fn(v: &DVector<f64>, h: f64) -> Vec<f64> {
    let norm = (h * v.norm_squared()).sqrt();
    let peak = v.iter().cloned().fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
    let s = peak.signum() / norm;
    v.iter().map(|x| x * s).collect()
}

/// Kernel dimensions of 𝔞 and 𝔞ᵀ at ζ = 0, with the grid regulator when η = 0.
pub fn zero_modes(problem: &InterfaceProblem, grid: &Grid1D) -> Result<ZeroModes> {
    zero_modes_with(problem, grid, Stabilizer::Auto)
}

pub fn zero_modes_with(problem: &InterfaceProblem, grid: &Grid1D, stab: Stabilizer) -> Result<ZeroModes> {
    grid.validate_for(&problem.profile)?;
    let stabilized = problem.eta == 0.0 && stab == Stabilizer::Auto;
    let eta_used = if stabilized { grid.h() / 2.0 } else { problem.eta };
    let threshold = problem.profile.m0() / 10.0;
    let ham = problem.hamiltonian_with(eta_used, 0.0, grid);
    let win = eigs_window(&ham, 0.0, 2.0 * threshold, &WindowOptions::default())?;
    let mut small: Vec<f64> = vec![];
    let mut kernel_vecs: Vec<usize> = vec![];
    for (k, &e) in win.values.iter().enumerate() {
        if e.abs() >= 0.5 * threshold {
            return Err(Error::AmbiguousKernel { sigma: e.abs(), threshold });
        }
        small.push(e.abs());
        kernel_vecs.push(k);
    }
    small.sort_by(f64::total_cmp);
    small.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * threshold.max(1.0));

    let n = grid.n;
    let split = |comp: usize| -> Vec<Vec<C64>> {
        kernel_vecs
            .iter()
            .map(|&k| (0..n).map(|i| win.vectors[(2 * i + comp, k)]).collect())
            .collect()
    };
    let h = grid.h();
    let keep = |modes: Vec<DVector<f64>>| -> Vec<Vec<f64>> {
        modes
            .into_iter()
            .filter(|v| neighbour_parity(v.as_slice()) > 0.0)
            .map(|v| normalise_grid_fn(&v, h))
            .collect()
    };
    // 𝔞 sits in the lower-left block, so its kernel lives in the upper spinor slot.
    let kernel_a = keep(interior_modes(&real_span(&split(0), 0.3), grid));
    let kernel_a_star = keep(interior_modes(&real_span(&split(1), 0.3), grid));
    let eps = kernel_a.len() as i32 - kernel_a_star.len() as i32;
    Ok(ZeroModes {
        dim_ker_a: kernel_a.len(),
        dim_ker_a_star: kernel_a_star.len(),
        eps,
        eta_used,
        stabilized,
        small_singular_values: small,
        threshold,
        kernel_a,
        kernel_a_star,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StateKind {
    /// Localised near the wall and smooth on the grid scale.
    Interface,
    /// Concentrated near the ends of the truncated line.
    Boundary,
    /// Interior but oscillating at the Nyquist frequency.
    Doubler,
}

#[derive(Debug, Clone)]
pub struct GapState {
    pub energy: f64,
    /// Unit eigenvector of Ĥ(ζ) in interleaved ordering.
    pub vector: Vec<f64>,
    pub interior_weight: f64,
    pub parity: f64,
    /// Weight in the outer 5% of the grid on each side.
    pub tail_mass: f64,
    pub kind: StateKind,
}

#[derive(Debug, Clone)]
pub struct GapSpectrum {
    pub zeta: f64,
    pub delta: f64,
    pub states: Vec<GapState>,
    /// Set when an interface state carries tail mass above 1e−8.
    pub decay_warning: bool,
}

impl GapSpectrum {
    pub fn interface_states(&self) -> impl Iterator<Item = &GapState> {
        self.states.iter().filter(|s| s.kind == StateKind::Interface)
    }

    /// Largest mismatch |E₊ + E₋| over interface states with |E| > |a_y ζ| + margin.
    pub fn pair_asymmetry(&self, speed: f64, margin: f64) -> f64 {
        let big: Vec<f64> = self
            .interface_states()
            .map(|s| s.energy)
            .filter(|e| e.abs() > (speed * self.zeta).abs() + margin)
            .collect();
        big.iter()
            .map(|&e| big.iter().map(|&f| (e + f).abs()).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    }
}

fn realify(col: &[C64]) -> Vec<f64> {
    let peak = col.iter().cloned().fold(C64::new(0.0, 0.0), |a, b| if b.norm() > a.norm() { b } else { a });
    let phase = if peak.norm() > 0.0 { peak.conj() / peak.norm() } else { C64::new(1.0, 0.0) };
    let mut v: Vec<f64> = col.iter().map(|z| (z * phase).re).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    v
}

fn classify(vector: Vec<f64>, energy: f64, grid: &Grid1D) -> GapState {
    let n = grid.n;
    let interior_weight: f64 =
        (0..n).filter(|&i| grid.interior(i)).map(|i| vector[2 * i].powi(2) + vector[2 * i + 1].powi(2)).sum();
    let t = grid.tail_len();
    let tail_mass: f64 = (0..t)
        .chain(n - t..n)
        .map(|i| vector[2 * i].powi(2) + vector[2 * i + 1].powi(2))
        .sum();
    let up: Vec<f64> = (0..n).map(|i| vector[2 * i]).collect();
    let lo: Vec<f64> = (0..n).map(|i| vector[2 * i + 1]).collect();
    let num: f64 = up.windows(2).chain(lo.windows(2)).map(|w| w[0] * w[1]).sum();
    let parity = num / vector.iter().map(|x| x * x).sum::<f64>();
    let kind = if interior_weight < 0.5 {
        StateKind::Boundary
    } else if parity < 0.0 {
        StateKind::Doubler
    } else {
        StateKind::Interface
    };
    GapState { energy, vector, interior_weight, parity, tail_mass, kind }
}

/// All eigenpairs of the discretised Ĥ(ζ) with |E| < delta, classified.
pub fn gap_spectrum(problem: &InterfaceProblem, zeta: f64, grid: &Grid1D, delta: f64) -> Result<GapSpectrum> {
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!("delta must be positive, got {delta}")));
    }
    let ham = problem.assemble_hamiltonian(zeta, grid)?;
    let win = eigs_window(&ham, 0.0, delta, &WindowOptions::default())?;
    let states: Vec<GapState> = (0..win.values.len())
        .map(|k| {
            let col: Vec<C64> = win.vectors.column(k).iter().cloned().collect();
            classify(realify(&col), win.values[k], grid)
        })
        .collect();
    let decay_warning = states.iter().any(|s| s.kind == StateKind::Interface && s.tail_mass > 1e-8);
    Ok(GapSpectrum { zeta, delta, states, decay_warning })
}

#[derive(Debug, Clone, Copy)]
pub struct TraceOptions {
    /// Eigenvalues closer than this are treated as one cluster and the
    /// branch is continued by projection onto their span. Defaults to a
    /// quarter of the energy step between samples.
    pub cluster_tol: Option<f64>,
    pub min_overlap: f64,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions { cluster_tol: None, min_overlap: 0.9 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EdgeBranch {
    pub zeta_samples: Vec<f64>,
    pub energies: Vec<f64>,
    #[serde(skip)]
    pub eigenvectors: Vec<Vec<f64>>,
    /// Overlap with the previous sample (1 for the first).
    pub overlaps: Vec<f64>,
    pub tail_masses: Vec<f64>,
    pub eps: i32,
    /// sgn(a_x)·a_y, so that E(ζ) ≈ eps·speed·ζ.
    pub speed: f64,
}

impl EdgeBranch {
    /// Least-squares slope of E against ζ.
    pub fn slope(&self) -> Option<f64> {
        let n = self.zeta_samples.len();
        if n < 2 {
            return None;
        }
        let mz = self.zeta_samples.iter().sum::<f64>() / n as f64;
        let me = self.energies.iter().sum::<f64>() / n as f64;
        let sxy: f64 = self.zeta_samples.iter().zip(&self.energies).map(|(z, e)| (z - mz) * (e - me)).sum();
        let sxx: f64 = self.zeta_samples.iter().map(|z| (z - mz).powi(2)).sum();
        Some(sxy / sxx)
    }

    pub fn min_overlap(&self) -> f64 {
        self.overlaps.iter().cloned().fold(1.0, f64::min)
    }

    /// CSV rows (zeta, E, overlap, tail_mass).
    pub fn rows(&self) -> Vec<[f64; 4]> {
        (0..self.zeta_samples.len())
            .map(|i| [self.zeta_samples[i], self.energies[i], self.overlaps[i], self.tail_masses[i]])
            .collect()
    }
}

/// `n` evenly spaced samples strictly inside (−half, half).
pub fn symmetric_samples(half: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| -half + half * (2 * k + 1) as f64 / n as f64).collect()
}

struct Sample {
    values: Vec<f64>,
    vectors: Vec<Vec<f64>>,
    ham: BandMatrix,
}

fn rayleigh(ham: &BandMatrix, v: &[f64]) -> f64 {
    let x: Vec<C64> = v.iter().map(|&r| C64::new(r, 0.0)).collect();
    let mut y = vec![C64::new(0.0, 0.0); x.len()];
    ham.matvec(&x, &mut y);
    x.iter().zip(&y).map(|(a, b)| (a.conj() * b).re).sum()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Best continuation of `prev` among the (clustered) eigenvectors of `s`.
fn continue_branch(prev: &[f64], s: &Sample, cluster_tol: f64) -> Option<(Vec<f64>, f64, f64)> {
    let mut best: Option<(Vec<f64>, f64, f64)> = None;
    let mut start = 0;
    while start < s.values.len() {
        let mut end = start + 1;
        while end < s.values.len() && s.values[end] - s.values[end - 1] < cluster_tol {
            end += 1;
        }
        let mut proj = vec![0.0; prev.len()];
        for k in start..end {
            let c = dot(&s.vectors[k], prev);
            proj.iter_mut().zip(&s.vectors[k]).for_each(|(p, v)| *p += c * v);
        }
        let overlap = proj.iter().map(|x| x * x).sum::<f64>().sqrt();
        if overlap > best.as_ref().map_or(0.0, |b| b.2) {
            proj.iter_mut().for_each(|x| *x /= overlap);
            let energy = if end - start == 1 { s.values[start] } else { rayleigh(&s.ham, &proj) };
            best = Some((proj, energy, overlap));
        }
        start = end;
    }
    best
}

/// Follows the interface branch across sorted `zetas` by maximal eigenvector overlap.
pub fn trace_branch(problem: &InterfaceProblem, grid: &Grid1D, zetas: &[f64]) -> Result<EdgeBranch> {
    trace_branch_with(problem, grid, zetas, &TraceOptions::default())
}

pub fn trace_branch_with(
    problem: &InterfaceProblem,
    grid: &Grid1D,
    zetas: &[f64],
    opts: &TraceOptions,
) -> Result<EdgeBranch> {
    if !problem.profile.is_monotone() {
        return Err(Error::InvalidParameter("branch tracking needs a monotone profile".into()));
    }
    if zetas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("zeta samples must be strictly increasing".into()));
    }
    let delta = problem.default_delta()?;
    let speed = problem.ax.signum() * problem.ay;
    if let Some(z) = zetas.iter().find(|z| z.abs() >= delta) {
        return Err(Error::InvalidParameter(format!("zeta = {z} outside (−δ, δ) with δ = {delta}")));
    }
    let eps = zero_modes(problem, grid)?.eps;
    let mut branch = EdgeBranch {
        zeta_samples: vec![],
        energies: vec![],
        eigenvectors: vec![],
        overlaps: vec![],
        tail_masses: vec![],
        eps,
        speed,
    };
    if eps == 0 || zetas.is_empty() {
        return Ok(branch);
    }
    // Sequential so each solve can start from the previous eigenvectors.
    let mut samples: Vec<Sample> = Vec::with_capacity(zetas.len());
    let mut guess: Option<CMat> = None;
    for &z in zetas {
        let ham = problem.assemble_hamiltonian(z, grid)?;
        let half = delta.max((speed * z).abs() + 0.1 * delta);
        let win = eigs_window_from(&ham, 0.0, half, &WindowOptions::default(), guess.as_ref())?;
        let vectors = (0..win.values.len())
            .map(|k| realify(&win.vectors.column(k).iter().cloned().collect::<Vec<_>>()))
            .collect();
        samples.push(Sample { values: win.values, vectors, ham });
        guess = Some(win.vectors);
    }
    let cluster_tol = opts.cluster_tol.unwrap_or_else(|| {
        let spacing = zetas.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        if spacing.is_finite() { 0.25 * spacing * speed.abs() } else { 1e-6 }
    });

    let target = eps as f64 * speed * zetas[0];
    let first = samples[0]
        .values
        .iter()
        .zip(&samples[0].vectors)
        .map(|(&e, v)| classify(v.clone(), e, grid))
        .filter(|s| s.kind == StateKind::Interface)
        .min_by(|a, b| (a.energy - target).abs().total_cmp(&(b.energy - target).abs()))
        .ok_or(Error::BranchLost { zeta: zetas[0], overlap: 0.0 })?;
    branch.zeta_samples.push(zetas[0]);
    branch.energies.push(first.energy);
    branch.overlaps.push(1.0);
    branch.tail_masses.push(first.tail_mass);
    branch.eigenvectors.push(first.vector);

    for (k, s) in samples.iter().enumerate().skip(1) {
        let prev = branch.eigenvectors.last().expect("non-empty branch");
        let (mut v, e, overlap) =
            continue_branch(prev, s, cluster_tol).unwrap_or((vec![], f64::NAN, 0.0));
        if overlap < opts.min_overlap {
            return Err(Error::BranchLost { zeta: zetas[k], overlap });
        }
        if dot(&v, prev) < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        let st = classify(v, e, grid);
        branch.zeta_samples.push(zetas[k]);
        branch.energies.push(e);
        branch.overlaps.push(overlap);
        branch.tail_masses.push(st.tail_mass);
        branch.eigenvectors.push(st.vector);
    }
    Ok(branch)
}

/// Unrounded (1/2πi)∮ U'U* dζ for U(ζ) = exp(2πi χ(E(ζ))).
pub fn branch_winding_raw(branch: &EdgeBranch, chi: &SmoothSwitch) -> Result<f64> {
    if branch.eps == 0 || branch.energies.is_empty() {
        return Ok(0.0);
    }
    let lo = branch.energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = branch.energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if lo > -chi.delta || hi < chi.delta {
        return Err(Error::IncompleteCoverage { lo, hi, need_lo: -chi.delta, need_hi: chi.delta });
    }
    let phases: Vec<C64> = branch
        .energies
        .iter()
        .map(|&e| C64::from_polar(1.0, 2.0 * std::f64::consts::PI * chi.value(e)))
        .collect();
    let total: f64 = phases.windows(2).map(|w| (w[1] * w[0].conj()).arg()).sum();
    Ok(total / (2.0 * std::f64::consts::PI))
}

/// The winding of the edge unitary along the branch, rounded.
pub fn branch_winding(branch: &EdgeBranch, chi: &SmoothSwitch) -> Result<i64> {
    Ok(branch_winding_raw(branch, chi)?.round() as i64)
}

#[derive(Debug, Clone)]
pub struct HigherDMode {
    pub eps: i32,
    /// Normalised transverse mode on the grid; empty when eps = 0.
    pub mode: Vec<f64>,
    /// max ‖N(φ₀ ⊗ e)‖ over spinors e in the σ₃ = −ε sector, where N is the
    /// normal part of the d-dimensional interface operator.
    pub residual: f64,
    /// Sign of σ₃ on the spinor factor carrying the mode.
    pub sigma3_sector: i32,
}

/// Transverse zero mode of a wall in d ∈ {3, 4} at η = 0.
pub fn higher_d_zero_mode(profile: &MassProfile, d: usize, grid: &Grid1D) -> Result<HigherDMode> {
    if d != 3 && d != 4 {
        return Err(Error::DimensionOutOfRange { d, reason: "transverse reduction needs d in {3, 4}".into() });
    }
    if !profile.is_monotone() {
        return Err(Error::InvalidParameter("transverse reduction needs a monotone profile".into()));
    }
    let problem = InterfaceProblem::new(profile.clone(), 0.0);
    let count = zero_modes(&problem, grid)?;
    if count.eps == 0 {
        return Ok(HigherDMode { eps: 0, mode: vec![], residual: 0.0, sigma3_sector: 0 });
    }
    let shape = zero_modes_with(&problem, grid, Stabilizer::Off)?;
    let mode = if count.eps > 0 { shape.kernel_a.first() } else { shape.kernel_a_star.first() }
        .cloned()
        .ok_or(Error::AmbiguousKernel { sigma: f64::NAN, threshold: count.threshold })?;

    // Normal part: (−i∂) contracted with γ_{d−1} plus m(x) contracted with γ_d.
    let rep = build_interface_gamma(d)?;
    let g_normal = &rep.gammas[d - 1];
    let g_mass = &rep.gammas[d];
    let sector = -count.eps;
    let size = rep.size();
    let half = size / 2;
    let spinors: Vec<usize> = if sector > 0 { (0..half).collect() } else { (half..size).collect() };
    let a = problem.a_matrix(0.0, 0.0, grid);
    let n = grid.n;
    let h = grid.h();
    // (−i∂)ψ = −i(𝔞 − m)ψ with 𝔞 − m the difference matrix.
    let x: Vec<C64> = mode.iter().map(|&r| C64::new(r, 0.0)).collect();
    let mut dpsi = vec![C64::new(0.0, 0.0); n];
    a.matvec(&x, &mut dpsi);
    let masses = problem.masses(grid);
    for i in 0..n {
        dpsi[i] -= x[i] * masses[i];
    }
    let mut residual: f64 = 0.0;
    for &e in &spinors {
        let mut norm2 = 0.0;
        for i in 0..n {
            for s in 0..size {
                let v = C64::new(0.0, -1.0) * dpsi[i] * g_normal[(s, e)] + g_mass[(s, e)] * x[i] * masses[i];
                norm2 += h * v.norm_sqr();
            }
        }
        residual = residual.max(norm2.sqrt());
    }
    Ok(HigherDMode { eps: count.eps, mode, residual, sigma3_sector: sector })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tanh_problem(eta: f64) -> (InterfaceProblem, Grid1D) {
        let p = MassProfile::tanh(-1.0, 1.0, 1.0).unwrap();
        let g = Grid1D::for_profile(&p, 1.0 / 32.0).unwrap();
        (InterfaceProblem::new(p, eta), g)
    }

    #[test]
    fn delta_bound_examples() {
        assert_eq!(delta_bound(1.0, 0.0).unwrap(), 1.0);
        assert!((delta_bound(1.0, 0.25).unwrap() - 1.5f64.powf(-0.5)).abs() < 1e-15);
        assert!(delta_bound(1.0, 0.5).is_err());
    }

    #[test]
    fn hamiltonian_blocks_are_a_and_its_transpose() {
        let (p, g) = tanh_problem(0.1);
        let a = p.assemble_a(0.3, &g).unwrap();
        let h = p.assemble_hamiltonian(0.3, &g).unwrap();
        for i in 0..g.n {
            for j in i.saturating_sub(3)..(i + 3).min(g.n) {
                assert!((h.get(2 * i + 1, 2 * j) - a.get(i, j)).norm() < 1e-12);
                assert!((h.get(2 * i, 2 * j + 1) - a.get(j, i)).norm() < 1e-12);
            }
            assert!((h.get(2 * i, 2 * i).re - 0.3).abs() < 1e-14);
            assert!((h.get(2 * i + 1, 2 * i + 1).re + 0.3).abs() < 1e-14);
        }
        assert!(h.hermiticity_defect() < 1e-12);
    }

    #[test]
    fn kernel_counts_follow_the_sign_change() {
        let (p, g) = tanh_problem(0.0);
        let z = zero_modes(&p, &g).unwrap();
        assert_eq!((z.dim_ker_a, z.dim_ker_a_star, z.eps), (1, 0, 1));
        assert!(z.stabilized);
        let flipped = InterfaceProblem::new(MassProfile::tanh(1.0, -1.0, 1.0).unwrap(), 0.0);
        let z = zero_modes(&flipped, &g).unwrap();
        assert_eq!((z.dim_ker_a, z.dim_ker_a_star, z.eps), (0, 1, -1));
        let well = MassProfile::tanh(1.0, 1.0, 1.0).unwrap().with_well(0.5, 1.0).unwrap();
        let g2 = Grid1D::for_profile(&well, 1.0 / 32.0).unwrap();
        let z = zero_modes(&InterfaceProblem::new(well, 0.0), &g2).unwrap();
        assert_eq!((z.dim_ker_a, z.dim_ker_a_star, z.eps), (0, 0, 0));
    }

    #[test]
    fn gap_spectrum_has_one_interface_state() {
        let (p, g) = tanh_problem(0.0);
        for zeta in [0.1, -0.3] {
            let s = gap_spectrum(&p, zeta, &g, 0.9).unwrap();
            let e: Vec<f64> = s.interface_states().map(|s| s.energy).collect();
            assert_eq!(e.len(), 1, "{e:?}");
            assert!((e[0] - zeta).abs() < 1e-8);
            assert!(!s.decay_warning);
        }
    }

    #[test]
    fn branch_slope_and_winding() {
        let (p, g) = tanh_problem(0.1);
        let b = trace_branch(&p, &g, &symmetric_samples(0.5, 21)).unwrap();
        assert!((b.slope().unwrap() - 1.0).abs() < 1e-6);
        assert!(b.min_overlap() > 0.99);
        let chi = SmoothSwitch::new(0.4).unwrap();
        assert_eq!(branch_winding(&b, &chi).unwrap(), 1);
        let narrow = EdgeBranch { energies: b.energies.iter().map(|e| e + 2.0).collect(), ..b.clone() };
        assert!(matches!(branch_winding(&narrow, &chi), Err(Error::IncompleteCoverage { .. })));
    }

    #[test]
    fn profiles_are_continuous_and_reach_asymptotes() {
        for p in [
            MassProfile::tanh(-1.0, 2.0, 1.5).unwrap(),
            MassProfile::erf(-1.0, 2.0, 1.5).unwrap(),
            MassProfile::piecewise_linear(-1.0, 2.0, 1.5).unwrap(),
        ] {
            let r = p.support_halfwidth();
            assert!((p.value(r) - 2.0).abs() < 1e-14);
            assert!((p.value(-r) + 1.0).abs() < 1e-14);
            assert!(p.is_monotone());
        }
        let t = MassProfile::tabulated(vec![-1.0, 0.0, 2.0], vec![-1.0, 0.5, 1.0]).unwrap();
        assert!((t.value(1.0) - 0.75).abs() < 1e-15);
        let w = MassProfile::tanh(1.0, 1.0, 1.0).unwrap().with_well(-0.5, 1.0).unwrap();
        assert!(!w.is_monotone());
    }
}
