//! Spectral flow on a flux-threaded cylinder.
//!
//! The two-dimensional wall operator H_V = H_η[m(x)] + V is discretised on
//! x ∈ [x_min, x_max] with zero values outside and on a periodic y-circle of
//! length L_y whose seam hopping carries the phase e^{iθ}. As θ runs over one
//! flux quantum the allowed tangential momenta shift by 2π/L_y, so every
//! chiral branch moves exactly one level through a mid-gap energy E⋆. The net
//! signed count of those crossings for states living near the wall is the
//! interface index.
//!
//! The Dirichlet ends of the x-interval carry their own chiral modes, and on
//! the finite matrix their flow cancels the interface flow exactly. Crossings
//! are therefore attributed by interior weight (|x − x_c| < L_x/4), and the
//! total over all states is checked against the change in the inertia count
//! below E⋆.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::banded::BandMatrix;
use crate::clifford::build_interface_gamma;
use crate::eigs::{eigs_window, WindowOptions};
use crate::error::{Error, Result};
use crate::interface1d::{MassProfile, StencilOrder};
use crate::linalg::{hermitian_eigh, CMat, C64};
use crate::symbol::{DiracModel, MassSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationKind {
    /// v(x, y)·I.
    ScalarPotential,
    /// v(x, y) times the mass matrix of every block.
    MassType,
    /// Gaussian bumps with random Hermitian coefficients coupling all blocks.
    MatrixValuedRandom,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Rect {
    fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x_min && x <= self.x_max && y >= self.y_min && y <= self.y_max
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub kind: PerturbationKind,
    /// Largest operator norm of V over the grid.
    pub amplitude: f64,
    pub support: Rect,
    pub correlation_length: f64,
    pub seed: u64,
}

impl Perturbation {
    pub fn new(kind: PerturbationKind, amplitude: f64, support: Rect, correlation_length: f64, seed: u64) -> Self {
        Perturbation { kind, amplitude, support, correlation_length, seed }
    }

    /// Local matrices V(x_i, y_j) at the sites where V is non-zero.
    pub fn sample(&self, grid: &RibbonGrid, blocks: usize) -> Result<Vec<(usize, usize, CMat)>> {
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(Error::InvalidParameter(format!("amplitude must be non-negative, got {}", self.amplitude)));
        }
        if !(self.correlation_length > 0.0) {
            return Err(Error::InvalidParameter("correlation length must be positive".into()));
        }
        let s = &self.support;
        if !(s.x_max > s.x_min && s.y_max > s.y_min) {
            return Err(Error::InvalidParameter("support rectangle is empty".into()));
        }
        if self.amplitude == 0.0 {
            return Ok(vec![]);
        }
        let dim = 2 * blocks;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let ell = self.correlation_length;
        let area = (s.x_max - s.x_min) * (s.y_max - s.y_min);
        let mean = (area / (ell * ell)).max(1.0);
        let count = (Poisson::new(mean).expect("positive mean").sample(&mut rng) as usize).max(1);
        let mass = mass_matrix(blocks);
        let bumps: Vec<(f64, f64, CMat)> = (0..count)
            .map(|_| {
                let cx = rng.random_range(s.x_min..s.x_max);
                let cy = rng.random_range(s.y_min..s.y_max);
                let coef = match self.kind {
                    PerturbationKind::ScalarPotential => {
                        CMat::identity(dim, dim) * C64::new(rng.sample::<f64, _>(StandardNormal), 0.0)
                    }
                    PerturbationKind::MassType => &mass * C64::new(rng.sample::<f64, _>(StandardNormal), 0.0),
                    PerturbationKind::MatrixValuedRandom => {
                        let g = CMat::from_fn(dim, dim, |_, _| {
                            C64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
                        });
                        (&g + g.adjoint()) * C64::new(0.5, 0.0)
                    }
                };
                (cx, cy, coef)
            })
            .collect();
        let mut sites = vec![];
        let mut sup: f64 = 0.0;
        for ix in 0..grid.nx {
            for iy in 0..grid.ny {
                let (x, y) = (grid.x(ix), grid.y(iy));
                if !s.contains(x, y) {
                    continue;
                }
                let mut v = CMat::zeros(dim, dim);
                for (cx, cy, coef) in &bumps {
                    let r2 = (x - cx).powi(2) + (y - cy).powi(2);
                    v += coef * C64::new((-r2 / (2.0 * ell * ell)).exp(), 0.0);
                }
                let (vals, _) = hermitian_eigh(&v);
                sup = vals.iter().fold(sup, |a, b| a.max(b.abs()));
                sites.push((ix, iy, v));
            }
        }
        if sup > 0.0 {
            let scale = C64::new(self.amplitude / sup, 0.0);
            sites.iter_mut().for_each(|(_, _, v)| *v *= scale);
        }
        Ok(sites)
    }
}

/// Block-diagonal mass matrix: the mass gamma on every two-component block.
fn mass_matrix(blocks: usize) -> CMat {
    let rep = build_interface_gamma(2).expect("d = 2 interface representation");
    let mut m = CMat::zeros(2 * blocks, 2 * blocks);
    for j in 0..blocks {
        m.view_mut((2 * j, 2 * j), (2, 2)).copy_from(&rep.gammas[2]);
    }
    m
}

/// Cylinder grid: `nx` nodes on [x_min, x_max], `ny` nodes on the y-circle of length `ly`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RibbonGrid {
    pub nx: usize,
    pub ny: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub ly: f64,
    #[serde(default = "second_order")]
    pub order: StencilOrder,
}

fn second_order() -> StencilOrder {
    StencilOrder::Second
}

impl RibbonGrid {
    pub fn new(nx: usize, ny: usize, x_min: f64, x_max: f64, ly: f64) -> Result<Self> {
        if nx < 8 || ny < 4 || !(x_max > x_min) || !(ly > 0.0) {
            return Err(Error::InvalidParameter("ribbon grid needs nx >= 8, ny >= 4 and positive lengths".into()));
        }
        Ok(RibbonGrid { nx, ny, x_min, x_max, ly, order: StencilOrder::Second })
    }

    /// x ∈ [−6, 6] and a circle of 12 nodes, both with spacing 0.095.
    pub fn desk_default() -> Self {
        let h: f64 = 0.095;
        let nx = (12.0 / h).round() as usize + 1;
        let hx = 12.0 / (nx - 1) as f64;
        RibbonGrid { nx, ny: 12, x_min: -6.0, x_max: 6.0, ly: 12.0 * hx, order: StencilOrder::Second }
    }

    pub fn hx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nx - 1) as f64
    }

    pub fn hy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.hx()
    }

    pub fn y(&self, j: usize) -> f64 {
        j as f64 * self.hy()
    }

    /// Halves both spacings, keeping the domain.
    pub fn refined(&self) -> Self {
        RibbonGrid { nx: 2 * self.nx - 1, ny: 2 * self.ny, ..*self }
    }

    fn interior(&self, ix: usize) -> bool {
        let c = 0.5 * (self.x_min + self.x_max);
        (self.x(ix) - c).abs() < 0.25 * (self.x_max - self.x_min)
    }
}

/// Cone velocities and profile of each block, read off a wall model.
#[derive(Debug, Clone)]
struct BlockData {
    ax: f64,
    ay: f64,
    profile: MassProfile,
}

fn block_data(model: &DiracModel, profiles: &[MassProfile]) -> Result<Vec<BlockData>> {
    if model.d() != 2 {
        return Err(Error::DimensionOutOfRange { d: model.d(), reason: "the ribbon is two-dimensional".into() });
    }
    if profiles.len() != model.blocks.len() {
        return Err(Error::InvalidParameter(format!(
            "{} profiles for {} blocks",
            profiles.len(),
            model.blocks.len()
        )));
    }
    model
        .blocks
        .iter()
        .zip(profiles)
        .map(|(b, p)| {
            let cone = b
                .diagonal_cone()
                .ok_or_else(|| Error::InvalidParameter("ribbon blocks need diagonal cone matrices".into()))?;
            let (lo, hi) = match b.mass {
                MassSpec::Wall { minus, plus } => (minus, plus),
                MassSpec::Constant(m) => (m, m),
            };
            if (p.m_minus - lo).abs() > 1e-12 || (p.m_plus - hi).abs() > 1e-12 {
                return Err(Error::InvalidParameter("profile asymptotes must match the block masses".into()));
            }
            Ok(BlockData { ax: cone[0], ay: cone[1], profile: p.clone() })
        })
        .collect()
}

fn model_m0(blocks: &[BlockData]) -> f64 {
    blocks.iter().map(|b| b.profile.m0()).fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone)]
pub struct RibbonOperator {
    pub grid: RibbonGrid,
    pub theta: f64,
    pub blocks: usize,
    /// Hermitian band matrix in the ordering (x slow, y, spinor fast).
    pub matrix: BandMatrix,
}

impl RibbonOperator {
    pub fn dim(&self) -> usize {
        self.matrix.n()
    }

    /// Weight of `v` on sites with |x − x_c| < L_x/4.
    pub fn interior_weight(&self, v: &[C64]) -> f64 {
        let per = self.grid.ny * 2 * self.blocks;
        (0..self.grid.nx)
            .filter(|&ix| self.grid.interior(ix))
            .map(|ix| v[ix * per..(ix + 1) * per].iter().map(|z| z.norm_sqr()).sum::<f64>())
            .sum()
    }
}

/// Assembles H_V on the cylinder with seam phase e^{iθ}.
pub fn assemble_ribbon(
    model: &DiracModel,
    profiles: &[MassProfile],
    v: Option<&Perturbation>,
    grid: &RibbonGrid,
    theta: f64,
) -> Result<RibbonOperator> {
    let blocks = block_data(model, profiles)?;
    let eta = model.eta;
    let m_max = blocks.iter().map(|b| b.profile.m_minus.abs().max(b.profile.m_plus.abs())).fold(0.0, f64::max);
    let h = grid.hx().max(grid.hy());
    if h * m_max >= 0.1 {
        return Err(Error::InvalidParameter(format!("h·max|m±| = {} must be below 0.1", h * m_max)));
    }
    let m0 = model_m0(&blocks);
    let sites = match v {
        Some(p) => {
            let margin = 5.0 / m0;
            let s = &p.support;
            if s.x_min < grid.x_min + margin || s.x_max > grid.x_max - margin {
                return Err(Error::SupportViolation(format!(
                    "support x ∈ [{}, {}] must stay {margin} inside [{}, {}]",
                    s.x_min, s.x_max, grid.x_min, grid.x_max
                )));
            }
            if s.y_min < 0.0 || s.y_max > grid.ly {
                return Err(Error::SupportViolation(format!("support y must lie in [0, {}]", grid.ly)));
            }
            p.sample(grid, blocks.len())?
        }
        None => vec![],
    };

    let rep = build_interface_gamma(2)?;
    let (gx, gy, gm) = (&rep.gammas[0], &rep.gammas[1], &rep.gammas[2]);
    let (nx, ny) = (grid.nx, grid.ny);
    let nb = blocks.len();
    let dim = 2 * nb;
    let per = ny * dim;
    let reach = grid.order.reach();
    let band = reach * per + dim;
    let mut m = BandMatrix::zeros(nx * per, band, band);
    let (hx, hy) = (grid.hx(), grid.hy());
    let idx = |ix: usize, iy: usize, c: usize| (ix * ny + iy) * dim + c;
    let seam = C64::from_polar(1.0, theta);
    let weights = grid.order.weights();

    for (j, b) in blocks.iter().enumerate() {
        let masses: Vec<f64> = (0..nx).map(|ix| b.profile.value(grid.x(ix))).collect();
        for ix in 0..nx {
            for iy in 0..ny {
                for &(o, d1, d2) in weights {
                    // x-direction: −i a_x ∂ₓ γ_x + η a_x² ∂ₓ² γ_m, Dirichlet.
                    let jx = ix as i64 + o;
                    if jx >= 0 && jx < nx as i64 {
                        let deriv = C64::new(0.0, -b.ax * d1 / hx);
                        let mut mass = eta * b.ax * b.ax * d2 / (hx * hx);
                        if o == 0 {
                            mass += masses[ix];
                        }
                        for s in 0..2 {
                            for t in 0..2 {
                                let val = deriv * gx[(s, t)] + gm[(s, t)] * mass;
                                if val.norm() > 0.0 {
                                    m.add(idx(ix, iy, 2 * j + s), idx(jx as usize, iy, 2 * j + t), val);
                                }
                            }
                        }
                    }
                    // y-direction: −i a_y ∂_y γ_y + η a_y² ∂_y² γ_m, twisted periodic.
                    if o == 0 {
                        let mass = eta * b.ay * b.ay * d2 / (hy * hy);
                        for s in 0..2 {
                            for t in 0..2 {
                                let val = gm[(s, t)] * mass;
                                if val.norm() > 0.0 {
                                    m.add(idx(ix, iy, 2 * j + s), idx(ix, iy, 2 * j + t), val);
                                }
                            }
                        }
                        continue;
                    }
                    let raw = iy as i64 + o;
                    let (jy, phase) = if raw < 0 {
                        ((raw + ny as i64) as usize, seam.conj())
                    } else if raw >= ny as i64 {
                        ((raw - ny as i64) as usize, seam)
                    } else {
                        (raw as usize, C64::new(1.0, 0.0))
                    };
                    let deriv = C64::new(0.0, -b.ay * d1 / hy);
                    let mass = eta * b.ay * b.ay * d2 / (hy * hy);
                    for s in 0..2 {
                        for t in 0..2 {
                            let val = (deriv * gy[(s, t)] + gm[(s, t)] * mass) * phase;
                            if val.norm() > 0.0 {
                                m.add(idx(ix, iy, 2 * j + s), idx(ix, jy, 2 * j + t), val);
                            }
                        }
                    }
                }
            }
        }
    }
    for (ix, iy, v) in &sites {
        for s in 0..dim {
            for t in 0..dim {
                if v[(s, t)].norm() > 0.0 {
                    m.add(idx(*ix, *iy, s), idx(*ix, *iy, t), v[(s, t)]);
                }
            }
        }
    }
    Ok(RibbonOperator { grid: *grid, theta, blocks: nb, matrix: m })
}

#[derive(Debug, Clone, Copy)]
pub struct FlowOptions {
    /// Half-width of the eigenvalue window around E⋆; defaults to m₀/2.
    pub window: Option<f64>,
    /// Flux samples in one period (at least 16).
    pub theta_steps: usize,
    /// Largest admissible distance of a crossing sum from an integer.
    pub integrality_tol: f64,
    /// More eigenvalues than this in the window means the gap has filled.
    pub max_window_states: usize,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions { window: None, theta_steps: 32, integrality_tol: 0.2, max_window_states: 64 }
    }
}

/// Window eigenvalues at one flux value.
#[derive(Debug, Clone, Serialize)]
pub struct ThetaSample {
    pub theta: f64,
    pub energies: Vec<f64>,
    pub interior_weights: Vec<f64>,
    /// Number of eigenvalues of the full operator below E⋆.
    pub count_below: usize,
    #[serde(skip)]
    vectors: CMat,
}

#[derive(Debug, Clone, Serialize)]
pub struct Crossing {
    pub theta_from: f64,
    pub theta_to: f64,
    /// +1 upward through E⋆, −1 downward.
    pub direction: i64,
    pub interface: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct FlowResult {
    /// Net upward crossings of E⋆ by states near the wall.
    pub flow: i64,
    /// Net crossings by states at the x-ends of the cylinder.
    pub boundary_flow: i64,
    pub e_star: f64,
    pub window: f64,
    /// Largest distance of a summed squared overlap from an integer.
    pub integrality_defect: f64,
    pub crossings: Vec<Crossing>,
    pub samples: Vec<ThetaSample>,
}

fn sample_at(
    model: &DiracModel,
    profiles: &[MassProfile],
    v: Option<&Perturbation>,
    grid: &RibbonGrid,
    theta: f64,
    e_star: f64,
    window: f64,
    opts: &FlowOptions,
) -> Result<ThetaSample> {
    let op = assemble_ribbon(model, profiles, v, grid, theta)?;
    let win = eigs_window(&op.matrix, e_star, window, &WindowOptions::default())?;
    if win.values.len() > opts.max_window_states {
        return Err(Error::GapClosed {
            theta,
            detail: format!("{} eigenvalues within {window} of E* = {e_star}", win.values.len()),
        });
    }
    if let Some(e) = win.values.iter().find(|e| (*e - e_star).abs() < 1e-9) {
        return Err(Error::GapClosed { theta, detail: format!("eigenvalue {e} sits at E* = {e_star}; shift E*") });
    }
    let interior_weights = (0..win.values.len())
        .map(|k| op.interior_weight(win.vectors.column(k).as_slice()))
        .collect();
    Ok(ThetaSample {
        theta,
        energies: win.values,
        interior_weights,
        count_below: op.matrix.count_below(e_star),
        vectors: win.vectors,
    })
}

/// Net spectral flow through `e_star` of states near the wall over one flux quantum.
pub fn spectral_flow(
    model: &DiracModel,
    profiles: &[MassProfile],
    v: Option<&Perturbation>,
    grid: &RibbonGrid,
    e_star: f64,
    opts: &FlowOptions,
) -> Result<FlowResult> {
    if opts.theta_steps < 16 {
        return Err(Error::InvalidParameter(format!("theta_steps must be >= 16, got {}", opts.theta_steps)));
    }
    let blocks = block_data(model, profiles)?;
    let m0 = model_m0(&blocks);
    let window = opts.window.unwrap_or(0.5 * m0);
    if e_star.abs() + window >= m0 {
        return Err(Error::InvalidParameter(format!(
            "window E* ± {window} must lie inside the bulk gap (−{m0}, {m0})"
        )));
    }
    let thetas: Vec<f64> = (0..opts.theta_steps).map(|k| 2.0 * PI * k as f64 / opts.theta_steps as f64).collect();
    let samples: Vec<ThetaSample> = thetas
        .par_iter()
        .map(|&t| sample_at(model, profiles, v, grid, t, e_star, window, opts))
        .collect::<Result<_>>()?;

    let mut crossings = vec![];
    let (mut flow, mut boundary_flow) = (0i64, 0i64);
    let mut integrality_defect: f64 = 0.0;
    for k in 0..samples.len() {
        let a = &samples[k];
        // θ = 2π gives the same matrix as θ = 0.
        let b = &samples[(k + 1) % samples.len()];
        let theta_to = if k + 1 == samples.len() { 2.0 * PI } else { b.theta };
        let overlaps: DMatrix<f64> = (a.vectors.adjoint() * &b.vectors).map(|z| z.norm_sqr());
        let mut up = [0.0f64; 2];
        let mut down = [0.0f64; 2];
        for i in 0..a.energies.len() {
            for j in 0..b.energies.len() {
                let w = overlaps[(i, j)];
                let inner = usize::from(a.interior_weights[i].max(b.interior_weights[j]) > 0.5);
                if a.energies[i] < e_star && b.energies[j] > e_star {
                    up[inner] += w;
                } else if a.energies[i] > e_star && b.energies[j] < e_star {
                    down[inner] += w;
                }
            }
        }
        let lost = |x: f64| (x - x.round()).abs() > opts.integrality_tol;
        if up.iter().chain(&down).any(|&x| lost(x)) {
            let worst = up.iter().chain(&down).map(|x| 1.0 - (x - x.round()).abs()).fold(1.0, f64::min);
            return Err(Error::TrackingLost { theta_from: a.theta, theta_to, overlap: worst });
        }
        integrality_defect = up.iter().chain(&down).map(|x| (x - x.round()).abs()).fold(integrality_defect, f64::max);
        let net = [(up[0] - down[0]).round() as i64, (up[1] - down[1]).round() as i64];
        let inertia = a.count_below as i64 - b.count_below as i64;
        if net[0] + net[1] != inertia {
            return Err(Error::TrackingLost { theta_from: a.theta, theta_to, overlap: 0.0 });
        }
        for (inner, &n) in net.iter().enumerate() {
            for _ in 0..n.abs() {
                crossings.push(Crossing { theta_from: a.theta, theta_to, direction: n.signum(), interface: inner == 1 });
            }
        }
        flow += net[1];
        boundary_flow += net[0];
    }
    Ok(FlowResult { flow, boundary_flow, e_star, window, integrality_defect, crossings, samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbol::{identity_flat, DiracBlock};

    fn wall_model(minus: f64, plus: f64, eta: f64) -> (DiracModel, Vec<MassProfile>) {
        let b = DiracBlock::wall(2, identity_flat(2), minus, plus, eta).unwrap();
        (DiracModel::new(vec![b]).unwrap(), vec![MassProfile::tanh(minus, plus, 1.0).unwrap()])
    }

    #[test]
    fn operator_is_hermitian_and_gauge_periodic() {
        let (model, prof) = wall_model(-1.0, 1.0, 0.1);
        let g = RibbonGrid::new(127, 8, -6.0, 6.0, 0.76).unwrap();
        let a = assemble_ribbon(&model, &prof, None, &g, 0.7).unwrap();
        assert!(a.matrix.hermiticity_defect() < 1e-12);
        let h0 = assemble_ribbon(&model, &prof, None, &g, 0.3).unwrap().matrix.to_dense();
        let h1 = assemble_ribbon(&model, &prof, None, &g, 0.3 + 2.0 * PI).unwrap().matrix.to_dense();
        assert!((h0 - h1).map(|z| z.norm()).max() < 1e-12);
    }

    #[test]
    fn support_must_keep_its_margin() {
        let (model, prof) = wall_model(-1.0, 1.0, 0.1);
        let g = RibbonGrid::desk_default();
        let rect = Rect { x_min: -2.0, x_max: 1.0, y_min: 0.0, y_max: 1.0 };
        let v = Perturbation::new(PerturbationKind::ScalarPotential, 0.3, rect, 0.5, 1);
        assert!(matches!(
            assemble_ribbon(&model, &prof, Some(&v), &g, 0.0),
            Err(Error::SupportViolation(_))
        ));
    }

    #[test]
    fn perturbation_is_hermitian_bounded_and_supported() {
        let g = RibbonGrid::desk_default();
        let rect = Rect { x_min: -1.0, x_max: 1.0, y_min: 0.1, y_max: 1.0 };
        for kind in [PerturbationKind::ScalarPotential, PerturbationKind::MassType, PerturbationKind::MatrixValuedRandom] {
            let v = Perturbation::new(kind, 0.4, rect, 0.4, 7);
            let sites = v.sample(&g, 2).unwrap();
            let mut sup: f64 = 0.0;
            for (ix, iy, m) in &sites {
                assert!(rect.contains(g.x(*ix), g.y(*iy)));
                assert!((m - m.adjoint()).map(|z| z.norm()).max() < 1e-14);
                sup = hermitian_eigh(m).0.iter().fold(sup, |a, b| a.max(b.abs()));
            }
            assert!((sup - 0.4).abs() < 1e-12);
            assert_eq!(sites.len(), v.sample(&g, 2).unwrap().len());
        }
    }

    #[test]
    fn unperturbed_wall_flows_once() {
        let (model, prof) = wall_model(-1.0, 1.0, 0.1);
        let r = spectral_flow(&model, &prof, None, &RibbonGrid::desk_default(), 0.3, &FlowOptions::default()).unwrap();
        assert_eq!(r.flow, 1);
        assert_eq!(r.boundary_flow, -1);
    }
}
