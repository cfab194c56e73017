//! Numerical checks of the geometric identities that turn spatial traces into
//! determinants.
//!
//! * Two dimensions, scalar form: with 𝒰(x) = (x₁ + ix₂)/|x|,
//!   ∫(1 − 𝒰(x)/𝒰(y₁+x))(1 − 𝒰(y₁+x)/𝒰(y₂+x))(1 − 𝒰(y₂+x)/𝒰(x)) dx = 2πi·(y₁ ∧ y₂).
//! * Two dimensions, matrix form: the same integral written with
//!   F(x) = x̂·(σ₁, σ₂) and the projector (I − σ₃)/2.
//! * Three dimensions: with 𝒰(x) = x̂·σ,
//!   ∫ tr (𝒰(y₃+x) − 𝒰(y₂+x))(𝒰(y₂+x) − 𝒰(y₁+x))(𝒰(y₁+x) − 𝒰(y₀+x)) dx
//!   = (8/3)·iπ·Det(y₃ − y₀, y₂ − y₀, y₁ − y₀).
//!
//! The integrands are bounded (every factor has norm at most 2) and decay like
//! |x|⁻³, but the |x|⁻³ term is odd, so partial integrals over balls converge
//! like R⁻².

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{c, det_real, C64};
use crate::quadrature::{integrate_adaptive, sphere_rule};

#[derive(Debug, Clone, Serialize)]
pub struct IdentityCheckResult {
    /// Numerical value of the integral.
    pub lhs: C64,
    /// Closed form.
    pub rhs: C64,
    /// |lhs − rhs| / max(|rhs|, 1e−12).
    pub rel_error: f64,
    /// Estimated absolute error of `lhs` (one standard error for Monte Carlo).
    pub est_error: f64,
    /// Partial integrals over balls of radius R, increasing in R.
    pub cutoff_sequence: Vec<(f64, C64)>,
    pub method: String,
    pub evaluations: usize,
}

impl IdentityCheckResult {
    fn new(lhs: C64, rhs: C64, est_error: f64, cutoff_sequence: Vec<(f64, C64)>, method: &str, evaluations: usize) -> Self {
        let rel_error = (lhs - rhs).norm() / rhs.norm().max(1e-12);
        IdentityCheckResult { lhs, rhs, rel_error, est_error, cutoff_sequence, method: method.into(), evaluations }
    }

    /// |lhs − rhs| in units of the estimated error.
    pub fn deviation_in_errors(&self) -> f64 {
        (self.lhs - self.rhs).norm() / self.est_error.max(f64::MIN_POSITIVE)
    }
}

fn wedge(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

/// (x₁ + ix₂)/|x|, with 𝒰(0) = 1 (a null set).
fn u2(x: [f64; 2]) -> C64 {
    let r = x[0].hypot(x[1]);
    if r == 0.0 {
        C64::new(1.0, 0.0)
    } else {
        C64::new(x[0] / r, x[1] / r)
    }
}

fn scalar_integrand(x: [f64; 2], y1: [f64; 2], y2: [f64; 2]) -> C64 {
    let u0 = u2(x);
    let u1 = u2([x[0] + y1[0], x[1] + y1[1]]);
    let uy2 = u2([x[0] + y2[0], x[1] + y2[1]]);
    let one = C64::new(1.0, 0.0);
    (one - u0 * u1.conj()) * (one - u1 * uy2.conj()) * (one - uy2 * u0.conj())
}

/// tr (I − σ₃)/2 · F₀(F₀ − F₂)(F₂ − F₁)(F₁ − F₀) with F = x̂·(σ₁, σ₂).
fn matrix_integrand(x: [f64; 2], y1: [f64; 2], y2: [f64; 2]) -> C64 {
    // F(x) = [[0, ū], [u, 0]]; products are tracked as 2×2 arrays.
    type M = [[C64; 2]; 2];
    let f = |p: [f64; 2]| -> M {
        let u = u2(p);
        let z = C64::new(0.0, 0.0);
        [[z, u.conj()], [u, z]]
    };
    let sub = |a: &M, b: &M| -> M {
        [[a[0][0] - b[0][0], a[0][1] - b[0][1]], [a[1][0] - b[1][0], a[1][1] - b[1][1]]]
    };
    let mul = |a: &M, b: &M| -> M {
        let mut out = [[C64::new(0.0, 0.0); 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        out
    };
    let f0 = f(x);
    let f1 = f([x[0] + y1[0], x[1] + y1[1]]);
    let f2 = f([x[0] + y2[0], x[1] + y2[1]]);
    let p = mul(&mul(&mul(&f0, &sub(&f0, &f2)), &sub(&f2, &f1)), &sub(&f1, &f0));
    // (I − σ₃)/2 keeps the lower-right entry.
    p[1][1]
}

/// Radii 0 < R₀ < … < R_max at which partial integrals are recorded.
fn cutoff_radii(r_max: f64, scale: f64) -> Vec<f64> {
    let mut radii = vec![r_max];
    let mut r = r_max;
    while radii.len() < 5 && r / 2.0 > 4.0 * scale {
        r /= 2.0;
        radii.push(r);
    }
    radii.reverse();
    radii
}

/// Least-squares fit of a + b/R + c/R² to the partial integrals; returns (a, residual).
pub fn extrapolate(sequence: &[(f64, C64)]) -> (C64, f64) {
    let n = sequence.len();
    let cols = 3.min(n);
    let m = DMatrix::<f64>::from_fn(n, cols, |i, j| sequence[i].0.powi(-(j as i32)));
    let fit = |part: &dyn Fn(C64) -> f64| -> (f64, f64) {
        let rhs = DVector::<f64>::from_fn(n, |i, _| part(sequence[i].1));
        let svd = m.clone().svd(true, true);
        let coef = svd.solve(&rhs, 1e-14).expect("least squares");
        let resid = (&m * &coef - &rhs).norm();
        (coef[0], resid)
    };
    let (re, r1) = fit(&|z| z.re);
    let (im, r2) = fit(&|z| z.im);
    (C64::new(re, im), r1.hypot(r2))
}

fn planar_check(
    y1: [f64; 2],
    y2: [f64; 2],
    r_max: f64,
    tol: f64,
    integrand: fn([f64; 2], [f64; 2], [f64; 2]) -> C64,
    method: &str,
) -> Result<IdentityCheckResult> {
    let n1 = y1[0].hypot(y1[1]);
    let n2 = y2[0].hypot(y2[1]);
    if n1 == 0.0 && n2 == 0.0 {
        return Err(Error::InvalidParameter("y1 and y2 must not both vanish".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tol must be positive, got {tol}")));
    }
    let scale = n1.max(n2);
    if !(r_max > 8.0 * scale) {
        return Err(Error::InvalidParameter(format!("cutoff R = {r_max} must exceed 8·max|y| = {}", 8.0 * scale)));
    }
    let rhs = C64::new(0.0, 2.0 * PI * wedge(y1, y2));
    let mut angles: Vec<f64> = [y1, y2]
        .iter()
        .filter(|y| y[0] != 0.0 || y[1] != 0.0)
        .map(|y| (-y[1]).atan2(-y[0]).rem_euclid(2.0 * PI))
        .collect();
    angles.extend([0.0, 2.0 * PI]);
    angles.sort_by(f64::total_cmp);
    angles.dedup();

    let radii = cutoff_radii(r_max, scale);
    let mut breaks = vec![0.0];
    for r in [n1, n2] {
        if r > 0.0 && r < radii[0] {
            breaks.push(r);
        }
    }
    breaks.push(radii[0]);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();

    let tol_scale = tol * (2.0 * PI * scale * scale).max(1.0);
    let inner_tol = 1e-3 * tol_scale / radii[radii.len() - 1];
    let mut evaluations = 0usize;
    let shell = |lo_breaks: &[f64], evaluations: &mut usize| -> Result<C64> {
        let res = integrate_adaptive(
            |r: f64| {
                let inner = integrate_adaptive(
                    |phi: f64| integrand([r * phi.cos(), r * phi.sin()], y1, y2),
                    &angles,
                    inner_tol,
                    200_000,
                );
                match inner {
                    Ok(v) => v.value * r,
                    Err(_) => C64::new(f64::NAN, f64::NAN),
                }
            },
            lo_breaks,
            0.1 * tol_scale,
            200_000,
        )?;
        *evaluations += res.evaluations;
        if !res.value.re.is_finite() {
            return Err(Error::QuadratureNotConverged { achieved: f64::INFINITY, requested: inner_tol, evaluations: *evaluations });
        }
        Ok(res.value)
    };
    let mut partial = shell(&breaks, &mut evaluations)?;
    let mut sequence = vec![(radii[0], partial)];
    for w in radii.windows(2) {
        partial += shell(&[w[0], w[1]], &mut evaluations)?;
        sequence.push((w[1], partial));
    }
    let (lhs, residual) = extrapolate(&sequence);
    let est = residual + tol_scale;
    Ok(IdentityCheckResult::new(lhs, rhs, est, sequence, method, evaluations))
}

/// Scalar two-dimensional identity over |x| < R with 1/R extrapolation.
pub fn check_identity_2d(y1: [f64; 2], y2: [f64; 2], r_max: f64, tol: f64) -> Result<IdentityCheckResult> {
    planar_check(y1, y2, r_max, tol, scalar_integrand, "polar_adaptive_extrapolated")
}

/// Matrix form of the two-dimensional identity; reduces to the scalar form.
pub fn check_identity_even(y1: [f64; 2], y2: [f64; 2], r_max: f64, tol: f64) -> Result<IdentityCheckResult> {
    if y1 == [0.0, 0.0] || y2 == [0.0, 0.0] {
        return Err(Error::InvalidParameter("zero vectors are not allowed".into()));
    }
    planar_check(y1, y2, r_max, tol, matrix_integrand, "matrix_polar_adaptive_extrapolated")
}

/// Integration strategy for the three-dimensional identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sampler {
    /// Radial Gauss–Kronrod times a product rule on S² with `level` polar nodes.
    Quadrature { level: usize },
    /// Importance-sampled antithetic pairs.
    MonteCarlo { samples: usize, seed: u64 },
}

impl Default for Sampler {
    fn default() -> Self {
        Sampler::MonteCarlo { samples: 10_000_000, seed: 0 }
    }
}

type M2 = [C64; 4];

/// x̂·(σ₁, σ₂, σ₃) as a row-major 2×2 matrix.
fn u3(x: [f64; 3]) -> M2 {
    let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
    let (a, b, cz) = if r == 0.0 { (0.0, 0.0, 1.0) } else { (x[0] / r, x[1] / r, x[2] / r) };
    [c(cz, 0.0), c(a, -b), c(a, b), c(-cz, 0.0)]
}

fn mul2(p: &M2, q: &M2) -> M2 {
    [
        p[0] * q[0] + p[1] * q[2],
        p[0] * q[1] + p[1] * q[3],
        p[2] * q[0] + p[3] * q[2],
        p[2] * q[1] + p[3] * q[3],
    ]
}

fn sub2(p: &M2, q: &M2) -> M2 {
    [p[0] - q[0], p[1] - q[1], p[2] - q[2], p[3] - q[3]]
}

struct OddProblem {
    points: Vec<[f64; 3]>,
}

impl OddProblem {
    fn integrand(&self, x: [f64; 3]) -> C64 {
        let us: Vec<M2> = self.points.iter().map(|y| u3([x[0] + y[0], x[1] + y[1], x[2] + y[2]])).collect();
        let mut acc: Option<M2> = None;
        for j in (1..us.len()).rev() {
            let diff = sub2(&us[j], &us[j - 1]);
            acc = Some(match acc {
                None => diff,
                Some(a) => mul2(&a, &diff),
            });
        }
        let p = acc.expect("at least one factor");
        p[0] + p[3]
    }
}

/// Radial law s/(s+ρ)² around a centre, uniform in direction.
#[derive(Clone, Copy)]
struct Layer {
    center: [f64; 3],
    scale: f64,
    weight: f64,
}

impl Layer {
    fn density(&self, x: [f64; 3]) -> f64 {
        let d = [x[0] - self.center[0], x[1] - self.center[1], x[2] - self.center[2]];
        let rho = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        if rho == 0.0 {
            return f64::INFINITY;
        }
        self.weight * self.scale / ((self.scale + rho).powi(2) * 4.0 * PI * rho * rho)
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> [f64; 3] {
        let u: f64 = rng.random();
        let rho = self.scale * u / (1.0 - u);
        let dir = loop {
            let v = [rng.random_range(-1.0..1.0f64), rng.random_range(-1.0..1.0f64), rng.random_range(-1.0..1.0f64)];
            let n2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
            if n2 > 1e-6 && n2 <= 1.0 {
                let n = n2.sqrt();
                break [v[0] / n, v[1] / n, v[2] / n];
            }
        };
        [self.center[0] + rho * dir[0], self.center[1] + rho * dir[1], self.center[2] + rho * dir[2]]
    }
}

const MC_CHUNKS: usize = 64;

fn monte_carlo(problem: &OddProblem, samples: usize, seed: u64) -> (C64, f64, usize) {
    let pts = &problem.points;
    let k = pts.len() as f64;
    let center = [0, 1, 2].map(|i| -pts.iter().map(|p| p[i]).sum::<f64>() / k);
    let scale = pts
        .iter()
        .map(|p| ((p[0] + center[0]).powi(2) + (p[1] + center[1]).powi(2) + (p[2] + center[2]).powi(2)).sqrt())
        .fold(0.0, f64::max)
        .max(1e-3);
    // Half the mass around the centroid, the rest in 1/|x − p|² layers at the singular points.
    let mut layers = vec![Layer { center, scale, weight: 0.5 }];
    for p in pts {
        layers.push(Layer { center: [-p[0], -p[1], -p[2]], scale: 0.25 * scale, weight: 0.5 / k });
    }
    let reflect = |x: [f64; 3]| [2.0 * center[0] - x[0], 2.0 * center[1] - x[1], 2.0 * center[2] - x[2]];
    let density = |x: [f64; 3]| layers.iter().map(|l| l.density(x)).sum::<f64>();
    let per_chunk = samples.div_ceil(MC_CHUNKS);
    let chunks: Vec<(C64, f64, usize)> = (0..MC_CHUNKS)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk as u64);
            let mut sum = C64::new(0.0, 0.0);
            let mut sum_sq = 0.0;
            for _ in 0..per_chunk {
                let pick: f64 = rng.random();
                let mut acc = 0.0;
                let mut layer = &layers[layers.len() - 1];
                for l in &layers {
                    acc += l.weight;
                    if pick < acc {
                        layer = l;
                        break;
                    }
                }
                let x = layer.sample(&mut rng);
                let xr = reflect(x);
                let q = 0.5 * (density(x) + density(xr));
                let g = if q.is_finite() && q > 0.0 {
                    (problem.integrand(x) + problem.integrand(xr)) / (2.0 * q)
                } else {
                    C64::new(0.0, 0.0)
                };
                sum += g;
                sum_sq += g.norm_sqr();
            }
            (sum, sum_sq, per_chunk)
        })
        .collect();
    let n: usize = chunks.iter().map(|c| c.2).sum();
    let sum: C64 = chunks.iter().map(|c| c.0).sum();
    let sum_sq: f64 = chunks.iter().map(|c| c.1).sum();
    let mean = sum / n as f64;
    let var = (sum_sq / n as f64 - mean.norm_sqr()).max(0.0) * n as f64 / (n as f64 - 1.0);
    (mean, (var / n as f64).sqrt(), 2 * n)
}

fn odd_quadrature(problem: &OddProblem, level: usize) -> Result<(C64, f64, usize)> {
    let pts = &problem.points;
    let k = pts.len() as f64;
    let center = [0, 1, 2].map(|i| -pts.iter().map(|p| p[i]).sum::<f64>() / k);
    let dist = |p: &[f64; 3]| ((p[0] + center[0]).powi(2) + (p[1] + center[1]).powi(2) + (p[2] + center[2]).powi(2)).sqrt();
    let scale = pts.iter().map(dist).fold(0.0, f64::max).max(1e-3);
    let mut evaluations = 0;
    let mut run = |level: usize| -> Result<C64> {
        let rule = sphere_rule(3, level);
        // ρ = s·t/(1 − t); breaks where the shells pass the singular points.
        let mut breaks: Vec<f64> = pts.iter().map(|p| dist(p) / (scale + dist(p))).collect();
        breaks.extend([0.0, 1.0]);
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        let res = integrate_adaptive(
            |t: f64| {
                if t >= 1.0 {
                    return C64::new(0.0, 0.0);
                }
                let rho = scale * t / (1.0 - t);
                let jac = scale / (1.0 - t).powi(2) * rho * rho;
                let mut s = C64::new(0.0, 0.0);
                for (w, wt) in &rule {
                    let x = [center[0] + rho * w[0], center[1] + rho * w[1], center[2] + rho * w[2]];
                    let xr = [center[0] - rho * w[0], center[1] - rho * w[1], center[2] - rho * w[2]];
                    s += (problem.integrand(x) + problem.integrand(xr)) * (0.5 * wt);
                }
                s * jac
            },
            &breaks,
            1e-6,
            30_000,
        );
        let res = match res {
            Ok(r) => r,
            Err(Error::QuadratureNotConverged { evaluations: e, .. }) => {
                evaluations += e * rule.len();
                return Err(Error::QuadratureNotConverged { achieved: f64::NAN, requested: 1e-6, evaluations });
            }
            Err(e) => return Err(e),
        };
        evaluations += res.evaluations * rule.len() * 2;
        Ok(res.value)
    };
    let coarse = run(level)?;
    let fine = run(2 * level)?;
    Ok((fine, (fine - coarse).norm(), evaluations))
}

/// Three-dimensional odd identity for the points y₀, …, y₃.
pub fn check_identity_odd(points: &[Vec<f64>], sampler: Sampler) -> Result<IdentityCheckResult> {
    if points.len() != 4 || points.iter().any(|p| p.len() != 3) {
        return Err(Error::DimensionOutOfRange { d: points.first().map_or(0, |p| p.len()), reason: "the odd identity is checked for d = 3 with four points".into() });
    }
    let pts: Vec<[f64; 3]> = points.iter().map(|p| [p[0], p[1], p[2]]).collect();
    // Det(y₃ − y₀, y₂ − y₀, y₁ − y₀) with the vectors as columns.
    let mut m = [0.0; 9];
    for (col, j) in [3usize, 2, 1].iter().enumerate() {
        for row in 0..3 {
            m[row * 3 + col] = pts[*j][row] - pts[0][row];
        }
    }
    let det = det_real(&m, 3);
    let rhs = C64::new(0.0, 8.0 / 3.0 * PI * det);
    let problem = OddProblem { points: pts };
    let (lhs, err, evals, method) = match sampler {
        Sampler::MonteCarlo { samples, seed } => {
            if samples < 1000 {
                return Err(Error::InvalidParameter("Monte Carlo needs at least 1000 samples".into()));
            }
            let (v, e, n) = monte_carlo(&problem, samples, seed);
            (v, e, n, "monte_carlo_antithetic")
        }
        Sampler::Quadrature { level } => {
            let (v, e, n) = odd_quadrature(&problem, level.max(4))?;
            (v, e, n, "spherical_quadrature")
        }
    };
    Ok(IdentityCheckResult::new(lhs, rhs, err, vec![], method, evals))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_and_matrix_integrands_agree_pointwise() {
        let y1 = [1.0, 0.3];
        let y2 = [-0.4, 0.9];
        for x in [[0.2, 0.7], [-3.0, 1.0], [10.0, -4.0]] {
            assert!((scalar_integrand(x, y1, y2) - matrix_integrand(x, y1, y2)).norm() < 1e-14);
        }
    }

    #[test]
    fn extrapolation_recovers_a_rational_tail() {
        let seq: Vec<(f64, C64)> = [10.0, 20.0, 40.0, 80.0]
            .iter()
            .map(|&r: &f64| (r, C64::new(1.0 + 2.0 / r - 3.0 / (r * r), -1.0 + 1.0 / (r * r))))
            .collect();
        let (a, res) = extrapolate(&seq);
        assert!((a - C64::new(1.0, -1.0)).norm() < 1e-12);
        assert!(res < 1e-12);
    }

    #[test]
    fn odd_integrand_vanishes_for_repeated_points() {
        let p = OddProblem { points: vec![[0.0; 3], [1.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]] };
        assert_eq!(p.integrand([0.3, -0.2, 0.5]), C64::new(0.0, 0.0));
    }
}
