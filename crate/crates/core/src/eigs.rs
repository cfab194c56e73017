//! Interior eigenpairs of banded Hermitian matrices.
//!
//! Eigenvalues in a window `|E − c| < w` are found by block Krylov iteration
//! on the shift-inverted operator `(H − c)⁻¹` followed by Rayleigh–Ritz with
//! `H` itself. The number of eigenvalues in the window is known beforehand
//! from two inertia counts, so the iteration stops only once every one of
//! them has a converged Ritz pair.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::banded::BandMatrix;
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigh, CMat, C64};

#[derive(Debug, Clone)]
pub struct EigenWindow {
    /// Eigenvalues in ascending order.
    pub values: Vec<f64>,
    /// Matching unit eigenvectors as columns.
    pub vectors: CMat,
    /// Largest residual ‖Hv − λv‖ over the returned pairs.
    pub max_residual: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct WindowOptions {
    /// Matrices up to this size are diagonalised densely.
    pub dense_limit: usize,
    /// Residual target relative to max(1, ‖H‖∞).
    pub tol: f64,
    pub max_restarts: usize,
    pub seed: u64,
}

impl Default for WindowOptions {
    fn default() -> Self {
        WindowOptions { dense_limit: 400, tol: 1e-10, max_restarts: 40, seed: 0x5eed }
    }
}

/// All eigenpairs of Hermitian `h` with eigenvalue in `(center − half_width, center + half_width)`.
pub fn eigs_window(
    h: &BandMatrix,
    center: f64,
    half_width: f64,
    opts: &WindowOptions,
) -> Result<EigenWindow> {
    eigs_window_from(h, center, half_width, opts, None)
}

/// As [`eigs_window`], seeding the Krylov block with the columns of `guess`
/// (typically eigenvectors of a nearby matrix).
pub fn eigs_window_from(
    h: &BandMatrix,
    center: f64,
    half_width: f64,
    opts: &WindowOptions,
    guess: Option<&CMat>,
) -> Result<EigenWindow> {
    let n = h.n();
    let lo = center - half_width;
    let hi = center + half_width;
    if n <= opts.dense_limit {
        let dense = h.to_dense();
        let (vals, vecs) = hermitian_eigh(&dense);
        let keep: Vec<usize> = (0..n).filter(|&j| vals[j] > lo && vals[j] < hi).collect();
        let mut vectors = CMat::zeros(n, keep.len());
        for (c, &j) in keep.iter().enumerate() {
            vectors.set_column(c, &vecs.column(j));
        }
        let values: Vec<f64> = keep.iter().map(|&j| vals[j]).collect();
        let max_residual = residuals(h, &values, &vectors).into_iter().fold(0.0, f64::max);
        return Ok(EigenWindow { values, vectors, max_residual });
    }
    let expected = h.count_below(hi) - h.count_below(lo);
    if expected == 0 {
        return Ok(EigenWindow { values: vec![], vectors: CMat::zeros(n, 0), max_residual: 0.0 });
    }
    let lu = h.shifted(center).lu()?;
    let scale = h.norm_inf().max(1.0);
    let block = expected + 4;
    let depth = 10;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut start = CMat::from_fn(n, block, |_, _| {
        C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    if let Some(g) = guess.filter(|g| g.nrows() == n) {
        for c in 0..g.ncols().min(block - 2) {
            start.set_column(c, &g.column(c));
        }
    }
    for _ in 0..opts.max_restarts {
        let mut basis: Vec<DVector<C64>> = Vec::with_capacity(block * depth);
        let mut current: Vec<DVector<C64>> = Vec::new();
        for c in 0..start.ncols() {
            let v = DVector::from_column_slice(start.column(c).as_slice());
            if let Some(q) = orthonormalize(v, &basis) {
                basis.push(q.clone());
                current.push(q);
            }
        }
        for _ in 1..depth {
            let mut next = Vec::new();
            for q in &current {
                let mut w: Vec<C64> = q.iter().copied().collect();
                lu.solve_in_place(&mut w);
                if let Some(q) = orthonormalize(DVector::from_vec(w), &basis) {
                    basis.push(q.clone());
                    next.push(q);
                }
            }
            if next.is_empty() {
                break;
            }
            current = next;
        }
        let m = basis.len();
        let mut q = CMat::zeros(n, m);
        for (c, v) in basis.iter().enumerate() {
            q.set_column(c, v);
        }
        let hq = h.mul_dense(&q);
        let t = q.adjoint() * &hq;
        let (theta, y) = hermitian_eigh(&t);
        let ritz = &q * &y;
        let hritz = &hq * &y;
        // Spurious interior Ritz values have large residuals, so only
        // converged pairs are counted against the inertia.
        let mut inside = Vec::new();
        let mut worst: f64 = 0.0;
        for (j, &th) in theta.iter().enumerate() {
            if th > lo && th < hi {
                let r = (hritz.column(j) - ritz.column(j) * C64::new(th, 0.0)).norm();
                if r <= opts.tol * scale {
                    worst = worst.max(r);
                    inside.push(j);
                }
            }
        }
        if inside.len() == expected {
            let mut vectors = CMat::zeros(n, expected);
            for (c, &j) in inside.iter().enumerate() {
                vectors.set_column(c, &ritz.column(j));
            }
            let values = inside.iter().map(|&j| theta[j]).collect();
            return Ok(EigenWindow { values, vectors, max_residual: worst });
        }
        let mut order: Vec<usize> = (0..theta.len()).collect();
        order.sort_by(|&a, &b| (theta[a] - center).abs().total_cmp(&(theta[b] - center).abs()));
        start = CMat::zeros(n, block);
        for (c, &j) in order.iter().take(block).enumerate() {
            start.set_column(c, &ritz.column(j));
        }
        // keep a random direction in the block in case a multiplicity was missed
        let col = block - 1;
        for i in 0..n {
            start[(i, col)] = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        }
    }
    Err(Error::EigenNotConverged(format!(
        "window [{lo}, {hi}] expected {expected} eigenvalues"
    )))
}

/// Two-pass Gram–Schmidt against `basis`; `None` if the vector is dependent.
fn orthonormalize(mut v: DVector<C64>, basis: &[DVector<C64>]) -> Option<DVector<C64>> {
    let norm0 = v.norm();
    if norm0 == 0.0 {
        return None;
    }
    for _ in 0..2 {
        for q in basis {
            let proj = q.dotc(&v);
            v.axpy(-proj, q, C64::new(1.0, 0.0));
        }
    }
    let norm = v.norm();
    if norm < 1e-10 * norm0 {
        return None;
    }
    Some(v / C64::new(norm, 0.0))
}

fn residuals(h: &BandMatrix, values: &[f64], vectors: &CMat) -> Vec<f64> {
    let hv = h.mul_dense(vectors);
    values
        .iter()
        .enumerate()
        .map(|(j, &lam)| (hv.column(j) - vectors.column(j) * C64::new(lam, 0.0)).norm())
        .collect()
}
