//! Small dense helpers shared across modules.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;

pub const I: C64 = C64::new(0.0, 1.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const ZERO: C64 = C64::new(0.0, 0.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Pauli matrices σ₁, σ₂, σ₃.
pub fn pauli() -> [CMat; 3] {
    [
        CMat::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
        CMat::from_row_slice(2, 2, &[ZERO, -I, I, ZERO]),
        CMat::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]),
    ]
}

/// σ₊ = (σ₁ + iσ₂)/2, the upper-right unit.
pub fn sigma_plus() -> CMat {
    CMat::from_row_slice(2, 2, &[ZERO, ONE, ZERO, ZERO])
}

/// σ₋ = (σ₁ − iσ₂)/2, the lower-left unit.
pub fn sigma_minus() -> CMat {
    CMat::from_row_slice(2, 2, &[ZERO, ZERO, ONE, ZERO])
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

pub fn anticommutator(a: &CMat, b: &CMat) -> CMat {
    a * b + b * a
}

/// Largest entry-wise modulus.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn frobenius(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eigh(h: &CMat) -> (Vec<f64>, CMat) {
    let n = h.nrows();
    let sym = (h + h.adjoint()) * C64::new(0.5, 0.0);
    let eig = nalgebra::SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&j| eig.eigenvalues[j]).collect();
    let mut vecs = CMat::zeros(n, n);
    for (col, &j) in order.iter().enumerate() {
        vecs.set_column(col, &eig.eigenvectors.column(j));
    }
    (vals, vecs)
}

/// f(H) = Σ f(λ) Π_λ for Hermitian H.
pub fn hermitian_apply(h: &CMat, f: impl Fn(f64) -> C64) -> CMat {
    let (vals, vecs) = hermitian_eigh(h);
    let n = h.nrows();
    let mut scaled = vecs.clone();
    for (j, &lam) in vals.iter().enumerate() {
        let fj = f(lam);
        for i in 0..n {
            scaled[(i, j)] *= fj;
        }
    }
    scaled * vecs.adjoint()
}

/// Sign of a permutation given as a slice of distinct indices 0..n.
pub fn permutation_sign(p: &[usize]) -> i32 {
    let mut seen = vec![false; p.len()];
    let mut sign = 1;
    for start in 0..p.len() {
        if seen[start] {
            continue;
        }
        let mut len = 0;
        let mut j = start;
        while !seen[j] {
            seen[j] = true;
            j = p[j];
            len += 1;
        }
        if len % 2 == 0 {
            sign = -sign;
        }
    }
    sign
}

/// All permutations of 0..n with their signs (Heap's algorithm).
pub fn permutations(n: usize) -> Vec<(Vec<usize>, i32)> {
    let mut out = Vec::new();
    let mut a: Vec<usize> = (0..n).collect();
    let mut cnt = vec![0usize; n];
    out.push((a.clone(), permutation_sign(&a)));
    let mut i = 1;
    while i < n {
        if cnt[i] < i {
            if i % 2 == 0 {
                a.swap(0, i);
            } else {
                a.swap(cnt[i], i);
            }
            out.push((a.clone(), permutation_sign(&a)));
            cnt[i] += 1;
            i = 1;
        } else {
            cnt[i] = 0;
            i += 1;
        }
    }
    out
}

/// Determinant of a small real square matrix by partial-pivot elimination.
pub fn det_real(a: &[f64], n: usize) -> f64 {
    let mut m = a.to_vec();
    let mut det = 1.0;
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[i * n + col].abs().total_cmp(&m[j * n + col].abs()))
            .unwrap();
        if m[piv * n + col] == 0.0 {
            return 0.0;
        }
        if piv != col {
            for k in 0..n {
                m.swap(col * n + k, piv * n + k);
            }
            det = -det;
        }
        let p = m[col * n + col];
        det *= p;
        for r in col + 1..n {
            let f = m[r * n + col] / p;
            if f != 0.0 {
                for k in col..n {
                    m[r * n + k] -= f * m[col * n + k];
                }
            }
        }
    }
    det
}

/// Seeded GUE-like Hermitian matrix (G + G*)/(2√n) with standard normal entries.
pub fn random_hermitian(n: usize, seed: u64) -> CMat {
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let g = CMat::from_fn(n, n, |_, _| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        C64::new(re, im)
    });
    (&g + g.adjoint()) * C64::new(0.5 / (n as f64).sqrt(), 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permutations_cover_symmetric_group() {
        let perms = permutations(4);
        assert_eq!(perms.len(), 24);
        let even = perms.iter().filter(|(_, s)| *s == 1).count();
        assert_eq!(even, 12);
        let mut sorted: Vec<_> = perms.iter().map(|(p, _)| p.clone()).collect();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 24);
    }

    #[test]
    fn determinant_of_permutation_matrix() {
        // cyclic shift on 4 elements is odd
        let a = [0., 0., 0., 1., 1., 0., 0., 0., 0., 1., 0., 0., 0., 0., 1., 0.];
        assert_eq!(det_real(&a, 4), -1.0);
        assert!((det_real(&[2., 1., 1., 3.], 2) - 5.0).abs() < 1e-15);
    }

    #[test]
    fn pauli_algebra() {
        let [s1, s2, s3] = pauli();
        assert!(max_abs(&(&s1 * &s2 - &s3 * I)) == 0.0);
        assert!(max_abs(&(sigma_plus() + sigma_minus() - s1)) == 0.0);
    }
}

