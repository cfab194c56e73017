//! Complex banded matrices: assembly, products, LU with partial pivoting and
//! Hermitian inertia counts.

use crate::error::{Error, Result};
use crate::linalg::{CMat, C64, ZERO};

/// Square banded matrix with `kl` sub- and `ku` super-diagonals.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    data: Vec<C64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        BandMatrix { n, kl, ku, data: vec![ZERO; n * (kl + ku + 1)] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn lower_bandwidth(&self) -> usize {
        self.kl
    }

    pub fn upper_bandwidth(&self) -> usize {
        self.ku
    }

    fn width(&self) -> usize {
        self.kl + self.ku + 1
    }

    fn in_band(&self, i: usize, j: usize) -> bool {
        j + self.kl >= i && j <= i + self.ku
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        if i < self.n && j < self.n && self.in_band(i, j) {
            self.data[i * self.width() + j + self.kl - i]
        } else {
            ZERO
        }
    }

    /// Adds `v` to entry (i, j); panics if the entry lies outside the band.
    pub fn add(&mut self, i: usize, j: usize, v: C64) {
        assert!(self.in_band(i, j), "entry ({i},{j}) outside band");
        let w = self.width();
        self.data[i * w + j + self.kl - i] += v;
    }

    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        assert!(self.in_band(i, j), "entry ({i},{j}) outside band");
        let w = self.width();
        self.data[i * w + j + self.kl - i] = v;
    }

    /// Returns `self − σ I`.
    pub fn shifted(&self, sigma: f64) -> BandMatrix {
        let mut out = self.clone();
        for i in 0..self.n {
            out.add(i, i, C64::new(-sigma, 0.0));
        }
        out
    }

    pub fn matvec(&self, x: &[C64], y: &mut [C64]) {
        let w = self.width();
        for i in 0..self.n {
            let j0 = i.saturating_sub(self.kl);
            let j1 = (i + self.ku).min(self.n - 1);
            let row = &self.data[i * w..(i + 1) * w];
            let mut acc = ZERO;
            for j in j0..=j1 {
                acc += row[j + self.kl - i] * x[j];
            }
            y[i] = acc;
        }
    }

    /// Product with every column of a dense block.
    pub fn mul_dense(&self, x: &CMat) -> CMat {
        let mut out = CMat::zeros(self.n, x.ncols());
        let mut buf = vec![ZERO; self.n];
        for c in 0..x.ncols() {
            self.matvec(x.column(c).as_slice(), &mut buf);
            out.column_mut(c).copy_from_slice(&buf);
        }
        out
    }

    pub fn to_dense(&self) -> CMat {
        let mut m = CMat::zeros(self.n, self.n);
        for i in 0..self.n {
            let j0 = i.saturating_sub(self.kl);
            let j1 = (i + self.ku).min(self.n - 1);
            for j in j0..=j1 {
                m[(i, j)] = self.get(i, j);
            }
        }
        m
    }

    /// Largest |A_ij − conj(A_ji)|.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            let j1 = (i + self.ku).min(self.n - 1);
            for j in i..=j1 {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    /// Max row sum of moduli (the ∞-norm).
    pub fn norm_inf(&self) -> f64 {
        let w = self.width();
        (0..self.n)
            .map(|i| self.data[i * w..(i + 1) * w].iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Number of eigenvalues strictly below `level` for a Hermitian matrix,
    /// from the signs of the pivots of an unpivoted LDLᴴ factorisation of
    /// `A − level·I` (Sylvester's law of inertia).
    pub fn count_below(&self, level: f64) -> usize {
        assert_eq!(self.kl, self.ku, "inertia count needs a symmetric band");
        let b = self.kl;
        let n = self.n;
        let w = self.width();
        let mut a = self.shifted(level).data;
        let tiny = 1e-14 * self.norm_inf().max(1.0);
        let mut negatives = 0;
        for k in 0..n {
            let mut piv = a[k * w + b].re;
            if piv.abs() < tiny {
                piv = if piv < 0.0 { -tiny } else { tiny };
            }
            if piv < 0.0 {
                negatives += 1;
            }
            let last = (k + b).min(n - 1);
            for i in k + 1..=last {
                // Only the upper band is kept current; use Hermitian symmetry for the lower entry.
                let l = a[k * w + i + b - k].conj() / piv;
                if l == ZERO {
                    continue;
                }
                for j in i..=last {
                    let akj = a[k * w + j + b - k];
                    a[i * w + j + b - i] -= l * akj;
                }
            }
        }
        negatives
    }

    pub fn lu(&self) -> Result<BandLu> {
        BandLu::factor(self)
    }
}

/// LU factors of a banded matrix with row interchanges (LINPACK layout).
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    ku_ext: usize,
    upper: Vec<C64>,
    lower: Vec<C64>,
    piv: Vec<usize>,
}

impl BandLu {
    fn factor(m: &BandMatrix) -> Result<Self> {
        let n = m.n;
        let kl = m.kl;
        let ku_ext = m.ku + m.kl;
        let w = kl + ku_ext + 1;
        let idx = |i: usize, j: usize| i * w + j + kl - i;
        let mut a = vec![ZERO; n * w];
        for i in 0..n {
            let j0 = i.saturating_sub(m.kl);
            let j1 = (i + m.ku).min(n - 1);
            for j in j0..=j1 {
                a[idx(i, j)] = m.get(i, j);
            }
        }
        let mut lower = vec![ZERO; n * kl.max(1)];
        let mut piv = vec![0; n];
        let scale = m.norm_inf().max(f64::MIN_POSITIVE);
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = a[idx(k, k)].norm();
            for i in k + 1..=last_row {
                let v = a[idx(i, k)].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= 1e-300 * scale {
                return Err(Error::SingularMatrix("banded LU".into()));
            }
            piv[k] = p;
            let last_col = (k + ku_ext).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    a.swap(idx(k, j), idx(p, j));
                }
            }
            let pivot = a[idx(k, k)];
            for i in k + 1..=last_row {
                let l = a[idx(i, k)] / pivot;
                lower[k * kl.max(1) + (i - k - 1)] = l;
                a[idx(i, k)] = ZERO;
                if l == ZERO {
                    continue;
                }
                for j in k + 1..=last_col {
                    let akj = a[idx(k, j)];
                    a[idx(i, j)] -= l * akj;
                }
            }
        }
        Ok(BandLu { n, kl, ku_ext, upper: a, lower, piv })
    }

    pub fn solve_in_place(&self, b: &mut [C64]) {
        let n = self.n;
        let kl = self.kl;
        let w = kl + self.ku_ext + 1;
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk == ZERO {
                continue;
            }
            let last = (k + kl).min(n - 1);
            for i in k + 1..=last {
                b[i] -= self.lower[k * kl.max(1) + (i - k - 1)] * bk;
            }
        }
        for k in (0..n).rev() {
            let last = (k + self.ku_ext).min(n - 1);
            let row = &self.upper[k * w..(k + 1) * w];
            let mut acc = b[k];
            for j in k + 1..=last {
                acc -= row[j + kl - k] * b[j];
            }
            b[k] = acc / row[kl];
        }
    }

    pub fn solve_dense(&self, x: &CMat) -> CMat {
        let mut out = x.clone();
        for c in 0..x.ncols() {
            let mut col: Vec<C64> = out.column(c).iter().copied().collect();
            self.solve_in_place(&mut col);
            out.column_mut(c).copy_from_slice(&col);
        }
        out
    }
}
