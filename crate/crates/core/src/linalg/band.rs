//! Banded LU with partial pivoting for the full-order saddle-point systems.
//!
//! Storage follows the LAPACK `gbtrf` convention: column `j` keeps rows
//! `j - ku - kl ..= j + kl`, with `kl` extra super-diagonals reserved for
//! fill created by row interchanges.

use crate::error::LinalgError;
use crate::linalg::sparse::CsrMatrix;
use crate::scalar::Scalar;

#[derive(Clone, Debug)]
pub struct BandMatrix<T> {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<T>,
}

impl<T: Scalar> BandMatrix<T> {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ldab = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            ldab,
            ab: vec![T::zero(); ldab * n],
        }
    }

    /// Copy a square sparse matrix after reordering: row/column `i` of the
    /// result is row/column `perm[i]` of `a`.
    pub fn from_csr_permuted(a: &CsrMatrix<T>, perm: &[usize]) -> Self {
        let n = a.nrows();
        assert_eq!(n, a.ncols());
        assert_eq!(perm.len(), n);
        let mut inv = vec![usize::MAX; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let (mut kl, mut ku) = (0usize, 0usize);
        for (i, j, _) in a.iter() {
            let (pi, pj) = (inv[i], inv[j]);
            if pi > pj {
                kl = kl.max(pi - pj);
            } else {
                ku = ku.max(pj - pi);
            }
        }
        let mut m = Self::zeros(n, kl, ku);
        for (i, j, v) in a.iter() {
            m.add(inv[i], inv[j], v);
        }
        m
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        let kv = self.kl + self.ku;
        debug_assert!(i + kv >= j && i <= j + self.kl, "entry ({i},{j}) outside band");
        (kv + i - j) + j * self.ldab
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: T) {
        let s = self.slot(i, j);
        self.ab[s] += v;
    }

    /// Factor in place.
    pub fn factor(mut self) -> Result<BandLu<T>, LinalgError> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let mut ipiv = vec![0usize; n];
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let mut jp = 0usize;
            let mut best = T::zero();
            for t in 0..=km {
                let v = self.ab[self.slot(j + t, j)].abs();
                if v > best {
                    best = v;
                    jp = t;
                }
            }
            ipiv[j] = j + jp;
            if best == T::zero() || !best.is_finite() {
                return Err(LinalgError::Singular { pivot: j });
            }
            ju = ju.max((j + ku + jp).min(n - 1));
            if jp != 0 {
                for c in j..=ju {
                    let a = self.slot(j, c);
                    let b = self.slot(j + jp, c);
                    self.ab.swap(a, b);
                }
            }
            if km > 0 {
                let base = self.slot(j, j);
                let piv = self.ab[base];
                for v in &mut self.ab[base + 1..=base + km] {
                    *v /= piv;
                }
                for c in j + 1..=ju {
                    let cbase = self.slot(j, c);
                    // column j lies entirely before column c in storage
                    let (lo, hi) = self.ab.split_at_mut(cbase);
                    let a = hi[0];
                    if a == T::zero() {
                        continue;
                    }
                    let l = &lo[base + 1..=base + km];
                    for (x, &lv) in hi[1..=km].iter_mut().zip(l) {
                        *x -= lv * a;
                    }
                }
            }
        }
        Ok(BandLu { m: self, ipiv })
    }
}

#[derive(Clone, Debug)]
pub struct BandLu<T> {
    m: BandMatrix<T>,
    ipiv: Vec<usize>,
}

impl<T: Scalar> BandLu<T> {
    pub fn n(&self) -> usize {
        self.m.n
    }

    pub fn solve_in_place(&self, b: &mut [T]) {
        let m = &self.m;
        let n = m.n;
        assert_eq!(b.len(), n);
        let kv = m.kl + m.ku;
        for j in 0..n.saturating_sub(1) {
            let lm = m.kl.min(n - 1 - j);
            let p = self.ipiv[j];
            if p != j {
                b.swap(j, p);
            }
            let bj = b[j];
            if bj != T::zero() {
                let base = m.slot(j, j);
                for t in 1..=lm {
                    b[j + t] -= m.ab[base + t] * bj;
                }
            }
        }
        for j in (0..n).rev() {
            let d = m.ab[m.slot(j, j)];
            b[j] /= d;
            let bj = b[j];
            if bj != T::zero() {
                let i0 = j.saturating_sub(kv);
                for i in i0..j {
                    b[i] -= m.ab[m.slot(i, j)] * bj;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dense::{DMat, Lu};
    use crate::linalg::sparse::TripletBuilder;

    #[test]
    fn matches_dense_lu_with_pivoting() {
        // Tridiagonal-ish system with zero diagonal entries forcing swaps.
        let n = 12;
        let mut b = TripletBuilder::new(n, n);
        for i in 0..n {
            if i % 3 != 0 {
                b.push(i, i, 1.0 + i as f64);
            }
            if i + 1 < n {
                b.push(i, i + 1, 2.0);
                b.push(i + 1, i, -1.5 + 0.1 * i as f64);
            }
            if i + 2 < n {
                b.push(i + 2, i, 0.3);
            }
        }
        let a = b.build();
        let perm: Vec<usize> = (0..n).collect();
        let lu = BandMatrix::from_csr_permuted(&a, &perm).factor().unwrap();
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut x = rhs.clone();
        lu.solve_in_place(&mut x);
        let dense = Lu::new(&a.to_dense()).unwrap().solve(&rhs);
        for (p, q) in x.iter().zip(&dense) {
            assert!((p - q).abs() < 1e-12, "{p} vs {q}");
        }
    }

    #[test]
    fn permutation_is_respected() {
        let a = DMat::from_row_major(3, 3, vec![4.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 2.0]);
        let mut tb = TripletBuilder::new(3, 3);
        for i in 0..3 {
            for j in 0..3 {
                if a[(i, j)] != 0.0 {
                    tb.push(i, j, a[(i, j)]);
                }
            }
        }
        let csr = tb.build();
        let perm = vec![2, 0, 1];
        let lu = BandMatrix::from_csr_permuted(&csr, &perm).factor().unwrap();
        let x = [1.0, 2.0, 3.0];
        let rhs = a.matvec(&x);
        let mut y: Vec<f64> = perm.iter().map(|&p| rhs[p]).collect();
        lu.solve_in_place(&mut y);
        for (k, &p) in perm.iter().enumerate() {
            assert!((y[k] - x[p]).abs() < 1e-14);
        }
    }

    #[test]
    fn singular_is_reported() {
        let mut b = TripletBuilder::new(2, 2);
        b.push(0, 0, 1.0);
        b.push(0, 1, 1.0);
        b.push(1, 0, 1.0);
        b.push(1, 1, 1.0);
        let a = b.build();
        assert!(BandMatrix::from_csr_permuted(&a, &[0, 1]).factor().is_err());
    }
}
