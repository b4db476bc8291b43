//! Dense symmetric positive-definite algebra for the finite-sample oracle.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        SquareMatrix { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(n: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n * n);
        SquareMatrix { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| dot(self.row(i), x)).collect()
    }

    pub fn add_diagonal(&mut self, shift: f64) {
        for i in 0..self.n {
            self[(i, i)] += shift;
        }
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }
}

impl core::ops::Index<(usize, usize)> for SquareMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for SquareMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

/// `rows rows' / scale` for a `p x n` row-major matrix.
pub fn gram(rows: &[f64], p: usize, n: usize, scale: f64) -> SquareMatrix {
    let mut g = SquareMatrix::zeros(p);
    if n == 0 {
        return g;
    }
    for i in 0..p {
        let ri = &rows[i * n..(i + 1) * n];
        for j in 0..=i {
            let v = dot(ri, &rows[j * n..(j + 1) * n]) / scale;
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}

/// Lower Cholesky factor `L` with `A = L L'`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: SquareMatrix,
}

impl Cholesky {
    pub fn factor(a: &SquareMatrix) -> Result<Self> {
        let n = a.dim();
        let mut l = SquareMatrix::zeros(n);
        for j in 0..n {
            let lj = &l.data[j * n..j * n + j];
            let d = a[(j, j)] - dot(lj, lj);
            if !(d.is_finite() && d > 0.0) {
                return Err(Error::Numeric(alloc::format!(
                    "matrix is not positive definite (pivot {j}: {d})"
                )));
            }
            let djj = libm::sqrt(d);
            l[(j, j)] = djj;
            for i in j + 1..n {
                let s = a[(i, j)] - dot(&l.data[i * n..i * n + j], &l.data[j * n..j * n + j]);
                l[(i, j)] = s / djj;
            }
        }
        Ok(Cholesky { l })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.l.dim();
        let mut y = b.to_vec();
        for i in 0..n {
            let s = dot(&self.l.row(i)[..i], &y[..i]);
            y[i] = (y[i] - s) / self.l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= self.l[(k, i)] * y[k];
            }
            y[i] = s / self.l[(i, i)];
        }
        y
    }

    /// `A^{-1}`, via the inverse of the triangular factor: `A^{-1} = L^{-T} L^{-1}`.
    pub fn inverse(&self) -> SquareMatrix {
        let n = self.l.dim();
        // row-major lower-triangular W = L^{-1}
        let mut w = SquareMatrix::zeros(n);
        for i in 0..n {
            w[(i, i)] = 1.0 / self.l[(i, i)];
            for j in 0..i {
                let mut s = 0.0;
                for k in j..i {
                    s += self.l[(i, k)] * w[(k, j)];
                }
                w[(i, j)] = -s / self.l[(i, i)];
            }
        }
        // (W'W)_{ij} = sum_{k >= max(i,j)} W_ki W_kj; accumulate row by row of W.
        let mut inv = SquareMatrix::zeros(n);
        for k in 0..n {
            let wk = &w.data[k * n..k * n + k + 1];
            for i in 0..=k {
                let a = wk[i];
                if a == 0.0 {
                    continue;
                }
                let row = &mut inv.data[i * n..i * n + i + 1];
                for (dst, &b) in row.iter_mut().zip(&wk[..=i]) {
                    *dst += a * b;
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                inv[(j, i)] = inv[(i, j)];
            }
        }
        inv
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd(n: usize) -> SquareMatrix {
        let mut m = SquareMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = 1.0 / (1.0 + (i as f64 - j as f64).abs());
            }
            m[(i, i)] += n as f64;
        }
        m
    }

    #[test]
    fn solve_and_inverse() {
        let a = spd(7);
        let c = Cholesky::factor(&a).unwrap();
        let b: Vec<f64> = (0..7).map(|i| i as f64 - 2.5).collect();
        let x = c.solve(&b);
        let r = a.mul_vec(&x);
        for (ri, bi) in r.iter().zip(&b) {
            assert!((ri - bi).abs() < 1e-12);
        }
        let inv = c.inverse();
        for i in 0..7 {
            for j in 0..7 {
                let v: f64 = (0..7).map(|k| a[(i, k)] * inv[(k, j)]).sum();
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((v - e).abs() < 1e-12);
            }
        }
        assert!(inv.is_symmetric(0.0));
    }

    #[test]
    fn rejects_indefinite() {
        let mut a = SquareMatrix::identity(3);
        a[(1, 1)] = -1.0;
        assert!(Cholesky::factor(&a).is_err());
        a[(1, 1)] = f64::NAN;
        assert!(Cholesky::factor(&a).is_err());
    }

    #[test]
    fn gram_is_symmetric() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let g = gram(&x, 2, 3, 3.0);
        assert_eq!(g[(0, 0)], 14.0 / 3.0);
        assert_eq!(g[(0, 1)], 32.0 / 3.0);
        assert!(g.is_symmetric(0.0));
        assert_eq!(gram(&[], 2, 0, 1.0), SquareMatrix::zeros(2));
    }
}
