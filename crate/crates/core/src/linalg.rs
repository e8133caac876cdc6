//! Small dense linear algebra: one-sided Jacobi SVD, LU determinant and
//! least squares. Matrices here are at most a few dozen rows.

use crate::math::sqrt;
use alloc::vec;
use alloc::vec::Vec;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)] * x[j]).sum())
            .collect()
    }
}

impl core::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Singular values (descending) and right singular vectors (columns of `v`,
/// same order).
#[derive(Debug, Clone)]
pub struct Svd {
    pub singular: Vec<f64>,
    pub v: Matrix,
}

impl Svd {
    pub fn largest(&self) -> f64 {
        self.singular.first().copied().unwrap_or(0.0)
    }

    pub fn smallest(&self) -> f64 {
        self.singular.last().copied().unwrap_or(0.0)
    }

    /// Right singular vectors whose singular value is below `rel * largest`.
    pub fn null_space(&self, rel: f64) -> Vec<Vec<f64>> {
        let cut = rel * self.largest();
        self.singular
            .iter()
            .enumerate()
            .filter(|(_, &s)| s <= cut)
            .map(|(j, _)| self.v.column(j))
            .collect()
    }
}

/// One-sided Jacobi SVD. Rows may be fewer than columns; the matrix is then
/// padded with zero rows.
pub fn svd(a: &Matrix) -> Svd {
    let n = a.cols;
    let m = a.rows.max(n);
    // Column-major working copy for cache-friendly column rotations.
    let mut u: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut c = a.column(j);
            c.resize(m, 0.0);
            c
        })
        .collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut c = vec![0.0; n];
            c[j] = 1.0;
            c
        })
        .collect();

    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for i in 0..m {
                    alpha += u[p][i] * u[p][i];
                    beta += u[q][i] * u[q][i];
                    gamma += u[p][i] * u[q][i];
                }
                if gamma == 0.0 || gamma.abs() <= 1e-15 * sqrt(alpha * beta) {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + sqrt(1.0 + zeta * zeta));
                let c = 1.0 / sqrt(1.0 + t * t);
                let s = c * t;
                for i in 0..m {
                    let (up, uq) = (u[p][i], u[q][i]);
                    u[p][i] = c * up - s * uq;
                    u[q][i] = s * up + c * uq;
                }
                for i in 0..n {
                    let (vp, vq) = (v[p][i], v[q][i]);
                    v[p][i] = c * vp - s * vq;
                    v[q][i] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = u.iter().map(|c| sqrt(c.iter().map(|x| x * x).sum())).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    let mut vm = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        for i in 0..n {
            vm[(i, dst)] = v[src][i];
        }
    }
    Svd { singular: order.iter().map(|&j| norms[j]).collect(), v: vm }
}

/// Determinant by LU with partial pivoting.
pub fn det(a: &Matrix) -> f64 {
    assert_eq!(a.rows, a.cols);
    let n = a.rows;
    let mut m = a.clone();
    let mut d = 1.0;
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| m[(i, k)].abs().total_cmp(&m[(j, k)].abs())).unwrap();
        if m[(p, k)] == 0.0 {
            return 0.0;
        }
        if p != k {
            for j in 0..n {
                m.data.swap(p * n + j, k * n + j);
            }
            d = -d;
        }
        let pivot = m[(k, k)];
        d *= pivot;
        for i in (k + 1)..n {
            let f = m[(i, k)] / pivot;
            if f != 0.0 {
                for j in k..n {
                    let x = m[(k, j)];
                    m[(i, j)] -= f * x;
                }
            }
        }
    }
    d
}

/// Least-squares solution of `a x ≈ b` via the SVD. Returns the solution and
/// the 2-norm condition number of `a`.
pub fn lstsq(a: &Matrix, b: &[f64]) -> (Vec<f64>, f64) {
    // Column scaling keeps the Jacobi rotations well conditioned when the
    // basis functions differ by orders of magnitude.
    let n = a.cols;
    let scale: Vec<f64> = (0..n)
        .map(|j| {
            let s = sqrt((0..a.rows).map(|i| a[(i, j)] * a[(i, j)]).sum::<f64>());
            if s > 0.0 { s } else { 1.0 }
        })
        .collect();
    let mut scaled = a.clone();
    for i in 0..a.rows {
        for j in 0..n {
            scaled[(i, j)] /= scale[j];
        }
    }
    let dec = svd(&scaled);
    // U columns are A v / sigma.
    let av: Vec<Vec<f64>> = (0..n).map(|j| scaled.mul_vec(&dec.v.column(j))).collect();
    let mut x = vec![0.0; n];
    let smax = dec.largest();
    for j in 0..n {
        let s = dec.singular[j];
        if s <= 1e-15 * smax {
            continue;
        }
        let coef: f64 = av[j].iter().zip(b).map(|(u, bi)| u * bi).sum::<f64>() / (s * s);
        for i in 0..n {
            x[i] += coef * dec.v[(i, j)];
        }
    }
    for j in 0..n {
        x[j] /= scale[j];
    }
    let cond = if dec.smallest() > 0.0 { smax / dec.smallest() } else { f64::INFINITY };
    (x, cond)
}
