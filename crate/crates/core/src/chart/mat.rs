use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use serde::ser::{Serialize, SerializeSeq, Serializer};

/// Largest chart dimension handled by the stack-allocated matrix type.
pub const MAX_DIM: usize = 8;

/// Small dense square matrix stored inline; `n ≤ MAX_DIM`.
#[derive(Clone, Copy, PartialEq)]
pub struct Mat {
    n: usize,
    a: [f64; MAX_DIM * MAX_DIM],
}

impl Mat {
    pub fn zeros(n: usize) -> Self {
        assert!(n <= MAX_DIM, "dimension {n} exceeds {MAX_DIM}");
        Mat { n, a: [0.0; MAX_DIM * MAX_DIM] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diag(d: &[f64]) -> Self {
        let mut m = Mat::zeros(d.len());
        for (i, v) in d.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut m = Mat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        Mat::from_fn(rows.len(), |i, j| rows[i][j])
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn scale(&self, c: f64) -> Self {
        Mat::from_fn(self.n, |i, j| c * self[(i, j)])
    }

    pub fn transpose(&self) -> Self {
        Mat::from_fn(self.n, |i, j| self[(j, i)])
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.rows().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn symmetric_residual(&self) -> f64 {
        (self - &self.transpose()).max_abs()
    }

    /// Frobenius pairing `Σ a_ij b_ij`.
    pub fn dot(&self, other: &Mat) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                s += self[(i, j)] * other[(i, j)];
            }
        }
        s
    }

    pub fn rows(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.n).map(move |i| (0..self.n).map(|j| self[(i, j)]).collect())
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().collect()
    }

    /// Block-diagonal embedding of `blocks` in order.
    pub fn block_diag(blocks: &[Mat]) -> Self {
        let n = blocks.iter().map(|b| b.n).sum();
        let mut m = Mat::zeros(n);
        let mut off = 0;
        for b in blocks {
            for i in 0..b.n {
                for j in 0..b.n {
                    m[(off + i, off + j)] = b[(i, j)];
                }
            }
            off += b.n;
        }
        m
    }

    /// Inverse by Gauss–Jordan with partial pivoting, together with a
    /// condition-number estimate in the max-row-sum norm.
    pub fn inverse_with_cond(&self) -> Option<(Mat, f64)> {
        let n = self.n;
        let mut a = *self;
        let mut inv = Mat::identity(n);
        for col in 0..n {
            let piv = (col..n).max_by(|&x, &y| a[(x, col)].abs().total_cmp(&a[(y, col)].abs()))?;
            let pv = a[(piv, col)];
            if pv.abs() < 1e-300 || !pv.is_finite() {
                return None;
            }
            if piv != col {
                for j in 0..n {
                    a.a.swap(piv * MAX_DIM + j, col * MAX_DIM + j);
                    inv.a.swap(piv * MAX_DIM + j, col * MAX_DIM + j);
                }
            }
            let r = 1.0 / a[(col, col)];
            for j in 0..n {
                a[(col, j)] *= r;
                inv[(col, j)] *= r;
            }
            for i in 0..n {
                if i != col {
                    let f = a[(i, col)];
                    if f != 0.0 {
                        for j in 0..n {
                            a[(i, j)] -= f * a[(col, j)];
                            inv[(i, j)] -= f * inv[(col, j)];
                        }
                    }
                }
            }
        }
        let cond = self.row_norm() * inv.row_norm();
        cond.is_finite().then_some((inv, cond))
    }

    pub fn inverse(&self) -> Option<Mat> {
        self.inverse_with_cond().map(|(m, _)| m)
    }

    fn row_norm(&self) -> f64 {
        (0..self.n).map(|i| (0..self.n).map(|j| self[(i, j)].abs()).sum::<f64>()).fold(0.0, f64::max)
    }

    /// Determinant by LU with partial pivoting.
    pub fn det(&self) -> f64 {
        let n = self.n;
        let mut a = *self;
        let mut det = 1.0;
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&x, &y| a[(x, col)].abs().total_cmp(&a[(y, col)].abs()))
                .unwrap();
            if a[(piv, col)] == 0.0 {
                return 0.0;
            }
            if piv != col {
                for j in 0..n {
                    a.a.swap(piv * MAX_DIM + j, col * MAX_DIM + j);
                }
                det = -det;
            }
            det *= a[(col, col)];
            for i in col + 1..n {
                let f = a[(i, col)] / a[(col, col)];
                for j in col..n {
                    a[(i, j)] -= f * a[(col, j)];
                }
            }
        }
        det
    }

    pub fn to_nalgebra(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.n, self.n, |i, j| self[(i, j)])
    }

    /// Eigenvalues of `self⁻¹·s` for symmetric positive-definite `self` and
    /// symmetric `s`, ascending.
    pub fn generalized_eigenvalues(&self, s: &Mat) -> Option<Vec<f64>> {
        let chol = nalgebra::Cholesky::new(self.to_nalgebra())?;
        let l = chol.l();
        let linv = l.try_inverse()?;
        let m = &linv * s.to_nalgebra() * linv.transpose();
        let m = (&m + m.transpose()) * 0.5;
        let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        Some(ev)
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.n && j < self.n);
        &self.a[i * MAX_DIM + j]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.n && j < self.n);
        &mut self.a[i * MAX_DIM + j]
    }
}

impl Add for &Mat {
    type Output = Mat;
    fn add(self, rhs: &Mat) -> Mat {
        Mat::from_fn(self.n, |i, j| self[(i, j)] + rhs[(i, j)])
    }
}

impl Sub for &Mat {
    type Output = Mat;
    fn sub(self, rhs: &Mat) -> Mat {
        Mat::from_fn(self.n, |i, j| self[(i, j)] - rhs[(i, j)])
    }
}

impl Mul for &Mat {
    type Output = Mat;
    fn mul(self, rhs: &Mat) -> Mat {
        Mat::from_fn(self.n, |i, j| (0..self.n).map(|k| self[(i, k)] * rhs[(k, j)]).sum())
    }
}

impl Add for Mat {
    type Output = Mat;
    #[allow(clippy::op_ref)]
    fn add(self, rhs: Mat) -> Mat {
        &self + &rhs
    }
}

impl Sub for Mat {
    type Output = Mat;
    #[allow(clippy::op_ref)]
    fn sub(self, rhs: Mat) -> Mat {
        &self - &rhs
    }
}

impl fmt::Debug for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.rows()).finish()
    }
}

impl Serialize for Mat {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(self.n))?;
        for r in self.rows() {
            seq.serialize_element(&r)?;
        }
        seq.end()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_and_det() {
        let m = Mat::from_rows(&[vec![4.0, 1.0, 0.0], vec![1.0, 3.0, 1.0], vec![0.0, 1.0, 2.0]]);
        let inv = m.inverse().unwrap();
        assert!(((&m * &inv) - Mat::identity(3)).max_abs() < 1e-14);
        assert!((m.det() - 18.0).abs() < 1e-12);
        assert!(Mat::zeros(2).inverse().is_none());
    }

    #[test]
    fn generalized_eigen() {
        let g = Mat::diag(&[2.0, 4.0]);
        let s = Mat::diag(&[1.0, 1.0]);
        let ev = g.generalized_eigenvalues(&s).unwrap();
        assert!((ev[0] - 0.25).abs() < 1e-14 && (ev[1] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn blocks() {
        let m = Mat::block_diag(&[Mat::diag(&[1.0]), Mat::diag(&[2.0, 3.0])]);
        assert_eq!(m.dim(), 3);
        assert_eq!(m[(2, 2)], 3.0);
        assert_eq!(m[(0, 1)], 0.0);
    }
}
