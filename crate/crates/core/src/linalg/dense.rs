use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;

/// Largest system `solve_dense` accepts by default.
pub const DEFAULT_DENSE_CAP: usize = 4096;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Shape("ragged rows".into()));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.set(i, i, d);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    /// `self + factor * other`
    pub fn add_scaled(&self, factor: f64, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + factor * b).collect(),
        }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows);
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| self.data[i * self.cols..(i + 1) * self.cols].iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Max row sum of absolute values.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.data[i * self.cols..(i + 1) * self.cols].iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Gaussian elimination with row pivoting.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        if self.rows != self.cols || rhs.len() != self.rows {
            return Err(Error::Shape(format!(
                "cannot solve {}x{} system with rhs of length {}",
                self.rows,
                self.cols,
                rhs.len()
            )));
        }
        let n = self.rows;
        let mut a = self.data.clone();
        let mut b = rhs.to_vec();
        let tiny = self.max_abs() * n as f64 * f64::EPSILON;
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))
                .unwrap();
            if a[pivot * n + col].abs() <= tiny {
                return Err(Error::Singular(col));
            }
            if pivot != col {
                for j in 0..n {
                    a.swap(col * n + j, pivot * n + j);
                }
                b.swap(col, pivot);
            }
            let diag = a[col * n + col];
            for row in col + 1..n {
                let factor = a[row * n + col] / diag;
                if factor == 0.0 {
                    continue;
                }
                for j in col..n {
                    a[row * n + j] -= factor * a[col * n + j];
                }
                b[row] -= factor * b[col];
            }
        }
        let mut x = vec![0.0; n];
        for row in (0..n).rev() {
            let s: f64 = (row + 1..n).map(|j| a[row * n + j] * x[j]).sum();
            x[row] = (b[row] - s) / a[row * n + row];
        }
        Ok(x)
    }
}

/// Densify and solve directly; refuses systems larger than [`DEFAULT_DENSE_CAP`].
pub fn solve_dense(m: &SparseMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    solve_dense_capped(m, rhs, DEFAULT_DENSE_CAP)
}

pub fn solve_dense_capped(m: &SparseMatrix, rhs: &[f64], cap: usize) -> Result<Vec<f64>> {
    if m.dim() > cap {
        return Err(Error::CapExceeded { n: m.dim(), cap });
    }
    m.to_dense().solve(rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::norm2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_and_diagonal() {
        let i = SparseMatrix::identity(3);
        assert_eq!(solve_dense(&i, &[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0]);
        let d = SparseMatrix::new(2, vec![0, 1, 2], vec![0, 1], vec![2.0, 4.0]).unwrap();
        assert_eq!(solve_dense(&d, &[2.0, 4.0]).unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn random_system_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        let n = 50;
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m.set(i, j, rng.gen_range(-1.0..1.0));
            }
            m.set(i, i, m.get(i, i) + n as f64);
        }
        let rhs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = m.solve(&rhs).unwrap();
        let r: Vec<f64> = m.mul_vec(&x).iter().zip(&rhs).map(|(a, b)| a - b).collect();
        assert!(norm2(&r) <= 1e-10 * norm2(&rhs));
    }

    #[test]
    fn pivoting_handles_zero_leading_entry() {
        let m = DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(m.solve(&[3.0, 5.0]).unwrap(), vec![5.0, 3.0]);
    }

    #[test]
    fn singular_and_cap() {
        let s = SparseMatrix::new(2, vec![0, 2, 4], vec![0, 1, 0, 1], vec![1.0, 2.0, 2.0, 4.0]).unwrap();
        assert!(matches!(solve_dense(&s, &[1.0, 1.0]), Err(Error::Singular(_))));
        let big = SparseMatrix::identity(10);
        assert!(matches!(
            solve_dense_capped(&big, &[0.0; 10], 5),
            Err(Error::CapExceeded { n: 10, cap: 5 })
        ));
    }
}
