use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// Square matrix in compressed-row storage.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Column indices must be strictly increasing within each row.
    pub fn new(n: usize, row_ptr: Vec<usize>, col_idx: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if row_ptr.len() != n + 1 || row_ptr[0] != 0 || row_ptr[n] != col_idx.len() {
            return Err(Error::Shape("malformed row offsets".into()));
        }
        if col_idx.len() != values.len() {
            return Err(Error::Shape("column and value arrays differ in length".into()));
        }
        for row in 0..n {
            let (start, end) = (row_ptr[row], row_ptr[row + 1]);
            if start > end {
                return Err(Error::Shape(format!("row offsets decrease at row {row}")));
            }
            let cols = &col_idx[start..end];
            if cols.iter().any(|&c| c >= n) || cols.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Shape(format!(
                    "row {row}: column indices must be sorted, unique and < {n}"
                )));
            }
        }
        Ok(Self {
            n,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn max_row_nnz(&self) -> usize {
        self.row_ptr.windows(2).map(|w| w[1] - w[0]).max().unwrap_or(0)
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[range.clone()].binary_search(&j) {
            Ok(pos) => self.values[range.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec_into(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(out.len(), self.n);
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.mul_vec_into(x, &mut out);
        out
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m.set(i, j, v);
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unsorted_columns() {
        assert!(SparseMatrix::new(2, vec![0, 2, 3], vec![1, 0, 1], vec![1.0; 3]).is_err());
        assert!(SparseMatrix::new(2, vec![0, 2, 3], vec![0, 0, 1], vec![1.0; 3]).is_err());
        assert!(SparseMatrix::new(2, vec![0, 1], vec![0], vec![1.0]).is_err());
        assert!(SparseMatrix::new(2, vec![0, 2, 3], vec![0, 1, 1], vec![1.0; 3]).is_ok());
    }

    #[test]
    fn product_and_lookup() {
        let m = SparseMatrix::new(3, vec![0, 2, 3, 5], vec![0, 2, 1, 0, 2], vec![2.0, 1.0, 3.0, -1.0, 4.0])
            .unwrap();
        assert_eq!(m.mul_vec(&[1.0, 2.0, 3.0]), vec![5.0, 6.0, 11.0]);
        assert_eq!(m.get(0, 1), 0.0);
        assert_eq!(m.diagonal(), vec![2.0, 3.0, 4.0]);
        assert_eq!(m.max_row_nnz(), 2);
        let i = SparseMatrix::identity(4);
        assert_eq!(i.mul_vec(&[1.0, -2.0, 3.0, 0.5]), vec![1.0, -2.0, 3.0, 0.5]);
    }
}
