use super::dense::DenseMatrix;

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from per-row `(column, value)` lists.
    pub fn from_row_lists(cols: usize, rows: &[Vec<(usize, f64)>]) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for row in rows {
            for &(c, v) in row {
                assert!(c < cols, "column index out of range");
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix {
            rows: rows.len(),
            cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| self.row(i).map(|(c, v)| v * x[c]).sum())
            .collect()
    }

    pub fn mul_t_vec(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (i, &yi) in y.iter().enumerate() {
            if yi == 0.0 {
                continue;
            }
            for (c, v) in self.row(i) {
                out[c] += v * yi;
            }
        }
        out
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for (c, v) in self.row(i) {
                d[(i, c)] += v;
            }
        }
        d
    }

    /// `selfᵀ diag(w) self`, accumulated row by row.
    pub fn weighted_gram(&self, w: &[f64]) -> DenseMatrix {
        assert_eq!(w.len(), self.rows);
        let mut g = DenseMatrix::zeros(self.cols, self.cols);
        for (i, &wi) in w.iter().enumerate() {
            let range = self.row_ptr[i]..self.row_ptr[i + 1];
            for p in range.clone() {
                let (cp, vp) = (self.col_idx[p], self.values[p]);
                for q in range.clone() {
                    g[(cp, self.col_idx[q])] += wi * vp * self.values[q];
                }
            }
        }
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn products_agree_with_dense() {
        let a = CsrMatrix::from_row_lists(3, &[vec![(0, 1.0), (2, -1.0)], vec![(1, 2.0)]]);
        let d = a.to_dense();
        assert_eq!(a.mul_vec(&[1.0, 2.0, 3.0]), d.mul_vec(&[1.0, 2.0, 3.0]));
        assert_eq!(a.mul_t_vec(&[1.0, -1.0]), d.mul_t_vec(&[1.0, -1.0]));
        let g = a.weighted_gram(&[2.0, 3.0]);
        let expected = d
            .transpose()
            .matmul(&DenseMatrix::from_diagonal(&[2.0, 3.0]))
            .matmul(&d);
        assert!(g.max_abs_diff(&expected) < 1e-15);
    }
}
