use std::ops::{Index, IndexMut};

use super::LinalgError;

/// Row-major dense matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "data length does not match shape");
        DenseMatrix { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        DenseMatrix { rows: r, cols: c, data }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_column(&mut self, j: usize, values: &[f64]) {
        assert_eq!(values.len(), self.rows);
        for (i, &v) in values.iter().enumerate() {
            self[(i, j)] = v;
        }
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = DenseMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "dimension mismatch in mul_vec");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Computes `selfᵀ x`.
    pub fn mul_t_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows, "dimension mismatch in mul_t_vec");
        let mut out = vec![0.0; self.cols];
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a * xi;
            }
        }
        out
    }

    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.rows, "dimension mismatch in matmul");
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for l in 0..self.cols {
                let a = self[(i, l)];
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(l);
                let dst = out.row_mut(i);
                for (d, b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn add(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        DenseMatrix::from_row_major(self.rows, self.cols, data)
    }

    pub fn sub(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        DenseMatrix::from_row_major(self.rows, self.cols, data)
    }

    pub fn scale(&self, alpha: f64) -> DenseMatrix {
        let data = self.data.iter().map(|a| a * alpha).collect();
        DenseMatrix::from_row_major(self.rows, self.cols, data)
    }

    /// Adds `u vᵀ` in place, where `u` is `rows × r` and `v` is `cols × r`.
    pub fn add_low_rank(&mut self, u: &DenseMatrix, v: &DenseMatrix) {
        assert_eq!(u.rows, self.rows);
        assert_eq!(v.rows, self.cols);
        assert_eq!(u.cols, v.cols);
        for i in 0..self.rows {
            for l in 0..u.cols {
                let a = u[(i, l)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..self.cols {
                    self.data[i * self.cols + j] += a * v[(j, l)];
                }
            }
        }
    }

    /// Largest absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|a| a.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, a| m.max(a.abs()))
    }

    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Copies the block with top-left corner `(r0, c0)` and the given shape.
    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(rows, cols);
        for i in 0..rows {
            out.row_mut(i)
                .copy_from_slice(&self.row(r0 + i)[c0..c0 + cols]);
        }
        out
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, block: &DenseMatrix) {
        for i in 0..block.rows {
            let cols = self.cols;
            self.data[(r0 + i) * cols + c0..(r0 + i) * cols + c0 + block.cols]
                .copy_from_slice(block.row(i));
        }
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        if !self.is_square() {
            return false;
        }
        let scale = self.max_abs().max(1.0);
        for i in 0..self.rows {
            for j in 0..i {
                if (self[(i, j)] - self[(j, i)]).abs() > tol * scale {
                    return false;
                }
            }
        }
        true
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// LU factorization with partial pivoting, `P M = L U`.
#[derive(Debug, Clone)]
pub struct LuFactors {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl LuFactors {
    pub fn factor(m: &DenseMatrix) -> Result<Self, LinalgError> {
        Self::factor_with_tolerance(m, 1e-14 * (m.rows().max(1) as f64))
    }

    /// Partial-pivoting LU that rejects pivots at or below `rel_tol · max|m_ij|`.
    pub fn factor_with_tolerance(m: &DenseMatrix, rel_tol: f64) -> Result<Self, LinalgError> {
        if !m.is_square() {
            return Err(LinalgError::DimensionMismatch {
                expected: m.rows(),
                found: m.cols(),
            });
        }
        let n = m.rows();
        let mut lu = m.as_slice().to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        let tiny = m.max_abs() * rel_tol;
        for col in 0..n {
            let mut piv = col;
            let mut best = lu[col * n + col].abs();
            for r in col + 1..n {
                let v = lu[r * n + col].abs();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if !(best > tiny) || !best.is_finite() {
                return Err(LinalgError::Singular { pivot: col });
            }
            if piv != col {
                for j in 0..n {
                    lu.swap(col * n + j, piv * n + j);
                }
                perm.swap(col, piv);
            }
            let p = lu[col * n + col];
            for r in col + 1..n {
                let f = lu[r * n + col] / p;
                if f == 0.0 {
                    lu[r * n + col] = 0.0;
                    continue;
                }
                lu[r * n + col] = f;
                for j in col + 1..n {
                    lu[r * n + j] -= f * lu[col * n + j];
                }
            }
        }
        Ok(LuFactors { n, lu, perm })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(rhs.len(), n, "dimension mismatch in LU solve");
        let mut x: Vec<f64> = self.perm.iter().map(|&p| rhs[p]).collect();
        for i in 0..n {
            let mut acc = x[i];
            for j in 0..i {
                acc -= self.lu[i * n + j] * x[j];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in i + 1..n {
                acc -= self.lu[i * n + j] * x[j];
            }
            x[i] = acc / self.lu[i * n + i];
        }
        x
    }

    pub fn inverse(&self) -> DenseMatrix {
        let n = self.n;
        let mut inv = DenseMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let col = self.solve(&e);
            inv.set_column(j, &col);
            e[j] = 0.0;
        }
        inv
    }
}

/// Cholesky factorization `M = L Lᵀ` of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    pub fn factor(m: &DenseMatrix) -> Result<Self, LinalgError> {
        if !m.is_square() {
            return Err(LinalgError::DimensionMismatch {
                expected: m.rows(),
                found: m.cols(),
            });
        }
        let n = m.rows();
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut d = m[(j, j)];
            for p in 0..j {
                d -= l[j * n + p] * l[j * n + p];
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(LinalgError::NotPositiveDefinite { pivot: j });
            }
            let djj = d.sqrt();
            l[j * n + j] = djj;
            for i in j + 1..n {
                let mut acc = m[(i, j)];
                for p in 0..j {
                    acc -= l[i * n + p] * l[j * n + p];
                }
                l[i * n + j] = acc / djj;
            }
        }
        Ok(Cholesky { n, l })
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(rhs.len(), n, "dimension mismatch in Cholesky solve");
        let mut y = rhs.to_vec();
        for i in 0..n {
            let mut acc = y[i];
            for p in 0..i {
                acc -= self.l[i * n + p] * y[p];
            }
            y[i] = acc / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut acc = y[i];
            for p in i + 1..n {
                acc -= self.l[p * n + i] * y[p];
            }
            y[i] = acc / self.l[i * n + i];
        }
        y
    }
}

/// Solves `M x = rhs` by LU with partial pivoting.
pub fn dense_solve(m: &DenseMatrix, rhs: &[f64]) -> Result<Vec<f64>, LinalgError> {
    if rhs.len() != m.rows() {
        return Err(LinalgError::DimensionMismatch {
            expected: m.rows(),
            found: rhs.len(),
        });
    }
    Ok(LuFactors::factor(m)?.solve(rhs))
}

pub fn dense_inverse(m: &DenseMatrix) -> Result<DenseMatrix, LinalgError> {
    Ok(LuFactors::factor(m)?.inverse())
}

/// Solution `x` of `min ‖M x − b‖₂` and its residual `b − M x`.
#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquares {
    pub solution: Vec<f64>,
    pub residual: Vec<f64>,
    pub rank: usize,
}

/// Householder QR with rows sorted by decreasing size and column pivoting,
/// which stays accurate when row scales differ by many orders of magnitude.
/// Columns whose remaining norm vanishes get a zero coefficient.
pub fn least_squares(m: &DenseMatrix, b: &[f64]) -> Result<LeastSquares, LinalgError> {
    let (rows, cols) = (m.rows(), m.cols());
    if b.len() != rows {
        return Err(LinalgError::DimensionMismatch {
            expected: rows,
            found: b.len(),
        });
    }
    let row_size: Vec<f64> = (0..rows)
        .map(|i| m.row(i).iter().fold(0.0f64, |a, v| a.max(v.abs())))
        .collect();
    let mut order: Vec<usize> = (0..rows).collect();
    order.sort_by(|&i, &j| row_size[j].total_cmp(&row_size[i]));
    // Column-major working copy in sorted row order.
    let mut a = vec![0.0; rows * cols];
    for (r, &i) in order.iter().enumerate() {
        for j in 0..cols {
            a[j * rows + r] = m[(i, j)];
        }
    }
    let mut c: Vec<f64> = order.iter().map(|&i| b[i]).collect();
    let mut perm: Vec<usize> = (0..cols).collect();
    let mut betas = Vec::with_capacity(cols.min(rows));
    let mut rank = 0;
    for p in 0..cols.min(rows) {
        let norm_below = |a: &[f64], j: usize| -> f64 {
            let col = &a[j * rows + p..(j + 1) * rows];
            let scale = col.iter().fold(0.0f64, |x, v| x.max(v.abs()));
            if scale == 0.0 {
                return 0.0;
            }
            scale * col.iter().map(|v| (v / scale).powi(2)).sum::<f64>().sqrt()
        };
        let (best, best_norm) = (p..cols)
            .map(|j| (j, norm_below(&a, j)))
            .fold((p, -1.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        if !(best_norm > 0.0) || !best_norm.is_finite() {
            break;
        }
        if best != p {
            for r in 0..rows {
                a.swap(p * rows + r, best * rows + r);
            }
            perm.swap(p, best);
        }
        let alpha = if a[p * rows + p] > 0.0 { -best_norm } else { best_norm };
        a[p * rows + p] -= alpha;
        let vnorm_sq: f64 = a[p * rows + p..(p + 1) * rows].iter().map(|v| v * v).sum();
        let beta = if vnorm_sq > 0.0 { 2.0 / vnorm_sq } else { 0.0 };
        for j in p + 1..cols {
            let dotv: f64 = (p..rows).map(|r| a[p * rows + r] * a[j * rows + r]).sum();
            let f = beta * dotv;
            for r in p..rows {
                a[j * rows + r] -= f * a[p * rows + r];
            }
        }
        let dotc: f64 = (p..rows).map(|r| a[p * rows + r] * c[r]).sum();
        for r in p..rows {
            c[r] -= beta * dotc * a[p * rows + r];
        }
        // Keep the reflector below the diagonal and R's diagonal separately.
        betas.push((beta, alpha));
        rank += 1;
    }
    let mut z = vec![0.0; cols];
    for p in (0..rank).rev() {
        let mut acc = c[p];
        for j in p + 1..rank {
            acc -= r_entry(&a, rows, p, j) * z[j];
        }
        z[p] = acc / betas[p].1;
    }
    let mut solution = vec![0.0; cols];
    for (p, &j) in perm.iter().enumerate() {
        solution[j] = z[p];
    }
    let mut res: Vec<f64> = (0..rows).map(|r| if r < rank { 0.0 } else { c[r] }).collect();
    for p in (0..rank).rev() {
        let beta = betas[p].0;
        let dotv: f64 = (p..rows).map(|r| a[p * rows + r] * res[r]).sum();
        for r in p..rows {
            res[r] -= beta * dotv * a[p * rows + r];
        }
    }
    let mut residual = vec![0.0; rows];
    for (r, &i) in order.iter().enumerate() {
        residual[i] = res[r];
    }
    Ok(LeastSquares {
        solution,
        residual,
        rank,
    })
}

/// Entry `R[p][j]` for `j > p`, stored in place of the eliminated column.
fn r_entry(a: &[f64], rows: usize, p: usize, j: usize) -> f64 {
    a[j * rows + p]
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lu_solves_small_system() {
        let m = DenseMatrix::from_rows(&[vec![0.0, 2.0], vec![3.0, 1.0]]);
        let x = dense_solve(&m, &[4.0, 5.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14);
        assert!((x[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn lu_rejects_singular() {
        let m = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert!(matches!(
            dense_solve(&m, &[1.0, 1.0]),
            Err(LinalgError::Singular { .. })
        ));
    }

    #[test]
    fn cholesky_matches_lu() {
        let m = DenseMatrix::from_rows(&[
            vec![4.0, 1.0, 0.5],
            vec![1.0, 3.0, 0.2],
            vec![0.5, 0.2, 2.0],
        ]);
        let rhs = [1.0, -2.0, 0.5];
        let a = Cholesky::factor(&m).unwrap().solve(&rhs);
        let b = dense_solve(&m, &rhs).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-13);
        }
    }

    #[test]
    fn least_squares_fits_line() {
        // Points (0,1), (1,2), (2,2): normal equations give 7/6 + x/2.
        let m = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 1.0], vec![1.0, 2.0]]);
        let ls = least_squares(&m, &[1.0, 2.0, 2.0]).unwrap();
        assert_eq!(ls.rank, 2);
        assert!((ls.solution[0] - 7.0 / 6.0).abs() < 1e-14);
        assert!((ls.solution[1] - 0.5).abs() < 1e-14);
        let fit = m.mul_vec(&ls.solution);
        for i in 0..3 {
            assert!((fit[i] + ls.residual[i] - [1.0, 2.0, 2.0][i]).abs() < 1e-14);
        }
        // Residual is orthogonal to the column space.
        for r in m.mul_t_vec(&ls.residual) {
            assert!(r.abs() < 1e-14);
        }
    }

    #[test]
    fn least_squares_survives_stiff_row_scales() {
        // Rows scaled by 1e±8: the normal matrix has condition ~1e32.
        let base = [vec![1.0, 1.0], vec![1.0, -1.0], vec![2.0, 1.0]];
        let w = [1e8, 1e-8, 1.0];
        let rows: Vec<Vec<f64>> = base.iter().zip(&w).map(|(r, w)| r.iter().map(|v| v * w).collect()).collect();
        let x_true = [3.0, -2.0];
        let b: Vec<f64> = rows.iter().map(|r| r[0] * x_true[0] + r[1] * x_true[1]).collect();
        let ls = least_squares(&DenseMatrix::from_rows(&rows), &b).unwrap();
        for (x, t) in ls.solution.iter().zip(&x_true) {
            assert!((x - t).abs() < 1e-10, "{x} vs {t}");
        }
    }

    #[test]
    fn least_squares_rank_deficient() {
        let m = DenseMatrix::from_rows(&[vec![0.0, 2.0], vec![0.0, 4.0], vec![0.0, 6.0]]);
        let ls = least_squares(&m, &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(ls.rank, 1);
        assert_eq!(ls.solution[0], 0.0);
        assert!((ls.solution[1] - 0.5).abs() < 1e-15);
        for r in &ls.residual {
            assert!(r.abs() < 1e-14);
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let m = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        assert!(Cholesky::factor(&m).is_err());
    }

    #[test]
    fn inverse_round_trip() {
        let m = DenseMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]);
        let inv = dense_inverse(&m).unwrap();
        let id = m.matmul(&inv);
        assert!(id.max_abs_diff(&DenseMatrix::identity(2)) < 1e-14);
    }

    #[test]
    fn low_rank_update_matches_matmul() {
        let mut m = DenseMatrix::identity(3);
        let u = DenseMatrix::from_rows(&[vec![1.0], vec![2.0], vec![0.0]]);
        let v = DenseMatrix::from_rows(&[vec![0.5], vec![0.0], vec![1.0]]);
        let expected = m.add(&u.matmul(&v.transpose()));
        m.add_low_rank(&u, &v);
        assert_eq!(m, expected);
    }
}
