//! Low-rank maintenance of `M⁻¹ v` through the bordered matrix
//! `N = [[M, v], [0, -1]]`, whose inverse is `[[M⁻¹, M⁻¹v], [0, -1]]`.
//!
//! Changing `M` by `U Vᵀ` and `v` by `Δv` is a rank `r + 1` change of `N`,
//! so both are absorbed by one Woodbury step on the stored `N⁻¹`.

use super::dense::{DenseMatrix, LuFactors};
use super::LinalgError;

#[derive(Debug, Clone)]
pub struct InverseMaintenance {
    dim: usize,
    m: DenseMatrix,
    v: Vec<f64>,
    n_inv: DenseMatrix,
}

/// Rebuilds accept ill-conditioned matrices; callers refine their solves.
const REBUILD_PIVOT_TOLERANCE: f64 = 1e-20;

impl InverseMaintenance {
    /// Factors `M` and returns the structure together with `M⁻¹ v`.
    pub fn init(m: DenseMatrix, v: Vec<f64>) -> Result<(Self, Vec<f64>), LinalgError> {
        if !m.is_square() {
            return Err(LinalgError::DimensionMismatch {
                expected: m.rows(),
                found: m.cols(),
            });
        }
        if v.len() != m.rows() {
            return Err(LinalgError::DimensionMismatch {
                expected: m.rows(),
                found: v.len(),
            });
        }
        let dim = m.rows();
        let mut im = InverseMaintenance {
            dim,
            m,
            v,
            n_inv: DenseMatrix::zeros(dim + 1, dim + 1),
        };
        im.rebuild()?;
        let x = im.solution();
        Ok((im, x))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.m
    }

    pub fn rhs(&self) -> &[f64] {
        &self.v
    }

    /// The stored inverse of the bordered matrix.
    pub fn bordered_inverse(&self) -> &DenseMatrix {
        &self.n_inv
    }

    /// Current `M⁻¹ v`, read off the last column of `N⁻¹`.
    pub fn solution(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.n_inv[(i, self.dim)]).collect()
    }

    /// Recomputes `N⁻¹` from the stored `M` and `v`.
    pub fn rebuild(&mut self) -> Result<(), LinalgError> {
        let d = self.dim;
        let lu = LuFactors::factor_with_tolerance(&self.m, REBUILD_PIVOT_TOLERANCE)?;
        let m_inv = lu.inverse();
        let x = lu.solve(&self.v);
        let mut n_inv = DenseMatrix::zeros(d + 1, d + 1);
        n_inv.set_block(0, 0, &m_inv);
        for (i, xi) in x.iter().enumerate() {
            n_inv[(i, d)] = *xi;
        }
        n_inv[(d, d)] = -1.0;
        self.n_inv = n_inv;
        Ok(())
    }

    /// Permanently applies `M ← M + U Vᵀ`, `v ← new_v` and returns the new `M⁻¹ v`.
    pub fn update(
        &mut self,
        u: &DenseMatrix,
        vt: &DenseMatrix,
        new_v: Vec<f64>,
    ) -> Result<Vec<f64>, LinalgError> {
        self.check_factors(u, vt)?;
        if new_v.len() != self.dim {
            return Err(LinalgError::DimensionMismatch {
                expected: self.dim,
                found: new_v.len(),
            });
        }
        let delta: Vec<(usize, f64)> = new_v
            .iter()
            .zip(&self.v)
            .enumerate()
            .filter(|(_, (a, b))| a != b)
            .map(|(i, (a, b))| (i, a - b))
            .collect();
        let (nu, c_inv_rows) = self.bordered_woodbury_parts(u, vt, &delta)?;
        // N⁻¹ ← N⁻¹ - (N⁻¹U_N) C⁻¹ (V_Nᵀ N⁻¹)
        let vn_t_ninv = self.vn_t_times_ninv(vt);
        let correction = nu.matmul(&c_inv_rows.matmul(&vn_t_ninv));
        self.n_inv = self.n_inv.sub(&correction);
        self.m.add_low_rank(u, vt);
        self.v = new_v;
        Ok(self.solution())
    }

    /// Returns `(M + U Vᵀ)⁻¹ (v + Δv)` without touching the stored state.
    pub fn temp_update(
        &self,
        u: &DenseMatrix,
        vt: &DenseMatrix,
        v_delta: &[(usize, f64)],
    ) -> Result<Vec<f64>, LinalgError> {
        self.check_factors(u, vt)?;
        let d = self.dim;
        let nu = self.ninv_times_un(u, v_delta);
        // V_Nᵀ N⁻¹ e_{d+1} = (Vᵀ x, -1)
        let x = self.solution();
        let mut rhs = vt.mul_t_vec(&x);
        rhs.push(-1.0);
        let cap = self.capacitance(&nu, vt);
        let z = LuFactors::factor(&cap)
            .map_err(|_| LinalgError::UpdateSingular)?
            .solve(&rhs);
        let correction = nu.mul_vec(&z);
        Ok((0..d).map(|i| x[i] - correction[i]).collect())
    }

    /// Solves `(M + U Vᵀ) y = rhs` for an arbitrary right-hand side using the
    /// stored inverse, leaving the state untouched.
    pub fn solve_with(
        &self,
        u: &DenseMatrix,
        vt: &DenseMatrix,
        rhs: &[f64],
    ) -> Result<Vec<f64>, LinalgError> {
        self.check_factors(u, vt)?;
        let d = self.dim;
        if rhs.len() != d {
            return Err(LinalgError::DimensionMismatch {
                expected: d,
                found: rhs.len(),
            });
        }
        let y0 = self.apply_m_inv(rhs);
        if u.cols() == 0 {
            return Ok(y0);
        }
        let r = u.cols();
        let mut minv_u = DenseMatrix::zeros(d, r);
        for c in 0..r {
            minv_u.set_column(c, &self.apply_m_inv(&u.column(c)));
        }
        let mut cap = vt.transpose().matmul(&minv_u);
        for i in 0..r {
            cap[(i, i)] += 1.0;
        }
        let z = LuFactors::factor(&cap)
            .map_err(|_| LinalgError::UpdateSingular)?
            .solve(&vt.mul_t_vec(&y0));
        let corr = minv_u.mul_vec(&z);
        Ok(y0.iter().zip(&corr).map(|(a, b)| a - b).collect())
    }

    /// Applies the top-left block of `N⁻¹`, which is `M⁻¹`.
    pub fn apply_m_inv(&self, rhs: &[f64]) -> Vec<f64> {
        let d = self.dim;
        (0..d)
            .map(|i| {
                self.n_inv.row(i)[..d]
                    .iter()
                    .zip(rhs)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    /// `‖N (N⁻¹ e_j) - e_j‖∞` for one column of the stored inverse.
    pub fn probe_residual(&self, j: usize) -> f64 {
        let d = self.dim;
        let col = self.n_inv.column(j);
        let mut worst: f64 = 0.0;
        for i in 0..d {
            let mut acc: f64 = self.m.row(i).iter().zip(&col[..d]).map(|(a, b)| a * b).sum();
            acc += self.v[i] * col[d];
            if i == j {
                acc -= 1.0;
            }
            worst = worst.max(acc.abs());
        }
        let last = -col[d] - if j == d { 1.0 } else { 0.0 };
        worst.max(last.abs())
    }

    fn check_factors(&self, u: &DenseMatrix, vt: &DenseMatrix) -> Result<(), LinalgError> {
        if u.rows() != self.dim || vt.rows() != self.dim {
            return Err(LinalgError::DimensionMismatch {
                expected: self.dim,
                found: if u.rows() != self.dim { u.rows() } else { vt.rows() },
            });
        }
        if u.cols() != vt.cols() {
            return Err(LinalgError::DimensionMismatch {
                expected: u.cols(),
                found: vt.cols(),
            });
        }
        Ok(())
    }

    /// `N⁻¹ U_N` with `U_N = [[U, Δv], [0, 0]]`.
    fn ninv_times_un(&self, u: &DenseMatrix, v_delta: &[(usize, f64)]) -> DenseMatrix {
        let d = self.dim;
        let r = u.cols();
        let mut out = DenseMatrix::zeros(d + 1, r + 1);
        for i in 0..=d {
            let row = &self.n_inv.row(i)[..d];
            for c in 0..r {
                let mut acc = 0.0;
                for (l, a) in row.iter().enumerate() {
                    let b = u[(l, c)];
                    if b != 0.0 {
                        acc += a * b;
                    }
                }
                out[(i, c)] = acc;
            }
            out[(i, r)] = v_delta.iter().map(|&(l, dv)| row[l] * dv).sum();
        }
        out
    }

    /// `I + V_Nᵀ (N⁻¹ U_N)` with `V_N = [[V, 0], [0, 1]]`.
    fn capacitance(&self, nu: &DenseMatrix, vt: &DenseMatrix) -> DenseMatrix {
        let d = self.dim;
        let r = vt.cols();
        let mut cap = DenseMatrix::zeros(r + 1, r + 1);
        for a in 0..r {
            for b in 0..=r {
                let mut acc = 0.0;
                for l in 0..d {
                    let w = vt[(l, a)];
                    if w != 0.0 {
                        acc += w * nu[(l, b)];
                    }
                }
                cap[(a, b)] = acc;
            }
        }
        for b in 0..=r {
            cap[(r, b)] = nu[(d, b)];
        }
        for i in 0..=r {
            cap[(i, i)] += 1.0;
        }
        cap
    }

    fn vn_t_times_ninv(&self, vt: &DenseMatrix) -> DenseMatrix {
        let d = self.dim;
        let r = vt.cols();
        let mut out = DenseMatrix::zeros(r + 1, d + 1);
        for a in 0..r {
            for l in 0..d {
                let w = vt[(l, a)];
                if w == 0.0 {
                    continue;
                }
                let src = self.n_inv.row(l);
                for (o, s) in out.row_mut(a).iter_mut().zip(src) {
                    *o += w * s;
                }
            }
        }
        out.row_mut(r).copy_from_slice(self.n_inv.row(d));
        out
    }

    fn bordered_woodbury_parts(
        &self,
        u: &DenseMatrix,
        vt: &DenseMatrix,
        delta: &[(usize, f64)],
    ) -> Result<(DenseMatrix, DenseMatrix), LinalgError> {
        let nu = self.ninv_times_un(u, delta);
        let cap = self.capacitance(&nu, vt);
        let cap_inv = LuFactors::factor(&cap)
            .map_err(|_| LinalgError::UpdateSingular)?
            .inverse();
        Ok((nu, cap_inv))
    }
}
