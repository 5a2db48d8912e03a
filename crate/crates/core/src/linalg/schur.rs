//! The block elimination of the k-commodity normal matrix.
//!
//! With `D_i = X̄_i S̄_i⁻¹` and `D_Σ = Σ_i D_i`, the normal matrix
//! `𝒜ᵀ D 𝒜` has the layout `[[blockdiag(AᵀD_iA), [AᵀD_i]], [[D_iA], D_Σ]]`.
//! Eliminating the diagonal `D_Σ` block leaves
//! `E = blockdiag(AᵀD_iA) - [AᵀD_i] D_Σ⁻¹ [D_jA]`, of size `k(n-1)`.
//!
//! Per edge this is a Kronecker term: `E = Σ_e K_e ⊗ a_e a_eᵀ` with
//! `K_e = diag(p) - p pᵀ / σ`, `p = (d_1, …, d_k)_e` and `σ = (d_Σ)_e`.
//! A change of the weights on one edge is therefore a rank-`k` change of `E`.

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::Serialize;

use super::dense::{DenseMatrix, LuFactors};
use super::woodbury::InverseMaintenance;
use super::LinalgError;
use crate::instance::IncidenceMatrix;

/// `D_1, …, D_{k+1}` and their sum.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockWeights {
    d: Vec<Vec<f64>>,
    d_sigma: Vec<f64>,
}

impl BlockWeights {
    pub fn new(d: Vec<Vec<f64>>) -> Result<Self, LinalgError> {
        let m = d.first().map_or(0, |b| b.len());
        for (block, di) in d.iter().enumerate() {
            if di.len() != m {
                return Err(LinalgError::DimensionMismatch {
                    expected: m,
                    found: di.len(),
                });
            }
            for (index, &v) in di.iter().enumerate() {
                check_weight(block, index, v)?;
            }
        }
        let d_sigma = (0..m).map(|e| d.iter().map(|di| di[e]).sum()).collect();
        Ok(BlockWeights { d, d_sigma })
    }

    /// Weights `x̄ / s̄` from stacked vectors.
    pub fn from_ratio(x: &[f64], s: &[f64], k: usize) -> Result<Self, LinalgError> {
        let m = x.len() / (k + 1);
        let d = (0..=k)
            .map(|i| (0..m).map(|e| x[i * m + e] / s[i * m + e]).collect())
            .collect();
        Self::new(d)
    }

    pub fn k(&self) -> usize {
        self.d.len() - 1
    }

    pub fn m(&self) -> usize {
        self.d_sigma.len()
    }

    pub fn block(&self, i: usize) -> &[f64] {
        &self.d[i]
    }

    pub fn d_sigma(&self) -> &[f64] {
        &self.d_sigma
    }

    pub fn get(&self, i: usize, e: usize) -> f64 {
        self.d[i][e]
    }

    /// Weights of one edge across all blocks.
    pub fn edge(&self, e: usize) -> Vec<f64> {
        self.d.iter().map(|di| di[e]).collect()
    }

    pub fn set_edge(&mut self, e: usize, values: &[f64]) -> Result<(), LinalgError> {
        assert_eq!(values.len(), self.d.len());
        for (block, &v) in values.iter().enumerate() {
            check_weight(block, e, v)?;
        }
        for (di, &v) in self.d.iter_mut().zip(values) {
            di[e] = v;
        }
        self.d_sigma[e] = values.iter().sum();
        Ok(())
    }

    /// Flattened `k × k` kernel `K_e` of one edge.
    pub fn kernel(&self, e: usize) -> Vec<f64> {
        edge_kernel(&self.edge(e))
    }
}

fn check_weight(block: usize, index: usize, v: f64) -> Result<(), LinalgError> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(LinalgError::NonPositiveWeight { block, index });
    }
    if v.ln().abs() > 300.0 {
        return Err(LinalgError::WeightOutOfRange {
            block,
            index,
            value: v,
        });
    }
    Ok(())
}

/// `K = diag(p) - p pᵀ/σ` for the weights `(d_1, …, d_{k+1})` of one edge.
/// The diagonal uses `p_i (σ - p_i)/σ` with `σ - p_i` summed directly.
fn edge_kernel(d: &[f64]) -> Vec<f64> {
    let k = d.len() - 1;
    let sigma: f64 = d.iter().sum();
    let mut kern = vec![0.0; k * k];
    for i in 0..k {
        let others: f64 = d.iter().enumerate().filter(|&(l, _)| l != i).map(|(_, v)| v).sum();
        kern[i * k + i] = d[i] * others / sigma;
        for j in 0..k {
            if j != i {
                kern[i * k + j] = -d[i] * d[j] / sigma;
            }
        }
    }
    kern
}

/// Assembles `E` blockwise in `O(m k²)`.
pub fn assemble_e(a: &IncidenceMatrix, weights: &BlockWeights) -> DenseMatrix {
    let k = weights.k();
    let nr = a.cols();
    let mut e_mat = DenseMatrix::zeros(k * nr, k * nr);
    for e in 0..a.rows() {
        let kern = weights.kernel(e);
        let entries: Vec<(usize, f64)> = a.row(e).collect();
        for i in 0..k {
            for j in 0..k {
                let kij = kern[i * k + j];
                for &(p, vp) in &entries {
                    for &(q, vq) in &entries {
                        e_mat[(i * nr + p, j * nr + q)] += kij * vp * vq;
                    }
                }
            }
        }
    }
    e_mat
}

/// `E v` without forming `E`.
pub fn apply_e(a: &IncidenceMatrix, weights: &BlockWeights, v: &[f64]) -> Vec<f64> {
    let k = weights.k();
    let nr = a.cols();
    assert_eq!(v.len(), k * nr);
    let mut out = vec![0.0; k * nr];
    let mut av = vec![0.0; k];
    for e in 0..a.rows() {
        for (i, slot) in av.iter_mut().enumerate() {
            *slot = a.row_dot(e, &v[i * nr..(i + 1) * nr]);
        }
        let kern = weights.kernel(e);
        for i in 0..k {
            let coeff: f64 = (0..k).map(|j| kern[i * k + j] * av[j]).sum();
            a.add_row_t(e, coeff, &mut out[i * nr..(i + 1) * nr]);
        }
    }
    out
}

/// The three-factor inverse of `[[A, B], [C, D]]`:
/// `[[I, 0], [-D⁻¹C, I]] · [[E⁻¹, 0], [0, I]] · [[I, -BD⁻¹], [0, D⁻¹]]`
/// with `E = A - B D⁻¹ C`.
pub fn schur_inverse(
    a: &DenseMatrix,
    b: &DenseMatrix,
    c: &DenseMatrix,
    d: &DenseMatrix,
) -> Result<DenseMatrix, LinalgError> {
    let (p, q) = (a.rows(), d.rows());
    let d_lu = LuFactors::factor(d)?;
    let d_inv = d_lu.inverse();
    let d_inv_c = d_inv.matmul(c);
    let b_d_inv = b.matmul(&d_inv);
    let e = a.sub(&b.matmul(&d_inv_c));
    let e_inv = LuFactors::factor(&e)?.inverse();

    let mut left = DenseMatrix::identity(p + q);
    left.set_block(p, 0, &d_inv_c.scale(-1.0));
    let mut mid = DenseMatrix::identity(p + q);
    mid.set_block(0, 0, &e_inv);
    let mut right = DenseMatrix::zeros(p + q, p + q);
    right.set_block(0, 0, &DenseMatrix::identity(p));
    right.set_block(0, p, &b_d_inv.scale(-1.0));
    right.set_block(p, p, &d_inv);
    Ok(left.matmul(&mid).matmul(&right))
}

/// Solves `𝒜ᵀ D 𝒜 z = r` through the elimination, for stacked
/// `r = (r_1, …, r_k, r_{k+1})` with `r_i ∈ ℝ^{n-1}` and `r_{k+1} ∈ ℝ^m`.
///
/// Eliminating the last block gives `E v = r_top - [AᵀD_i] D_Σ⁻¹ r_{k+1}` and
/// `z_{k+1} = D_Σ⁻¹ (r_{k+1} - Σ_i D_i A v_i)`.
pub fn solve_normal_with(
    a: &IncidenceMatrix,
    weights: &BlockWeights,
    rhs: &[f64],
    solve_e: impl FnOnce(&[f64]) -> Result<Vec<f64>, LinalgError>,
) -> Result<Vec<f64>, LinalgError> {
    let k = weights.k();
    let (m, nr) = (a.rows(), a.cols());
    assert_eq!(rhs.len(), k * nr + m);
    let last = &rhs[k * nr..];
    let scaled: Vec<f64> = last
        .iter()
        .zip(weights.d_sigma())
        .map(|(r, s)| r / s)
        .collect();
    let mut reduced = rhs[..k * nr].to_vec();
    for i in 0..k {
        let dst = &mut reduced[i * nr..(i + 1) * nr];
        for e in 0..m {
            a.add_row_t(e, -weights.get(i, e) * scaled[e], dst);
        }
    }
    let v = solve_e(&reduced)?;
    let mut out = v.clone();
    out.extend((0..m).map(|e| {
        let mut acc = last[e];
        for i in 0..k {
            acc -= weights.get(i, e) * a.row_dot(e, &v[i * nr..(i + 1) * nr]);
        }
        acc / weights.d_sigma()[e]
    }));
    Ok(out)
}

/// Work tallies of a [`SchurSystem`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SchurCounters {
    pub solves: u64,
    pub temp_updates: u64,
    pub permanent_updates: u64,
    pub dense_rebuilds: u64,
    pub forced_rebuilds: u64,
    pub refinement_steps: u64,
    pub updated_edges: u64,
}

/// `E` for the current weights together with its maintained inverse.
///
/// Edge weight changes are buffered. Each solve applies the buffered changes
/// as a temporary Woodbury update. Once the buffered rank exceeds
/// `rank_threshold` they are folded in permanently, and once the rank folded
/// in since the last factorization exceeds `k(n-1)` the inverse is rebuilt.
#[derive(Debug, Clone)]
pub struct SchurSystem {
    a: Arc<IncidenceMatrix>,
    k: usize,
    weights: BlockWeights,
    represented: Vec<Vec<f64>>,
    pending: BTreeSet<usize>,
    inverse: Option<InverseMaintenance>,
    /// Symmetric diagonal scaling `S` of the maintained matrix `S E S`.
    scale: Vec<f64>,
    folded_rank: usize,
    rank_threshold: usize,
    rebuild_threshold: usize,
    counters: SchurCounters,
}

const PROBE_TOLERANCE: f64 = 1e-9;

impl SchurSystem {
    pub fn new(a: Arc<IncidenceMatrix>, weights: BlockWeights) -> Result<Self, LinalgError> {
        let k = weights.k();
        if weights.m() != a.rows() {
            return Err(LinalgError::DimensionMismatch {
                expected: a.rows(),
                found: weights.m(),
            });
        }
        let dim = k * a.cols();
        let rank_threshold = 8usize.max((dim as f64).sqrt().ceil() as usize);
        let represented = (0..a.rows()).map(|e| weights.edge(e)).collect();
        Ok(SchurSystem {
            a,
            k,
            weights,
            represented,
            pending: BTreeSet::new(),
            inverse: None,
            scale: vec![1.0; dim],
            folded_rank: 0,
            rank_threshold,
            rebuild_threshold: dim,
            counters: SchurCounters::default(),
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.k * self.a.cols()
    }

    pub fn incidence(&self) -> &Arc<IncidenceMatrix> {
        &self.a
    }

    pub fn weights(&self) -> &BlockWeights {
        &self.weights
    }

    pub fn counters(&self) -> &SchurCounters {
        &self.counters
    }

    pub fn pending_edges(&self) -> usize {
        self.pending.len()
    }

    /// Dense `E` for the current weights.
    pub fn e_matrix(&self) -> DenseMatrix {
        assemble_e(&self.a, &self.weights)
    }

    pub fn apply_e(&self, v: &[f64]) -> Vec<f64> {
        apply_e(&self.a, &self.weights, v)
    }

    pub fn set_edge_weights(&mut self, e: usize, values: &[f64]) -> Result<(), LinalgError> {
        self.weights.set_edge(e, values)?;
        if self.represented[e] != values {
            self.pending.insert(e);
        } else {
            self.pending.remove(&e);
        }
        self.counters.updated_edges += 1;
        Ok(())
    }

    pub fn set_weights(&mut self, weights: BlockWeights) -> Result<(), LinalgError> {
        if weights.m() != self.a.rows() || weights.k() != self.k {
            return Err(LinalgError::DimensionMismatch {
                expected: self.a.rows(),
                found: weights.m(),
            });
        }
        for e in 0..self.a.rows() {
            let w = weights.edge(e);
            self.set_edge_weights(e, &w)?;
        }
        Ok(())
    }

    /// Drops the maintained inverse so that the next solve refactors `E`.
    pub fn invalidate(&mut self) {
        self.inverse = None;
    }

    /// Solves `E v = rhs` for the current weights.
    pub fn solve(&mut self, rhs: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if rhs.len() != self.dim() {
            return Err(LinalgError::DimensionMismatch {
                expected: self.dim(),
                found: rhs.len(),
            });
        }
        self.counters.solves += 1;
        let mut rebuilt = false;
        let pending_rank = self.k * self.pending.len();
        if self.inverse.is_none() || self.folded_rank + pending_rank > self.rebuild_threshold {
            self.rebuild(rhs)?;
            rebuilt = true;
        } else if pending_rank > self.rank_threshold {
            self.fold_pending(rhs)?;
        }
        match self.solve_current(rhs) {
            Ok(v) => Ok(v),
            Err(_) if !rebuilt => {
                self.counters.forced_rebuilds += 1;
                self.rebuild(rhs)?;
                self.solve_current(rhs)
            }
            Err(err) => Err(err),
        }
    }

    fn solve_current(&mut self, rhs: &[f64]) -> Result<Vec<f64>, LinalgError> {
        let inv = self.inverse.as_ref().expect("inverse is built");
        let (u, vt) = self.pending_factors();
        let scaled_rhs = self.scaled(rhs);
        let mut x = if u.cols() == 0 {
            inv.solve_with(&u, &vt, &scaled_rhs)?
        } else {
            let delta: Vec<(usize, f64)> = scaled_rhs
                .iter()
                .zip(inv.rhs())
                .enumerate()
                .filter(|(_, (a, b))| a != b)
                .map(|(i, (a, b))| (i, a - b))
                .collect();
            self.counters.temp_updates += 1;
            inv.temp_update(&u, &vt, &delta)
                .map_err(|_| LinalgError::SingularSystem)?
        };
        for (xi, si) in x.iter_mut().zip(&self.scale) {
            *xi *= si;
        }
        let rhs_norm = super::dense::norm_inf(rhs);
        let e_norm = self.weights_norm_bound();
        let mut residual_norm = f64::INFINITY;
        for _ in 0..3 {
            let ex = self.apply_e(&x);
            let r: Vec<f64> = rhs.iter().zip(&ex).map(|(a, b)| a - b).collect();
            residual_norm = super::dense::norm_inf(&r);
            let scale = e_norm * super::dense::norm_inf(&x) + rhs_norm;
            if residual_norm <= 1e-15 * scale || residual_norm == 0.0 {
                break;
            }
            self.counters.refinement_steps += 1;
            let corr = inv.solve_with(&u, &vt, &self.scaled(&r))?;
            for ((xi, ci), si) in x.iter_mut().zip(&corr).zip(&self.scale) {
                *xi += ci * si;
            }
        }
        let scale = e_norm * super::dense::norm_inf(&x) + rhs_norm;
        if !(residual_norm <= PROBE_TOLERANCE * scale) || x.iter().any(|v| !v.is_finite()) {
            return Err(LinalgError::SingularSystem);
        }
        Ok(x)
    }

    /// Upper bound on `‖E‖∞` from the edge kernels.
    fn weights_norm_bound(&self) -> f64 {
        let mut per_col = vec![0.0f64; self.a.cols().max(1)];
        for e in 0..self.a.rows() {
            let w: f64 = (0..self.k).map(|i| self.weights.get(i, e)).sum::<f64>() * 2.0;
            for (c, _) in self.a.row(e) {
                per_col[c] += 2.0 * w;
            }
        }
        per_col.iter().fold(0.0, |a, &b| a.max(b))
    }

    fn scaled(&self, v: &[f64]) -> Vec<f64> {
        v.iter().zip(&self.scale).map(|(a, s)| a * s).collect()
    }

    fn rebuild(&mut self, rhs: &[f64]) -> Result<(), LinalgError> {
        let mut e_mat = self.e_matrix();
        let dim = e_mat.rows();
        for i in 0..dim {
            let d = e_mat[(i, i)];
            self.scale[i] = if d > 0.0 && d.is_finite() { 1.0 / d.sqrt() } else { 1.0 };
        }
        for i in 0..dim {
            for j in 0..dim {
                e_mat[(i, j)] *= self.scale[i] * self.scale[j];
            }
        }
        let (inv, _) = InverseMaintenance::init(e_mat, self.scaled(rhs))?;
        self.inverse = Some(inv);
        for e in 0..self.a.rows() {
            self.represented[e] = self.weights.edge(e);
        }
        self.pending.clear();
        self.folded_rank = 0;
        self.counters.dense_rebuilds += 1;
        Ok(())
    }

    fn fold_pending(&mut self, rhs: &[f64]) -> Result<(), LinalgError> {
        let (u, vt) = self.pending_factors();
        let rank = u.cols();
        let scaled_rhs = self.scaled(rhs);
        let inv = self.inverse.as_mut().expect("inverse is built");
        match inv.update(&u, &vt, scaled_rhs) {
            Ok(_) => {
                for &e in &self.pending {
                    self.represented[e] = self.weights.edge(e);
                }
                self.pending.clear();
                self.folded_rank += rank;
                self.counters.permanent_updates += 1;
                Ok(())
            }
            Err(_) => {
                self.counters.forced_rebuilds += 1;
                self.rebuild(rhs)
            }
        }
    }

    /// `U`, `V` with `E_current - E_represented = U Vᵀ` over the pending edges.
    fn pending_factors(&self) -> (DenseMatrix, DenseMatrix) {
        let k = self.k;
        let nr = self.a.cols();
        let r = k * self.pending.len();
        let mut u = DenseMatrix::zeros(k * nr, r);
        let mut vt = DenseMatrix::zeros(k * nr, r);
        for (slot, &e) in self.pending.iter().enumerate() {
            let new_k = self.weights.kernel(e);
            let old_k = edge_kernel(&self.represented[e]);
            for j in 0..k {
                let col = slot * k + j;
                for (c, val) in self.a.row(e) {
                    vt[(j * nr + c, col)] = val * self.scale[j * nr + c];
                    for i in 0..k {
                        let dk = new_k[i * k + j] - old_k[i * k + j];
                        u[(i * nr + c, col)] = dk * val * self.scale[i * nr + c];
                    }
                }
            }
        }
        (u, vt)
    }
}

/// `w = D_Σ⁻¹ Σ_i S̄_i⁻¹ g_i` and `(v_1, …, v_k) = E⁻¹ stack(Aᵀ(S̄_i⁻¹ g_i - D_i w))`.
pub fn apply_reduced_inverse(
    sys: &mut SchurSystem,
    g: &[f64],
    sbar: &[f64],
) -> Result<(Vec<f64>, Vec<Vec<f64>>), LinalgError> {
    let k = sys.k();
    let a = Arc::clone(sys.incidence());
    let (m, nr) = (a.rows(), a.cols());
    if g.len() != (k + 1) * m || sbar.len() != (k + 1) * m {
        return Err(LinalgError::DimensionMismatch {
            expected: (k + 1) * m,
            found: g.len().min(sbar.len()),
        });
    }
    let weights = sys.weights();
    let w: Vec<f64> = (0..m)
        .map(|e| {
            let acc: f64 = (0..=k).map(|i| g[i * m + e] / sbar[i * m + e]).sum();
            acc / weights.d_sigma()[e]
        })
        .collect();
    let mut rhs = vec![0.0; k * nr];
    for i in 0..k {
        let dst = &mut rhs[i * nr..(i + 1) * nr];
        for e in 0..m {
            let q = g[i * m + e] / sbar[i * m + e] - weights.get(i, e) * w[e];
            a.add_row_t(e, q, dst);
        }
    }
    let v = sys.solve(&rhs)?;
    let vs = (0..k).map(|i| v[i * nr..(i + 1) * nr].to_vec()).collect();
    Ok((w, vs))
}
