use crate::instance::{stacked_matrix, Iterate, ReducedLp};
use crate::linalg::dense::{least_squares, norm2, Cholesky, DenseMatrix, LuFactors};
use crate::linalg::{apply_reduced_inverse, CsrMatrix, LinalgError, SchurSystem};

use super::{centrality, potential_gradient, IpmError};

/// `x̄`, `s̄`, `v̄` and the direction `g = -∇Φ(v̄)` of one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteringState {
    pub xbar: Vec<f64>,
    pub sbar: Vec<f64>,
    pub vbar: Vec<f64>,
    pub g: Vec<f64>,
    pub g_norm: f64,
}

impl CenteringState {
    /// `v̄ = x̄ s̄ / t_ref`.
    pub fn new(xbar: Vec<f64>, sbar: Vec<f64>, t_ref: f64, lambda: f64) -> Result<Self, IpmError> {
        if xbar.len() != sbar.len() {
            return Err(IpmError::DimensionMismatch {
                expected: xbar.len(),
                found: sbar.len(),
            });
        }
        let vbar: Vec<f64> = xbar.iter().zip(&sbar).map(|(x, s)| x * s / t_ref).collect();
        let g: Vec<f64> = potential_gradient(&vbar, lambda)?
            .into_iter()
            .map(|v| -v)
            .collect();
        let g_norm = norm2(&g);
        Ok(CenteringState {
            xbar,
            sbar,
            vbar,
            g,
            g_norm,
        })
    }
}

/// Changes of the primal, slack and dual vectors; the dual moves as
/// `y + dy` with `𝒜 dy = -ds`.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub dx: Vec<f64>,
    pub ds: Vec<f64>,
    pub dy: Vec<f64>,
}

/// [`Step`] together with the reduced quantities it was assembled from.
#[derive(Debug, Clone, PartialEq)]
pub struct CommodityStep {
    pub step: Step,
    pub v: Vec<Vec<f64>>,
    pub w: Vec<f64>,
    pub beta: f64,
    /// `v` came from the least-squares fallback instead of the Schur solve.
    pub fallback: bool,
}

/// Cholesky factor of `𝒜ᵀ D 𝒜` after symmetric diagonal equilibration.
/// Diagonal shift for equilibrated normal matrices that fail to factor.
const SHIFT: f64 = 1e-13;

pub(crate) struct NormalFactor<'a> {
    a: &'a CsrMatrix,
    d: Vec<f64>,
    scale: Vec<f64>,
    factor: Factor,
}

enum Factor {
    Cholesky(Cholesky),
    Lu(LuFactors),
}

impl<'a> NormalFactor<'a> {
    pub fn new(a: &'a CsrMatrix, d: Vec<f64>) -> Result<Self, LinalgError> {
        let mut gram = a.weighted_gram(&d);
        let n = gram.rows();
        let scale: Vec<f64> = (0..n).map(|i| 1.0 / gram[(i, i)].sqrt()).collect();
        if scale.iter().any(|s| !s.is_finite()) {
            return Err(LinalgError::NotPositiveDefinite { pivot: 0 });
        }
        for i in 0..n {
            for j in 0..n {
                gram[(i, j)] *= scale[i] * scale[j];
            }
        }
        let factor = match Cholesky::factor(&gram) {
            Ok(c) => Factor::Cholesky(c),
            Err(_) => match LuFactors::factor(&gram) {
                Ok(lu) => Factor::Lu(lu),
                Err(err) => {
                    // Near-singular after equilibration: factor a shifted
                    // matrix and let refinement against the true one correct it.
                    for i in 0..n {
                        gram[(i, i)] += SHIFT;
                    }
                    Factor::Cholesky(Cholesky::factor(&gram).map_err(|_| err)?)
                }
            },
        };
        Ok(NormalFactor { a, d, scale, factor })
    }

    fn solve_scaled(&self, rhs: &[f64]) -> Vec<f64> {
        let r: Vec<f64> = rhs.iter().zip(&self.scale).map(|(r, s)| r * s).collect();
        let z = match &self.factor {
            Factor::Cholesky(c) => c.solve(&r),
            Factor::Lu(lu) => lu.solve(&r),
        };
        z.iter().zip(&self.scale).map(|(z, s)| z * s).collect()
    }

    fn apply(&self, z: &[f64]) -> Vec<f64> {
        let mut az = self.a.mul_vec(z);
        for (v, d) in az.iter_mut().zip(&self.d) {
            *v *= d;
        }
        self.a.mul_t_vec(&az)
    }

    /// Solves `𝒜ᵀ D 𝒜 z = rhs` with two steps of iterative refinement.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut z = self.solve_scaled(rhs);
        for _ in 0..2 {
            let az = self.apply(&z);
            let r: Vec<f64> = rhs.iter().zip(&az).map(|(a, b)| a - b).collect();
            let corr = self.solve_scaled(&r);
            for (zi, ci) in z.iter_mut().zip(&corr) {
                *zi += ci;
            }
        }
        z
    }
}

/// Solves `S̄ δx + X̄ δs = r`, `𝒜ᵀ δx = 0`, `δs ∈ range(𝒜)`:
/// `δs = 𝒜 (𝒜ᵀ D 𝒜)⁻¹ 𝒜ᵀ S̄⁻¹ r` and `δx = S̄⁻¹ r - D δs` with `D = X̄ S̄⁻¹`.
///
/// In exact arithmetic `δxᵀδs = 0`. When the normal-equation solve loses that
/// to rounding, the step is recomputed as the weighted least-squares problem
/// `min ‖D^{1/2}(𝒜q − X̄⁻¹r)‖₂` by QR.
pub fn newton_step(a: &CsrMatrix, xbar: &[f64], sbar: &[f64], r: &[f64]) -> Result<Step, LinalgError> {
    let d: Vec<f64> = xbar.iter().zip(sbar).map(|(x, s)| x / s).collect();
    let rs: Vec<f64> = r.iter().zip(sbar).map(|(r, s)| r / s).collect();
    let scaled_rhs_sq: f64 = r
        .iter()
        .zip(xbar.iter().zip(sbar))
        .map(|(r, (x, s))| r * r / (x * s))
        .sum();
    if let Ok(factor) = NormalFactor::new(a, d.clone()) {
        let q = factor.solve(&a.mul_t_vec(&rs));
        let ds = a.mul_vec(&q);
        let dx: Vec<f64> = rs
            .iter()
            .zip(&factor.d)
            .zip(&ds)
            .map(|((r, d), s)| r - d * s)
            .collect();
        let defect: f64 = dx.iter().zip(&ds).map(|(x, s)| x * s).sum();
        if defect.abs() <= ORTHOGONALITY_TOLERANCE * scaled_rhs_sq {
            return Ok(Step {
                dx,
                ds,
                dy: q.iter().map(|v| -v).collect(),
            });
        }
    }
    qr_step(a, &d, xbar, sbar, r)
}

/// Largest accepted `|δxᵀδs| / ‖r/√(x̄s̄)‖²` for the normal-equation step.
const ORTHOGONALITY_TOLERANCE: f64 = 1e-10;

fn qr_step(
    a: &CsrMatrix,
    d: &[f64],
    xbar: &[f64],
    sbar: &[f64],
    r: &[f64],
) -> Result<Step, LinalgError> {
    let (rows, cols) = (a.rows(), a.cols());
    let mut m = DenseMatrix::zeros(rows, cols);
    for p in 0..rows {
        let w = d[p].sqrt();
        for (j, v) in a.row(p) {
            m[(p, j)] = w * v;
        }
    }
    let b: Vec<f64> = (0..rows).map(|p| r[p] / (xbar[p] * sbar[p]).sqrt()).collect();
    let ls = least_squares(&m, &b)?;
    let ds = a.mul_vec(&ls.solution);
    let dx = ls
        .residual
        .iter()
        .zip(d)
        .map(|(rho, d)| d.sqrt() * rho)
        .collect();
    Ok(Step {
        dx,
        ds,
        dy: ls.solution.iter().map(|v| -v).collect(),
    })
}

fn check_gradient(cs: &CenteringState) -> Result<(), IpmError> {
    if !(cs.g_norm >= 1e-14) {
        return Err(IpmError::ZeroGradient);
    }
    Ok(())
}

/// Reference step on the full matrix `𝒜` with `r = scale · t'/(32λ) · g/‖g‖`.
pub fn step_generic(
    a: &CsrMatrix,
    cs: &CenteringState,
    t_next: f64,
    lambda: f64,
    scale: f64,
) -> Result<Step, IpmError> {
    check_gradient(cs)?;
    let c = scale * t_next / (32.0 * lambda * cs.g_norm);
    let r: Vec<f64> = cs.g.iter().map(|g| c * g).collect();
    Ok(newton_step(a, &cs.xbar, &cs.sbar, &r)?)
}

/// The same step through the Schur reduction. `sys` must carry the weights
/// `x̄ / s̄` of `cs`.
pub fn step_commodity(
    sys: &mut SchurSystem,
    cs: &CenteringState,
    t_next: f64,
    lambda: f64,
    scale: f64,
) -> Result<CommodityStep, IpmError> {
    check_gradient(cs)?;
    let beta = scale * t_next / (32.0 * lambda * cs.g_norm);
    if let Ok((w, v)) = apply_reduced_inverse(sys, &cs.g, &cs.sbar) {
        let cstep = assemble_commodity_step(sys, cs, w, v, beta, false);
        let defect: f64 = cstep.step.dx.iter().zip(&cstep.step.ds).map(|(x, s)| x * s).sum();
        let rhs_sq: f64 = (0..cs.g.len())
            .map(|p| (beta * cs.g[p]).powi(2) / (cs.xbar[p] * cs.sbar[p]))
            .sum();
        if defect.abs() <= ORTHOGONALITY_TOLERANCE * rhs_sq {
            return Ok(cstep);
        }
    }
    // `v_i` is block `i` of `(𝒜ᵀD𝒜)⁻¹𝒜ᵀS̄⁻¹g`; recover it by least squares.
    let k = sys.k();
    let a = std::sync::Arc::clone(sys.incidence());
    let full = stacked_matrix(&a, k);
    let d: Vec<f64> = cs.xbar.iter().zip(&cs.sbar).map(|(x, s)| x / s).collect();
    let q = qr_step(&full, &d, &cs.xbar, &cs.sbar, &cs.g)?.dy;
    let nr = a.cols();
    let v: Vec<Vec<f64>> = (0..k)
        .map(|i| q[i * nr..(i + 1) * nr].iter().map(|x| -x).collect())
        .collect();
    let m = a.rows();
    let weights = sys.weights();
    let w: Vec<f64> = (0..m)
        .map(|e| {
            let acc: f64 = (0..=k).map(|i| cs.g[i * m + e] / cs.sbar[i * m + e]).sum();
            acc / weights.d_sigma()[e]
        })
        .collect();
    Ok(assemble_commodity_step(sys, cs, w, v, beta, true))
}

fn assemble_commodity_step(
    sys: &SchurSystem,
    cs: &CenteringState,
    w: Vec<f64>,
    v: Vec<Vec<f64>>,
    beta: f64,
    fallback: bool,
) -> CommodityStep {
    let k = sys.k();
    let a = sys.incidence();
    let m = a.rows();
    let weights = sys.weights();
    let av: Vec<Vec<f64>> = v.iter().map(|vi| a.mul(vi)).collect();
    let mean: Vec<f64> = (0..m)
        .map(|e| {
            (0..k)
                .map(|j| weights.get(j, e) * av[j][e])
                .sum::<f64>()
                / weights.d_sigma()[e]
        })
        .collect();
    let mut ds = Vec::with_capacity((k + 1) * m);
    for i in 0..=k {
        for e in 0..m {
            let own = if i < k { av[i][e] } else { 0.0 };
            ds.push(beta * (w[e] + own - mean[e]));
        }
    }
    let dx = (0..(k + 1) * m)
        .map(|p| beta * cs.g[p] / cs.sbar[p] - weights.get(p / m, p % m) * ds[p])
        .collect();
    let mut dy = Vec::with_capacity(k * a.cols() + m);
    for vi in &v {
        dy.extend(vi.iter().map(|x| -beta * x));
    }
    dy.extend(w.iter().zip(&mean).map(|(w, mu)| -beta * (w - mu)));
    CommodityStep {
        step: Step { dx, ds, dy },
        v,
        w,
        beta,
        fallback,
    }
}

/// Largest `α ≤ 1` keeping `z + α dz` at least `(1 - margin) z`.
fn max_fraction(z: &[f64], dz: &[f64], margin: f64) -> f64 {
    z.iter().zip(dz).fold(1.0f64, |acc, (z, dz)| {
        if *dz < 0.0 {
            acc.min(margin * z / -dz)
        } else {
            acc
        }
    })
}

/// Damped Newton steps towards `x s = t` at fixed `t`. Returns the final centrality.
pub fn recenter(
    a: &CsrMatrix,
    it: &mut Iterate,
    tolerance: f64,
    max_steps: usize,
) -> Result<f64, IpmError> {
    let mut c = centrality(&it.x, &it.s, it.t);
    for _ in 0..max_steps {
        if c <= tolerance {
            break;
        }
        let r: Vec<f64> = it.x.iter().zip(&it.s).map(|(x, s)| it.t - x * s).collect();
        let step = newton_step(a, &it.x, &it.s, &r)?;
        let alpha = max_fraction(&it.x, &step.dx, 0.9).min(max_fraction(&it.s, &step.ds, 0.9));
        apply_step(it, &step, alpha);
        c = centrality(&it.x, &it.s, it.t);
    }
    Ok(c)
}

pub(crate) fn apply_step(it: &mut Iterate, step: &Step, alpha: f64) {
    for (x, d) in it.x.iter_mut().zip(&step.dx) {
        *x += alpha * d;
    }
    for (s, d) in it.s.iter_mut().zip(&step.ds) {
        *s += alpha * d;
    }
    for (y, d) in it.y.iter_mut().zip(&step.dy) {
        *y += alpha * d;
    }
}

/// Removes accumulated drift: `y ← (𝒜ᵀD𝒜)⁻¹ 𝒜ᵀ D (c - s)`, `s ← c - 𝒜 y`
/// and `x ← x - D 𝒜 (𝒜ᵀD𝒜)⁻¹ (𝒜ᵀ x - b)` with `D = X S⁻¹`. Either
/// correction is skipped if it would leave the positive orthant.
pub fn refresh(lp: &ReducedLp, a: &CsrMatrix, it: &mut Iterate) -> Result<(), IpmError> {
    let d: Vec<f64> = it.x.iter().zip(&it.s).map(|(x, s)| x / s).collect();
    let factor = NormalFactor::new(a, d)?;
    let target: Vec<f64> = lp
        .c()
        .iter()
        .zip(&it.s)
        .zip(&factor.d)
        .map(|((c, s), d)| d * (c - s))
        .collect();
    let y = factor.solve(&lp.apply_t(&target));
    let ay = lp.apply(&y);
    let s: Vec<f64> = lp.c().iter().zip(&ay).map(|(c, a)| c - a).collect();
    if s.iter().all(|&v| v > 0.0) {
        it.y = y;
        it.s = s;
    }
    let res: Vec<f64> = lp
        .apply_t(&it.x)
        .iter()
        .zip(lp.b())
        .map(|(a, b)| a - b)
        .collect();
    let q = factor.solve(&res);
    let aq = lp.apply(&q);
    let x: Vec<f64> = it
        .x
        .iter()
        .zip(&aq)
        .zip(&factor.d)
        .map(|((x, a), d)| x - d * a)
        .collect();
    if x.iter().all(|&v| v > 0.0) {
        it.x = x;
    }
    Ok(())
}
