//! Evaluators for the two norm inequalities that bound the work of the
//! primal-dual maintenance by the step norm.
//!
//! With `p = d_i`, `σ = d_Σ`, `a_i = (A v_i)_e` on one edge, both reduce to
//! weighted-variance identities, so they hold for any `w`.

use super::MaintenanceError;
use crate::instance::IncidenceMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledNormCheck {
    /// `ε²`, the premise sum `Σ_i ‖S̄_i⁻¹(w + Σ_j D_j D_Σ⁻¹ A(v_i - v_j))‖²`.
    pub eps_sq: f64,
    /// `Σ_i Σ_j ‖S̄_i⁻¹ D_j D_Σ⁻¹ A(v_i - v_j)‖²`, bounded by `6ε²`.
    pub pairwise: f64,
    /// `Σ_i ‖S̄_i⁻¹ w‖²`, bounded by `2ε²`.
    pub w_part: f64,
    pub holds: bool,
}

const SLACK: f64 = 1e-9;

fn check_inputs(
    a: &IncidenceMatrix,
    d: &[Vec<f64>],
    v: &[Vec<f64>],
    w: &[f64],
) -> Result<(), MaintenanceError> {
    let m = a.rows();
    if v.len() != d.len() {
        return Err(MaintenanceError::DimensionMismatch {
            expected: d.len(),
            found: v.len(),
        });
    }
    if w.len() != m {
        return Err(MaintenanceError::DimensionMismatch {
            expected: m,
            found: w.len(),
        });
    }
    for di in d {
        if di.len() != m {
            return Err(MaintenanceError::DimensionMismatch {
                expected: m,
                found: di.len(),
            });
        }
        if let Some(index) = di.iter().position(|&x| !(x > 0.0)) {
            return Err(MaintenanceError::NonPositiveWeight { index });
        }
    }
    for vi in v {
        if vi.len() != a.cols() {
            return Err(MaintenanceError::DimensionMismatch {
                expected: a.cols(),
                found: vi.len(),
            });
        }
    }
    Ok(())
}

/// `Σ_i Σ_j ‖D_i^{1/2} D_j D_Σ⁻¹ A(v_i - v_j)‖² ≤ 4 Σ_i ‖D_i^{1/2}(w + Σ_j D_j D_Σ⁻¹ A(v_i - v_j))‖²`.
///
/// `d` and `v` carry all `k + 1` blocks.
pub fn check_norm_lemma(
    a: &IncidenceMatrix,
    d: &[Vec<f64>],
    v: &[Vec<f64>],
    w: &[f64],
) -> Result<NormCheck, MaintenanceError> {
    check_inputs(a, d, v, w)?;
    let av: Vec<Vec<f64>> = v.iter().map(|vi| a.mul(vi)).collect();
    let (mut lhs, mut rhs) = (0.0, 0.0);
    for e in 0..a.rows() {
        let sigma: f64 = d.iter().map(|di| di[e]).sum();
        for (i, di) in d.iter().enumerate() {
            let mut inner = w[e];
            for (j, dj) in d.iter().enumerate() {
                let term = dj[e] / sigma * (av[i][e] - av[j][e]);
                lhs += di[e] * term * term;
                inner += term;
            }
            rhs += di[e] * inner * inner;
        }
    }
    let rhs = 4.0 * rhs;
    Ok(NormCheck {
        lhs,
        rhs,
        holds: lhs <= rhs + SLACK,
    })
}

/// The `6ε²` / `2ε²` form for `d_i = x̄_i / s̄_i` with `x̄_i s̄_i ≈_{1/5} µ`.
pub fn check_scaled_norm_lemma(
    a: &IncidenceMatrix,
    xbar: &[Vec<f64>],
    sbar: &[Vec<f64>],
    v: &[Vec<f64>],
    w: &[f64],
) -> Result<ScaledNormCheck, MaintenanceError> {
    let d: Vec<Vec<f64>> = xbar
        .iter()
        .zip(sbar)
        .map(|(x, s)| x.iter().zip(s).map(|(x, s)| x / s).collect())
        .collect();
    check_inputs(a, &d, v, w)?;
    let av: Vec<Vec<f64>> = v.iter().map(|vi| a.mul(vi)).collect();
    let (mut eps_sq, mut pairwise, mut w_part) = (0.0, 0.0, 0.0);
    for e in 0..a.rows() {
        let sigma: f64 = d.iter().map(|di| di[e]).sum();
        for (i, si) in sbar.iter().enumerate() {
            let inv = 1.0 / si[e];
            let mut inner = w[e];
            for (j, dj) in d.iter().enumerate() {
                let term = dj[e] / sigma * (av[i][e] - av[j][e]);
                pairwise += (inv * term).powi(2);
                inner += term;
            }
            eps_sq += (inv * inner).powi(2);
            w_part += (inv * w[e]).powi(2);
        }
    }
    Ok(ScaledNormCheck {
        eps_sq,
        pairwise,
        w_part,
        holds: pairwise <= 6.0 * eps_sq + SLACK && w_part <= 2.0 * eps_sq + SLACK,
    })
}
