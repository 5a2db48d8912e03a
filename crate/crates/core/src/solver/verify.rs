use serde::Serialize;

use super::SolveError;
use crate::instance::{reduce_full_rank, KCommodityInstance, ReducedLp};

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, &b| a.max(b.abs()))
}

fn min_entry(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Duality-gap certificate for a point of a reduced program.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerifyReport {
    /// `‖𝒜ᵀx − b‖∞`.
    pub primal_residual: f64,
    /// `‖𝒜y + s − c‖∞`.
    pub dual_residual: f64,
    pub min_x: f64,
    pub min_s: f64,
    /// `xᵀs`.
    pub gap: f64,
    pub primal_ok: bool,
    pub dual_ok: bool,
    pub sign_ok: bool,
    pub gap_ok: bool,
    pub pass: bool,
}

/// Recomputes residuals and the gap of `(x, y, s)` on `lp`.
///
/// The primal residual is accepted up to `1e-6 (1 + ‖b‖∞)` and the dual one up
/// to `1e-6 (1 + ‖c‖∞ + ‖s‖∞)`, since penalty costs can be very large.
pub fn verify_certificate(
    lp: &ReducedLp,
    x: &[f64],
    y: &[f64],
    s: &[f64],
    eps: f64,
) -> Result<VerifyReport, SolveError> {
    for (expected, found) in [
        (lp.primal_dim(), x.len()),
        (lp.dual_dim(), y.len()),
        (lp.primal_dim(), s.len()),
    ] {
        if expected != found {
            return Err(SolveError::DimensionMismatch { expected, found });
        }
    }
    let primal_residual = lp.primal_residual(x);
    let dual_residual = lp.dual_residual(y, s);
    let min_x = min_entry(x);
    let min_s = min_entry(s);
    let gap: f64 = x.iter().zip(s).map(|(a, b)| a * b).sum();
    let primal_ok = primal_residual <= 1e-6 * (1.0 + inf_norm(lp.b()));
    let dual_ok = dual_residual <= 1e-6 * (1.0 + inf_norm(lp.c()) + inf_norm(s));
    let sign_ok = min_x >= -1e-9 && min_s >= -1e-9;
    let gap_ok = gap <= eps;
    Ok(VerifyReport {
        primal_residual,
        dual_residual,
        min_x,
        min_s,
        gap,
        primal_ok,
        dual_ok,
        sign_ok,
        gap_ok,
        pass: primal_ok && dual_ok && sign_ok && gap_ok,
    })
}

/// Checks of a flow file against its instance, without solver state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolutionCheck {
    pub objective: f64,
    /// Difference between the recomputed and the claimed objective.
    pub objective_error: f64,
    pub residuals: Vec<f64>,
    pub total_residual: f64,
    /// `max_e (Σ_i f_ie − u_e)`.
    pub capacity_excess: f64,
    pub min_flow: f64,
    /// `min(c − 𝒜y)` when a dual vector is supplied.
    pub min_slack: Option<f64>,
    /// `xᵀ(c − 𝒜y)` with slack block `u − Σ_i f_i`, when a dual vector is supplied.
    pub gap: Option<f64>,
    pub pass: bool,
}

/// Recomputes objective, residuals and capacity use of `flows`; if `dual` is
/// given, also the dual slack and gap on the original reduced program.
pub fn check_solution(
    inst: &KCommodityInstance,
    flows: &[Vec<f64>],
    claimed_objective: f64,
    dual: Option<&[f64]>,
    eps: f64,
) -> Result<SolutionCheck, SolveError> {
    let (m, k) = (inst.m(), inst.k());
    if flows.len() != k {
        return Err(SolveError::DimensionMismatch {
            expected: k,
            found: flows.len(),
        });
    }
    if let Some(f) = flows.iter().find(|f| f.len() != m) {
        return Err(SolveError::DimensionMismatch {
            expected: m,
            found: f.len(),
        });
    }
    let objective = inst.objective(flows);
    let objective_error = (objective - claimed_objective).abs();
    let residuals = inst.residuals(flows);
    let total_residual: f64 = residuals.iter().sum();
    let mut capacity_excess = f64::NEG_INFINITY;
    let mut x = Vec::with_capacity((k + 1) * m);
    for f in flows {
        x.extend_from_slice(f);
    }
    for e in 0..m {
        let used: f64 = flows.iter().map(|f| f[e]).sum();
        let u = inst.capacity()[e] as f64;
        capacity_excess = capacity_excess.max(used - u);
        x.push(u - used);
    }
    let min_flow = flows
        .iter()
        .map(|f| min_entry(f))
        .fold(f64::INFINITY, f64::min);
    let tol = eps.max(1e-9 * (1.0 + objective.abs()));
    let mut pass = objective_error <= tol
        && total_residual <= eps
        && capacity_excess <= eps
        && min_flow >= -1e-9;
    let (mut min_slack, mut gap) = (None, None);
    if let Some(y) = dual {
        let lp = reduce_full_rank(inst)?;
        if y.len() != lp.dual_dim() {
            return Err(SolveError::DimensionMismatch {
                expected: lp.dual_dim(),
                found: y.len(),
            });
        }
        let s: Vec<f64> = lp
            .apply(y)
            .iter()
            .zip(lp.c())
            .map(|(ay, c)| c - ay)
            .collect();
        let ms = min_entry(&s);
        let g: f64 = x.iter().zip(&s).map(|(a, b)| a * b).sum();
        pass &= ms >= -eps && g <= eps;
        min_slack = Some(ms);
        gap = Some(g);
    }
    Ok(SolutionCheck {
        objective,
        objective_error,
        residuals,
        total_residual,
        capacity_excess,
        min_flow,
        min_slack,
        gap,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{augment_initial, DirectedGraph};

    fn single_edge() -> KCommodityInstance {
        let g = DirectedGraph::new(2, vec![(0, 1)]).unwrap();
        KCommodityInstance::new(g, vec![5], vec![vec![3]], vec![vec![-4, 4]]).unwrap()
    }

    #[test]
    fn initial_point_certificate() {
        let inst = single_edge();
        let (aug, it) = augment_initial(&inst, 0.01).unwrap();
        let big = (2 * aug.m()) as f64;
        let r = verify_certificate(aug.lp_start(), &it.x, &it.y, &it.s, big).unwrap();
        assert_eq!(r.primal_residual, 0.0);
        assert_eq!(r.dual_residual, 0.0);
        assert!((r.gap - big).abs() < 1e-12);
        assert!(r.pass);
    }

    #[test]
    fn perturbed_primal_flagged() {
        let inst = single_edge();
        let (aug, mut it) = augment_initial(&inst, 0.01).unwrap();
        it.x[0] += 1.0;
        let r = verify_certificate(aug.lp_start(), &it.x, &it.y, &it.s, 1e9).unwrap();
        assert!(!r.primal_ok);
        assert!(!r.pass);
    }

    #[test]
    fn dimension_checked() {
        let inst = single_edge();
        let (aug, it) = augment_initial(&inst, 0.01).unwrap();
        let e = verify_certificate(aug.lp_start(), &it.x[1..], &it.y, &it.s, 1.0);
        assert!(matches!(e, Err(SolveError::DimensionMismatch { .. })));
    }

    #[test]
    fn exact_flow_checks() {
        let inst = single_edge();
        let c = check_solution(&inst, &[vec![4.0]], 12.0, None, 1e-6).unwrap();
        assert!(c.pass);
        assert_eq!(c.capacity_excess, -1.0);
        // y_1 = potential of vertex 2, y_2 = capacity dual.
        let c = check_solution(&inst, &[vec![4.0]], 12.0, Some(&[-3.0, 0.0]), 1e-6).unwrap();
        assert_eq!(c.min_slack, Some(0.0));
        assert_eq!(c.gap, Some(0.0));
        assert!(c.pass);
        let bad = check_solution(&inst, &[vec![3.0]], 9.0, None, 1e-6).unwrap();
        assert!(!bad.pass);
        assert_eq!(bad.total_residual, 2.0);
    }
}
