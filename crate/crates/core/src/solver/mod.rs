//! End-to-end pipelines: minimum cost and maximum throughput k-commodity
//! flow, certificate checks, demand repair and the instance generator.
//!
//! The min-cost pipeline runs the method on the augmented instance: in
//! reverse from `t = 1` with the artificial costs `c' = 1/x0` until the swap
//! threshold, swaps to the real costs `c''`, then forward down to
//! `t = eps_aug / (4 (k+1) m')`, and finally restricts the flow to the
//! original edges.

mod generate;
mod repair;
mod verify;

use serde::Serialize;
use thiserror::Error;

use crate::instance::{
    augment_initial, reduce_full_rank, swap_costs, truncate_solution, AugmentedInstance,
    DirectedGraph, InstanceError, Iterate, KCommodityInstance, ReducedLp,
};
use crate::ipm::{
    recenter, run_path, Direction, Engine, IpmError, IpmParameters, Mode, RunStats,
    DEFAULT_STEP_SCALE,
};

pub use generate::{generate_instance, GeneratorConfig};
pub use repair::repair_demands;
pub use verify::{check_solution, verify_certificate, SolutionCheck, VerifyReport};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    Ipm(#[from] IpmError),
    #[error("instance is infeasible: truncated demand residual {residual:e} exceeds {eps:e}")]
    Infeasible { residual: f64, eps: f64 },
    #[error("demand residual of commodity {commodity} cannot be cancelled along the flow support")]
    CannotRepair { commodity: usize },
    #[error("pair {index} is invalid: {reason}")]
    InvalidPair { index: usize, reason: &'static str },
    #[error("expected {expected} entries, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid generator parameters: {0}")]
    InvalidGenerator(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolveConfig {
    /// Target additive error on the objective and on the demand residual.
    pub eps: f64,
    pub engine: Engine,
    pub mode: Mode,
    /// Largest step scale in practical mode.
    pub step_scale: f64,
    /// Cap on attempted iterations per path phase.
    pub max_iterations: usize,
    pub stabilize: bool,
    pub audit: bool,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            eps: 1e-4,
            engine: Engine::Direct,
            mode: Mode::Practical,
            step_scale: DEFAULT_STEP_SCALE,
            max_iterations: 10_000_000,
            stabilize: false,
            audit: false,
        }
    }
}

impl SolveConfig {
    pub fn with_engine(mut self, engine: Engine) -> Self {
        self.engine = engine;
        self
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    fn params(&self, k: usize, m: usize, direction: Direction) -> IpmParameters {
        let p = match self.mode {
            Mode::Strict => IpmParameters::strict(k, m, direction),
            Mode::Practical => IpmParameters::practical(k, m, direction, self.step_scale),
        };
        p.with_max_iterations(self.max_iterations)
            .with_stabilizer(self.stabilize)
            .with_audit(self.audit)
    }
}

/// Final augmented iterate, which certifies the returned flow.
#[derive(Debug, Clone)]
pub struct Certificate {
    pub lp: ReducedLp,
    pub iterate: Iterate,
}

#[derive(Debug, Clone)]
pub struct FlowSolution {
    /// `f_1, …, f_k` on the original edges.
    pub flows: Vec<Vec<f64>>,
    pub objective: f64,
    /// `‖Bᵀ f_i + d_i‖₁` per commodity, recomputed from `flows`.
    pub residuals: Vec<f64>,
    /// Duality gap `x'ᵀ s'` of the final augmented iterate.
    pub gap: f64,
    pub iterations: usize,
    pub eps_aug: f64,
    /// Dual vector of the original reduced program, restricted from the
    /// augmented one.
    pub dual: Vec<f64>,
    pub certificate: Certificate,
    pub reverse: RunStats,
    pub forward: RunStats,
    /// Centrality after the exact recentering at the swap point.
    pub swap_centrality: f64,
    /// `max |ln(x s''' / t_mid)|` right after the cost swap.
    pub swap_log_error: f64,
}

impl FlowSolution {
    pub fn total_residual(&self) -> f64 {
        self.residuals.iter().sum()
    }
}

/// Path-following parameters for an augmented instance with `m'` edges.
pub fn augmented_lambda(k: usize, m_aug: usize) -> f64 {
    IpmParameters::strict(k, m_aug, Direction::Forward).lambda
}

/// `eps_aug = min(eps, 1/(16 λ))`.
pub fn augmentation_eps(inst: &KCommodityInstance, eps: f64) -> f64 {
    let m_aug = inst.m() + 2 * inst.n();
    eps.min(1.0 / (16.0 * augmented_lambda(inst.k(), m_aug)))
}

/// Runs the reverse phase on the artificial costs and swaps to the real
/// costs. Returns the swapped iterate (on [`AugmentedInstance::lp_target`]).
pub fn initial_phase(
    inst: &KCommodityInstance,
    cfg: &SolveConfig,
) -> Result<(AugmentedInstance, Iterate, RunStats, f64, f64), SolveError> {
    reduce_full_rank(inst)?;
    if !(cfg.eps > 0.0) {
        return Err(InstanceError::InvalidEps(cfg.eps).into());
    }
    let eps_aug = augmentation_eps(inst, cfg.eps);
    let (aug, start) = augment_initial(inst, eps_aug)?;
    let k = aug.k();
    let t_mid = 1.01 * aug.swap_threshold();
    let params = cfg.params(k, aug.m(), Direction::Reverse);
    let out = run_path(cfg.engine, aug.lp_start(), start, t_mid, &params)?;
    let mut it = out.iterate;
    let a = aug.lp_start().constraint_matrix();
    let swap_centrality = recenter(&a, &mut it, 1e-6, 20)?;
    it.s = swap_costs(&aug, &it)?;
    let swap_log_error = it
        .x
        .iter()
        .zip(&it.s)
        .map(|(x, s)| (x * s / it.t).ln().abs())
        .fold(0.0, f64::max);
    Ok((aug, it, out.stats, swap_centrality, swap_log_error))
}

/// Minimum-cost k-commodity flow within `cfg.eps` of optimal, with total
/// demand residual at most `cfg.eps`.
pub fn solve_mincost(inst: &KCommodityInstance, cfg: &SolveConfig) -> Result<FlowSolution, SolveError> {
    let (aug, it, reverse, swap_centrality, swap_log_error) = initial_phase(inst, cfg)?;
    let k = aug.k();
    let m_aug = aug.m();
    let eps_aug = aug.eps();
    let t_target = eps_aug / (4.0 * ((k + 1) * m_aug) as f64);
    let params = cfg.params(k, m_aug, Direction::Forward);
    let out = run_path(cfg.engine, aug.lp_target(), it, t_target, &params)?;
    let x = truncate_solution(&out.iterate.x, &aug);
    let m = inst.m();
    let flows: Vec<Vec<f64>> = (0..k).map(|i| x[i * m..(i + 1) * m].to_vec()).collect();
    let residuals = inst.residuals(&flows);
    let total: f64 = residuals.iter().sum();
    if !(total <= cfg.eps) {
        return Err(SolveError::Infeasible {
            residual: total,
            eps: cfg.eps,
        });
    }
    let dual = restrict_dual(&out.iterate.y, &aug);
    Ok(FlowSolution {
        objective: inst.objective(&flows),
        flows,
        residuals,
        gap: out.iterate.gap(),
        iterations: reverse.iterations + out.stats.iterations,
        eps_aug,
        dual,
        certificate: Certificate {
            lp: aug.lp_target().clone(),
            iterate: out.iterate,
        },
        reverse,
        forward: out.stats,
        swap_centrality,
        swap_log_error,
    })
}

/// Drops the hub potential and the dual entries of the new edges.
fn restrict_dual(y: &[f64], aug: &AugmentedInstance) -> Vec<f64> {
    let (k, n, m, m_aug) = (aug.k(), aug.base().n(), aug.original_edges(), aug.m());
    // Reduced columns of the augmented program are vertices 1..=n (hub last).
    let nr_aug = n;
    let nr = n - 1;
    let mut out = Vec::with_capacity(k * nr + m);
    for i in 0..k {
        out.extend_from_slice(&y[i * nr_aug..i * nr_aug + nr]);
    }
    let last = &y[k * nr_aug..k * nr_aug + m_aug];
    out.extend((0..m).map(|e| last[aug.edge_map(e)]));
    out
}

#[derive(Debug, Clone)]
pub struct ThroughputSolution {
    pub throughput: f64,
    /// Repaired flow on the edges of [`ThroughputSolution::instance`]; the
    /// first `m` entries of each block are the original edges.
    pub flows: Vec<Vec<f64>>,
    /// Flow of commodity `i` on its return edge `t_i → s_i`.
    pub per_commodity: Vec<f64>,
    /// Residual before repair, per commodity.
    pub residuals_before_repair: Vec<f64>,
    pub instance: KCommodityInstance,
    pub inner: FlowSolution,
}

/// Min-cost instance whose optimum is minus the maximum throughput: adds a
/// return edge `t_i → s_i` of capacity `Σ u` and cost `-1` for commodity `i`
/// (edge `m + i`), zero costs elsewhere and zero demands.
pub fn throughput_instance(
    graph: &DirectedGraph,
    capacity: &[i64],
    pairs: &[(usize, usize)],
) -> Result<KCommodityInstance, SolveError> {
    let (n, m, k) = (graph.n(), graph.m(), pairs.len());
    if capacity.len() != m {
        return Err(SolveError::DimensionMismatch {
            expected: m,
            found: capacity.len(),
        });
    }
    if k == 0 {
        return Err(InstanceError::NoCommodities.into());
    }
    for (index, &(s, t)) in pairs.iter().enumerate() {
        if s >= n || t >= n {
            return Err(SolveError::InvalidPair {
                index,
                reason: "vertex out of range",
            });
        }
        if s == t {
            return Err(SolveError::InvalidPair {
                index,
                reason: "source equals sink",
            });
        }
    }
    let total: i64 = capacity.iter().sum();
    let mut edges = graph.edges().to_vec();
    let mut cap = capacity.to_vec();
    for &(s, t) in pairs {
        edges.push((t, s));
        cap.push(total);
    }
    let mut costs = vec![vec![0i64; m + k]; k];
    for (i, c) in costs.iter_mut().enumerate() {
        c[m + i] = -1;
    }
    let g = DirectedGraph::new(n, edges)?;
    Ok(KCommodityInstance::new(g, cap, costs, vec![vec![0; n]; k])?)
}

/// Maximum throughput for source/sink pairs, solved as the min-cost instance
/// of [`throughput_instance`] followed by [`repair_demands`].
pub fn solve_throughput(
    graph: &DirectedGraph,
    capacity: &[i64],
    pairs: &[(usize, usize)],
    cfg: &SolveConfig,
) -> Result<ThroughputSolution, SolveError> {
    let inst = throughput_instance(graph, capacity, pairs)?;
    let (m, k) = (graph.m(), pairs.len());
    let inner = solve_mincost(&inst, cfg)?;
    let residuals_before_repair = inner.residuals.clone();
    let repaired = repair_demands(&inner.flows, &inst)?;
    let per_commodity: Vec<f64> = (0..k).map(|i| repaired[i][m + i]).collect();
    Ok(ThroughputSolution {
        throughput: per_commodity.iter().sum(),
        flows: repaired,
        per_commodity,
        residuals_before_repair,
        instance: inst,
        inner,
    })
}
