//! Graph and k-commodity instance model, incidence matrices, the full-rank
//! reduction and the initial-point augmentation.
//!
//! Vertices and edges are 0-based in memory. Files and the CLI use 1-based
//! indices.
//!
//! A demand `d_v` is the net flow into vertex `v`: sinks are positive and
//! sources are negative. The incidence matrix has `+1` at the tail, so a flow
//! `f` meets the demands when `Bᵀ f = -d`.

use std::sync::Arc;

use thiserror::Error;

use crate::linalg::sparse::CsrMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InstanceError {
    #[error("graph must have at least one vertex and one edge")]
    Empty,
    #[error("edge {edge} is a self loop at vertex {vertex}")]
    SelfLoop { edge: usize, vertex: usize },
    #[error("edge {edge} references vertex {vertex} outside 0..{n}")]
    VertexOutOfRange { edge: usize, vertex: usize, n: usize },
    #[error("graph has {components} weakly connected components")]
    NotConnected { components: usize },
    #[error("demands of commodity {commodity} sum to {sum}")]
    UnbalancedDemand { commodity: usize, sum: i64 },
    #[error("edge {edge} has non-positive capacity {capacity}")]
    NonPositiveCapacity { edge: usize, capacity: i64 },
    #[error("commodity count must be at least 1")]
    NoCommodities,
    #[error("expected {expected} entries for {what}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("eps = {0} is outside (0, 0.1]")]
    InvalidEps(f64),
    #[error("path parameter {mu} does not exceed the swap threshold {threshold}")]
    PathParameterTooSmall { mu: f64, threshold: f64 },
    #[error("swapped slack is non-positive at coordinate {index}")]
    NegativeSlack { index: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectedGraph {
    n: usize,
    edges: Vec<(usize, usize)>,
}

impl DirectedGraph {
    pub fn new(n: usize, edges: Vec<(usize, usize)>) -> Result<Self, InstanceError> {
        if n == 0 || edges.is_empty() {
            return Err(InstanceError::Empty);
        }
        for (e, &(t, h)) in edges.iter().enumerate() {
            for v in [t, h] {
                if v >= n {
                    return Err(InstanceError::VertexOutOfRange { edge: e, vertex: v, n });
                }
            }
            if t == h {
                return Err(InstanceError::SelfLoop { edge: e, vertex: t });
            }
        }
        Ok(DirectedGraph { n, edges })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> (usize, usize) {
        self.edges[e]
    }

    /// Number of weakly connected components.
    pub fn weak_components(&self) -> usize {
        let mut parent: Vec<usize> = (0..self.n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        let mut components = self.n;
        for &(t, h) in &self.edges {
            let (a, b) = (find(&mut parent, t), find(&mut parent, h));
            if a != b {
                parent[a] = b;
                components -= 1;
            }
        }
        components
    }

    /// `Bᵀ f`: outflow minus inflow at each vertex.
    pub fn divergence(&self, f: &[f64]) -> Vec<f64> {
        assert_eq!(f.len(), self.m());
        let mut out = vec![0.0; self.n];
        for (&(t, h), &fe) in self.edges.iter().zip(f) {
            out[t] += fe;
            out[h] -= fe;
        }
        out
    }

    /// `‖Bᵀ f + d‖₁`, the violation of the demand constraints.
    pub fn demand_residual(&self, f: &[f64], demand: &[f64]) -> f64 {
        self.divergence(f)
            .iter()
            .zip(demand)
            .map(|(a, d)| (a + d).abs())
            .sum()
    }
}

/// Edge-vertex incidence matrix stored as one optional `+1` (tail) and one
/// optional `-1` (head) column per row. Deleting a column leaves some rows
/// with a single entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IncidenceMatrix {
    cols: usize,
    tail: Vec<Option<usize>>,
    head: Vec<Option<usize>>,
}

impl IncidenceMatrix {
    pub fn rows(&self) -> usize {
        self.tail.len()
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn tail(&self, e: usize) -> Option<usize> {
        self.tail[e]
    }

    pub fn head(&self, e: usize) -> Option<usize> {
        self.head[e]
    }

    /// Nonzeros of row `e` as `(column, value)`.
    pub fn row(&self, e: usize) -> impl Iterator<Item = (usize, f64)> {
        self.tail[e]
            .map(|c| (c, 1.0))
            .into_iter()
            .chain(self.head[e].map(|c| (c, -1.0)))
    }

    /// `(row e) · y`.
    #[inline]
    pub fn row_dot(&self, e: usize, y: &[f64]) -> f64 {
        let mut acc = 0.0;
        if let Some(c) = self.tail[e] {
            acc += y[c];
        }
        if let Some(c) = self.head[e] {
            acc -= y[c];
        }
        acc
    }

    /// Adds `alpha · (row e)ᵀ` into `out`.
    #[inline]
    pub fn add_row_t(&self, e: usize, alpha: f64, out: &mut [f64]) {
        if let Some(c) = self.tail[e] {
            out[c] += alpha;
        }
        if let Some(c) = self.head[e] {
            out[c] -= alpha;
        }
    }

    /// `A y`.
    pub fn mul(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.cols);
        (0..self.rows()).map(|e| self.row_dot(e, y)).collect()
    }

    /// `Aᵀ x`.
    pub fn mul_t(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows());
        let mut out = vec![0.0; self.cols];
        for (e, &xe) in x.iter().enumerate() {
            self.add_row_t(e, xe, &mut out);
        }
        out
    }

    pub fn to_dense(&self) -> crate::linalg::DenseMatrix {
        let mut d = crate::linalg::DenseMatrix::zeros(self.rows(), self.cols);
        for e in 0..self.rows() {
            for (c, v) in self.row(e) {
                d[(e, c)] += v;
            }
        }
        d
    }

    /// Removes column 0 and shifts the remaining columns left by one.
    pub fn delete_first_column(&self) -> IncidenceMatrix {
        let shift = |c: Option<usize>| c.and_then(|c| c.checked_sub(1));
        IncidenceMatrix {
            cols: self.cols.saturating_sub(1),
            tail: self.tail.iter().map(|&c| shift(c)).collect(),
            head: self.head.iter().map(|&c| shift(c)).collect(),
        }
    }
}

pub fn build_incidence(graph: &DirectedGraph) -> IncidenceMatrix {
    IncidenceMatrix {
        cols: graph.n(),
        tail: graph.edges().iter().map(|&(t, _)| Some(t)).collect(),
        head: graph.edges().iter().map(|&(_, h)| Some(h)).collect(),
    }
}

/// Integer k-commodity instance as read from a file.
#[derive(Debug, Clone, PartialEq)]
pub struct KCommodityInstance {
    graph: DirectedGraph,
    k: usize,
    capacity: Vec<i64>,
    costs: Vec<Vec<i64>>,
    demands: Vec<Vec<i64>>,
}

impl KCommodityInstance {
    /// Validates capacities, dimensions and demand balance. Connectivity is
    /// checked by [`reduce_full_rank`].
    pub fn new(
        graph: DirectedGraph,
        capacity: Vec<i64>,
        costs: Vec<Vec<i64>>,
        demands: Vec<Vec<i64>>,
    ) -> Result<Self, InstanceError> {
        let k = costs.len();
        if k == 0 {
            return Err(InstanceError::NoCommodities);
        }
        let (n, m) = (graph.n(), graph.m());
        check_len("capacities", m, capacity.len())?;
        check_len("demand vectors", k, demands.len())?;
        for c in &costs {
            check_len("costs", m, c.len())?;
        }
        for d in &demands {
            check_len("demands", n, d.len())?;
        }
        for (e, &u) in capacity.iter().enumerate() {
            if u <= 0 {
                return Err(InstanceError::NonPositiveCapacity { edge: e, capacity: u });
            }
        }
        for (i, d) in demands.iter().enumerate() {
            let sum: i64 = d.iter().sum();
            if sum != 0 {
                return Err(InstanceError::UnbalancedDemand { commodity: i, sum });
            }
        }
        Ok(KCommodityInstance {
            graph,
            k,
            capacity,
            costs,
            demands,
        })
    }

    pub fn graph(&self) -> &DirectedGraph {
        &self.graph
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn m(&self) -> usize {
        self.graph.m()
    }

    pub fn capacity(&self) -> &[i64] {
        &self.capacity
    }

    pub fn costs(&self, i: usize) -> &[i64] {
        &self.costs[i]
    }

    pub fn demands(&self, i: usize) -> &[i64] {
        &self.demands[i]
    }

    /// `C = max(1, max |c|)`.
    pub fn cost_bound(&self) -> i64 {
        self.costs
            .iter()
            .flatten()
            .map(|c| c.abs())
            .max()
            .unwrap_or(0)
            .max(1)
    }

    /// `U = max(‖u‖∞, max_i ‖d_i‖∞)`.
    pub fn capacity_bound(&self) -> i64 {
        let u = self.capacity.iter().copied().max().unwrap_or(1);
        let d = self.demands.iter().flatten().map(|d| d.abs()).max().unwrap_or(0);
        u.max(d)
    }

    pub(crate) fn network(&self) -> FlowNetwork {
        FlowNetwork {
            graph: self.graph.clone(),
            k: self.k,
            capacity: self.capacity.iter().map(|&u| u as f64).collect(),
            costs: self
                .costs
                .iter()
                .map(|c| c.iter().map(|&x| x as f64).collect())
                .collect(),
            demands: self
                .demands
                .iter()
                .map(|d| d.iter().map(|&x| x as f64).collect())
                .collect(),
        }
    }

    /// Objective `Σ_i c_iᵀ f_i` of per-commodity flows.
    pub fn objective(&self, flows: &[Vec<f64>]) -> f64 {
        flows
            .iter()
            .zip(&self.costs)
            .map(|(f, c)| f.iter().zip(c).map(|(a, &b)| a * b as f64).sum::<f64>())
            .sum()
    }

    /// `‖Bᵀ f_i + d_i‖₁` per commodity.
    pub fn residuals(&self, flows: &[Vec<f64>]) -> Vec<f64> {
        flows
            .iter()
            .zip(&self.demands)
            .map(|(f, d)| {
                let d: Vec<f64> = d.iter().map(|&x| x as f64).collect();
                self.graph.demand_residual(f, &d)
            })
            .collect()
    }
}

fn check_len(what: &'static str, expected: usize, found: usize) -> Result<(), InstanceError> {
    if expected != found {
        return Err(InstanceError::DimensionMismatch { what, expected, found });
    }
    Ok(())
}

/// Real-valued flow network used for the reduced and augmented programs.
#[derive(Debug, Clone)]
pub(crate) struct FlowNetwork {
    pub graph: DirectedGraph,
    pub k: usize,
    pub capacity: Vec<f64>,
    pub costs: Vec<Vec<f64>>,
    pub demands: Vec<Vec<f64>>,
}

/// The stacked program `min cᵀx` subject to `𝒜ᵀx = b`, `x ≥ 0`.
///
/// Primal layout: `x = (x_1, …, x_k, x_{k+1})` with each block of length `m`;
/// the last block is the capacity slack. Dual layout:
/// `y = (y_1, …, y_k, y_{k+1})` with `y_i ∈ ℝ^{n-1}` and `y_{k+1} ∈ ℝ^m`.
#[derive(Debug, Clone)]
pub struct ReducedLp {
    a: Arc<IncidenceMatrix>,
    k: usize,
    n: usize,
    b: Vec<f64>,
    c: Vec<f64>,
    capacity: Vec<f64>,
}

impl ReducedLp {
    pub(crate) fn from_network(net: &FlowNetwork, c: Vec<f64>) -> Self {
        let a = build_incidence(&net.graph).delete_first_column();
        let k = net.k;
        let m = net.graph.m();
        assert_eq!(c.len(), (k + 1) * m);
        let mut b = Vec::with_capacity(k * a.cols() + m);
        for d in &net.demands {
            b.extend(d[1..].iter().map(|x| -x));
        }
        b.extend_from_slice(&net.capacity);
        ReducedLp {
            a: Arc::new(a),
            k,
            n: net.graph.n(),
            b,
            c,
            capacity: net.capacity.clone(),
        }
    }

    pub fn incidence(&self) -> &Arc<IncidenceMatrix> {
        &self.a
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn m(&self) -> usize {
        self.a.rows()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Columns of the reduced incidence block, `n - 1`.
    pub fn n_reduced(&self) -> usize {
        self.a.cols()
    }

    pub fn primal_dim(&self) -> usize {
        (self.k + 1) * self.m()
    }

    pub fn dual_dim(&self) -> usize {
        self.k * self.n_reduced() + self.m()
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn capacity(&self) -> &[f64] {
        &self.capacity
    }

    pub fn with_costs(&self, c: Vec<f64>) -> ReducedLp {
        assert_eq!(c.len(), self.primal_dim());
        ReducedLp { c, ..self.clone() }
    }

    /// `𝒜ᵀ x = (Aᵀx_1, …, Aᵀx_k, Σ_i x_i)`.
    pub fn apply_t(&self, x: &[f64]) -> Vec<f64> {
        let (k, m, nr) = (self.k, self.m(), self.n_reduced());
        assert_eq!(x.len(), (k + 1) * m);
        let mut out = vec![0.0; k * nr + m];
        for i in 0..k {
            let blk = &x[i * m..(i + 1) * m];
            let dst = &mut out[i * nr..(i + 1) * nr];
            for (e, &xe) in blk.iter().enumerate() {
                self.a.add_row_t(e, xe, dst);
            }
        }
        for i in 0..=k {
            for e in 0..m {
                out[k * nr + e] += x[i * m + e];
            }
        }
        out
    }

    /// `𝒜 y`: block `i ≤ k` is `A y_i + y_{k+1}`, the last block is `y_{k+1}`.
    pub fn apply(&self, y: &[f64]) -> Vec<f64> {
        let (k, m, nr) = (self.k, self.m(), self.n_reduced());
        assert_eq!(y.len(), k * nr + m);
        let last = &y[k * nr..];
        let mut out = Vec::with_capacity((k + 1) * m);
        for i in 0..k {
            let yi = &y[i * nr..(i + 1) * nr];
            out.extend((0..m).map(|e| self.a.row_dot(e, yi) + last[e]));
        }
        out.extend_from_slice(last);
        out
    }

    /// The stacked matrix `𝒜` as a generic sparse matrix.
    pub fn constraint_matrix(&self) -> CsrMatrix {
        stacked_matrix(&self.a, self.k)
    }

    pub fn primal_residual(&self, x: &[f64]) -> f64 {
        self.apply_t(x)
            .iter()
            .zip(&self.b)
            .fold(0.0, |acc, (a, b)| acc.max((a - b).abs()))
    }

    pub fn dual_residual(&self, y: &[f64], s: &[f64]) -> f64 {
        self.apply(y)
            .iter()
            .zip(s)
            .zip(&self.c)
            .fold(0.0, |acc, ((ay, s), c)| acc.max((ay + s - c).abs()))
    }
}

/// `𝒜` with `k` copies of `a` on the diagonal and identities in the last column block.
pub fn stacked_matrix(a: &IncidenceMatrix, k: usize) -> CsrMatrix {
    let (m, nr) = (a.rows(), a.cols());
    let mut rows = Vec::with_capacity((k + 1) * m);
    for i in 0..=k {
        for e in 0..m {
            let mut row = Vec::with_capacity(3);
            if i < k {
                row.extend(a.row(e).map(|(c, v)| (i * nr + c, v)));
            }
            row.push((k * nr + e, 1.0));
            rows.push(row);
        }
    }
    CsrMatrix::from_row_lists(k * nr + m, &rows)
}

/// Deletes the first vertex column so that `𝒜` has full column rank.
pub fn reduce_full_rank(inst: &KCommodityInstance) -> Result<ReducedLp, InstanceError> {
    let comps = inst.graph().weak_components();
    if comps != 1 {
        return Err(InstanceError::NotConnected { components: comps });
    }
    for i in 0..inst.k() {
        let sum: i64 = inst.demands(i).iter().sum();
        if sum != 0 {
            return Err(InstanceError::UnbalancedDemand { commodity: i, sum });
        }
    }
    let net = inst.network();
    let mut c = Vec::with_capacity((net.k + 1) * net.graph.m());
    for ci in &net.costs {
        c.extend_from_slice(ci);
    }
    c.extend(std::iter::repeat(0.0).take(net.graph.m()));
    Ok(ReducedLp::from_network(&net, c))
}

/// Primal-dual point on the central path at parameter `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Iterate {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub s: Vec<f64>,
    pub t: f64,
}

impl Iterate {
    pub fn gap(&self) -> f64 {
        self.x.iter().zip(&self.s).map(|(a, b)| a * b).sum()
    }

    /// `‖x s / t - 1‖∞`.
    pub fn centrality(&self) -> f64 {
        self.x
            .iter()
            .zip(&self.s)
            .fold(0.0, |acc, (a, b)| acc.max((a * b / self.t - 1.0).abs()))
    }
}

/// `Z = 3 m k C U / ε²`.
pub fn penalty_cost(m: usize, k: usize, c: f64, u: f64, eps: f64) -> f64 {
    3.0 * m as f64 * k as f64 * c * u / (eps * eps)
}

/// `30 m k (C U)² / ε³`, the smallest path parameter at which costs may be swapped.
pub fn swap_threshold(m: usize, k: usize, c: f64, u: f64, eps: f64) -> f64 {
    30.0 * m as f64 * k as f64 * (c * u).powi(2) / eps.powi(3)
}

/// The instance extended by a hub vertex joined to every original vertex in
/// both directions, together with its artificial and swapped cost vectors.
///
/// Edge `m + 2v` runs from `v` to the hub and edge `m + 2v + 1` from the hub
/// to `v`. The hub is vertex `n`.
#[derive(Debug, Clone)]
pub struct AugmentedInstance {
    base: KCommodityInstance,
    network: FlowNetwork,
    lp_start: ReducedLp,
    lp_target: ReducedLp,
    penalty: f64,
    cost_bound: f64,
    capacity_bound: f64,
    eps: f64,
}

impl AugmentedInstance {
    pub fn base(&self) -> &KCommodityInstance {
        &self.base
    }

    pub fn graph(&self) -> &DirectedGraph {
        &self.network.graph
    }

    pub fn capacity(&self) -> &[f64] {
        &self.network.capacity
    }

    pub fn demands(&self, i: usize) -> &[f64] {
        &self.network.demands[i]
    }

    pub fn hub(&self) -> usize {
        self.base.n()
    }

    pub fn original_edges(&self) -> usize {
        self.base.m()
    }

    /// `|E'| = m + 2n`.
    pub fn m(&self) -> usize {
        self.network.graph.m()
    }

    pub fn k(&self) -> usize {
        self.base.k()
    }

    /// Augmented edge index of original edge `e`.
    pub fn edge_map(&self, e: usize) -> usize {
        e
    }

    pub fn is_new_edge(&self, e: usize) -> bool {
        e >= self.base.m()
    }

    /// Program with the artificial costs `c' = 1/x0`.
    pub fn lp_start(&self) -> &ReducedLp {
        &self.lp_start
    }

    /// Program with the swapped costs `c''`.
    pub fn lp_target(&self) -> &ReducedLp {
        &self.lp_target
    }

    pub fn c_prime(&self) -> &[f64] {
        self.lp_start.c()
    }

    pub fn c_double_prime(&self) -> &[f64] {
        self.lp_target.c()
    }

    pub fn penalty(&self) -> f64 {
        self.penalty
    }

    pub fn cost_bound(&self) -> f64 {
        self.cost_bound
    }

    pub fn capacity_bound(&self) -> f64 {
        self.capacity_bound
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Smallest admissible path parameter for [`swap_costs`].
    pub fn swap_threshold(&self) -> f64 {
        swap_threshold(
            self.base.m(),
            self.base.k(),
            self.cost_bound,
            self.capacity_bound,
            self.eps,
        )
    }
}

/// Builds the augmented instance and its exactly centered starting point at `t = 1`.
pub fn augment_initial(
    inst: &KCommodityInstance,
    eps: f64,
) -> Result<(AugmentedInstance, Iterate), InstanceError> {
    if !(eps > 0.0 && eps <= 0.1) {
        return Err(InstanceError::InvalidEps(eps));
    }
    let (n, m, k) = (inst.n(), inst.m(), inst.k());
    let hub = n;
    let mut edges = inst.graph().edges().to_vec();
    for v in 0..n {
        edges.push((v, hub));
        edges.push((hub, v));
    }
    let m_aug = edges.len();
    let graph = DirectedGraph::new(n + 1, edges).expect("augmented graph is valid");

    let base_u: Vec<f64> = inst.capacity().iter().map(|&u| u as f64).collect();
    let share: Vec<f64> = base_u.iter().map(|u| u / (k + 1) as f64).collect();
    let mut flows = vec![vec![0.0; m_aug]; k];
    for (i, flow) in flows.iter_mut().enumerate() {
        flow[..m].copy_from_slice(&share);
        let mut inflow = vec![0.0; n];
        for (e, &(t, h)) in inst.graph().edges().iter().enumerate() {
            inflow[h] += share[e];
            inflow[t] -= share[e];
        }
        for v in 0..n {
            let missing = inst.demands(i)[v] as f64 - inflow[v];
            let (out_e, in_e) = (m + 2 * v, m + 2 * v + 1);
            flow[out_e] = 1.0;
            flow[in_e] = 1.0;
            if missing > 0.0 {
                flow[in_e] += missing;
            } else {
                flow[out_e] -= missing;
            }
        }
    }
    let mut capacity = Vec::with_capacity(m_aug);
    capacity.extend_from_slice(&base_u);
    for e in m..m_aug {
        capacity.push(flows.iter().map(|f| f[e]).sum::<f64>() + 1.0);
    }
    let mut x0 = Vec::with_capacity((k + 1) * m_aug);
    for f in &flows {
        x0.extend_from_slice(f);
    }
    for e in 0..m_aug {
        let used: f64 = flows.iter().map(|f| f[e]).sum();
        x0.push(if e < m { share[e] } else { capacity[e] - used });
    }

    let mut demands: Vec<Vec<f64>> = Vec::with_capacity(k);
    for i in 0..k {
        let mut d: Vec<f64> = inst.demands(i).iter().map(|&x| x as f64).collect();
        d.push(0.0);
        demands.push(d);
    }
    let network = FlowNetwork {
        graph,
        k,
        capacity,
        costs: Vec::new(),
        demands,
    };

    let cost_bound = inst.cost_bound() as f64;
    let capacity_bound = network
        .capacity
        .iter()
        .fold(inst.capacity_bound() as f64, |a, &b| a.max(b));
    let penalty = penalty_cost(m, k, cost_bound, capacity_bound, eps);

    let c_prime: Vec<f64> = x0.iter().map(|x| 1.0 / x).collect();
    let mut c_double = vec![0.0; (k + 1) * m_aug];
    for i in 0..k {
        for e in 0..m_aug {
            c_double[i * m_aug + e] = if e < m {
                inst.costs(i)[e] as f64
            } else {
                penalty
            };
        }
    }
    let lp_start = ReducedLp::from_network(&network, c_prime.clone());
    let lp_target = lp_start.with_costs(c_double);
    let y0 = vec![0.0; lp_start.dual_dim()];
    let start = Iterate {
        x: x0,
        y: y0,
        s: c_prime,
        t: 1.0,
    };
    let aug = AugmentedInstance {
        base: inst.clone(),
        network,
        lp_start,
        lp_target,
        penalty,
        cost_bound,
        capacity_bound,
        eps,
    };
    Ok((aug, start))
}

/// Slack after replacing `c'` by `c''`: `s''' = s + (c'' - c')`.
pub fn swap_costs(aug: &AugmentedInstance, iterate: &Iterate) -> Result<Vec<f64>, InstanceError> {
    let threshold = aug.swap_threshold();
    if !(iterate.t > threshold) {
        return Err(InstanceError::PathParameterTooSmall {
            mu: iterate.t,
            threshold,
        });
    }
    let s: Vec<f64> = iterate
        .s
        .iter()
        .zip(aug.c_double_prime().iter().zip(aug.c_prime()))
        .map(|(s, (c2, c1))| s + (c2 - c1))
        .collect();
    if let Some(index) = s.iter().position(|&v| !(v > 0.0)) {
        return Err(InstanceError::NegativeSlack { index });
    }
    Ok(s)
}

/// Restricts every block of an augmented primal vector to the original edges.
pub fn truncate_solution(x_prime: &[f64], aug: &AugmentedInstance) -> Vec<f64> {
    let (m, m_aug, k) = (aug.original_edges(), aug.m(), aug.k());
    assert_eq!(x_prime.len(), (k + 1) * m_aug);
    let mut x = Vec::with_capacity((k + 1) * m);
    for i in 0..=k {
        x.extend((0..m).map(|e| x_prime[i * m_aug + aug.edge_map(e)]));
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dense::dense_solve;

    fn triangle() -> DirectedGraph {
        DirectedGraph::new(3, vec![(0, 1), (1, 2), (2, 0)]).unwrap()
    }

    fn single_edge(u: i64, k: usize) -> KCommodityInstance {
        let g = DirectedGraph::new(2, vec![(0, 1)]).unwrap();
        KCommodityInstance::new(g, vec![u], vec![vec![3]; k], vec![vec![-1, 1]; k]).unwrap()
    }

    #[test]
    fn incidence_of_single_edge() {
        let g = DirectedGraph::new(2, vec![(0, 1)]).unwrap();
        let b = build_incidence(&g).to_dense();
        assert_eq!(b.row(0), &[1.0, -1.0]);
    }

    #[test]
    fn incidence_of_triangle() {
        let b = build_incidence(&triangle()).to_dense();
        assert_eq!(b.row(0), &[1.0, -1.0, 0.0]);
        assert_eq!(b.row(1), &[0.0, 1.0, -1.0]);
        assert_eq!(b.row(2), &[-1.0, 0.0, 1.0]);
        assert_eq!(b.mul_vec(&[1.0, 1.0, 1.0]), vec![0.0; 3]);
    }

    #[test]
    fn reduced_single_edge() {
        let lp = reduce_full_rank(&single_edge(5, 1)).unwrap();
        assert_eq!(lp.incidence().to_dense().row(0), &[-1.0]);
    }

    #[test]
    fn triangle_gram_determinant_counts_spanning_trees() {
        let a = build_incidence(&triangle()).delete_first_column().to_dense();
        let g = a.transpose().matmul(&a);
        let det = g[(0, 0)] * g[(1, 1)] - g[(0, 1)] * g[(1, 0)];
        assert!((det - 3.0).abs() < 1e-12);
    }

    #[test]
    fn disconnected_graph_rejected() {
        let g = DirectedGraph::new(4, vec![(0, 1), (2, 3)]).unwrap();
        let inst =
            KCommodityInstance::new(g, vec![1, 1], vec![vec![0, 0]], vec![vec![0; 4]]).unwrap();
        assert_eq!(
            reduce_full_rank(&inst).unwrap_err(),
            InstanceError::NotConnected { components: 2 }
        );
    }

    #[test]
    fn unbalanced_demand_rejected() {
        let g = DirectedGraph::new(2, vec![(0, 1)]).unwrap();
        let err = KCommodityInstance::new(g, vec![1], vec![vec![0]], vec![vec![0, 1]]).unwrap_err();
        assert_eq!(err, InstanceError::UnbalancedDemand { commodity: 0, sum: 1 });
    }

    #[test]
    fn self_loop_rejected() {
        assert!(matches!(
            DirectedGraph::new(2, vec![(1, 1)]),
            Err(InstanceError::SelfLoop { .. })
        ));
    }

    #[test]
    fn constraint_matrix_matches_operators() {
        let g = DirectedGraph::new(3, vec![(0, 1), (1, 2), (0, 2)]).unwrap();
        let inst = KCommodityInstance::new(
            g,
            vec![2, 3, 4],
            vec![vec![1, 2, 3], vec![0, 1, 0]],
            vec![vec![-1, 0, 1], vec![0, -2, 2]],
        )
        .unwrap();
        let lp = reduce_full_rank(&inst).unwrap();
        let a = lp.constraint_matrix();
        let x: Vec<f64> = (0..lp.primal_dim()).map(|i| (i as f64 * 0.37).sin()).collect();
        let y: Vec<f64> = (0..lp.dual_dim()).map(|i| (i as f64 * 0.71).cos()).collect();
        assert_eq!(a.mul_t_vec(&x), lp.apply_t(&x));
        assert_eq!(a.mul_vec(&y), lp.apply(&y));
        // full column rank: 𝒜ᵀ𝒜 is invertible
        let gram = a.weighted_gram(&vec![1.0; lp.primal_dim()]);
        assert!(dense_solve(&gram, &vec![1.0; lp.dual_dim()]).is_ok());
    }

    #[test]
    fn feasible_flow_satisfies_reduced_constraints() {
        let inst = single_edge(5, 1);
        let lp = reduce_full_rank(&inst).unwrap();
        // flow 1 on the edge meets demand (-1, 1); slack 4
        assert!(lp.primal_residual(&[1.0, 4.0]) < 1e-15);
        assert_eq!(inst.residuals(&[vec![1.0]]), vec![0.0]);
    }

    #[test]
    fn initial_point_is_exactly_centered() {
        let inst = single_edge(4, 1);
        let (aug, it) = augment_initial(&inst, 0.1).unwrap();
        assert_eq!(it.x[0], 2.0);
        assert!(it.x.iter().zip(&it.s).all(|(x, s)| x * s == 1.0 || (x * s - 1.0).abs() < 1e-15));
        assert!(aug.lp_start().primal_residual(&it.x) < 1e-12);
        assert!(aug.lp_start().dual_residual(&it.y, &it.s) == 0.0);
        assert_eq!(aug.m(), 1 + 2 * 2);
    }

    #[test]
    fn penalty_formula() {
        assert!((penalty_cost(3, 2, 5.0, 7.0, 0.1) - 63000.0).abs() < 1e-6);
    }

    #[test]
    fn invalid_eps_rejected() {
        let inst = single_edge(4, 1);
        assert!(matches!(
            augment_initial(&inst, 0.2),
            Err(InstanceError::InvalidEps(_))
        ));
        assert!(matches!(
            augment_initial(&inst, 0.0),
            Err(InstanceError::InvalidEps(_))
        ));
    }

    #[test]
    fn swap_shifts_by_cost_delta() {
        let inst = single_edge(4, 1);
        let (aug, mut it) = augment_initial(&inst, 0.1).unwrap();
        it.t = aug.swap_threshold() * 2.0;
        it.s = vec![1e12; it.s.len()];
        let s3 = swap_costs(&aug, &it).unwrap();
        for ((a, b), (c2, c1)) in s3
            .iter()
            .zip(&it.s)
            .zip(aug.c_double_prime().iter().zip(aug.c_prime()))
        {
            assert_eq!(*a, b + (c2 - c1));
            assert!((a - b).abs() <= aug.penalty());
        }
        it.t = aug.swap_threshold();
        assert!(matches!(
            swap_costs(&aug, &it),
            Err(InstanceError::PathParameterTooSmall { .. })
        ));
    }

    #[test]
    fn truncation_is_restriction() {
        let inst = single_edge(4, 1);
        let (aug, it) = augment_initial(&inst, 0.1).unwrap();
        let x = truncate_solution(&it.x, &aug);
        assert_eq!(x, vec![it.x[0], it.x[aug.m()]]);
    }
}
