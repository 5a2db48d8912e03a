use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::SolveError;
use crate::instance::{DirectedGraph, KCommodityInstance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GeneratorConfig {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    /// Largest capacity `U`.
    pub max_capacity: i64,
    /// Largest absolute cost `C`.
    pub max_cost: i64,
    pub seed: u64,
}

/// Random walks per commodity used to sample the hidden feasible flow.
const WALKS: usize = 3;

/// Samples a connected graph, a hidden integral flow per commodity, then sets
/// demands to the flow's net inflow and capacities to at least its
/// congestion, so the instance is feasible by construction.
pub fn generate_instance(cfg: &GeneratorConfig) -> Result<KCommodityInstance, SolveError> {
    let GeneratorConfig { n, m, k, .. } = *cfg;
    if n < 2 {
        return Err(SolveError::InvalidGenerator("need at least 2 vertices"));
    }
    if m < n - 1 || m > n * (n - 1) {
        return Err(SolveError::InvalidGenerator("edge count must lie in [n-1, n(n-1)]"));
    }
    if k == 0 {
        return Err(SolveError::InvalidGenerator("need at least 1 commodity"));
    }
    if cfg.max_capacity < 1 || cfg.max_cost < 0 {
        return Err(SolveError::InvalidGenerator("need U >= 1 and C >= 0"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    let mut edges = Vec::with_capacity(m);
    let mut present = HashSet::with_capacity(m);
    for i in 1..n {
        let (a, b) = (perm[i], perm[rng.gen_range(0..i)]);
        let e = if rng.gen_bool(0.5) { (a, b) } else { (b, a) };
        present.insert(e);
        edges.push(e);
    }
    while edges.len() < m {
        let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if a != b && present.insert((a, b)) {
            edges.push((a, b));
        }
    }
    let mut out_adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (e, &(t, _)) in edges.iter().enumerate() {
        out_adj[t].push(e);
    }

    let amount_cap = (cfg.max_capacity / (k * WALKS) as i64).max(1);
    let mut flows = vec![vec![0i64; m]; k];
    for flow in flows.iter_mut() {
        for _ in 0..WALKS {
            let amount = rng.gen_range(1..=amount_cap);
            let mut v = rng.gen_range(0..n);
            for _ in 0..rng.gen_range(1..=n) {
                let Some(&e) = out_adj[v].choose(&mut rng) else {
                    break;
                };
                flow[e] += amount;
                v = edges[e].1;
            }
        }
    }
    let mut capacity = Vec::with_capacity(m);
    for e in 0..m {
        let congestion: i64 = flows.iter().map(|f| f[e]).sum();
        let extra = rng.gen_range(0..=cfg.max_capacity);
        capacity.push(congestion.max(cfg.max_capacity.min(congestion + extra)).max(1));
    }
    let costs: Vec<Vec<i64>> = (0..k)
        .map(|_| (0..m).map(|_| rng.gen_range(0..=cfg.max_cost)).collect())
        .collect();
    let demands: Vec<Vec<i64>> = flows
        .iter()
        .map(|f| {
            let mut d = vec![0i64; n];
            for (e, &(t, h)) in edges.iter().enumerate() {
                d[h] += f[e];
                d[t] -= f[e];
            }
            d
        })
        .collect();
    let graph = DirectedGraph::new(n, edges)?;
    Ok(KCommodityInstance::new(graph, capacity, costs, demands)?)
}
