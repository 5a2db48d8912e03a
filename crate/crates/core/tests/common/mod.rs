//! Shared fixtures: hand-solved instances, the random corpus and a
//! successive-shortest-path oracle for single-commodity instances.
#![allow(dead_code)]

use kflow::instance::{DirectedGraph, KCommodityInstance};
use kflow::solver::{generate_instance, GeneratorConfig};

/// One edge, capacity 5, cost 3, 4 units from vertex 0 to vertex 1. Optimum 12.
pub fn single_edge() -> KCommodityInstance {
    let g = DirectedGraph::new(2, vec![(0, 1)]).unwrap();
    KCommodityInstance::new(g, vec![5], vec![vec![3]], vec![vec![-4, 4]]).unwrap()
}

/// Two commodities share the direct edge 0→1 (capacity 3) and the detour
/// 0→2→1. Commodity 1 pays 1 everywhere, commodity 2 pays 1 on the direct
/// edge and 2 on each detour edge. Both send 2 units from 0 to 1.
///
/// Commodity 2 gets all of the direct edge it wants (2 units, cost 2); the
/// remaining unit of direct capacity goes to commodity 1 (cost 1) and its
/// other unit takes the detour (cost 2). Optimum 5.
pub fn shared_edge() -> KCommodityInstance {
    let g = DirectedGraph::new(3, vec![(0, 1), (0, 2), (2, 1)]).unwrap();
    KCommodityInstance::new(
        g,
        vec![3, 5, 5],
        vec![vec![1, 1, 1], vec![1, 2, 2]],
        vec![vec![-2, 2, 0]; 2],
    )
    .unwrap()
}

/// Generator parameters of corpus entry `seed`.
pub fn corpus_config(seed: u64) -> GeneratorConfig {
    let n = 4 + (seed % 7) as usize;
    let m = (n + 2 + (seed as usize * 7) % (2 * n + 1)).min(30).min(n * (n - 1));
    let k = 1 + (seed % 2) as usize;
    GeneratorConfig {
        n,
        m,
        k,
        max_capacity: 10,
        max_cost: 10,
        seed,
    }
}

/// 20 feasible instances with `n ≤ 10`, `m ≤ 30`, `k ≤ 2`.
pub fn random_corpus() -> Vec<KCommodityInstance> {
    (0..20).map(|s| generate_instance(&corpus_config(s)).unwrap()).collect()
}

/// Exact optimum of a single-commodity instance by successive shortest paths
/// with Bellman-Ford on the residual graph. `None` if the demands cannot be met.
pub fn ssp_optimum(inst: &KCommodityInstance) -> Option<i64> {
    assert_eq!(inst.k(), 1);
    let n = inst.n();
    let (src, snk) = (n, n + 1);
    let mut r = Residual::default();
    for (e, &(u, v)) in inst.graph().edges().iter().enumerate() {
        r.add(u, v, inst.capacity()[e], inst.costs(0)[e]);
    }
    let mut need = 0;
    for (v, &d) in inst.demands(0).iter().enumerate() {
        if d < 0 {
            r.add(src, v, -d, 0);
        } else if d > 0 {
            r.add(v, snk, d, 0);
            need += d;
        }
    }
    let Residual { from, to, mut cap, cost } = r;
    let nodes = n + 2;
    let mut total = 0;
    let mut sent = 0;
    loop {
        let mut dist = vec![i64::MAX; nodes];
        let mut pred = vec![usize::MAX; nodes];
        dist[src] = 0;
        for _ in 0..nodes {
            let mut changed = false;
            for a in 0..to.len() {
                let u = from[a];
                if cap[a] > 0 && dist[u] != i64::MAX && dist[u] + cost[a] < dist[to[a]] {
                    dist[to[a]] = dist[u] + cost[a];
                    pred[to[a]] = a;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        if dist[snk] == i64::MAX {
            break;
        }
        let mut push_amt = i64::MAX;
        let mut v = snk;
        while v != src {
            let a = pred[v];
            push_amt = push_amt.min(cap[a]);
            v = from[a];
        }
        let mut v = snk;
        while v != src {
            let a = pred[v];
            cap[a] -= push_amt;
            cap[a ^ 1] += push_amt;
            v = from[a];
        }
        total += push_amt * dist[snk];
        sent += push_amt;
    }
    (sent == need).then_some(total)
}

/// Residual arcs in pairs: arc `a ^ 1` is the reverse of arc `a`.
#[derive(Default)]
struct Residual {
    from: Vec<usize>,
    to: Vec<usize>,
    cap: Vec<i64>,
    cost: Vec<i64>,
}

impl Residual {
    fn add(&mut self, a: usize, b: usize, cap: i64, cost: i64) {
        self.from.extend([a, b]);
        self.to.extend([b, a]);
        self.cap.extend([cap, 0]);
        self.cost.extend([cost, -cost]);
    }
}

/// Maximum `s → t` flow by shortest augmenting paths.
pub fn max_flow(n: usize, edges: &[(usize, usize)], capacity: &[i64], s: usize, t: usize) -> i64 {
    let mut r = Residual::default();
    for (&(u, v), &c) in edges.iter().zip(capacity) {
        r.add(u, v, c, 0);
    }
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (a, &u) in r.from.iter().enumerate() {
        out[u].push(a);
    }
    let mut total = 0;
    loop {
        let mut pred = vec![usize::MAX; n];
        let mut queue = std::collections::VecDeque::from([s]);
        let mut seen = vec![false; n];
        seen[s] = true;
        while let Some(u) = queue.pop_front() {
            for &a in &out[u] {
                let v = r.to[a];
                if r.cap[a] > 0 && !seen[v] {
                    seen[v] = true;
                    pred[v] = a;
                    queue.push_back(v);
                }
            }
        }
        if !seen[t] {
            return total;
        }
        let mut amount = i64::MAX;
        let mut v = t;
        while v != s {
            amount = amount.min(r.cap[pred[v]]);
            v = r.from[pred[v]];
        }
        let mut v = t;
        while v != s {
            let a = pred[v];
            r.cap[a] -= amount;
            r.cap[a ^ 1] += amount;
            v = r.from[a];
        }
        total += amount;
    }
}
