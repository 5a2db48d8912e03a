use std::collections::VecDeque;

use super::SolveError;
use crate::instance::KCommodityInstance;

/// Cancels demand imbalance by removing flow along support paths.
///
/// For each commodity, while some vertex sends out more than its demand
/// allows, finds a path in the support of `f_i` from it to a vertex receiving
/// too much and lowers the flow along that path by the bottleneck amount.
pub fn repair_demands(
    flows: &[Vec<f64>],
    inst: &KCommodityInstance,
) -> Result<Vec<Vec<f64>>, SolveError> {
    let (n, m, k) = (inst.n(), inst.m(), inst.k());
    if flows.len() != k {
        return Err(SolveError::DimensionMismatch {
            expected: k,
            found: flows.len(),
        });
    }
    let edges = inst.graph().edges();
    let mut out_adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (e, &(t, _)) in edges.iter().enumerate() {
        out_adj[t].push(e);
    }
    let mut repaired = Vec::with_capacity(k);
    for (i, f) in flows.iter().enumerate() {
        if f.len() != m {
            return Err(SolveError::DimensionMismatch {
                expected: m,
                found: f.len(),
            });
        }
        let mut f: Vec<f64> = f.iter().map(|&x| x.max(0.0)).collect();
        let scale = 1.0 + f.iter().fold(0.0f64, |a, &b| a.max(b));
        let tiny = 1e-14 * scale;
        let mut excess: Vec<f64> = inst.demands(i).iter().map(|&d| -(d as f64)).collect();
        for (e, &(t, h)) in edges.iter().enumerate() {
            excess[h] += f[e];
            excess[t] -= f[e];
        }
        while let Some(src) = (0..n).find(|&v| excess[v] < -tiny) {
            let mut pred = vec![usize::MAX; n];
            let mut seen = vec![false; n];
            seen[src] = true;
            let mut queue = VecDeque::from([src]);
            let mut sink = None;
            while let Some(u) = queue.pop_front() {
                if u != src && excess[u] > tiny {
                    sink = Some(u);
                    break;
                }
                for &e in &out_adj[u] {
                    let h = edges[e].1;
                    if f[e] > 0.0 && !seen[h] {
                        seen[h] = true;
                        pred[h] = e;
                        queue.push_back(h);
                    }
                }
            }
            let sink = sink.ok_or(SolveError::CannotRepair { commodity: i })?;
            let mut path = Vec::new();
            let mut v = sink;
            while v != src {
                let e = pred[v];
                path.push(e);
                v = edges[e].0;
            }
            let amount = path
                .iter()
                .map(|&e| f[e])
                .fold((-excess[src]).min(excess[sink]), f64::min);
            for &e in &path {
                f[e] = if f[e] <= amount { 0.0 } else { f[e] - amount };
            }
            excess[src] += amount;
            excess[sink] -= amount;
            if excess[src].abs() <= tiny {
                excess[src] = 0.0;
            }
            if excess[sink].abs() <= tiny {
                excess[sink] = 0.0;
            }
        }
        repaired.push(f);
    }
    Ok(repaired)
}
