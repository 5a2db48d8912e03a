use std::sync::Arc;

use serde::Serialize;

use crate::instance::IncidenceMatrix;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct HeavyHitterCounters {
    pub queries: u64,
    pub rows_scanned: u64,
    pub indices_returned: u64,
    pub scale_updates: u64,
}

/// Reports the rows `i` with `|g_i (A h)_i| > eps`.
///
/// Implementations may return a superset but must never miss an index.
pub trait HeavyHitter {
    fn scale(&mut self, i: usize, g: f64);
    fn query(&mut self, h: &[f64], eps: f64) -> Vec<usize>;
    fn counters(&self) -> &HeavyHitterCounters;
}

/// Heavy hitter that scans every row.
#[derive(Debug, Clone)]
pub struct ExactScanHH {
    a: Arc<IncidenceMatrix>,
    g: Vec<f64>,
    counters: HeavyHitterCounters,
}

impl ExactScanHH {
    pub fn new(a: Arc<IncidenceMatrix>, g: Vec<f64>) -> Self {
        assert_eq!(g.len(), a.rows(), "one weight per row");
        debug_assert!(g.iter().all(|&x| x >= 0.0));
        ExactScanHH {
            a,
            g,
            counters: HeavyHitterCounters::default(),
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.g
    }
}

impl HeavyHitter for ExactScanHH {
    fn scale(&mut self, i: usize, g: f64) {
        self.g[i] = g;
        self.counters.scale_updates += 1;
    }

    fn query(&mut self, h: &[f64], eps: f64) -> Vec<usize> {
        self.counters.queries += 1;
        self.counters.rows_scanned += self.g.len() as u64;
        let out: Vec<usize> = (0..self.g.len())
            .filter(|&i| (self.g[i] * self.a.row_dot(i, h)).abs() > eps)
            .collect();
        self.counters.indices_returned += out.len() as u64;
        out
    }

    fn counters(&self) -> &HeavyHitterCounters {
        &self.counters
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{build_incidence, DirectedGraph};

    fn doubled_edge() -> Arc<IncidenceMatrix> {
        let g = DirectedGraph::new(2, vec![(0, 1), (0, 1)]).unwrap();
        Arc::new(build_incidence(&g).delete_first_column())
    }

    #[test]
    fn zero_vector_reports_nothing() {
        let mut hh = ExactScanHH::new(doubled_edge(), vec![1.0, 2.0]);
        assert!(hh.query(&[0.0], 1e-12).is_empty());
    }

    #[test]
    fn hand_example() {
        let mut hh = ExactScanHH::new(doubled_edge(), vec![1.0, 2.0]);
        // A h = (-0.3, -0.3); |g (A h)| = (0.3, 0.6)
        assert_eq!(hh.query(&[0.3], 0.4), vec![1]);
    }

    #[test]
    fn threshold_is_strict() {
        let mut hh = ExactScanHH::new(doubled_edge(), vec![1.0, 2.0]);
        assert_eq!(hh.query(&[0.25], 0.5), Vec::<usize>::new());
        assert_eq!(hh.counters().rows_scanned, 2);
    }
}
