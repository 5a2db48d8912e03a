//! Implicit running sums `Σ_ℓ D^{(ℓ)} A h^{(ℓ)}` and `Σ_ℓ β^{(ℓ)} w^{(ℓ)}`.
//!
//! Both keep prefix sums of the stream and, per entry, the frozen partial
//! sum up to its last weight change. A query combines the frozen value with
//! the prefix difference since that change.

use std::sync::Arc;

use serde::Serialize;

use super::MaintenanceError;
use crate::instance::IncidenceMatrix;

/// Compensated running sum of vectors. Entry `t` holds `Σ_{ℓ ≤ t} h^{(ℓ)}`
/// as an unevaluated `hi + lo` pair.
#[derive(Debug, Clone)]
pub(crate) struct PrefixSums {
    hi: Vec<Vec<f64>>,
    lo: Vec<Vec<f64>>,
}

impl PrefixSums {
    pub fn new(dim: usize) -> Self {
        PrefixSums {
            hi: vec![vec![0.0; dim]],
            lo: vec![vec![0.0; dim]],
        }
    }

    pub fn len(&self) -> usize {
        self.hi.len() - 1
    }

    pub fn push(&mut self, h: &[f64]) {
        let last_hi = self.hi.last().expect("non-empty");
        let last_lo = self.lo.last().expect("non-empty");
        let mut hi = Vec::with_capacity(h.len());
        let mut lo = Vec::with_capacity(h.len());
        for ((&a, &b), &l) in last_hi.iter().zip(h).zip(last_lo) {
            let (s, err) = two_sum(a, b);
            hi.push(s);
            lo.push(l + err);
        }
        self.hi.push(hi);
        self.lo.push(lo);
    }

    /// `Σ_{from < ℓ ≤ to} h^{(ℓ)}_c`.
    #[inline]
    pub fn diff(&self, c: usize, from: usize, to: usize) -> f64 {
        (self.hi[to][c] - self.hi[from][c]) + (self.lo[to][c] - self.lo[from][c])
    }

    /// Dense window sum `Σ_{from < ℓ ≤ to} h^{(ℓ)}`.
    pub fn window(&self, from: usize, to: usize) -> Vec<f64> {
        (0..self.hi[0].len()).map(|c| self.diff(c, from, to)).collect()
    }
}

/// Compensated running sum of scalars.
#[derive(Debug, Clone)]
pub(crate) struct ScalarPrefix {
    hi: Vec<f64>,
    lo: Vec<f64>,
}

impl ScalarPrefix {
    pub fn new() -> Self {
        ScalarPrefix {
            hi: vec![0.0],
            lo: vec![0.0],
        }
    }

    pub fn len(&self) -> usize {
        self.hi.len() - 1
    }

    pub fn push(&mut self, b: f64) {
        let (s, err) = two_sum(*self.hi.last().unwrap(), b);
        let l = *self.lo.last().unwrap() + err;
        self.hi.push(s);
        self.lo.push(l);
    }

    #[inline]
    pub fn diff(&self, from: usize, to: usize) -> f64 {
        (self.hi[to] - self.hi[from]) + (self.lo[to] - self.lo[from])
    }
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct PrefixCounters {
    pub adds: u64,
    pub updates: u64,
    pub queries: u64,
}

/// Maintains `s^{(T)} = Σ_{ℓ ≤ T} D^{(ℓ)} A h^{(ℓ)}` for a diagonal `D` that
/// changes entrywise between additions.
#[derive(Debug, Clone)]
pub struct SumOfProduct {
    a: Arc<IncidenceMatrix>,
    d: Vec<f64>,
    prefix: PrefixSums,
    last_change: Vec<usize>,
    frozen: Vec<f64>,
    counters: PrefixCounters,
}

impl SumOfProduct {
    pub fn new(a: Arc<IncidenceMatrix>, d: Vec<f64>) -> Result<Self, MaintenanceError> {
        if d.len() != a.rows() {
            return Err(MaintenanceError::DimensionMismatch {
                expected: a.rows(),
                found: d.len(),
            });
        }
        let m = a.rows();
        let prefix = PrefixSums::new(a.cols());
        Ok(SumOfProduct {
            a,
            d,
            prefix,
            last_change: vec![1; m],
            frozen: vec![0.0; m],
            counters: PrefixCounters::default(),
        })
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    /// Number of additions so far.
    pub fn t(&self) -> usize {
        self.prefix.len()
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.d[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.d
    }

    pub fn incidence(&self) -> &Arc<IncidenceMatrix> {
        &self.a
    }

    pub fn counters(&self) -> &PrefixCounters {
        &self.counters
    }

    pub fn update(&mut self, i: usize, c: f64) -> Result<(), MaintenanceError> {
        self.check(i)?;
        self.update_unchecked(i, c);
        Ok(())
    }

    pub(crate) fn update_unchecked(&mut self, i: usize, c: f64) {
        self.frozen[i] = self.value(i);
        self.last_change[i] = self.t() + 1;
        self.d[i] = c;
        self.counters.updates += 1;
    }

    pub fn add(&mut self, h: &[f64]) -> Result<(), MaintenanceError> {
        if h.len() != self.a.cols() {
            return Err(MaintenanceError::DimensionMismatch {
                expected: self.a.cols(),
                found: h.len(),
            });
        }
        self.prefix.push(h);
        self.counters.adds += 1;
        Ok(())
    }

    pub fn query(&mut self, i: usize) -> Result<f64, MaintenanceError> {
        self.check(i)?;
        self.counters.queries += 1;
        Ok(self.value(i))
    }

    /// Query without index check or counting.
    #[inline]
    pub(crate) fn value(&self, i: usize) -> f64 {
        let from = self.last_change[i] - 1;
        let to = self.t();
        if from == to {
            return self.frozen[i];
        }
        self.frozen[i] + self.d[i] * self.row_window(i, from, to)
    }

    /// `(row_i A) Σ_{from < ℓ ≤ to} h^{(ℓ)}`.
    #[inline]
    pub(crate) fn row_window(&self, i: usize, from: usize, to: usize) -> f64 {
        let mut acc = 0.0;
        if let Some(c) = self.a.tail(i) {
            acc += self.prefix.diff(c, from, to);
        }
        if let Some(c) = self.a.head(i) {
            acc -= self.prefix.diff(c, from, to);
        }
        acc
    }

    pub(crate) fn window(&self, from: usize, to: usize) -> Vec<f64> {
        self.prefix.window(from, to)
    }

    fn check(&self, i: usize) -> Result<(), MaintenanceError> {
        if i >= self.d.len() {
            return Err(MaintenanceError::IndexOutOfRange {
                index: i,
                len: self.d.len(),
            });
        }
        Ok(())
    }
}

/// Maintains `Σ_{ℓ ≤ T} β^{(ℓ)} w^{(ℓ)}` for a vector `w` that changes
/// entrywise between additions.
#[derive(Debug, Clone)]
pub struct SumOfVector {
    w: Vec<f64>,
    prefix: ScalarPrefix,
    last_change: Vec<usize>,
    frozen: Vec<f64>,
    counters: PrefixCounters,
}

impl SumOfVector {
    pub fn new(w: Vec<f64>) -> Self {
        let m = w.len();
        SumOfVector {
            w,
            prefix: ScalarPrefix::new(),
            last_change: vec![1; m],
            frozen: vec![0.0; m],
            counters: PrefixCounters::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn t(&self) -> usize {
        self.prefix.len()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.w[i]
    }

    pub fn counters(&self) -> &PrefixCounters {
        &self.counters
    }

    pub fn update(&mut self, i: usize, c: f64) -> Result<(), MaintenanceError> {
        self.check(i)?;
        self.update_unchecked(i, c);
        Ok(())
    }

    pub(crate) fn update_unchecked(&mut self, i: usize, c: f64) {
        self.frozen[i] = self.value(i);
        self.last_change[i] = self.t() + 1;
        self.w[i] = c;
        self.counters.updates += 1;
    }

    pub fn add(&mut self, beta: f64) {
        self.prefix.push(beta);
        self.counters.adds += 1;
    }

    pub fn query(&mut self, i: usize) -> Result<f64, MaintenanceError> {
        self.check(i)?;
        self.counters.queries += 1;
        Ok(self.value(i))
    }

    #[inline]
    pub(crate) fn value(&self, i: usize) -> f64 {
        let from = self.last_change[i] - 1;
        let to = self.t();
        if from == to {
            return self.frozen[i];
        }
        self.frozen[i] + self.w[i] * self.prefix.diff(from, to)
    }

    /// `Σ_{from < ℓ ≤ to} β^{(ℓ)}`.
    pub(crate) fn beta_window(&self, from: usize, to: usize) -> f64 {
        self.prefix.diff(from, to)
    }

    fn check(&self, i: usize) -> Result<(), MaintenanceError> {
        if i >= self.w.len() {
            return Err(MaintenanceError::IndexOutOfRange {
                index: i,
                len: self.w.len(),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{build_incidence, DirectedGraph};

    /// `A = [1]`. The hand example uses `A = [2]`, reproduced by doubling `h`.
    fn single_column() -> Arc<IncidenceMatrix> {
        let g = DirectedGraph::new(2, vec![(1, 0)]).unwrap();
        Arc::new(build_incidence(&g).delete_first_column())
    }

    #[test]
    fn empty_queries_are_zero() {
        let mut sop = SumOfProduct::new(single_column(), vec![3.0]).unwrap();
        assert_eq!(sop.query(0).unwrap(), 0.0);
        let mut sov = SumOfVector::new(vec![5.0]);
        assert_eq!(sov.query(0).unwrap(), 0.0);
    }

    #[test]
    fn sop_hand_replay() {
        let mut sop = SumOfProduct::new(single_column(), vec![3.0]).unwrap();
        sop.add(&[2.0]).unwrap();
        sop.add(&[4.0]).unwrap();
        assert_eq!(sop.query(0).unwrap(), 18.0);
        sop.update(0, 1.0).unwrap();
        sop.add(&[2.0]).unwrap();
        assert_eq!(sop.query(0).unwrap(), 20.0);
    }

    #[test]
    fn sov_hand_replay() {
        let mut sov = SumOfVector::new(vec![5.0]);
        sov.add(2.0);
        sov.update(0, 1.0).unwrap();
        sov.add(3.0);
        assert_eq!(sov.query(0).unwrap(), 13.0);
    }

    #[test]
    fn out_of_range_index() {
        let mut sop = SumOfProduct::new(single_column(), vec![3.0]).unwrap();
        assert!(matches!(
            sop.update(1, 0.0),
            Err(MaintenanceError::IndexOutOfRange { index: 1, len: 1 })
        ));
    }
}
