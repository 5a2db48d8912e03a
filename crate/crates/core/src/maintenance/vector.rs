//! Entrywise approximation of
//! `s^{(t)} = s^{(0)} + Σ_c Σ_{ℓ ≤ t} G_c^{(ℓ)} A h_c^{(ℓ)} + Σ_{ℓ ≤ t} β^{(ℓ)} w^{(ℓ)}`
//! with additive accuracy `ε_i` per entry.
//!
//! At step `t`, for every level `k` with `2^k | t`, the entries whose
//! accumulated change over the last `2^k` steps exceeds `ε_i / (30 log₂ m)`
//! in any channel are recomputed exactly. Entries whose weights changed
//! inside the window are recomputed as well.

use std::sync::Arc;

use serde::Serialize;

use super::heavy_hitter::{ExactScanHH, HeavyHitter, HeavyHitterCounters};
use super::prefix::{PrefixCounters, SumOfProduct, SumOfVector};
use super::{MaintenanceError, Tally};
use crate::instance::IncidenceMatrix;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct VectorCounters {
    pub adds: u64,
    pub weight_updates: u64,
    pub level_checks: u64,
    pub detected: u64,
    pub recomputed: u64,
    pub output_changes: u64,
    pub rows_scanned: u64,
}

#[derive(Debug, Clone)]
struct Channel {
    sop: SumOfProduct,
    hh: ExactScanHH,
}

#[derive(Debug, Clone)]
pub struct VectorMaintenance {
    channels: Vec<Channel>,
    sov: SumOfVector,
    base: Vec<f64>,
    eps: Vec<f64>,
    approx: Vec<f64>,
    dirty: Vec<Vec<bool>>,
    dirty_list: Vec<Vec<usize>>,
    levels: usize,
    max_adds: usize,
    log_m: f64,
    changed: Vec<usize>,
    mark: Vec<bool>,
    counters: VectorCounters,
}

impl VectorMaintenance {
    /// One channel per weight vector in `weights`; `w` is the vector term and
    /// `base` the starting value `s^{(0)}`.
    pub fn new(
        a: Arc<IncidenceMatrix>,
        weights: Vec<Vec<f64>>,
        w: Vec<f64>,
        base: Vec<f64>,
        eps: Vec<f64>,
    ) -> Result<Self, MaintenanceError> {
        let m = a.rows();
        for v in [&w, &base, &eps] {
            if v.len() != m {
                return Err(MaintenanceError::DimensionMismatch {
                    expected: m,
                    found: v.len(),
                });
            }
        }
        if let Some(i) = eps.iter().position(|&e| !(e > 0.0)) {
            return Err(MaintenanceError::NonPositiveAccuracy { index: i });
        }
        let mut channels = Vec::with_capacity(weights.len());
        for d in weights {
            let g = d.iter().zip(&eps).map(|(d, e)| d.abs() / e).collect();
            channels.push(Channel {
                sop: SumOfProduct::new(Arc::clone(&a), d)?,
                hh: ExactScanHH::new(Arc::clone(&a), g),
            });
        }
        let max_adds = ((m as f64).sqrt().floor() as usize).max(1);
        let levels = (usize::BITS - 1 - max_adds.leading_zeros()) as usize;
        Ok(VectorMaintenance {
            channels,
            sov: SumOfVector::new(w),
            approx: base.clone(),
            base,
            eps,
            dirty: vec![vec![false; m]; levels + 1],
            dirty_list: vec![Vec::new(); levels + 1],
            levels,
            max_adds,
            log_m: (m as f64).log2().max(1.0),
            changed: Vec::new(),
            mark: vec![false; m],
            counters: VectorCounters::default(),
        })
    }

    pub fn len(&self) -> usize {
        self.base.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base.is_empty()
    }

    pub fn t(&self) -> usize {
        self.sov.t()
    }

    /// Additions allowed before the structure must be rebuilt, `⌊√m⌋`.
    pub fn max_adds(&self) -> usize {
        self.max_adds
    }

    pub fn approx(&self) -> &[f64] {
        &self.approx
    }

    pub fn accuracy(&self, i: usize) -> f64 {
        self.eps[i]
    }

    pub fn counters(&self) -> &VectorCounters {
        &self.counters
    }

    /// Summed counters of the per-channel sum-of-product and heavy-hitter structures.
    pub fn component_counters(&self) -> (PrefixCounters, HeavyHitterCounters) {
        let mut prefix = self.sov.counters().clone();
        let mut hh = HeavyHitterCounters::default();
        for ch in &self.channels {
            prefix.absorb(ch.sop.counters());
            hh.absorb(ch.hh.counters());
        }
        (prefix, hh)
    }

    /// Detection threshold relative to `ε_i`.
    pub fn threshold(&self) -> f64 {
        1.0 / (30.0 * self.log_m)
    }

    /// Exact current value of entry `i`.
    pub fn exact(&self, i: usize) -> f64 {
        let mut acc = self.base[i] + self.sov.value(i);
        for ch in &self.channels {
            acc += ch.sop.value(i);
        }
        acc
    }

    pub fn exact_all(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.exact(i)).collect()
    }

    pub fn update_weight(&mut self, channel: usize, i: usize, d: f64) -> Result<(), MaintenanceError> {
        self.check(i)?;
        let ch = &mut self.channels[channel];
        ch.sop.update_unchecked(i, d);
        ch.hh.scale(i, d.abs() / self.eps[i]);
        self.counters.weight_updates += 1;
        self.mark_dirty(i);
        Ok(())
    }

    pub fn update_w(&mut self, i: usize, w: f64) -> Result<(), MaintenanceError> {
        self.check(i)?;
        self.sov.update_unchecked(i, w);
        self.counters.weight_updates += 1;
        self.mark_dirty(i);
        Ok(())
    }

    pub fn set_accuracy(&mut self, i: usize, eps: f64) -> Result<(), MaintenanceError> {
        self.check(i)?;
        if !(eps > 0.0) {
            return Err(MaintenanceError::NonPositiveAccuracy { index: i });
        }
        self.eps[i] = eps;
        for ch in &mut self.channels {
            let g = ch.sop.weight(i).abs() / eps;
            ch.hh.scale(i, g);
        }
        self.mark_dirty(i);
        Ok(())
    }

    /// Appends one step with one `h` per channel and scalar `beta`, and
    /// returns the indices whose approximation changed.
    pub fn add(&mut self, hs: &[&[f64]], beta: f64) -> Result<&[usize], MaintenanceError> {
        if hs.len() != self.channels.len() {
            return Err(MaintenanceError::DimensionMismatch {
                expected: self.channels.len(),
                found: hs.len(),
            });
        }
        if self.t() >= self.max_adds {
            return Err(MaintenanceError::BatchExhausted {
                limit: self.max_adds,
            });
        }
        for (ch, h) in self.channels.iter_mut().zip(hs) {
            ch.sop.add(h)?;
        }
        self.sov.add(beta);
        self.counters.adds += 1;
        let t = self.t();
        for i in self.changed.drain(..) {
            self.mark[i] = false;
        }
        let threshold = self.threshold();
        for level in 0..=self.levels {
            let len = 1usize << level;
            if t % len != 0 {
                continue;
            }
            self.counters.level_checks += 1;
            let from = t - len;
            let mut candidates: Vec<usize> = std::mem::take(&mut self.dirty_list[level]);
            for &i in &candidates {
                self.dirty[level][i] = false;
            }
            for ch in &mut self.channels {
                let window = ch.sop.window(from, t);
                let hits = ch.hh.query(&window, threshold);
                self.counters.rows_scanned += self.base.len() as u64;
                self.counters.detected += hits.len() as u64;
                candidates.extend(hits);
            }
            let beta_sum = self.sov.beta_window(from, t);
            if beta_sum != 0.0 {
                for i in 0..self.base.len() {
                    if (self.sov.get(i) * beta_sum).abs() > threshold * self.eps[i] {
                        candidates.push(i);
                        self.counters.detected += 1;
                    }
                }
                self.counters.rows_scanned += self.base.len() as u64;
            }
            for i in candidates {
                let exact = self.exact(i);
                self.counters.recomputed += 1;
                if exact != self.approx[i] {
                    self.approx[i] = exact;
                    if !self.mark[i] {
                        self.mark[i] = true;
                        self.changed.push(i);
                    }
                }
            }
        }
        self.changed.sort_unstable();
        self.counters.output_changes += self.changed.len() as u64;
        Ok(&self.changed)
    }

    fn mark_dirty(&mut self, i: usize) {
        for level in 0..=self.levels {
            if !self.dirty[level][i] {
                self.dirty[level][i] = true;
                self.dirty_list[level].push(i);
            }
        }
    }

    fn check(&self, i: usize) -> Result<(), MaintenanceError> {
        if i >= self.base.len() {
            return Err(MaintenanceError::IndexOutOfRange {
                index: i,
                len: self.base.len(),
            });
        }
        Ok(())
    }
}
