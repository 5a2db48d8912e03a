//! Maintains `x̄_j ≈_ε x_j` and `s̄_j ≈_ε s_j` for the k-commodity step
//! recurrences
//!
//! ```text
//! s_j ← s_j + β (w   + Σ_ℓ (d_ℓ/d_Σ)       A(v_j - v_ℓ))
//! x_j ← x_j + β (z_j - Σ_ℓ (d_j d_ℓ/d_Σ)   A(v_j - v_ℓ))
//! ```
//!
//! with `v_{k+1} = 0` and `d = x̄ / s̄` taken from the current outputs.
//! Every `(j, ℓ)` pair is one channel of a [`VectorMaintenance`], so there
//! are `(k+1)²` channels for `s` and as many for `x`.

use std::sync::Arc;

use serde::Serialize;

use super::heavy_hitter::HeavyHitterCounters;
use super::prefix::PrefixCounters;
use super::stabilizer::{Stabilizer, StabilizerCounters};
use super::vector::{VectorCounters, VectorMaintenance};
use super::{MaintenanceError, Tally};
use crate::instance::IncidenceMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdmOptions {
    /// Multiplicative accuracy of `x̄`, `s̄`.
    pub eps: f64,
    /// Route the outputs through a [`Stabilizer`] on the log scale.
    pub stabilize: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct PdmCounters {
    pub initializations: u64,
    pub adds: u64,
    pub updates: u64,
    pub s_rewrites: u64,
    pub x_rewrites: u64,
    pub accuracy_updates: u64,
    pub weight_propagations: u64,
}

#[derive(Debug, Clone)]
struct Side {
    vm: Vec<VectorMaintenance>,
    bar: Vec<Vec<f64>>,
    stab: Vec<Stabilizer>,
}

#[derive(Debug, Clone)]
pub struct PrimalDualMaintenance {
    a: Arc<IncidenceMatrix>,
    k: usize,
    opts: PdmOptions,
    log_m: f64,
    s: Side,
    x: Side,
    d: Vec<Vec<f64>>,
    d_sigma: Vec<f64>,
    changed_pairs: Vec<(usize, usize)>,
    changed_edges: Vec<usize>,
    change_history: Vec<usize>,
    counters: PdmCounters,
}

impl PrimalDualMaintenance {
    /// `w` and `z` (one vector per block) are the vector terms; `s0`, `x0`
    /// the starting values.
    pub fn initialize(
        a: Arc<IncidenceMatrix>,
        opts: PdmOptions,
        w: Vec<f64>,
        z: Vec<Vec<f64>>,
        s0: Vec<Vec<f64>>,
        x0: Vec<Vec<f64>>,
    ) -> Result<Self, MaintenanceError> {
        let m = a.rows();
        let blocks = s0.len();
        if blocks < 2 || x0.len() != blocks || z.len() != blocks {
            return Err(MaintenanceError::DimensionMismatch {
                expected: blocks.max(2),
                found: x0.len().min(z.len()),
            });
        }
        for v in s0.iter().chain(&x0).chain(&z).chain(std::iter::once(&w)) {
            if v.len() != m {
                return Err(MaintenanceError::DimensionMismatch {
                    expected: m,
                    found: v.len(),
                });
            }
        }
        for v in s0.iter().chain(&x0) {
            if let Some(index) = v.iter().position(|&x| !(x > 0.0)) {
                return Err(MaintenanceError::NonPositiveWeight { index });
            }
        }
        let k = blocks - 1;
        let d: Vec<Vec<f64>> = x0
            .iter()
            .zip(&s0)
            .map(|(x, s)| x.iter().zip(s).map(|(x, s)| x / s).collect())
            .collect();
        let d_sigma: Vec<f64> = (0..m).map(|e| d.iter().map(|dj| dj[e]).sum()).collect();
        let log_m = (m as f64).log2().max(1.0);
        let mut pdm = PrimalDualMaintenance {
            a,
            k,
            opts,
            log_m,
            s: Side {
                vm: Vec::new(),
                bar: s0,
                stab: Vec::new(),
            },
            x: Side {
                vm: Vec::new(),
                bar: x0,
                stab: Vec::new(),
            },
            d,
            d_sigma,
            changed_pairs: Vec::new(),
            changed_edges: Vec::new(),
            change_history: Vec::new(),
            counters: PdmCounters {
                initializations: 1,
                ..PdmCounters::default()
            },
        };
        for j in 0..=k {
            let s_weights = (0..=k).map(|l| pdm.s_weight_vec(l)).collect();
            let s_eps = pdm.s.bar[j].iter().map(|&v| pdm.accuracy(v)).collect();
            pdm.s.vm.push(VectorMaintenance::new(
                Arc::clone(&pdm.a),
                s_weights,
                w.clone(),
                pdm.s.bar[j].clone(),
                s_eps,
            )?);
            let x_weights = (0..=k).map(|l| pdm.x_weight_vec(j, l)).collect();
            let x_eps = pdm.x.bar[j].iter().map(|&v| pdm.accuracy(v)).collect();
            pdm.x.vm.push(VectorMaintenance::new(
                Arc::clone(&pdm.a),
                x_weights,
                z[j].clone(),
                pdm.x.bar[j].clone(),
                x_eps,
            )?);
        }
        if opts.stabilize {
            let beta = opts.eps / 2.0;
            for side in [&mut pdm.s, &mut pdm.x] {
                side.stab = side
                    .bar
                    .iter()
                    .map(|b| Stabilizer::new(b.iter().map(|v| v.ln()).collect(), 0.1, beta))
                    .collect();
            }
        }
        Ok(pdm)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn m(&self) -> usize {
        self.a.rows()
    }

    pub fn options(&self) -> PdmOptions {
        self.opts
    }

    /// Number of additions since initialization.
    pub fn t(&self) -> usize {
        self.s.vm[0].t()
    }

    pub fn max_adds(&self) -> usize {
        self.s.vm[0].max_adds()
    }

    pub fn sbar(&self) -> &[Vec<f64>] {
        &self.s.bar
    }

    pub fn xbar(&self) -> &[Vec<f64>] {
        &self.x.bar
    }

    /// Current weights `d_j = x̄_j / s̄_j`.
    pub fn weights(&self) -> &[Vec<f64>] {
        &self.d
    }

    pub fn counters(&self) -> &PdmCounters {
        &self.counters
    }

    /// Number of changed `(j, i)` output entries after every addition.
    pub fn change_history(&self) -> &[usize] {
        &self.change_history
    }

    /// `(block, edge)` pairs of `x̄` or `s̄` rewritten by the last addition.
    pub fn last_changes(&self) -> &[(usize, usize)] {
        &self.changed_pairs
    }

    /// Absolute accuracy requested from the vector structures for an output value.
    fn accuracy(&self, value: f64) -> f64 {
        if self.opts.stabilize {
            self.opts.eps * value / (40.0 * self.log_m)
        } else {
            self.opts.eps * value / 10.0
        }
    }

    fn s_weight(&self, l: usize, e: usize) -> f64 {
        self.d[l][e] / self.d_sigma[e]
    }

    fn x_weight(&self, j: usize, l: usize, e: usize) -> f64 {
        -self.d[j][e] * self.d[l][e] / self.d_sigma[e]
    }

    fn s_weight_vec(&self, l: usize) -> Vec<f64> {
        (0..self.m()).map(|e| self.s_weight(l, e)).collect()
    }

    fn x_weight_vec(&self, j: usize, l: usize) -> Vec<f64> {
        (0..self.m()).map(|e| self.x_weight(j, l, e)).collect()
    }

    /// Sets `w_i = w` and `(z_j)_i = z[j]`.
    pub fn update(&mut self, i: usize, z: &[f64], w: f64) -> Result<(), MaintenanceError> {
        if z.len() != self.k + 1 {
            return Err(MaintenanceError::DimensionMismatch {
                expected: self.k + 1,
                found: z.len(),
            });
        }
        for j in 0..=self.k {
            self.s.vm[j].update_w(i, w)?;
            self.x.vm[j].update_w(i, z[j])?;
        }
        self.counters.updates += 1;
        Ok(())
    }

    /// Appends one step with `v_1, …, v_k` and `β`, and returns the edges
    /// where some `x̄_j` or `s̄_j` changed.
    pub fn add(&mut self, v: &[Vec<f64>], beta: f64) -> Result<&[usize], MaintenanceError> {
        let (k, nr) = (self.k, self.a.cols());
        if v.len() != k || v.iter().any(|vi| vi.len() != nr) {
            return Err(MaintenanceError::DimensionMismatch {
                expected: k,
                found: v.len(),
            });
        }
        if self.t() >= self.max_adds() {
            return Err(MaintenanceError::BatchExhausted {
                limit: self.max_adds(),
            });
        }
        self.counters.adds += 1;
        let zero = vec![0.0; nr];
        let vj = |j: usize| if j < k { &v[j] } else { &zero };
        let mut s_changed: Vec<Vec<usize>> = Vec::with_capacity(k + 1);
        let mut x_changed: Vec<Vec<usize>> = Vec::with_capacity(k + 1);
        for j in 0..=k {
            let hs: Vec<Vec<f64>> = (0..=k)
                .map(|l| vj(j).iter().zip(vj(l)).map(|(a, b)| beta * (a - b)).collect())
                .collect();
            let refs: Vec<&[f64]> = hs.iter().map(|h| h.as_slice()).collect();
            let eps = self.opts.eps;
            let idx = self.s.vm[j].add(&refs, beta)?.to_vec();
            s_changed.push(Self::refresh_outputs(&mut self.s, j, &idx, eps)?);
            let idx = self.x.vm[j].add(&refs, beta)?.to_vec();
            x_changed.push(Self::refresh_outputs(&mut self.x, j, &idx, eps)?);
        }

        self.changed_pairs.clear();
        let mut touched = vec![false; self.m()];
        for (j, list) in s_changed.iter().enumerate() {
            for &i in list {
                let acc = self.accuracy(self.s.bar[j][i]);
                self.s.vm[j].set_accuracy(i, acc)?;
                self.counters.s_rewrites += 1;
                self.counters.accuracy_updates += 1;
                self.changed_pairs.push((j, i));
                touched[i] = true;
            }
        }
        for (j, list) in x_changed.iter().enumerate() {
            for &i in list {
                let acc = self.accuracy(self.x.bar[j][i]);
                self.x.vm[j].set_accuracy(i, acc)?;
                self.counters.x_rewrites += 1;
                self.counters.accuracy_updates += 1;
                self.changed_pairs.push((j, i));
                touched[i] = true;
            }
        }
        self.changed_pairs.sort_unstable();
        self.changed_pairs.dedup();
        self.change_history.push(self.changed_pairs.len());
        self.changed_edges = (0..self.m()).filter(|&i| touched[i]).collect();
        for idx in 0..self.changed_edges.len() {
            let i = self.changed_edges[idx];
            self.propagate_weights(i)?;
        }
        Ok(&self.changed_edges)
    }

    /// Applies the rewrite rule to the entries reported by block `j` and
    /// returns the rewritten indices.
    fn refresh_outputs(
        side: &mut Side,
        j: usize,
        idx: &[usize],
        eps: f64,
    ) -> Result<Vec<usize>, MaintenanceError> {
        let approx = side.vm[j].approx();
        for &i in idx {
            if !(approx[i] > 0.0) {
                return Err(MaintenanceError::NonPositiveWeight { index: i });
            }
        }
        if let Some(stab) = side.stab.get_mut(j) {
            let delta: Vec<(usize, f64)> = idx
                .iter()
                .map(|&i| (i, approx[i].ln() - stab.input()[i]))
                .collect();
            let out = stab.stabilize(&delta);
            for &i in &out {
                side.bar[j][i] = stab.output()[i].exp();
            }
            return Ok(out);
        }
        let mut out = Vec::new();
        for &i in idx {
            let cur = side.bar[j][i];
            if (cur - approx[i]).abs() > eps * cur / 5.0 {
                side.bar[j][i] = approx[i];
                out.push(i);
            }
        }
        Ok(out)
    }

    fn propagate_weights(&mut self, i: usize) -> Result<(), MaintenanceError> {
        let k = self.k;
        for j in 0..=k {
            self.d[j][i] = self.x.bar[j][i] / self.s.bar[j][i];
        }
        self.d_sigma[i] = (0..=k).map(|j| self.d[j][i]).sum();
        for j in 0..=k {
            for l in 0..=k {
                let sw = self.s_weight(l, i);
                self.s.vm[j].update_weight(l, i, sw)?;
                let xw = self.x_weight(j, l, i);
                self.x.vm[j].update_weight(l, i, xw)?;
            }
        }
        self.counters.weight_propagations += 1;
        Ok(())
    }

    /// Exact `(x_j, s_j)` of the recurrences by direct summation.
    pub fn exact(&self) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let x = self.x.vm.iter().map(|vm| vm.exact_all()).collect();
        let s = self.s.vm.iter().map(|vm| vm.exact_all()).collect();
        (x, s)
    }

    /// Exact `(x_j)_i` and `(s_j)_i` for one entry.
    pub fn exact_entry(&self, j: usize, i: usize) -> (f64, f64) {
        (self.x.vm[j].exact(i), self.s.vm[j].exact(i))
    }

    /// Largest `|ln(x̄/x)|` or `|ln(s̄/s)|` against the exact values.
    pub fn max_log_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for j in 0..=self.k {
            for i in 0..self.m() {
                let (x, s) = self.exact_entry(j, i);
                worst = worst.max(log_ratio(self.x.bar[j][i], x));
                worst = worst.max(log_ratio(self.s.bar[j][i], s));
            }
        }
        worst
    }

    /// Counters of all component structures, summed over blocks.
    pub fn component_counters(
        &self,
    ) -> (PrefixCounters, HeavyHitterCounters, VectorCounters, StabilizerCounters) {
        let mut prefix = PrefixCounters::default();
        let mut hh = HeavyHitterCounters::default();
        let mut vector = VectorCounters::default();
        let mut stab = StabilizerCounters::default();
        for side in [&self.s, &self.x] {
            for vm in &side.vm {
                let (p, h) = vm.component_counters();
                prefix.absorb(&p);
                hh.absorb(&h);
                vector.absorb(vm.counters());
            }
            for st in &side.stab {
                stab.absorb(st.counters());
            }
        }
        (prefix, hh, vector, stab)
    }
}

fn log_ratio(a: f64, b: f64) -> f64 {
    if a > 0.0 && b > 0.0 {
        (a / b).ln().abs()
    } else {
        f64::INFINITY
    }
}

/// `Σ_j ‖prev_j⁻¹ (cur_j - prev_j)‖²`.
pub fn relative_step_norm_sq(prev: &[Vec<f64>], cur: &[Vec<f64>]) -> f64 {
    prev.iter()
        .zip(cur)
        .flat_map(|(p, c)| p.iter().zip(c))
        .map(|(p, c)| ((c - p) / p).powi(2))
        .sum()
}

/// Checks the step premises of [`PrimalDualMaintenance::add`]: both relative
/// step norms at most `1/100` and `x s ≈_{1/10} µ`.
pub fn check_premises(
    prev: (&[Vec<f64>], &[Vec<f64>]),
    cur: (&[Vec<f64>], &[Vec<f64>]),
    mu: f64,
) -> Result<(), MaintenanceError> {
    let sn = relative_step_norm_sq(prev.1, cur.1);
    if sn > 0.01 {
        return Err(MaintenanceError::PremiseViolated {
            what: "slack step norm",
            value: sn,
            bound: 0.01,
        });
    }
    let xn = relative_step_norm_sq(prev.0, cur.0);
    if xn > 0.01 {
        return Err(MaintenanceError::PremiseViolated {
            what: "primal step norm",
            value: xn,
            bound: 0.01,
        });
    }
    let worst = cur
        .0
        .iter()
        .zip(cur.1)
        .flat_map(|(x, s)| x.iter().zip(s))
        .map(|(x, s)| (x * s / mu).ln().abs())
        .fold(0.0, f64::max);
    if worst > 0.1 {
        return Err(MaintenanceError::PremiseViolated {
            what: "centrality log ratio",
            value: worst,
            bound: 0.1,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{build_incidence, DirectedGraph};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn path(n: usize) -> Arc<IncidenceMatrix> {
        let edges = (0..n - 1).map(|v| (v, v + 1)).collect();
        let g = DirectedGraph::new(n, edges).unwrap();
        Arc::new(build_incidence(&g).delete_first_column())
    }

    fn build(a: &Arc<IncidenceMatrix>, k: usize, stabilize: bool) -> PrimalDualMaintenance {
        let m = a.rows();
        PrimalDualMaintenance::initialize(
            Arc::clone(a),
            PdmOptions {
                eps: 0.05,
                stabilize,
            },
            vec![0.0; m],
            vec![vec![0.0; m]; k + 1],
            vec![vec![2.0; m]; k + 1],
            vec![vec![0.5; m]; k + 1],
        )
        .unwrap()
    }

    #[test]
    fn zero_stream_keeps_outputs() {
        let a = path(5);
        let mut pdm = build(&a, 2, false);
        let v = vec![vec![0.0; a.cols()]; 2];
        for _ in 0..pdm.max_adds() {
            assert!(pdm.add(&v, 1.0).unwrap().is_empty());
        }
        assert!(pdm.sbar().iter().flatten().all(|&s| s == 2.0));
        assert!(pdm.xbar().iter().flatten().all(|&x| x == 0.5));
    }

    #[test]
    fn random_stream_stays_within_accuracy() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = path(3);
        let mut pdm = build(&a, 1, false);
        // m = 2 allows one addition per batch, so rebuild from the exact values.
        for _ in 0..10 {
            let v = vec![(0..a.cols()).map(|_| rng.gen_range(-0.01..0.01)).collect()];
            pdm.add(&v, 1.0).unwrap();
            assert!(pdm.max_log_error() <= 0.05);
            let (x, s) = pdm.exact();
            pdm = PrimalDualMaintenance::initialize(
                Arc::clone(&a),
                pdm.options(),
                vec![0.0; 2],
                vec![vec![0.0; 2]; 2],
                s,
                x,
            )
            .unwrap();
        }
    }

    #[test]
    fn changes_below_threshold_are_not_written() {
        let a = path(17);
        let mut pdm = build(&a, 1, false);
        let m = a.rows();
        // Slack w moves every s entry by 0.009 · 2 per step; ε s̄ / 5 = 0.02.
        for i in 0..m {
            pdm.update(i, &[0.0, 0.0], 0.009).unwrap();
        }
        let v = vec![vec![0.0; a.cols()]];
        pdm.add(&v, 1.0).unwrap();
        assert_eq!(pdm.counters().s_rewrites, 0);
        pdm.add(&v, 1.0).unwrap();
        assert_eq!(pdm.counters().s_rewrites, 0);
        pdm.add(&v, 1.0).unwrap();
        assert!(pdm.counters().s_rewrites > 0);
    }

    #[test]
    fn stabilized_outputs_track_exact_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = path(26);
        let mut pdm = build(&a, 1, true);
        for _ in 0..pdm.max_adds() {
            let v = vec![(0..a.cols()).map(|_| rng.gen_range(-0.002..0.002)).collect()];
            pdm.add(&v, 1.0).unwrap();
            assert!(pdm.max_log_error() <= 0.05);
        }
    }
}
