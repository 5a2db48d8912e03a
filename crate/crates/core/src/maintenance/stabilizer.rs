//! Smooths a stream of approximations `v̄^{(t)}` so that each output entry
//! changes only after its input drifted far enough.
//!
//! At step `t` and every level `ℓ` with `2^ℓ | t`, entries with
//! `|v̄^{(t)}_i - v̄^{(t - 2^ℓ)}_i| ≥ β / (4 log₂ m)` are copied to the output.
//! Every `⌊√m⌋` steps the whole output is refreshed.

use serde::Serialize;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct StabilizerCounters {
    pub steps: u64,
    pub input_entries: u64,
    pub level_checks: u64,
    pub rewrites: u64,
    pub refreshes: u64,
}

#[derive(Debug, Clone)]
pub struct Stabilizer {
    alpha: f64,
    beta: f64,
    log_m: f64,
    period: usize,
    levels: usize,
    input: Vec<f64>,
    output: Vec<f64>,
    history: Vec<Vec<(usize, f64)>>,
    t: usize,
    scratch: Vec<f64>,
    touched: Vec<bool>,
    changes_per_step: Vec<usize>,
    counters: StabilizerCounters,
}

impl Stabilizer {
    /// `alpha` bounds the per-step 2-norm of the input change; `beta` is the
    /// output accuracy.
    pub fn new(initial: Vec<f64>, alpha: f64, beta: f64) -> Self {
        let m = initial.len();
        let period = ((m as f64).sqrt().floor() as usize).max(1);
        let levels = (usize::BITS - 1 - period.leading_zeros()) as usize;
        Stabilizer {
            alpha,
            beta,
            log_m: (m as f64).log2().max(1.0),
            period,
            levels,
            output: initial.clone(),
            input: initial,
            history: Vec::new(),
            t: 0,
            scratch: vec![0.0; m],
            touched: vec![false; m],
            changes_per_step: Vec::new(),
            counters: StabilizerCounters::default(),
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn period(&self) -> usize {
        self.period
    }

    pub fn input(&self) -> &[f64] {
        &self.input
    }

    pub fn output(&self) -> &[f64] {
        &self.output
    }

    pub fn counters(&self) -> &StabilizerCounters {
        &self.counters
    }

    /// Number of output changes at every step so far.
    pub fn changes_per_step(&self) -> &[usize] {
        &self.changes_per_step
    }

    /// Rewrite threshold `β / (4 log₂ m)`.
    pub fn threshold(&self) -> f64 {
        self.beta / (4.0 * self.log_m)
    }

    /// Applies the sparse input change and returns the changed output entries.
    pub fn stabilize(&mut self, delta: &[(usize, f64)]) -> Vec<usize> {
        self.t += 1;
        self.counters.steps += 1;
        self.counters.input_entries += delta.len() as u64;
        for &(i, d) in delta {
            self.input[i] += d;
        }
        self.history.push(delta.to_vec());
        let mut changed = Vec::new();
        let threshold = self.threshold();
        for level in 0..=self.levels {
            let len = 1usize << level;
            if self.t % len != 0 {
                continue;
            }
            self.counters.level_checks += 1;
            let start = self.history.len() - len;
            let mut list = Vec::new();
            for step in &self.history[start..] {
                for &(i, d) in step {
                    if !self.touched[i] {
                        self.touched[i] = true;
                        list.push(i);
                    }
                    self.scratch[i] += d;
                }
            }
            for i in list {
                if self.scratch[i].abs() >= threshold {
                    self.rewrite(i, &mut changed);
                }
                self.scratch[i] = 0.0;
                self.touched[i] = false;
            }
        }
        if self.t == self.period {
            self.counters.refreshes += 1;
            for i in 0..self.input.len() {
                self.rewrite(i, &mut changed);
            }
            self.t = 0;
            self.history.clear();
        }
        changed.sort_unstable();
        changed.dedup();
        self.changes_per_step.push(changed.len());
        changed
    }

    fn rewrite(&mut self, i: usize, changed: &mut Vec<usize>) {
        if self.output[i] != self.input[i] {
            self.output[i] = self.input[i];
            self.counters.rewrites += 1;
            changed.push(i);
        }
    }
}

/// Largest number of changes in any aligned window of `2^level` steps.
pub fn max_changes_per_window(changes: &[usize], level: usize) -> usize {
    let len = 1usize << level;
    changes
        .chunks(len)
        .filter(|c| c.len() == len)
        .map(|c| c.iter().sum())
        .max()
        .unwrap_or(0)
}

/// Least-squares slope of `log(max changes per window)` against `log(window length)`,
/// over the levels with at least one change.
pub fn change_growth_slope(changes: &[usize], max_level: usize) -> Option<f64> {
    let pts: Vec<(f64, f64)> = (0..=max_level)
        .filter_map(|l| {
            let c = max_changes_per_window(changes, l);
            (c > 0).then(|| ((1usize << l) as f64).ln()).map(|x| (x, (c as f64).ln()))
        })
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_stream_never_rewrites() {
        let mut st = Stabilizer::new(vec![1.0; 16], 0.1, 0.1);
        for _ in 0..10 {
            assert!(st.stabilize(&[]).is_empty());
        }
    }

    #[test]
    fn drifting_coordinate_caught_within_two_steps() {
        let m = 64;
        let beta = 0.2;
        let mut st = Stabilizer::new(vec![0.0; m], 0.1, beta);
        let step = beta / (2.0 * (m as f64).log2());
        let first = st.stabilize(&[(3, step)]);
        let second = st.stabilize(&[(3, step)]);
        assert!(first.contains(&3) || second.contains(&3));
    }

    #[test]
    fn window_maxima() {
        let changes = [1, 0, 3, 1, 0, 0, 2, 2];
        assert_eq!(max_changes_per_window(&changes, 0), 3);
        assert_eq!(max_changes_per_window(&changes, 1), 4);
        assert_eq!(max_changes_per_window(&changes, 2), 5);
        assert_eq!(max_changes_per_window(&changes, 3), 9);
    }
}
