//! Path-following driver for both engines.
//!
//! The direct engine uses `x̄ = x`, `s̄ = s` and the generic step. The
//! maintained engine runs batches of `⌊√m⌋` iterations on the Schur system
//! and the primal-dual maintenance, with `v̄ = x̄ s̄ / t_batch`, and
//! recovers the exact iterate at the end of every batch.
//!
//! In practical mode a rejected step (direct) or batch (maintained) is
//! rolled back and retried with half the step scale; the scale grows again
//! after every accepted step or batch.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::instance::{Iterate, ReducedLp};
use crate::linalg::{BlockWeights, CsrMatrix, LinalgError, SchurSystem};
use crate::maintenance::primal_dual::check_premises;
use crate::maintenance::{CostCounters, PdmOptions, PrimalDualMaintenance, Tally};

use super::step::{apply_step, refresh, step_commodity, step_generic, CenteringState, Step};
use super::{centrality, potential, Direction, Engine, IpmError, IpmParameters, Mode};

/// Invariant measurements collected when [`IpmParameters::audit`] is set.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PathAudit {
    pub max_centrality: f64,
    /// `max ‖S̄⁻¹ δs‖₂`.
    pub max_step_norm_s: f64,
    /// `max ‖X̄⁻¹ δx‖₂`.
    pub max_step_norm_x: f64,
    /// `max ‖x/x_init‖₁ + ‖s/s_init‖₁` over iterates with `t ≤ t_init`.
    pub max_ratio: f64,
    pub magnitude_violations: usize,
    /// Largest `|ln(x̄/x)|`, `|ln(s̄/s)|` seen in the maintained engine.
    pub max_maintenance_error: f64,
    pub maintenance_checks: usize,
    pub premise_violations: usize,
    pub premise_checks: usize,
    pub max_primal_residual: f64,
    /// `‖𝒜y + s - c‖∞ / (1 + ‖c‖∞ + ‖s‖∞)`.
    pub max_dual_residual: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RunStats {
    pub iterations: usize,
    pub attempts: usize,
    pub rejected: usize,
    pub batches: usize,
    pub min_step_scale: f64,
    pub final_step_scale: f64,
    /// Steps whose reduced solve was replaced by the least-squares fallback.
    pub solve_fallbacks: usize,
    /// `(t, xᵀs)` after every batch.
    pub gap_history: Vec<(f64, f64)>,
    /// Number of changed `x̄`/`s̄` entries per addition (maintained engine).
    pub change_history: Vec<usize>,
    pub counters: CostCounters,
    pub audit: PathAudit,
}

#[derive(Debug, Clone)]
pub struct PathOutcome {
    pub iterate: Iterate,
    pub stats: RunStats,
}

/// Follows the central path from `start` to `t_target`.
pub fn run_path(
    engine: Engine,
    lp: &ReducedLp,
    start: Iterate,
    t_target: f64,
    params: &IpmParameters,
) -> Result<PathOutcome, IpmError> {
    let n = lp.primal_dim();
    if start.x.len() != n || start.s.len() != n || start.y.len() != lp.dual_dim() {
        return Err(IpmError::DimensionMismatch {
            expected: n,
            found: start.x.len(),
        });
    }
    let v: Vec<f64> = start.x.iter().zip(&start.s).map(|(x, s)| x * s / start.t).collect();
    let phi = potential(&v, params.lambda).unwrap_or(f64::INFINITY);
    let bound = 16.0 * n as f64;
    if !(phi <= bound) {
        return Err(IpmError::NotCentered {
            potential: phi,
            bound,
        });
    }
    let mut driver = Driver::new(lp, &start, params);
    let iterate = match engine {
        Engine::Direct => driver.run_direct(start, t_target)?,
        Engine::Maintained => driver.run_maintained(start, t_target)?,
    };
    driver.stats.final_step_scale = driver.scale;
    if let Some(c) = driver.schur_counters.take() {
        driver.stats.counters.schur.absorb(&c);
    }
    let history = driver.stats.change_history.clone();
    driver.stats.counters.set_change_history(&history);
    Ok(PathOutcome {
        iterate,
        stats: driver.stats,
    })
}

struct Driver<'a> {
    lp: &'a ReducedLp,
    a: CsrMatrix,
    params: &'a IpmParameters,
    x_init: Vec<f64>,
    s_init: Vec<f64>,
    t_init: f64,
    scale: f64,
    batch: usize,
    stats: RunStats,
    schur_counters: Option<crate::linalg::SchurCounters>,
    rng: ChaCha8Rng,
}

enum Rejection {
    /// Recoverable in practical mode by a smaller step.
    Trip(IpmError),
    Fatal(IpmError),
}

impl From<IpmError> for Rejection {
    fn from(e: IpmError) -> Self {
        match e {
            IpmError::IterationCapExceeded { .. } | IpmError::DimensionMismatch { .. } => {
                Rejection::Fatal(e)
            }
            other => Rejection::Trip(other),
        }
    }
}

impl From<LinalgError> for Rejection {
    fn from(e: LinalgError) -> Self {
        Rejection::Trip(e.into())
    }
}

impl From<crate::maintenance::MaintenanceError> for Rejection {
    fn from(e: crate::maintenance::MaintenanceError) -> Self {
        Rejection::Trip(e.into())
    }
}

const CENTRALITY_BOUND: f64 = 1.0 / 16.0;
const SCALE_GROWTH: f64 = 1.1;
const SAMPLES_PER_BATCH: usize = 10;

impl<'a> Driver<'a> {
    fn new(lp: &'a ReducedLp, start: &Iterate, params: &'a IpmParameters) -> Self {
        let scale = match params.mode {
            Mode::Strict => 1.0,
            Mode::Practical => params.step_scale,
        };
        Driver {
            lp,
            a: lp.constraint_matrix(),
            params,
            x_init: start.x.clone(),
            s_init: start.s.clone(),
            t_init: start.t,
            scale,
            batch: ((lp.m() as f64).sqrt().floor() as usize).max(1),
            stats: RunStats {
                min_step_scale: scale,
                ..RunStats::default()
            },
            schur_counters: None,
            rng: ChaCha8Rng::seed_from_u64(0x5eed),
        }
    }

    fn potential_bound(&self) -> f64 {
        64.0 * self.lp.primal_dim() as f64
    }

    /// Accepts a candidate iterate if it is strictly positive, centered and
    /// within the potential bound.
    fn check_candidate(&self, it: &Iterate) -> Result<(), IpmError> {
        let c = centrality(&it.x, &it.s, it.t);
        let positive = it.x.iter().chain(&it.s).all(|&v| v > 0.0 && v.is_finite());
        let v: Vec<f64> = it.x.iter().zip(&it.s).map(|(x, s)| x * s / it.t).collect();
        let phi = potential(&v, self.params.lambda).unwrap_or(f64::INFINITY);
        if !positive || !(c <= CENTRALITY_BOUND) || !(phi <= self.potential_bound()) {
            return Err(IpmError::CenteringLost {
                t: it.t,
                centrality: if positive { c } else { f64::INFINITY },
            });
        }
        Ok(())
    }

    fn check_cap(&self, t: f64) -> Result<(), IpmError> {
        if self.stats.attempts >= self.params.max_iterations {
            return Err(IpmError::IterationCapExceeded {
                cap: self.params.max_iterations,
                t,
            });
        }
        Ok(())
    }

    /// Halves the step scale after a rejection. Strict mode never retries.
    fn shrink(&mut self, err: Rejection) -> Result<(), IpmError> {
        let err = match err {
            Rejection::Fatal(e) => return Err(e),
            Rejection::Trip(e) => e,
        };
        if self.params.mode == Mode::Strict || self.scale <= 1.0 {
            return Err(err);
        }
        self.stats.rejected += 1;
        self.scale = (self.scale / 2.0).max(1.0);
        self.stats.min_step_scale = self.stats.min_step_scale.min(self.scale);
        Ok(())
    }

    fn grow(&mut self) {
        if self.params.mode == Mode::Practical {
            self.scale = (self.scale * SCALE_GROWTH).min(self.params.step_scale);
        }
    }

    fn audit_iterate(&mut self, it: &Iterate) {
        if !self.params.audit {
            return;
        }
        let audit = &mut self.stats.audit;
        audit.max_centrality = audit.max_centrality.max(centrality(&it.x, &it.s, it.t));
        if self.params.direction == Direction::Forward && it.t <= self.t_init {
            let ratio: f64 = it.x.iter().zip(&self.x_init).map(|(x, x0)| x / x0).sum::<f64>()
                + it.s.iter().zip(&self.s_init).map(|(s, s0)| s / s0).sum::<f64>();
            audit.max_ratio = audit.max_ratio.max(ratio);
            let n = it.x.len() as f64;
            let m = self.lp.m();
            let u = self.lp.capacity();
            for p in 0..it.x.len() {
                let ue = u[p % m];
                let s_ok = it.s[p] >= it.t / (10.0 * ue) && it.s[p] <= 3.0 * n * self.s_init[p];
                let x_ok = it.x[p] >= it.t / (3.0 * n * self.s_init[p]) && it.x[p] <= ue;
                if !(s_ok && x_ok) {
                    audit.magnitude_violations += 1;
                }
            }
        }
    }

    fn audit_residuals(&mut self, it: &Iterate) {
        if !self.params.audit {
            return;
        }
        let lp = self.lp;
        let pr = lp.primal_residual(&it.x);
        let scale = 1.0
            + lp.c().iter().fold(0.0f64, |a, &b| a.max(b.abs()))
            + it.s.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        let dr = lp.dual_residual(&it.y, &it.s) / scale;
        let audit = &mut self.stats.audit;
        audit.max_primal_residual = audit.max_primal_residual.max(pr);
        audit.max_dual_residual = audit.max_dual_residual.max(dr);
    }

    fn audit_step(&mut self, step: &Step, xbar: &[f64], sbar: &[f64]) {
        if !self.params.audit {
            return;
        }
        let ns = step.ds.iter().zip(sbar).map(|(d, s)| (d / s).powi(2)).sum::<f64>().sqrt();
        let nx = step.dx.iter().zip(xbar).map(|(d, x)| (d / x).powi(2)).sum::<f64>().sqrt();
        let audit = &mut self.stats.audit;
        audit.max_step_norm_s = audit.max_step_norm_s.max(ns);
        audit.max_step_norm_x = audit.max_step_norm_x.max(nx);
    }

    fn end_batch(&mut self, it: &mut Iterate) -> Result<(), IpmError> {
        let before = it.clone();
        refresh(self.lp, &self.a, it)?;
        if self.check_candidate(it).is_err() {
            *it = before;
        }
        self.stats.batches += 1;
        self.stats.gap_history.push((it.t, it.gap()));
        self.audit_residuals(it);
        Ok(())
    }

    fn run_direct(&mut self, mut it: Iterate, t_target: f64) -> Result<Iterate, IpmError> {
        let lambda = self.params.lambda;
        let mut since_refresh = 0;
        while it.t != t_target {
            self.check_cap(it.t)?;
            self.stats.attempts += 1;
            let t_next = self.params.next_t(it.t, t_target, self.params.h * self.scale);
            match self.direct_candidate(&it, t_next, lambda) {
                Ok(candidate) => {
                    it = candidate;
                    self.stats.iterations += 1;
                    self.audit_iterate(&it);
                    self.grow();
                    since_refresh += 1;
                    if since_refresh == self.batch {
                        since_refresh = 0;
                        self.end_batch(&mut it)?;
                    }
                }
                Err(e) => self.shrink(e)?,
            }
        }
        self.end_batch(&mut it)?;
        Ok(it)
    }

    fn direct_candidate(&mut self, it: &Iterate, t_next: f64, lambda: f64) -> Result<Iterate, Rejection> {
        let cs = CenteringState::new(it.x.clone(), it.s.clone(), it.t, lambda)?;
        let mut candidate = it.clone();
        if cs.g_norm >= 1e-14 {
            let step = step_generic(&self.a, &cs, t_next, lambda, self.scale)?;
            apply_step(&mut candidate, &step, 1.0);
            self.audit_step(&step, &cs.xbar, &cs.sbar);
        }
        candidate.t = t_next;
        self.check_candidate(&candidate)?;
        Ok(candidate)
    }

    fn run_maintained(&mut self, mut it: Iterate, t_target: f64) -> Result<Iterate, IpmError> {
        let k = self.lp.k();
        let weights = BlockWeights::from_ratio(&it.x, &it.s, k)?;
        let mut sys = SchurSystem::new(Arc::clone(self.lp.incidence()), weights)?;
        while it.t != t_target {
            let attempts = self.stats.attempts;
            match self.maintained_batch(&mut sys, &it, t_target) {
                Ok(next) => {
                    it = next;
                    self.audit_iterate(&it);
                    self.grow();
                    self.end_batch(&mut it)?;
                }
                Err(e) => {
                    // Failed batches still count towards the cap.
                    self.stats.attempts = self.stats.attempts.max(attempts + 1);
                    sys.invalidate();
                    self.shrink(e)?;
                }
            }
        }
        self.schur_counters = Some(sys.counters().clone());
        Ok(it)
    }

    fn maintained_batch(
        &mut self,
        sys: &mut SchurSystem,
        start: &Iterate,
        t_target: f64,
    ) -> Result<Iterate, Rejection> {
        let lp = self.lp;
        let (k, m) = (lp.k(), lp.m());
        let lambda = self.params.lambda;
        let t_batch = start.t;
        let blocks = |v: &[f64]| -> Vec<Vec<f64>> { v.chunks(m).map(|c| c.to_vec()).collect() };

        let mut cs = CenteringState::new(start.x.clone(), start.s.clone(), t_batch, lambda)?;
        sys.set_weights(BlockWeights::from_ratio(&start.x, &start.s, k)?)?;
        let (w, z) = vector_terms(&cs, sys.weights(), k, m);
        let mut pdm = PrimalDualMaintenance::initialize(
            Arc::clone(lp.incidence()),
            PdmOptions {
                eps: self.params.eps_approx,
                stabilize: self.params.stabilize,
            },
            w,
            z,
            blocks(&start.s),
            blocks(&start.x),
        )?;
        let steps = pdm.max_adds();
        let samples: Vec<usize> = if self.params.audit {
            rand::seq::index::sample(&mut self.rng, steps, SAMPLES_PER_BATCH.min(steps)).into_vec()
        } else {
            Vec::new()
        };
        let mut g_norm_sq: f64 = cs.g.iter().map(|g| g * g).sum();
        let mut y = start.y.clone();
        let mut t = t_batch;
        let mut taken = 0;
        for step_index in 0..steps {
            if t == t_target {
                break;
            }
            self.check_cap(t)?;
            self.stats.attempts += 1;
            let t_next = self.params.next_t(t, t_target, self.params.h * self.scale);
            cs.g_norm = g_norm_sq.max(0.0).sqrt();
            if cs.g_norm < 1e-14 {
                t = t_next;
                taken += 1;
                continue;
            }
            let cstep = step_commodity(sys, &cs, t_next, lambda, self.scale)?;
            self.audit_step(&cstep.step, &cs.xbar, &cs.sbar);
            if cstep.fallback {
                self.stats.solve_fallbacks += 1;
            }
            for (yi, d) in y.iter_mut().zip(&cstep.step.dy) {
                *yi += d;
            }
            let sampled = samples.contains(&step_index);
            let before = if sampled { Some(pdm.exact()) } else { None };
            let changed = pdm.add(&cstep.v, cstep.beta)?.to_vec();
            if let Some((x0, s0)) = before {
                let (x1, s1) = pdm.exact();
                self.record_premises(&x0, &s0, &x1, &s1, t_next);
                self.record_maintenance_error(pdm.max_log_error());
            }
            for &e in &changed {
                for j in 0..=k {
                    let p = j * m + e;
                    cs.xbar[p] = pdm.xbar()[j][e];
                    cs.sbar[p] = pdm.sbar()[j][e];
                    cs.vbar[p] = cs.xbar[p] * cs.sbar[p] / t_batch;
                    let a = lambda * (cs.vbar[p] - 1.0);
                    if !(a.abs() <= 300.0) {
                        return Err(Rejection::Trip(IpmError::Overflow { index: p }));
                    }
                    let g = -lambda * a.sinh();
                    g_norm_sq += g * g - cs.g[p] * cs.g[p];
                    cs.g[p] = g;
                }
                let d_e: Vec<f64> = (0..=k)
                    .map(|j| cs.xbar[j * m + e] / cs.sbar[j * m + e])
                    .collect();
                sys.set_edge_weights(e, &d_e)?;
                let (w_e, z_e) = edge_terms(&cs, &d_e, e, m);
                pdm.update(e, &z_e, w_e)?;
            }
            t = t_next;
            taken += 1;
        }
        let (x, s) = pdm.exact();
        self.record_maintenance_error(if self.params.audit { pdm.max_log_error() } else { 0.0 });
        self.stats.change_history.extend_from_slice(pdm.change_history());
        self.stats.counters.absorb_pdm(&pdm);
        let it = Iterate {
            x: x.concat(),
            s: s.concat(),
            y,
            t,
        };
        self.check_candidate(&it)?;
        self.stats.iterations += taken;
        Ok(it)
    }

    fn record_maintenance_error(&mut self, err: f64) {
        if self.params.audit {
            let audit = &mut self.stats.audit;
            audit.max_maintenance_error = audit.max_maintenance_error.max(err);
            audit.maintenance_checks += 1;
        }
    }

    fn record_premises(
        &mut self,
        x0: &[Vec<f64>],
        s0: &[Vec<f64>],
        x1: &[Vec<f64>],
        s1: &[Vec<f64>],
        mu: f64,
    ) {
        let audit = &mut self.stats.audit;
        audit.premise_checks += 1;
        if check_premises((x0, s0), (x1, s1), mu).is_err() {
            audit.premise_violations += 1;
        }
    }
}

/// `w = D_Σ⁻¹ Σ_j S̄_j⁻¹ g_j` and `z_j = S̄_j⁻¹ g_j - D_j w` for every edge.
fn vector_terms(
    cs: &CenteringState,
    weights: &BlockWeights,
    k: usize,
    m: usize,
) -> (Vec<f64>, Vec<Vec<f64>>) {
    let mut w = vec![0.0; m];
    let mut z = vec![vec![0.0; m]; k + 1];
    for e in 0..m {
        let (w_e, z_e) = edge_terms(cs, &weights.edge(e), e, m);
        w[e] = w_e;
        for (zj, v) in z.iter_mut().zip(z_e) {
            zj[e] = v;
        }
    }
    (w, z)
}

fn edge_terms(cs: &CenteringState, d_e: &[f64], e: usize, m: usize) -> (f64, Vec<f64>) {
    let sigma: f64 = d_e.iter().sum();
    let q: Vec<f64> = (0..d_e.len())
        .map(|j| cs.g[j * m + e] / cs.sbar[j * m + e])
        .collect();
    let w = q.iter().sum::<f64>() / sigma;
    let z = q.iter().zip(d_e).map(|(q, d)| q - d * w).collect();
    (w, z)
}
