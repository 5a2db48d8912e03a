//! Robust central-path method driven by the potential
//! `Φ(v) = Σ_i cosh(λ (v_i - 1))` on `v = x s / t`.

mod path;
mod step;

use serde::Serialize;
use thiserror::Error;

use crate::linalg::LinalgError;
use crate::maintenance::MaintenanceError;

pub use path::{run_path, PathAudit, PathOutcome, RunStats};
pub use step::{
    newton_step, recenter, refresh, step_commodity, step_generic, CenteringState, CommodityStep,
    Step,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IpmError {
    #[error("potential overflows at coordinate {index}")]
    Overflow { index: usize },
    #[error("gradient vanished; the point is exactly centered")]
    ZeroGradient,
    #[error("iteration cap of {cap} reached at t = {t:e}")]
    IterationCapExceeded { cap: usize, t: f64 },
    #[error("centering lost at t = {t:e}: centrality {centrality:e}")]
    CenteringLost { t: f64, centrality: f64 },
    #[error("start point is not centered: potential {potential:e} exceeds {bound:e}")]
    NotCentered { potential: f64, bound: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Maintenance(#[from] MaintenanceError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// `t` decreases.
    Forward,
    /// `t` increases.
    Reverse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Strict,
    Practical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Direct,
    Maintained,
}

/// Step scale used by practical mode when none is given.
pub const DEFAULT_STEP_SCALE: f64 = 256.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IpmParameters {
    pub lambda: f64,
    pub h: f64,
    pub direction: Direction,
    pub mode: Mode,
    /// Largest multiplier of `h` and of the step length; `1` in strict mode.
    pub step_scale: f64,
    pub max_iterations: usize,
    /// Accuracy of `x̄`, `s̄` in the maintained engine.
    pub eps_approx: f64,
    /// Route maintained outputs through the stabilizer.
    pub stabilize: bool,
    /// Evaluate the per-iteration invariant checks.
    pub audit: bool,
}

impl IpmParameters {
    /// `λ = 16 ln(40 √N)`, `h = 1/(128 λ √N)` for `N = (k+1) m`.
    pub fn strict(k: usize, m: usize, direction: Direction) -> Self {
        let n = ((k + 1) * m) as f64;
        let lambda = 16.0 * (40.0 * n.sqrt()).ln();
        IpmParameters {
            lambda,
            h: 1.0 / (128.0 * lambda * n.sqrt()),
            direction,
            mode: Mode::Strict,
            step_scale: 1.0,
            max_iterations: usize::MAX,
            eps_approx: 1.0 / (500.0 * lambda),
            stabilize: false,
            audit: false,
        }
    }

    pub fn practical(k: usize, m: usize, direction: Direction, step_scale: f64) -> Self {
        IpmParameters {
            mode: Mode::Practical,
            step_scale: step_scale.max(1.0),
            ..Self::strict(k, m, direction)
        }
    }

    pub fn with_max_iterations(mut self, cap: usize) -> Self {
        self.max_iterations = cap;
        self
    }

    pub fn with_audit(mut self, audit: bool) -> Self {
        self.audit = audit;
        self
    }

    pub fn with_stabilizer(mut self, stabilize: bool) -> Self {
        self.stabilize = stabilize;
        self
    }

    pub fn with_direction(mut self, direction: Direction) -> Self {
        self.direction = direction;
        self
    }

    /// Next path parameter for the effective step `h_eff`, clamped at `target`.
    pub fn next_t(&self, t: f64, target: f64, h_eff: f64) -> f64 {
        match self.direction {
            Direction::Forward => (t / (1.0 + h_eff)).max(target),
            Direction::Reverse => (t * (1.0 + h_eff)).min(target),
        }
    }
}

/// `Σ_i cosh(λ (v_i - 1))`.
pub fn potential(v: &[f64], lambda: f64) -> Result<f64, IpmError> {
    let mut acc = 0.0;
    for (index, &vi) in v.iter().enumerate() {
        let a = lambda * (vi - 1.0);
        if !(a.abs() <= 300.0) {
            return Err(IpmError::Overflow { index });
        }
        acc += a.cosh();
    }
    Ok(acc)
}

/// `∇Φ(v)_i = λ sinh(λ (v_i - 1))`.
pub fn potential_gradient(v: &[f64], lambda: f64) -> Result<Vec<f64>, IpmError> {
    v.iter()
        .enumerate()
        .map(|(index, &vi)| {
            let a = lambda * (vi - 1.0);
            if !(a.abs() <= 300.0) {
                return Err(IpmError::Overflow { index });
            }
            Ok(lambda * a.sinh())
        })
        .collect()
}

/// `‖x s / t - 1‖∞`.
pub fn centrality(x: &[f64], s: &[f64], t: f64) -> f64 {
    x.iter()
        .zip(s)
        .fold(0.0, |acc, (x, s)| acc.max((x * s / t - 1.0).abs()))
}
