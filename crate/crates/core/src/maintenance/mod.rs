//! Data structures that keep entrywise approximations of the IPM iterates
//! under implicit low-rank step updates, with operation counters.

pub mod heavy_hitter;
pub mod norms;
pub mod prefix;
pub mod primal_dual;
pub mod stabilizer;
pub mod vector;

use serde::Serialize;
use thiserror::Error;

pub use heavy_hitter::{ExactScanHH, HeavyHitter, HeavyHitterCounters};
pub use norms::{check_norm_lemma, check_scaled_norm_lemma, NormCheck, ScaledNormCheck};
pub use prefix::{PrefixCounters, SumOfProduct, SumOfVector};
pub use primal_dual::{PdmCounters, PdmOptions, PrimalDualMaintenance};
pub use stabilizer::{change_growth_slope, max_changes_per_window, Stabilizer, StabilizerCounters};
pub use vector::{VectorCounters, VectorMaintenance};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MaintenanceError {
    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("expected dimension {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("batch of {limit} additions exhausted; rebuild required")]
    BatchExhausted { limit: usize },
    #[error("accuracy at index {index} must be positive")]
    NonPositiveAccuracy { index: usize },
    #[error("weight at index {index} must be positive")]
    NonPositiveWeight { index: usize },
    #[error("premise violated: {what} = {value} exceeds {bound}")]
    PremiseViolated {
        what: &'static str,
        value: f64,
        bound: f64,
    },
}

/// Adds every counter of `other` into `self`.
pub trait Tally {
    fn absorb(&mut self, other: &Self);
}

macro_rules! impl_tally {
    ($t:ty { $($f:ident),* }) => {
        impl Tally for $t {
            fn absorb(&mut self, other: &Self) {
                $(self.$f += other.$f;)*
            }
        }
    };
}

impl_tally!(PrefixCounters { adds, updates, queries });
impl_tally!(HeavyHitterCounters { queries, rows_scanned, indices_returned, scale_updates });
impl_tally!(VectorCounters {
    adds, weight_updates, level_checks, detected, recomputed, output_changes, rows_scanned
});
impl_tally!(StabilizerCounters { steps, input_entries, level_checks, rewrites, refreshes });
impl_tally!(PdmCounters {
    initializations, adds, updates, s_rewrites, x_rewrites, accuracy_updates, weight_propagations
});
impl_tally!(crate::linalg::SchurCounters {
    solves, temp_updates, permanent_updates, dense_rebuilds, forced_rebuilds, refinement_steps,
    updated_edges
});

/// Counters of the whole maintenance stack, nested per structure.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CostCounters {
    pub sum_of_product: PrefixCounters,
    pub heavy_hitter: HeavyHitterCounters,
    pub vector: VectorCounters,
    pub stabilizer: StabilizerCounters,
    pub primal_dual: PdmCounters,
    pub schur: crate::linalg::SchurCounters,
    /// Largest number of `x̄`/`s̄` changes over any aligned window of `2^i` adds, per level `i`.
    pub changes_per_window: Vec<usize>,
}

impl CostCounters {
    pub fn absorb_pdm(&mut self, pdm: &PrimalDualMaintenance) {
        let c = pdm.component_counters();
        self.sum_of_product.absorb(&c.0);
        self.heavy_hitter.absorb(&c.1);
        self.vector.absorb(&c.2);
        self.stabilizer.absorb(&c.3);
        self.primal_dual.absorb(pdm.counters());
    }

    /// Recomputes `changes_per_window` from the per-add change history.
    pub fn set_change_history(&mut self, changes: &[usize]) {
        let mut levels = Vec::new();
        let mut level = 0;
        while (1usize << level) <= changes.len() {
            levels.push(max_changes_per_window(changes, level));
            level += 1;
        }
        self.changes_per_window = levels;
    }
}
