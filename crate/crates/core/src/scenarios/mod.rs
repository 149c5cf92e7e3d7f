//! End-to-end measurement scenarios and the interpretation ledger.
//!
//! Every scenario is a deterministic function of (configuration, seed) and
//! returns a [`ScenarioReport`] whose statistics are recomputable from the
//! records it carries.

mod bell;
mod double_slit;
mod eraser;
mod qubit;
mod relocation;
mod single;
mod wigner;

pub use bell::scenario_bell;
pub use double_slit::{scenario_double_slit, target_distribution, DoubleSlitConfig};
pub use eraser::scenario_eraser;
pub use qubit::scenario_qubit;
pub use relocation::scenario_relocation;
pub use single::scenario_single_outcome;
pub use wigner::scenario_wigners_friend;

use crate::error::{Error, Result};
use crate::report::{Interpretation, LedgerRow};

/// Structural description of one measurement cycle, from which the
/// per-interpretation bookkeeping follows.
#[derive(Debug, Clone)]
pub struct CycleShape {
    /// Branch factor of each branching event in the cycle (e.g. a Bell pair
    /// has two 2-outcome events).
    pub event_outcomes: Vec<u64>,
    /// Collapse events the Copenhagen reading needs for the same cycle.
    pub ci_collapses: u64,
    /// Real observers participating.
    pub observers: u64,
    /// Local environment dimension per observer-facing pointer register.
    pub local_env_dims: Vec<u64>,
    /// Total joint dimension touched by the simulation.
    pub joint_dim: u64,
    /// Extra context on the MWI world count, when the naive count differs.
    pub mwi_note: Option<String>,
    /// Extra context on the BHSI branch count.
    pub bhsi_note: Option<String>,
}

impl CycleShape {
    fn branch_product(&self) -> u64 {
        self.event_outcomes.iter().product()
    }
}

/// Computed ledger rows for one measurement cycle.
pub fn ledger_rows(shape: &CycleShape) -> Vec<LedgerRow> {
    let branches = shape.branch_product();
    let local_env: u64 = shape.local_env_dims.iter().product::<u64>().max(1);
    vec![
        LedgerRow {
            interpretation: Interpretation::CI,
            collapses: shape.ci_collapses,
            branches: 1,
            observer_copies: 0,
            observers: shape.observers,
            environment_dimension: 0,
            unitary: false,
            information_preserved: false,
            note: None,
        },
        LedgerRow {
            interpretation: Interpretation::MWI,
            collapses: 0,
            branches,
            observer_copies: branches * shape.observers,
            observers: shape.observers,
            environment_dimension: shape.joint_dim,
            unitary: true,
            information_preserved: true,
            note: shape.mwi_note.clone(),
        },
        LedgerRow {
            interpretation: Interpretation::BHSI,
            collapses: 0,
            branches,
            observer_copies: 0,
            observers: shape.observers,
            environment_dimension: local_env,
            unitary: true,
            information_preserved: true,
            note: shape.bhsi_note.clone(),
        },
        LedgerRow {
            interpretation: Interpretation::BM,
            collapses: 0,
            branches: 1,
            observer_copies: 0,
            observers: shape.observers,
            environment_dimension: 0,
            unitary: true,
            information_preserved: true,
            note: Some("static comparison row; pilot-wave trajectories not simulated".into()),
        },
    ]
}

/// Ledger rows for a named scenario's measurement cycle.
pub fn interpretation_ledger(scenario: &str) -> Result<Vec<LedgerRow>> {
    let shape = match scenario {
        "single" => single::cycle_shape(),
        "qubit" => qubit::cycle_shape(),
        "double-slit" => double_slit::cycle_shape(&DoubleSlitConfig::default()),
        "bell" => bell::cycle_shape(),
        "wigner" => wigner::cycle_shape(),
        "eraser" => eraser::cycle_shape(&DoubleSlitConfig::default()),
        other => {
            return Err(Error::Config(format!(
                "no ledger for scenario `{other}` (relocation has no measurement cycle)"
            )))
        }
    };
    Ok(ledger_rows(&shape))
}
