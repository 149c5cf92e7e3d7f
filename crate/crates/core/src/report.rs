//! Scenario result bundles and the interpretation-bookkeeping ledger.

use crate::observer::MeasurementRecord;
use crate::state::StateVector;
use crate::stats::FrequencyTable;
use serde::{Deserialize, Serialize};

/// The four interpretations compared by the ledger.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Interpretation {
    CI,
    MWI,
    BHSI,
    BM,
}

/// Computed bookkeeping for one interpretation over one measurement cycle
/// of a scenario (one qubit measurement, one photon pair, one screen hit).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub interpretation: Interpretation,
    /// Wavefunction collapses per cycle (CI only).
    pub collapses: u64,
    /// Worlds (MWI) or local branches (BHSI) created per cycle.
    pub branches: u64,
    /// Observer copies residing inside branches/worlds.
    pub observer_copies: u64,
    /// Real observers in the scenario's ontology.
    pub observers: u64,
    /// Hilbert dimension of the environment the interpretation touches.
    pub environment_dimension: u64,
    pub unitary: bool,
    pub information_preserved: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// A named scalar statistic in a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Statistic {
    pub name: String,
    pub value: f64,
}

/// One ket amplitude of a stage trace, with its basis label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeEntry {
    pub label: String,
    pub re: f64,
    pub im: f64,
}

/// The three observer stages of a measurement, rendered for small spaces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTrace {
    pub before: Vec<AmplitudeEntry>,
    pub engaged: Vec<AmplitudeEntry>,
    pub after: Vec<AmplitudeEntry>,
}

/// Render a state's nonzero amplitudes with per-subsystem index labels.
pub fn amplitude_entries(state: &StateVector) -> Vec<AmplitudeEntry> {
    let space = state.space();
    state
        .amplitudes()
        .iter()
        .enumerate()
        .filter(|(_, a)| a.norm_sqr() > 1e-20)
        .map(|(flat, a)| {
            let idx = space.unflatten(flat);
            let label = space
                .subsystems()
                .iter()
                .zip(&idx)
                .map(|(s, i)| format!("{}:{}", s.id, i))
                .collect::<Vec<_>>()
                .join(" ");
            AmplitudeEntry { label, re: a.re, im: a.im }
        })
        .collect()
}

/// A named frequency table (scenarios may carry several, e.g. one per
/// analyzer setting).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedFrequencyTable {
    pub name: String,
    pub table: FrequencyTable,
}

/// Scenario-specific configuration echoed into the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScenarioConfig {
    Single { trials: u64 },
    Qubit { a0_re: f64, a0_im: f64, a1_re: f64, a1_im: f64, trials: u64 },
    DoubleSlit(crate::scenarios::DoubleSlitConfig),
    Bell { a: f64, a_prime: f64, b: f64, b_prime: f64, trials_per_setting: u64 },
    Wigner { trials: u64 },
    Eraser { erase: bool, config: crate::scenarios::DoubleSlitConfig },
    Relocation { dimension: usize },
}

/// Per-scenario result bundle: empirical frequencies, derived statistics,
/// ledger rows and provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub schema: String,
    pub scenario: String,
    pub seed: u64,
    pub config: ScenarioConfig,
    pub frequencies: Vec<NamedFrequencyTable>,
    pub statistics: Vec<Statistic>,
    pub ledger: Vec<LedgerRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stage_trace: Option<StageTrace>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub records: Option<Vec<MeasurementRecord>>,
}

pub const REPORT_SCHEMA: &str = "bhsi-report/1";

impl ScenarioReport {
    pub fn new(scenario: &str, seed: u64, config: ScenarioConfig) -> Self {
        ScenarioReport {
            schema: REPORT_SCHEMA.to_string(),
            scenario: scenario.to_string(),
            seed,
            config,
            frequencies: Vec::new(),
            statistics: Vec::new(),
            ledger: Vec::new(),
            stage_trace: None,
            records: None,
        }
    }

    pub fn statistic(&self, name: &str) -> Option<f64> {
        self.statistics.iter().find(|s| s.name == name).map(|s| s.value)
    }

    pub fn push_statistic(&mut self, name: &str, value: f64) {
        self.statistics.push(Statistic { name: name.to_string(), value });
    }

    pub fn ledger_row(&self, interpretation: Interpretation) -> Option<&LedgerRow> {
        self.ledger.iter().find(|r| r.interpretation == interpretation)
    }

    /// Drop the raw records (CLI default unless explicitly requested).
    pub fn without_records(mut self) -> Self {
        self.records = None;
        self
    }
}
