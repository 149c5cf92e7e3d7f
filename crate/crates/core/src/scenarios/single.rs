//! The one-outcome measurement: a single branch, probability one, no
//! entropy anywhere.

use super::{ledger_rows, CycleShape};
use crate::branching::{branch, make_branching_operator};
use crate::environment::make_environment;
use crate::error::{Error, Result};
use crate::observer::{run_trials, ObserverState};
use crate::report::{amplitude_entries, NamedFrequencyTable, ScenarioConfig, ScenarioReport, StageTrace};
use crate::space::{BasisLabel, Role, SpaceDescription};
use crate::state::StateVector;
use crate::stats::entropy_ledger;
use num_complex::Complex64;

pub(super) fn cycle_shape() -> CycleShape {
    CycleShape {
        event_outcomes: vec![1],
        ci_collapses: 1,
        observers: 1,
        local_env_dims: vec![2],
        joint_dim: (1 * 2 * 2) as u64,
        mwi_note: None,
        bhsi_note: None,
    }
}

pub fn scenario_single_outcome(trials: u64, seed: u64) -> Result<ScenarioReport> {
    if trials < 1 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    let env = make_environment(1, 1, 0.0)?;
    let b = make_branching_operator(BasisLabel::g_basis("sys", 1), env, "sys", "env")?;

    let prepare = {
        let b = b.clone();
        move |_t: u64| {
            let sys = StateVector::basis_state(
                SpaceDescription::single("sys", 1, Role::System),
                &[0],
            )?;
            let obs = ObserverState::ready("obs", 1);
            sys.tensor(obs.register())?.tensor(&b.environment().ready_state("env"))
        }
    };
    let run = run_trials(prepare, &b, trials, seed)?;

    let sample = prepare_state(&b)?;
    let branched = branch(&sample, &b)?;
    let (s_local, s_global) = entropy_ledger(branched.joint(), &branched.weights())?;

    let mut report = ScenarioReport::new("single", seed, ScenarioConfig::Single { trials });
    report.frequencies.push(NamedFrequencyTable { name: "outcomes".into(), table: run.table });
    report.push_statistic("entropy_local_nats", s_local);
    report.push_statistic("entropy_global_nats", s_global);
    report.push_statistic("branch_count", branched.branches().len() as f64);
    report.ledger = ledger_rows(&cycle_shape());
    report.stage_trace = run.first_stages.map(|s| StageTrace {
        before: amplitude_entries(&s.before),
        engaged: amplitude_entries(&s.engaged),
        after: amplitude_entries(&s.after),
    });
    report.records = Some(run.records);
    Ok(report)
}

fn prepare_state(b: &crate::branching::BranchingOperator) -> Result<StateVector> {
    let sys = StateVector::new(
        SpaceDescription::single("sys", 1, Role::System),
        vec![Complex64::ONE],
    )?;
    let obs = ObserverState::ready("obs", 1);
    sys.tensor(obs.register())?.tensor(&b.environment().ready_state("env"))
}
