//! Observer pipeline: Born-rule sampling, engagement with a sampled branch,
//! record flip, and disengagement back to the ready state.
//!
//! The observer register has D+1 levels: level 0 is `ready`, level k+1 is
//! `reads k`. All three pipeline stages are unitaries on the joint space:
//!
//! * engage    = I⊗Q + F⊗P   (flip the register where the environment sits
//!   on the engaged pointer's frame vector)
//! * record    = F⊗I         (unconditional ready↔reads-β transposition)
//! * disengage = I⊗P + F⊗Q   (undo the residual correlation)
//!
//! with P the projector on the engaged pointer's orthonormal frame vector, Q
//! its complement and F the register transposition. Their product is the
//! identity, which is exactly why measurement leaves the branched state
//! undisturbed and the composed measurement operator stays unitary.

use crate::branching::{branch, BranchedState, BranchingOperator};
use crate::environment::EnvironmentModel;
use crate::error::{Error, Result};
use crate::operator::apply_on;
use crate::space::{Role, SpaceDescription};
use crate::state::StateVector;
use crate::stats::FrequencyTable;
use crate::tolerance;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Observer mode: ready, or reading outcome β.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObserverMode {
    Ready,
    Reads(usize),
}

/// The observer's register state.
#[derive(Debug, Clone, PartialEq)]
pub struct ObserverState {
    mode: ObserverMode,
    register: StateVector,
}

impl ObserverState {
    pub fn ready(id: &str, outcomes: usize) -> Self {
        let space = SpaceDescription::single(id, outcomes + 1, Role::Observer);
        ObserverState {
            mode: ObserverMode::Ready,
            register: StateVector::basis_state(space, &[0]).expect("level 0 exists"),
        }
    }

    pub fn reads(id: &str, outcomes: usize, beta: usize) -> Result<Self> {
        if beta >= outcomes {
            return Err(Error::Argument(format!("outcome {beta} out of range")));
        }
        let space = SpaceDescription::single(id, outcomes + 1, Role::Observer);
        Ok(ObserverState {
            mode: ObserverMode::Reads(beta),
            register: StateVector::basis_state(space, &[beta + 1])?,
        })
    }

    pub fn mode(&self) -> ObserverMode {
        self.mode
    }

    pub fn register(&self) -> &StateVector {
        &self.register
    }
}

/// One sampled measurement outcome with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub outcome: usize,
    /// Branch weight |c_β|² at the moment of sampling.
    pub weight: f64,
    pub trial: u64,
    pub seed: u64,
    pub ordering_key: u64,
}

/// Branched state with the observer engaged on one branch.
#[derive(Debug, Clone)]
pub struct EngagedState {
    branched: BranchedState,
    joint: StateVector,
    observer_id: String,
    outcome: usize,
}

impl EngagedState {
    pub fn joint(&self) -> &StateVector {
        &self.joint
    }

    pub fn outcome(&self) -> usize {
        self.outcome
    }

    pub fn branched(&self) -> &BranchedState {
        &self.branched
    }

    pub fn observer_id(&self) -> &str {
        &self.observer_id
    }

    pub fn observer_state(&self) -> ObserverState {
        ObserverState::reads(&self.observer_id, self.branched.environment().outcome_count(), self.outcome)
            .expect("engaged outcome is in range")
    }
}

/// Transposition of register levels 0 and β+1 on a (D+1)-level register.
pub fn record_flip_matrix(outcomes: usize, beta: usize) -> DMatrix<Complex64> {
    let dim = outcomes + 1;
    let mut m = DMatrix::from_element(dim, dim, Complex64::ZERO);
    for i in 0..dim {
        m[(i, i)] = Complex64::ONE;
    }
    m[(0, 0)] = Complex64::ZERO;
    m[(beta + 1, beta + 1)] = Complex64::ZERO;
    m[(0, beta + 1)] = Complex64::ONE;
    m[(beta + 1, 0)] = Complex64::ONE;
    m
}

fn frame_projector(env: &EnvironmentModel, beta: usize) -> DMatrix<Complex64> {
    let f = env.frame_vector(beta);
    let dim = env.dim();
    DMatrix::from_fn(dim, dim, |i, j| f[i] * f[j].conj())
}

/// Engagement unitary over [observer, environment] (observer index major).
pub fn engage_matrix(env: &EnvironmentModel, beta: usize) -> DMatrix<Complex64> {
    let d = env.outcome_count();
    let p = frame_projector(env, beta);
    let q = DMatrix::identity(env.dim(), env.dim()) - &p;
    let f = record_flip_matrix(d, beta);
    let i_obs = DMatrix::identity(d + 1, d + 1);
    i_obs.kronecker(&q) + f.kronecker(&p)
}

/// Decorrelation unitary over [observer, environment]: the complement flip.
pub fn disengage_matrix(env: &EnvironmentModel, beta: usize) -> DMatrix<Complex64> {
    let d = env.outcome_count();
    let p = frame_projector(env, beta);
    let q = DMatrix::identity(env.dim(), env.dim()) - &p;
    let f = record_flip_matrix(d, beta);
    let i_obs = DMatrix::identity(d + 1, d + 1);
    i_obs.kronecker(&p) + f.kronecker(&q)
}

/// Draw an index from a weight vector by inverse CDF.
pub fn sample_index<R: Rng>(weights: &[f64], rng: &mut R) -> Result<usize> {
    if weights.is_empty() {
        return Err(Error::State("cannot sample from an empty weight list".into()));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > tolerance::STRUCTURAL {
        return Err(Error::Precondition(format!("weights sum to {total}, expected 1")));
    }
    let u: f64 = rng.random::<f64>();
    let mut cum = 0.0;
    for (i, w) in weights.iter().enumerate() {
        cum += w;
        if u < cum {
            return Ok(i);
        }
    }
    Ok(weights.len() - 1)
}

/// Sample a branch outcome with probability equal to its weight.
pub fn sample_branch<R: Rng>(bs: &BranchedState, rng: &mut R) -> Result<usize> {
    let weights = bs.weights();
    let idx = sample_index(&weights, rng)?;
    Ok(bs.branches()[idx].outcome)
}

fn single_observer_id(bs: &BranchedState) -> Result<String> {
    let observers: Vec<&str> = bs
        .joint()
        .space()
        .subsystems()
        .iter()
        .filter(|s| s.role == Role::Observer)
        .map(|s| s.id.as_str())
        .collect();
    match observers.as_slice() {
        [one] => Ok(one.to_string()),
        [] => Err(Error::Argument("no observer register in the branched state".into())),
        _ => Err(Error::Argument(
            "multiple observer registers; use engage_with to pick one".into(),
        )),
    }
}

/// Engage the (single) observer register with branch β.
pub fn engage(bs: &BranchedState, beta: usize) -> Result<EngagedState> {
    let obs_id = single_observer_id(bs)?;
    engage_with(bs, beta, &obs_id)
}

/// Engage a named observer register with branch β.
pub fn engage_with(bs: &BranchedState, beta: usize, observer_id: &str) -> Result<EngagedState> {
    if bs.branch_for(beta).is_none() {
        return Err(Error::Argument(format!("outcome {beta} is not a live branch")));
    }
    let obs_dim = bs.joint().space().dim_of(observer_id)?;
    if obs_dim != bs.environment().outcome_count() + 1 {
        return Err(Error::Composition(format!(
            "observer register `{observer_id}` has dim {obs_dim}, expected {}",
            bs.environment().outcome_count() + 1
        )));
    }
    let m = engage_matrix(bs.environment(), beta);
    let joint = apply_on(&m, bs.joint(), &[observer_id, bs.env_id()])?;
    Ok(EngagedState {
        branched: bs.clone(),
        joint,
        observer_id: observer_id.to_string(),
        outcome: beta,
    })
}

/// Disengage: record flip then decorrelation, restoring branched ⊗ ready.
pub fn disengage(es: &EngagedState) -> Result<(BranchedState, ObserverState)> {
    let env = es.branched.environment().clone();
    let beta = es.outcome;
    let obs_id = es.observer_id.clone();
    let env_id = es.branched.env_id().to_string();

    let t = record_flip_matrix(env.outcome_count(), beta);
    let after_flip = apply_on(&t, &es.joint, &[obs_id.as_str()])?;
    let g = disengage_matrix(&env, beta);
    let restored = apply_on(&g, &after_flip, &[obs_id.as_str(), env_id.as_str()])?;

    let branched = es.branched.with_joint(restored);
    let observer = ObserverState::ready(&obs_id, env.outcome_count());
    Ok((branched, observer))
}

/// The three stages an observer passes through during one measurement.
#[derive(Debug, Clone)]
pub struct StageStates {
    pub before: StateVector,
    pub engaged: StateVector,
    pub after: StateVector,
}

/// Everything one measurement produces.
#[derive(Debug, Clone)]
pub struct Measurement {
    pub record: MeasurementRecord,
    pub branched: BranchedState,
    pub observer: ObserverState,
    pub stages: StageStates,
}

/// Full measurement pipeline: branch, sample, engage, record, disengage.
///
/// `s` must be a pre-measurement product (system arbitrary, observer and
/// environment ready).
pub fn measure<R: Rng>(s: &StateVector, b: &BranchingOperator, rng: &mut R) -> Result<Measurement> {
    let bs = branch(s, b)?;
    let beta = sample_branch(&bs, rng)?;
    let weight = bs.branch_for(beta).expect("sampled branch is live").weight;
    let es = engage(&bs, beta)?;
    let engaged_joint = es.joint().clone();
    let (branched, observer) = disengage(&es)?;
    let record = MeasurementRecord { outcome: beta, weight, trial: 0, seed: 0, ordering_key: 0 };
    let after = branched.joint().clone();
    Ok(Measurement {
        record,
        branched,
        observer,
        stages: StageStates { before: s.clone(), engaged: engaged_joint, after },
    })
}

/// Deterministic per-trial generator: one ChaCha stream per trial index, so
/// trials can run in any order (or in parallel) with identical results.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial + 1);
    rng
}

/// RNG for scenario-level draws that are not tied to a trial.
pub fn scenario_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);
    rng
}

/// Result of a repeated-trial run.
#[derive(Debug, Clone)]
pub struct TrialRun {
    pub table: FrequencyTable,
    pub records: Vec<MeasurementRecord>,
    /// The stage trace of trial 0, for inspection.
    pub first_stages: Option<StageStates>,
}

/// Run `n` independent measurements on freshly prepared states.
pub fn run_trials<F>(
    prepare: F,
    b: &BranchingOperator,
    n: u64,
    seed: u64,
) -> Result<TrialRun>
where
    F: Fn(u64) -> Result<StateVector>,
{
    if n < 1 {
        return Err(Error::Argument("trial count must be at least 1".into()));
    }
    let mut records = Vec::with_capacity(n as usize);
    let mut first_stages = None;
    for trial in 0..n {
        let s = prepare(trial)?;
        let mut rng = trial_rng(seed, trial);
        let mut m = measure(&s, b, &mut rng)?;
        m.record.trial = trial;
        m.record.seed = seed;
        m.record.ordering_key = trial;
        if trial == 0 {
            first_stages = Some(m.stages);
        }
        records.push(m.record);
    }
    let table = FrequencyTable::from_outcomes(
        records.iter().map(|r| r.outcome),
        b.outcome_count(),
    );
    Ok(TrialRun { table, records, first_stages })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::branching::make_branching_operator;
    use crate::environment::make_environment;
    use crate::operator::{check_unitary, embed};
    use crate::space::BasisLabel;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn operator(d: usize, m: usize, eps: f64) -> BranchingOperator {
        let env = make_environment(d, m, eps).unwrap();
        make_branching_operator(BasisLabel::g_basis("sys", d), env, "sys", "env").unwrap()
    }

    /// system ⊗ ready-observer ⊗ ready-environment
    fn pre_measurement(b: &BranchingOperator, amps: Vec<Complex64>) -> StateVector {
        let sys = StateVector::normalized(
            SpaceDescription::single("sys", b.outcome_count(), Role::System),
            amps,
        )
        .unwrap();
        let obs = ObserverState::ready("obs", b.outcome_count());
        sys.tensor(obs.register())
            .unwrap()
            .tensor(&b.environment().ready_state("env"))
            .unwrap()
    }

    #[test]
    fn single_branch_always_sampled() {
        let b = operator(1, 1, 0.0);
        let s = pre_measurement(&b, vec![Complex64::ONE]);
        let bs = branch(&s, &b).unwrap();
        let mut rng = trial_rng(7, 0);
        for _ in 0..100 {
            assert_eq!(sample_branch(&bs, &mut rng).unwrap(), 0);
        }
    }

    #[test]
    fn sampling_respects_binomial_statistics() {
        // weights {0.36, 0.64}, 1e5 seeded trials, 3 sigma band
        let n = 100_000u64;
        let weights = [0.36, 0.64];
        let mut hits = 0u64;
        for trial in 0..n {
            let mut rng = trial_rng(42, trial);
            if sample_index(&weights, &mut rng).unwrap() == 1 {
                hits += 1;
            }
        }
        let freq = hits as f64 / n as f64;
        let sigma = (0.64 * 0.36 / n as f64).sqrt();
        assert!(
            (freq - 0.64).abs() < 3.0 * sigma,
            "frequency {freq} outside 3 sigma of 0.64"
        );
    }

    #[test]
    fn sampling_passes_chi_square_over_four_cells() {
        let n = 100_000u64;
        let weights = [0.25; 4];
        let mut counts = [0u64; 4];
        for trial in 0..n {
            let mut rng = trial_rng(1234, trial);
            counts[sample_index(&weights, &mut rng).unwrap()] += 1;
        }
        // chi-square oracle, 3 dof; 99th percentile = 11.345
        let expected = n as f64 / 4.0;
        let chi2: f64 =
            counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        assert!(chi2 < 11.345, "chi-square {chi2} above the 99th percentile");
    }

    #[test]
    fn engage_correlates_only_the_sampled_branch() {
        // D=2, beta=1: joint becomes a0|0>|ready>|E0> + a1|1>|reads 1>|E1>
        let b = operator(2, 1, 0.0);
        let (a0, a1) = (c(0.6, 0.0), c(0.8, 0.0));
        let s = pre_measurement(&b, vec![a0, a1]);
        let bs = branch(&s, &b).unwrap();
        let es = engage(&bs, 1).unwrap();
        let space = es.joint().space();
        let amp_branch0 =
            es.joint().amplitudes()[space.flat_index(&[0, 0, 0]).unwrap()];
        let amp_branch1 =
            es.joint().amplitudes()[space.flat_index(&[1, 2, 1]).unwrap()];
        assert!((amp_branch0 - a0).norm() < 1e-12, "branch 0 keeps a ready observer");
        assert!((amp_branch1 - a1).norm() < 1e-12, "branch 1 carries reads-1");
        // weights untouched
        for (w_before, w_after) in bs
            .weights()
            .iter()
            .zip(es.branched().weights())
        {
            assert!((w_before - w_after).abs() < 1e-12);
        }
    }

    #[test]
    fn engagement_operators_are_unitary() {
        for d in 1..=4usize {
            let env = make_environment(d, 2, 0.0).unwrap();
            let space = SpaceDescription::new(vec![
                crate::space::Subsystem::new("obs", d + 1, Role::Observer),
                crate::space::Subsystem::new("env", env.dim(), Role::LocalEnvironment),
            ])
            .unwrap();
            for beta in 0..d {
                let lam = embed(&engage_matrix(&env, beta), &space, &["obs", "env"]).unwrap();
                assert!(check_unitary(&lam, tolerance::STRUCTURAL));
                let gam = embed(&disengage_matrix(&env, beta), &space, &["obs", "env"]).unwrap();
                assert!(check_unitary(&gam, tolerance::STRUCTURAL));
            }
        }
    }

    #[test]
    fn engage_rejects_dead_branch() {
        let b = operator(2, 1, 0.0);
        let s = pre_measurement(&b, vec![Complex64::ONE, Complex64::ZERO]);
        let bs = branch(&s, &b).unwrap();
        assert!(matches!(engage(&bs, 1), Err(Error::Argument(_))));
    }

    #[test]
    fn disengage_restores_branched_times_ready() {
        for &eps in &[0.0, 0.4] {
            let b = operator(2, 1, eps);
            let s = pre_measurement(&b, vec![c(0.48, 0.36), c(-0.6, 0.52)]);
            let bs = branch(&s, &b).unwrap();
            for beta in 0..2 {
                let es = engage(&bs, beta).unwrap();
                let (restored, obs) = disengage(&es).unwrap();
                assert_eq!(obs.mode(), ObserverMode::Ready);
                assert!(
                    restored.joint().max_deviation(bs.joint()).unwrap() < 1e-12,
                    "engage/disengage must restore the branched state exactly (eps={eps})"
                );
            }
        }
    }

    #[test]
    fn full_egd_pipeline_is_identity() {
        // matrix of disengage . record-flip . engage == I
        let env = make_environment(2, 1, 0.3).unwrap();
        let space = SpaceDescription::new(vec![
            crate::space::Subsystem::new("obs", 3, Role::Observer),
            crate::space::Subsystem::new("env", 2, Role::LocalEnvironment),
        ])
        .unwrap();
        for beta in 0..2 {
            let lam = embed(&engage_matrix(&env, beta), &space, &["obs", "env"]).unwrap();
            let t = embed(&record_flip_matrix(2, beta), &space, &["obs"]).unwrap();
            let gam = embed(&disengage_matrix(&env, beta), &space, &["obs", "env"]).unwrap();
            let product = gam.compose(&t).unwrap().compose(&lam).unwrap();
            let id = nalgebra::DMatrix::<Complex64>::identity(6, 6);
            let dev =
                (product.matrix() - id).iter().map(|a| a.norm()).fold(0.0, f64::max);
            assert!(dev < 1e-10, "EGD pipeline deviates from identity by {dev}");
        }
    }

    #[test]
    fn measure_exposes_three_stages() {
        let b = operator(2, 1, 0.0);
        let (a0, a1) = (c(0.6, 0.0), c(0.8, 0.0));
        let s = pre_measurement(&b, vec![a0, a1]);
        let mut rng = trial_rng(5, 0);
        let m = measure(&s, &b, &mut rng).unwrap();
        // before: the input product state
        assert!(m.stages.before.max_deviation(&s).unwrap() < 1e-15);
        // after: branched state with a ready observer; weights preserved
        let bs = branch(&s, &b).unwrap();
        assert!(m.stages.after.max_deviation(bs.joint()).unwrap() < 1e-12);
        assert!((m.record.weight - bs.branch_for(m.record.outcome).unwrap().weight).abs() < 1e-12);
        // engaged stage differs from both ends on the reads level
        let obs_marginal = m.stages.engaged.marginal_probabilities("obs").unwrap();
        assert!((obs_marginal[m.record.outcome + 1]
            - bs.branch_for(m.record.outcome).unwrap().weight)
            .abs()
            < 1e-12);
    }

    #[test]
    fn measure_on_single_outcome_records_weight_one() {
        let b = operator(1, 1, 0.0);
        let s = pre_measurement(&b, vec![Complex64::ONE]);
        let mut rng = trial_rng(11, 0);
        let m = measure(&s, &b, &mut rng).unwrap();
        assert_eq!(m.record.outcome, 0);
        assert!((m.record.weight - 1.0).abs() < 1e-15);
    }

    #[test]
    fn run_trials_is_deterministic_and_counts_match() {
        let b = operator(2, 1, 0.0);
        let prepare =
            |_: u64| Ok(pre_measurement(&operator(2, 1, 0.0), vec![c(0.6, 0.0), c(0.8, 0.0)]));
        let run1 = run_trials(prepare, &b, 500, 99).unwrap();
        let run2 = run_trials(prepare, &b, 500, 99).unwrap();
        assert_eq!(run1.records, run2.records, "identical seeds must give identical records");
        assert_eq!(run1.table.total(), 500);
        let sum: u64 = run1.table.entries().iter().map(|e| e.count).sum();
        assert_eq!(sum, 500);
        // a different seed changes the draw sequence
        let run3 = run_trials(prepare, &b, 500, 100).unwrap();
        assert_ne!(run1.records, run3.records);
    }

    #[test]
    fn run_trials_single_trial_has_one_record() {
        let b = operator(2, 1, 0.0);
        let run = run_trials(
            |_| Ok(pre_measurement(&operator(2, 1, 0.0), vec![Complex64::ONE, Complex64::ZERO])),
            &b,
            1,
            3,
        )
        .unwrap();
        assert_eq!(run.records.len(), 1);
    }

    #[test]
    fn record_weight_equals_branch_weight() {
        let b = operator(4, 2, 0.0);
        let amps = vec![c(0.1, 0.3), c(0.5, -0.2), c(0.4, 0.4), c(0.2, 0.5)];
        let prepare = {
            let b2 = operator(4, 2, 0.0);
            move |_: u64| Ok(pre_measurement(&b2, amps.clone()))
        };
        let run = run_trials(prepare, &b, 200, 17).unwrap();
        let sample = pre_measurement(&b, vec![c(0.1, 0.3), c(0.5, -0.2), c(0.4, 0.4), c(0.2, 0.5)]);
        let bs = branch(&sample, &b).unwrap();
        for r in &run.records {
            let w = bs.branch_for(r.outcome).unwrap().weight;
            assert!((r.weight - w).abs() < 1e-12);
        }
    }
}
