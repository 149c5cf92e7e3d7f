//! The branching operator, branched states, debranching, lifted evolution
//! and relocation into a larger environment.
//!
//! Branching correlates each system eigenstate `|g_k>` with an environment
//! pointer `|E_k>`. On paper the map is only defined on `|g_k>|E>`; here it
//! is completed to a genuine joint unitary in controlled-block form: for
//! each system index `k` an environment unitary `W_k` with `W_k|E> = |E_k>`,
//! Gram-Schmidt-completed over the computational basis in lexicographic
//! order. The completion is deterministic given (basis order, environment).

use crate::environment::EnvironmentModel;
use crate::error::{Error, Result};
use crate::operator::LinearOperator;
use crate::space::{BasisLabel, Role, SpaceDescription, Subsystem};
use crate::state::StateVector;
use crate::tolerance;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// One decoherent branch of a branched state.
#[derive(Debug, Clone)]
pub struct Branch {
    pub outcome: usize,
    pub label: BasisLabel,
    /// System coefficient c_k of the pre-branching expansion.
    pub amplitude: Complex64,
    /// |c_k|².
    pub weight: f64,
}

/// A state after branching: the joint vector plus the branch records.
#[derive(Debug, Clone)]
pub struct BranchedState {
    branches: Vec<Branch>,
    joint: StateVector,
    system_id: String,
    env_id: String,
    env: EnvironmentModel,
}

impl BranchedState {
    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn joint(&self) -> &StateVector {
        &self.joint
    }

    pub fn system_id(&self) -> &str {
        &self.system_id
    }

    pub fn env_id(&self) -> &str {
        &self.env_id
    }

    pub fn environment(&self) -> &EnvironmentModel {
        &self.env
    }

    /// Branch weights in branch-list order.
    pub fn weights(&self) -> Vec<f64> {
        self.branches.iter().map(|b| b.weight).collect()
    }

    pub fn branch_for(&self, outcome: usize) -> Option<&Branch> {
        self.branches.iter().find(|b| b.outcome == outcome)
    }

    /// Replace the joint vector (used by the observer pipeline, which moves
    /// the state through engage/disengage without touching the branch list).
    pub(crate) fn with_joint(&self, joint: StateVector) -> BranchedState {
        BranchedState {
            branches: self.branches.clone(),
            joint,
            system_id: self.system_id.clone(),
            env_id: self.env_id.clone(),
            env: self.env.clone(),
        }
    }
}

/// The unitary realization of branching for one (basis, environment) pair.
#[derive(Debug, Clone)]
pub struct BranchingOperator {
    system_id: String,
    env_id: String,
    basis: Vec<BasisLabel>,
    env: EnvironmentModel,
    blocks: Vec<DMatrix<Complex64>>,
    blocks_adj: Vec<DMatrix<Complex64>>,
}

/// Build the branching operator for the given system basis and environment.
pub fn make_branching_operator(
    basis: Vec<BasisLabel>,
    env: EnvironmentModel,
    system_id: &str,
    env_id: &str,
) -> Result<BranchingOperator> {
    if basis.len() != env.outcome_count() {
        return Err(Error::Composition(format!(
            "basis has {} labels, environment expects {} outcomes",
            basis.len(),
            env.outcome_count()
        )));
    }
    let dim = env.dim();
    let mut blocks = Vec::with_capacity(basis.len());
    for k in 0..basis.len() {
        blocks.push(env_unitary_sending_ready_to(env.pointer(k), dim)?);
    }
    let blocks_adj = blocks.iter().map(|b| b.adjoint()).collect();
    Ok(BranchingOperator {
        system_id: system_id.to_string(),
        env_id: env_id.to_string(),
        basis,
        env,
        blocks,
        blocks_adj,
    })
}

/// Environment unitary with first column `target`, completed over the
/// computational basis in index order (Gram-Schmidt, re-orthogonalized).
fn env_unitary_sending_ready_to(target: &[Complex64], dim: usize) -> Result<DMatrix<Complex64>> {
    let mut cols: Vec<DVector<Complex64>> = vec![DVector::from_column_slice(target)];
    for cand in 0..dim {
        if cols.len() == dim {
            break;
        }
        let mut v = DVector::from_element(dim, Complex64::ZERO);
        v[cand] = Complex64::ONE;
        for _ in 0..2 {
            for c in &cols {
                let overlap = c.dotc(&v);
                v -= c * overlap;
            }
        }
        let norm = v.norm();
        if norm > tolerance::GRAM_SCHMIDT_DEPENDENT {
            cols.push(v / Complex64::new(norm, 0.0));
        }
    }
    if cols.len() != dim {
        return Err(Error::Construction(
            "could not complete the branching isometry to a unitary".into(),
        ));
    }
    Ok(DMatrix::from_columns(&cols))
}

impl BranchingOperator {
    pub fn system_id(&self) -> &str {
        &self.system_id
    }

    pub fn env_id(&self) -> &str {
        &self.env_id
    }

    pub fn basis(&self) -> &[BasisLabel] {
        &self.basis
    }

    pub fn environment(&self) -> &EnvironmentModel {
        &self.env
    }

    pub fn outcome_count(&self) -> usize {
        self.basis.len()
    }

    /// The canonical two-subsystem space [system, environment].
    pub fn canonical_space(&self) -> SpaceDescription {
        SpaceDescription::new(vec![
            Subsystem::new(self.system_id.clone(), self.outcome_count(), Role::System),
            Subsystem::new(self.env_id.clone(), self.env.dim(), Role::LocalEnvironment),
        ])
        .expect("distinct ids")
    }

    pub fn apply_to(&self, s: &StateVector) -> Result<StateVector> {
        self.apply_blocks(s, false)
    }

    pub fn apply_adjoint_to(&self, s: &StateVector) -> Result<StateVector> {
        self.apply_blocks(s, true)
    }

    fn apply_blocks(&self, s: &StateVector, adjoint: bool) -> Result<StateVector> {
        let space = s.space().clone();
        let sys_pos = space.position_of(&self.system_id)?;
        let env_pos = space.position_of(&self.env_id)?;
        let subs = space.subsystems();
        if subs[sys_pos].dim != self.outcome_count() {
            return Err(Error::Composition(format!(
                "system subsystem `{}` has dim {}, operator expects {}",
                self.system_id,
                subs[sys_pos].dim,
                self.outcome_count()
            )));
        }
        if subs[env_pos].dim != self.env.dim() {
            return Err(Error::Composition(format!(
                "environment subsystem `{}` has dim {}, operator expects {}",
                self.env_id,
                subs[env_pos].dim,
                self.env.dim()
            )));
        }
        let strides = space.strides();
        let env_dim = self.env.dim();

        // spectator base offsets
        let mut bases = vec![0usize];
        for (p, sub) in subs.iter().enumerate() {
            if p == sys_pos || p == env_pos {
                continue;
            }
            let mut next = Vec::with_capacity(bases.len() * sub.dim);
            for base in &bases {
                for i in 0..sub.dim {
                    next.push(base + i * strides[p]);
                }
            }
            bases = next;
        }

        let blocks = if adjoint { &self.blocks_adj } else { &self.blocks };
        let mut out = s.amplitudes().to_vec();
        let mut gathered = DVector::from_element(env_dim, Complex64::ZERO);
        for base in bases {
            for (k, block) in blocks.iter().enumerate() {
                let offset = base + k * strides[sys_pos];
                for j in 0..env_dim {
                    gathered[j] = s.amplitudes()[offset + j * strides[env_pos]];
                }
                let transformed = block * &gathered;
                for j in 0..env_dim {
                    out[offset + j * strides[env_pos]] = transformed[j];
                }
            }
        }
        StateVector::new(space, out)
    }

    /// Dense realization over the given joint space (checks and small
    /// dimensions only; the matrix is `total_dim` squared).
    pub fn to_operator(&self, space: &SpaceDescription) -> Result<LinearOperator> {
        let dim = space.total_dim();
        let mut mat = DMatrix::from_element(dim, dim, Complex64::ZERO);
        for col in 0..dim {
            let basis = StateVector::basis_state(space.clone(), &space.unflatten(col))?;
            let image = self.apply_to(&basis)?;
            for (row, amp) in image.amplitudes().iter().enumerate() {
                mat[(row, col)] = *amp;
            }
        }
        LinearOperator::new(space.clone(), mat)
    }
}

/// Branch a pre-measurement state. Every subsystem other than the system
/// register must sit at basis index 0 (environment ready, observer ready).
pub fn branch(s: &StateVector, b: &BranchingOperator) -> Result<BranchedState> {
    let space = s.space();
    space.position_of(b.system_id())?;
    space.position_of(b.env_id())?;
    if !s.others_fiducial(&[b.system_id()], tolerance::STRUCTURAL)? {
        return Err(Error::Precondition(
            "environment (or another register) is not in its ready state".into(),
        ));
    }

    let d = b.outcome_count();
    let mut amplitudes = Vec::with_capacity(d);
    let sys_pos = space.position_of(b.system_id())?;
    for k in 0..d {
        let mut idx = vec![0usize; space.subsystems().len()];
        idx[sys_pos] = k;
        amplitudes.push(s.amplitudes()[space.flat_index(&idx)?]);
    }

    let joint = b.apply_to(s)?;
    let branches = amplitudes
        .iter()
        .enumerate()
        .filter(|(_, c)| c.norm_sqr() >= tolerance::PRUNE_THRESHOLD)
        .map(|(k, c)| Branch {
            outcome: k,
            label: b.basis()[k].clone(),
            amplitude: *c,
            weight: c.norm_sqr(),
        })
        .collect();

    Ok(BranchedState {
        branches,
        joint,
        system_id: b.system_id().to_string(),
        env_id: b.env_id().to_string(),
        env: b.environment().clone(),
    })
}

/// Apply the debranching operator B†, restoring the pre-branching state.
pub fn debranch(bs: &BranchedState, b: &BranchingOperator) -> Result<StateVector> {
    if bs.env_id() != b.env_id()
        || bs.system_id() != b.system_id()
        || bs.environment() != b.environment()
    {
        return Err(Error::Composition(
            "branched state and debranching operator use different environments".into(),
        ));
    }
    b.apply_adjoint_to(bs.joint())
}

/// D×D matrix of pointer-overlap magnitudes |<E_i|E_k>|.
pub fn decoherence_gram(bs: &BranchedState) -> DMatrix<f64> {
    bs.environment().gram_magnitudes()
}

/// Lift a system unitary onto the branched joint space: B (U ⊗ I) B†.
pub fn lift(u_sys: &LinearOperator, b: &BranchingOperator) -> Result<LinearOperator> {
    let d = b.outcome_count();
    let sys_space = u_sys.space();
    if sys_space.subsystems().len() != 1
        || sys_space.subsystems()[0].id != b.system_id()
        || sys_space.total_dim() != d
    {
        return Err(Error::Argument(format!(
            "lift expects a unitary over the single system subsystem `{}` of dimension {d}",
            b.system_id()
        )));
    }
    if u_sys.unitarity_residual() >= tolerance::STRUCTURAL {
        return Err(Error::Argument("lift expects a unitary system operator".into()));
    }
    let joint_space = b.canonical_space();
    let b_dense = b.to_operator(&joint_space)?;
    let env_identity = LinearOperator::identity(SpaceDescription::single(
        b.env_id(),
        b.environment().dim(),
        Role::LocalEnvironment,
    ));
    let u_joint = u_sys.kron(&env_identity)?;
    b_dense.compose(&u_joint)?.compose(&b_dense.adjoint())
}

/// Relocate a branched state into a larger environment.
///
/// `bath` must mirror the branched state's subsystems (same dimensions, in
/// order) and may carry extra trailing subsystems; it must be prepared in
/// its fiducial |0...0> state. The swap-style unitary moves the branched
/// amplitudes into the mirror registers, leaving the original factor in the
/// fiducial state regardless of the input — the operational no-hiding check.
pub fn relocate(bs: &BranchedState, bath: &StateVector) -> Result<StateVector> {
    let joint = bs.joint();
    let orig_subs = joint.space().subsystems();
    let bath_subs = bath.space().subsystems();
    if bath.space().total_dim() < joint.space().total_dim() {
        return Err(Error::Capacity(format!(
            "bath dimension {} is smaller than the branched state's {}",
            bath.space().total_dim(),
            joint.space().total_dim()
        )));
    }
    if bath_subs.len() < orig_subs.len() {
        return Err(Error::Capacity(
            "bath must mirror every subsystem of the branched state".into(),
        ));
    }
    for (o, m) in orig_subs.iter().zip(bath_subs) {
        if o.dim != m.dim {
            return Err(Error::Capacity(format!(
                "bath subsystem `{}` has dim {}, expected a mirror of `{}` (dim {})",
                m.id, m.dim, o.id, o.dim
            )));
        }
    }
    let fiducial = bath.amplitudes()[0].norm_sqr();
    if (fiducial - 1.0).abs() > tolerance::STRUCTURAL {
        return Err(Error::Precondition("bath is not in its fiducial state".into()));
    }

    let full = joint.tensor(bath)?;
    let space = full.space().clone();
    let n_orig = orig_subs.len();
    let block = joint.space().total_dim();
    let extra: usize = bath_subs[n_orig..].iter().map(|s| s.dim).product();

    // flat layout: (orig block) x (mirror block) x (extras); swap the blocks
    let mut out = vec![Complex64::ZERO; full.dim()];
    for a in 0..block {
        for b in 0..block {
            for e in 0..extra {
                let src = (a * block + b) * extra + e;
                let dst = (b * block + a) * extra + e;
                out[dst] = full.amplitudes()[src];
            }
        }
    }
    StateVector::new(space, out)
}
