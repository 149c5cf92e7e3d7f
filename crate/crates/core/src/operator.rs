//! Dense linear operators, subsystem-targeted application, unitarity checks
//! and Hamiltonian propagators.

use crate::error::{Error, Result};
use crate::space::SpaceDescription;
use crate::state::StateVector;
use crate::tolerance;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// A dense square operator over a [`SpaceDescription`].
#[derive(Debug, Clone, PartialEq)]
pub struct LinearOperator {
    space: SpaceDescription,
    mat: DMatrix<Complex64>,
}

impl LinearOperator {
    pub fn new(space: SpaceDescription, mat: DMatrix<Complex64>) -> Result<Self> {
        let dim = space.total_dim();
        if mat.nrows() != dim || mat.ncols() != dim {
            return Err(Error::Composition(format!(
                "matrix is {}x{}, space has total dimension {}",
                mat.nrows(),
                mat.ncols(),
                dim
            )));
        }
        if mat.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::Argument("non-finite matrix entry".into()));
        }
        Ok(LinearOperator { space, mat })
    }

    /// Construct and verify the unitarity invariant at the structural
    /// tolerance.
    pub fn unitary(space: SpaceDescription, mat: DMatrix<Complex64>) -> Result<Self> {
        let op = LinearOperator::new(space, mat)?;
        let residual = op.unitarity_residual();
        if residual >= tolerance::STRUCTURAL {
            return Err(Error::Construction(format!(
                "operator flagged unitary has ||U'U - I||_max = {residual:.3e}"
            )));
        }
        Ok(op)
    }

    pub fn identity(space: SpaceDescription) -> Self {
        let dim = space.total_dim();
        LinearOperator { space, mat: DMatrix::identity(dim, dim) }
    }

    pub fn space(&self) -> &SpaceDescription {
        &self.space
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.mat
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn adjoint(&self) -> LinearOperator {
        LinearOperator { space: self.space.clone(), mat: self.mat.adjoint() }
    }

    /// `self · rhs` (apply `rhs` first).
    pub fn compose(&self, rhs: &LinearOperator) -> Result<LinearOperator> {
        if self.space != rhs.space {
            return Err(Error::Composition("composing operators over different spaces".into()));
        }
        Ok(LinearOperator { space: self.space.clone(), mat: &self.mat * &rhs.mat })
    }

    /// Matrix-vector product. Unitary inputs preserve the norm, so the
    /// result passes `StateVector` validation.
    pub fn apply(&self, s: &StateVector) -> Result<StateVector> {
        if &self.space != s.space() {
            return Err(Error::Composition("operator and state live on different spaces".into()));
        }
        let v = DVector::from_column_slice(s.amplitudes());
        let w = &self.mat * v;
        StateVector::new(self.space.clone(), w.as_slice().to_vec())
    }

    /// ‖U†U − I‖_max.
    pub fn unitarity_residual(&self) -> f64 {
        let gram = self.mat.ad_mul(&self.mat);
        let dim = self.dim();
        let mut max = 0.0f64;
        for i in 0..dim {
            for j in 0..dim {
                let expect = if i == j { Complex64::ONE } else { Complex64::ZERO };
                max = max.max((gram[(i, j)] - expect).norm());
            }
        }
        max
    }

    /// Kronecker product; `self` becomes the most significant factor.
    pub fn kron(&self, other: &LinearOperator) -> Result<LinearOperator> {
        let space = self.space.concat(other.space())?;
        Ok(LinearOperator { space, mat: self.mat.kronecker(&other.mat) })
    }
}

/// True iff ‖op†op − I‖_max < tol.
pub fn check_unitary(op: &LinearOperator, tol: f64) -> bool {
    op.unitarity_residual() < tol
}

/// Apply `mat` (a dense operator over the listed target subsystems, row-major
/// in the given order) to those subsystems of `s`, leaving the rest alone.
///
/// This is the workhorse behind branching, engagement and analyzer rotations:
/// it never materializes the full joint operator.
pub fn apply_on(
    mat: &DMatrix<Complex64>,
    s: &StateVector,
    targets: &[&str],
) -> Result<StateVector> {
    let space = s.space().clone();
    let positions: Vec<usize> =
        targets.iter().map(|id| space.position_of(id)).collect::<Result<_>>()?;
    {
        let mut seen = positions.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != positions.len() {
            return Err(Error::Argument("repeated target subsystem".into()));
        }
    }
    let subs = space.subsystems();
    let strides = space.strides();
    let op_dim: usize = positions.iter().map(|&p| subs[p].dim).product();
    if mat.nrows() != op_dim || mat.ncols() != op_dim {
        return Err(Error::Composition(format!(
            "operator is {}x{}, targets span dimension {op_dim}",
            mat.nrows(),
            mat.ncols()
        )));
    }

    // Flat offset of each operator index within the full state.
    let mut op_offsets = vec![0usize; op_dim];
    for (o, offset) in op_offsets.iter_mut().enumerate() {
        let mut rem = o;
        for &p in positions.iter().rev() {
            let d = subs[p].dim;
            *offset += (rem % d) * strides[p];
            rem /= d;
        }
    }

    // Base offsets of every spectator configuration.
    let spectator_positions: Vec<usize> =
        (0..subs.len()).filter(|p| !positions.contains(p)).collect();
    let mut bases = vec![0usize];
    for &p in &spectator_positions {
        let mut next = Vec::with_capacity(bases.len() * subs[p].dim);
        for base in &bases {
            for i in 0..subs[p].dim {
                next.push(base + i * strides[p]);
            }
        }
        bases = next;
    }

    let mut out = s.amplitudes().to_vec();
    let mut gathered = DVector::from_element(op_dim, Complex64::ZERO);
    for base in bases {
        for (o, &off) in op_offsets.iter().enumerate() {
            gathered[o] = s.amplitudes()[base + off];
        }
        let transformed = mat * &gathered;
        for (o, &off) in op_offsets.iter().enumerate() {
            out[base + off] = transformed[o];
        }
    }
    StateVector::new(space, out)
}

/// Dense joint realization of a subsystem-targeted operator, built column by
/// column. Intended for checks at small dimension.
pub fn embed(
    mat: &DMatrix<Complex64>,
    space: &SpaceDescription,
    targets: &[&str],
) -> Result<LinearOperator> {
    let dim = space.total_dim();
    let mut full = DMatrix::from_element(dim, dim, Complex64::ZERO);
    for col in 0..dim {
        let basis = StateVector::basis_state(space.clone(), &space.unflatten(col))?;
        let image = apply_on(mat, &basis, targets)?;
        for (row, amp) in image.amplitudes().iter().enumerate() {
            full[(row, col)] = *amp;
        }
    }
    LinearOperator::new(space.clone(), full)
}

/// Unitary time propagator exp(−iHt) of a Hermitian generator, built from
/// its eigendecomposition.
pub fn propagator(hamiltonian: &LinearOperator, t: f64) -> Result<LinearOperator> {
    let mat = hamiltonian.matrix();
    let herm_residual = (mat - mat.adjoint()).iter().map(|a| a.norm()).fold(0.0, f64::max);
    if herm_residual > tolerance::STRUCTURAL {
        return Err(Error::Argument(format!(
            "propagator generator is not Hermitian (residual {herm_residual:.3e})"
        )));
    }
    if !t.is_finite() {
        return Err(Error::Argument("non-finite propagation time".into()));
    }
    let eig = nalgebra::SymmetricEigen::new(mat.clone());
    let dim = mat.nrows();
    let mut phases = DMatrix::from_element(dim, dim, Complex64::ZERO);
    for (i, lambda) in eig.eigenvalues.iter().enumerate() {
        phases[(i, i)] = (-Complex64::i() * lambda * t).exp();
    }
    let u = &eig.eigenvectors * phases * eig.eigenvectors.adjoint();
    LinearOperator::unitary(hamiltonian.space().clone(), u)
}
