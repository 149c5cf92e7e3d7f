//! Density matrices, partial traces and reduced views of pure states.

use crate::error::{Error, Result};
use crate::space::SpaceDescription;
use crate::state::StateVector;
use crate::tolerance;
use nalgebra::DMatrix;
use num_complex::Complex64;

/// A Hermitian, unit-trace matrix over a [`SpaceDescription`].
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    space: SpaceDescription,
    mat: DMatrix<Complex64>,
}

impl DensityMatrix {
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
        let herm = (&mat - mat.adjoint()).iter().map(|a| a.norm()).fold(0.0, f64::max);
        if herm > tolerance::STRUCTURAL {
            return Err(Error::Argument(format!(
                "density matrix is not Hermitian (residual {herm:.3e})"
            )));
        }
        let trace: Complex64 = mat.diagonal().iter().sum();
        if (trace.re - 1.0).abs() > tolerance::STRUCTURAL || trace.im.abs() > tolerance::STRUCTURAL
        {
            return Err(Error::Argument(format!("density matrix has trace {trace}, expected 1")));
        }
        Ok(DensityMatrix { space, mat })
    }

    /// ρ = |ψ⟩⟨ψ|.
    pub fn from_pure(state: &StateVector) -> Result<Self> {
        let dim = state.dim();
        let mut mat = DMatrix::from_element(dim, dim, Complex64::ZERO);
        for (i, a) in state.amplitudes().iter().enumerate() {
            for (j, b) in state.amplitudes().iter().enumerate() {
                mat[(i, j)] = a * b.conj();
            }
        }
        DensityMatrix::new(state.space().clone(), mat)
    }

    /// Reduced density matrix of a pure state over the kept subsystems,
    /// contracted directly from the amplitudes (never building the full ρ).
    pub fn from_pure_marginal(state: &StateVector, keep: &[&str]) -> Result<Self> {
        let keep_owned: Vec<String> = keep.iter().map(|s| s.to_string()).collect();
        let reduced_space = state.space().restricted_to(&keep_owned)?;
        let strides = state.space().strides();
        let subs = state.space().subsystems();
        let reduced_dim = reduced_space.total_dim();

        // kept subsystems in original order; slot j maps to reduced stride j
        let kept_sorted: Vec<usize> = subs
            .iter()
            .enumerate()
            .filter(|(_, s)| keep_owned.iter().any(|k| k == &s.id))
            .map(|(p, _)| p)
            .collect();
        let kept_strides = reduced_space.strides();
        let mut mat = DMatrix::from_element(reduced_dim, reduced_dim, Complex64::ZERO);
        let dim = state.dim();
        let mut kept_index = vec![0usize; dim];
        let mut traced_index = vec![0usize; dim];
        for flat in 0..dim {
            let mut kept = 0usize;
            let mut traced = 0usize;
            let mut traced_stride = 1usize;
            for p in (0..subs.len()).rev() {
                let idx = (flat / strides[p]) % subs[p].dim;
                if let Some(slot) = kept_sorted.iter().position(|&q| q == p) {
                    kept += idx * kept_strides[slot];
                } else {
                    traced += idx * traced_stride;
                    traced_stride *= subs[p].dim;
                }
            }
            kept_index[flat] = kept;
            traced_index[flat] = traced;
        }
        let traced_dim = dim / reduced_dim;
        // group amplitudes by traced index, then accumulate outer products
        let mut buckets: Vec<Vec<(usize, Complex64)>> = vec![Vec::new(); traced_dim];
        for flat in 0..dim {
            let a = state.amplitudes()[flat];
            if a.norm_sqr() > 0.0 {
                buckets[traced_index[flat]].push((kept_index[flat], a));
            }
        }
        for bucket in buckets {
            for &(i, a) in &bucket {
                for &(j, b) in &bucket {
                    mat[(i, j)] += a * b.conj();
                }
            }
        }
        DensityMatrix::new(reduced_space, mat)
    }

    pub fn space(&self) -> &SpaceDescription {
        &self.space
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.mat
    }

    pub fn trace(&self) -> f64 {
        self.mat.diagonal().iter().map(|a| a.re).sum()
    }

    /// Tr(ρ²).
    pub fn purity(&self) -> f64 {
        (&self.mat * &self.mat).diagonal().iter().map(|a| a.re).sum()
    }

    /// Real eigenvalue spectrum, descending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let eig = nalgebra::SymmetricEigen::new(self.mat.clone());
        let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        vals.sort_by(|a, b| b.partial_cmp(a).unwrap());
        vals
    }

    pub fn max_deviation(&self, other: &DensityMatrix) -> Result<f64> {
        if self.space != other.space {
            return Err(Error::Composition("comparing densities over different spaces".into()));
        }
        Ok((&self.mat - &other.mat).iter().map(|a| a.norm()).fold(0.0, f64::max))
    }
}

/// Partial trace onto the kept subsystems (original order preserved).
pub fn partial_trace(rho: &DensityMatrix, keep: &[&str]) -> Result<DensityMatrix> {
    if keep.is_empty() {
        return Err(Error::Argument("partial trace must keep at least one subsystem".into()));
    }
    let keep_owned: Vec<String> = keep.iter().map(|s| s.to_string()).collect();
    let reduced_space = rho.space().restricted_to(&keep_owned)?;
    let subs = rho.space().subsystems();
    let strides = rho.space().strides();
    let reduced_dim = reduced_space.total_dim();
    let reduced_strides = reduced_space.strides();
    let kept_positions: Vec<usize> = subs
        .iter()
        .enumerate()
        .filter(|(_, s)| keep_owned.iter().any(|k| k == &s.id))
        .map(|(p, _)| p)
        .collect();

    let dim = rho.space().total_dim();
    let mut kept_of = vec![0usize; dim];
    let mut traced_of = vec![0usize; dim];
    for flat in 0..dim {
        let mut kept = 0usize;
        let mut traced = 0usize;
        let mut traced_stride = 1usize;
        for p in (0..subs.len()).rev() {
            let idx = (flat / strides[p]) % subs[p].dim;
            if let Some(slot) = kept_positions.iter().position(|&q| q == p) {
                kept += idx * reduced_strides[slot];
            } else {
                traced += idx * traced_stride;
                traced_stride *= subs[p].dim;
            }
        }
        kept_of[flat] = kept;
        traced_of[flat] = traced;
    }

    let mut mat = DMatrix::from_element(reduced_dim, reduced_dim, Complex64::ZERO);
    for row in 0..dim {
        for col in 0..dim {
            if traced_of[row] == traced_of[col] {
                mat[(kept_of[row], kept_of[col])] += rho.matrix()[(row, col)];
            }
        }
    }
    DensityMatrix::new(reduced_space, mat)
}
