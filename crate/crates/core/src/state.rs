//! Normalized complex state vectors over labeled tensor-product bases.

use crate::error::{Error, Result};
use crate::space::SpaceDescription;
use crate::tolerance;
use num_complex::Complex64;

/// A normalized amplitude sequence over a [`SpaceDescription`].
///
/// Amplitudes follow the space's row-major lexicographic layout. Every
/// constructor checks finiteness and normalization, so a `StateVector` in
/// hand is always a valid pure state.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    space: SpaceDescription,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// Wrap an amplitude vector, checking length, finiteness and norm.
    pub fn new(space: SpaceDescription, amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() != space.total_dim() {
            return Err(Error::Composition(format!(
                "amplitude vector has length {}, space has total dimension {}",
                amps.len(),
                space.total_dim()
            )));
        }
        if amps.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::Argument("non-finite amplitude".into()));
        }
        let state = StateVector { space, amps };
        let norm = state.norm();
        if (norm - 1.0).abs() > tolerance::STRUCTURAL {
            return Err(Error::Argument(format!("state vector has norm {norm}, expected 1")));
        }
        Ok(state)
    }

    /// Normalize raw amplitudes (error if the vector is numerically zero).
    pub fn normalized(space: SpaceDescription, amps: Vec<Complex64>) -> Result<Self> {
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !norm.is_finite() || norm < 1e-150 {
            return Err(Error::Argument("cannot normalize a zero amplitude vector".into()));
        }
        let scaled = amps.into_iter().map(|a| a / norm).collect();
        StateVector::new(space, scaled)
    }

    /// The computational basis state with the given per-subsystem indices.
    pub fn basis_state(space: SpaceDescription, indices: &[usize]) -> Result<Self> {
        let flat = space.flat_index(indices)?;
        let mut amps = vec![Complex64::ZERO; space.total_dim()];
        amps[flat] = Complex64::ONE;
        Ok(StateVector { space, amps })
    }

    pub fn space(&self) -> &SpaceDescription {
        &self.space
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Kronecker product; the left factor's subsystems become the most
    /// significant indices of the result.
    pub fn tensor(&self, other: &StateVector) -> Result<StateVector> {
        let space = self.space.concat(&other.space)?;
        let mut amps = Vec::with_capacity(self.amps.len() * other.amps.len());
        for a in &self.amps {
            for b in &other.amps {
                amps.push(a * b);
            }
        }
        Ok(StateVector { space, amps })
    }

    /// Inner product ⟨self|other⟩, conjugate-linear in `self`.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        if self.space != other.space {
            return Err(Error::Composition("inner product of states over different spaces".into()));
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// |⟨self|other⟩| — the global-phase-insensitive overlap.
    pub fn fidelity(&self, other: &StateVector) -> Result<f64> {
        Ok(self.inner(other)?.norm())
    }

    /// Largest elementwise deviation from another state (exact comparison,
    /// phase included).
    pub fn max_deviation(&self, other: &StateVector) -> Result<f64> {
        if self.space != other.space {
            return Err(Error::Composition("comparing states over different spaces".into()));
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// Probability of each basis index of one subsystem, tracing the rest.
    pub fn marginal_probabilities(&self, subsystem: &str) -> Result<Vec<f64>> {
        let pos = self.space.position_of(subsystem)?;
        let dim = self.space.subsystems()[pos].dim;
        let strides = self.space.strides();
        let mut probs = vec![0.0; dim];
        for (flat, amp) in self.amps.iter().enumerate() {
            let idx = (flat / strides[pos]) % dim;
            probs[idx] += amp.norm_sqr();
        }
        Ok(probs)
    }

    /// Squared weight of the component where `subsystem` is at basis `index`.
    pub fn weight_at(&self, subsystem: &str, index: usize) -> Result<f64> {
        let probs = self.marginal_probabilities(subsystem)?;
        probs
            .get(index)
            .copied()
            .ok_or_else(|| Error::Argument(format!("index {index} out of range for `{subsystem}`")))
    }

    /// True when all subsystems except those in `free` carry their full
    /// weight at basis index 0 (the fiducial/ready configuration).
    pub fn others_fiducial(&self, free: &[&str], tol: f64) -> Result<bool> {
        for sub in self.space.subsystems() {
            if free.contains(&sub.id.as_str()) {
                continue;
            }
            let probs = self.marginal_probabilities(&sub.id)?;
            if (probs[0] - 1.0).abs() > tol {
                return Ok(false);
            }
        }
        Ok(true)
    }
}
