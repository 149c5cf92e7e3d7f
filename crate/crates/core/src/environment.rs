//! Minimal local environment: pointer states with a dialable mutual overlap.
//!
//! The environment register is `m` qubits. Branch `k` is tagged by pointer
//! state `|E_k>`; all distinct pointers share the same real overlap ε, so
//! ε = 0 gives exact decoherence and ε → 1 approaches full recoherence.

use crate::error::{Error, Result};
use crate::space::{Role, SpaceDescription};
use crate::state::StateVector;
use crate::tolerance;
use nalgebra::DMatrix;
use num_complex::Complex64;

/// Construction recipe for the pointer states of a D-outcome branching.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentModel {
    outcome_count: usize,
    qubit_count: usize,
    overlap: f64,
    /// Pointer amplitudes, one row per outcome, each of length 2^m.
    pointers: Vec<Vec<Complex64>>,
    /// Orthonormalized pointer frame (Gram-Schmidt in outcome order); used
    /// to condition engagement on a definite branch even when ε > 0.
    frame: Vec<Vec<Complex64>>,
}

/// Build the environment for `d` outcomes on `m` qubits with pairwise
/// pointer overlap exactly `epsilon`.
///
/// The ready state is `|0...0>`. For ε = 0 the pointers are the first `d`
/// computational basis states; for ε > 0 they are the Cholesky mix realizing
/// the Gram matrix with 1 on the diagonal and ε elsewhere. Deterministic for
/// a given `(d, m, epsilon)`.
pub fn make_environment(d: usize, m: usize, epsilon: f64) -> Result<EnvironmentModel> {
    if d < 1 {
        return Err(Error::Argument("outcome count must be at least 1".into()));
    }
    if m < 1 {
        return Err(Error::Argument("environment needs at least one qubit".into()));
    }
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::Argument(format!("overlap must lie in [0, 1), got {epsilon}")));
    }
    let dim = 1usize << m;
    if d > dim {
        return Err(Error::Capacity(format!(
            "{d} pointer states cannot fit in a {m}-qubit environment (dimension {dim})"
        )));
    }

    let pointers: Vec<Vec<Complex64>> = if epsilon == 0.0 {
        (0..d)
            .map(|k| {
                let mut v = vec![Complex64::ZERO; dim];
                v[k] = Complex64::ONE;
                v
            })
            .collect()
    } else {
        // Gram target: 1 on the diagonal, ε off it.
        let gram = DMatrix::from_fn(d, d, |i, j| if i == j { 1.0 } else { epsilon });
        let chol = nalgebra::Cholesky::new(gram).ok_or_else(|| {
            Error::Construction(format!(
                "pointer Gram matrix is numerically singular at overlap {epsilon}"
            ))
        })?;
        let l = chol.l();
        (0..d)
            .map(|k| {
                let mut v = vec![Complex64::ZERO; dim];
                for j in 0..=k {
                    v[j] = Complex64::new(l[(k, j)], 0.0);
                }
                v
            })
            .collect()
    };

    let frame = orthonormal_frame(&pointers, dim)?;
    Ok(EnvironmentModel { outcome_count: d, qubit_count: m, overlap: epsilon, pointers, frame })
}

fn orthonormal_frame(pointers: &[Vec<Complex64>], dim: usize) -> Result<Vec<Vec<Complex64>>> {
    let mut frame: Vec<Vec<Complex64>> = Vec::with_capacity(pointers.len());
    for p in pointers {
        let mut v = p.clone();
        for _ in 0..2 {
            for f in &frame {
                let overlap: Complex64 =
                    f.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                for (vi, fi) in v.iter_mut().zip(f) {
                    *vi -= overlap * fi;
                }
            }
        }
        let norm: f64 = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm < tolerance::GRAM_SCHMIDT_DEPENDENT {
            return Err(Error::Construction(
                "pointer states are numerically linearly dependent".into(),
            ));
        }
        for a in &mut v {
            *a /= norm;
        }
        frame.push(v);
    }
    debug_assert!(frame.iter().all(|f| f.len() == dim));
    Ok(frame)
}

impl EnvironmentModel {
    pub fn outcome_count(&self) -> usize {
        self.outcome_count
    }

    pub fn qubit_count(&self) -> usize {
        self.qubit_count
    }

    pub fn overlap(&self) -> f64 {
        self.overlap
    }

    pub fn dim(&self) -> usize {
        1 << self.qubit_count
    }

    /// The canonical one-subsystem space this model lives on.
    pub fn space(&self, id: &str) -> SpaceDescription {
        SpaceDescription::single(id, self.dim(), Role::LocalEnvironment)
    }

    /// Ready state |E> = |0...0>.
    pub fn ready_state(&self, id: &str) -> StateVector {
        StateVector::basis_state(self.space(id), &[0]).expect("index 0 exists")
    }

    /// Pointer state |E_k>.
    pub fn pointer_state(&self, id: &str, k: usize) -> Result<StateVector> {
        let amps = self
            .pointers
            .get(k)
            .ok_or_else(|| Error::Argument(format!("no pointer state {k}")))?;
        StateVector::new(self.space(id), amps.clone())
    }

    pub fn pointer(&self, k: usize) -> &[Complex64] {
        &self.pointers[k]
    }

    pub fn frame_vector(&self, k: usize) -> &[Complex64] {
        &self.frame[k]
    }

    /// D×D matrix of |<E_i|E_k>|.
    pub fn gram_magnitudes(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.outcome_count, self.outcome_count, |i, k| {
            self.pointers[i]
                .iter()
                .zip(&self.pointers[k])
                .map(|(a, b)| a.conj() * b)
                .sum::<Complex64>()
                .norm()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthogonal_case_uses_computational_basis() {
        let env = make_environment(2, 1, 0.0).unwrap();
        assert_eq!(env.pointer(0), &[Complex64::ONE, Complex64::ZERO]);
        assert_eq!(env.pointer(1), &[Complex64::ZERO, Complex64::ONE]);
    }

    #[test]
    fn overlapping_pointers_match_cholesky_oracle() {
        // (D=2, m=1, eps=0.6): |0> and 0.6|0> + 0.8|1>
        let env = make_environment(2, 1, 0.6).unwrap();
        let e0 = env.pointer_state("env", 0).unwrap();
        let e1 = env.pointer_state("env", 1).unwrap();
        let overlap = e0.inner(&e1).unwrap();
        assert!((overlap.re - 0.6).abs() < 1e-12);
        assert!(overlap.im.abs() < 1e-15);
        assert!((e1.amplitudes()[0].re - 0.6).abs() < 1e-12);
        assert!((e1.amplitudes()[1].re - 0.8).abs() < 1e-12);
    }

    #[test]
    fn four_orthonormal_pointers_have_identity_gram() {
        let env = make_environment(4, 2, 0.0).unwrap();
        // oracle: pairwise inner products
        for i in 0..4 {
            for k in 0..4 {
                let pi = env.pointer_state("env", i).unwrap();
                let pk = env.pointer_state("env", k).unwrap();
                let expect = if i == k { 1.0 } else { 0.0 };
                assert!((pi.inner(&pk).unwrap().norm() - expect).abs() < 1e-12);
            }
        }
        let gram = env.gram_magnitudes();
        for i in 0..4 {
            for k in 0..4 {
                let expect = if i == k { 1.0 } else { 0.0 };
                assert!((gram[(i, k)] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn all_pairwise_overlaps_equal_epsilon() {
        for &eps in &[0.1, 0.3, 0.5, 0.999] {
            let env = make_environment(4, 3, eps).unwrap();
            let gram = env.gram_magnitudes();
            for i in 0..4 {
                for k in 0..4 {
                    let expect = if i == k { 1.0 } else { eps };
                    assert!(
                        (gram[(i, k)] - expect).abs() < 1e-10,
                        "gram[{i},{k}] = {} at eps {eps}",
                        gram[(i, k)]
                    );
                }
            }
        }
    }

    #[test]
    fn capacity_error_when_pointers_exceed_register() {
        assert!(matches!(make_environment(3, 1, 0.0), Err(Error::Capacity(_))));
        assert!(matches!(make_environment(5, 2, 0.4), Err(Error::Capacity(_))));
    }

    #[test]
    fn frame_is_orthonormal_and_matches_pointers_at_zero_overlap() {
        let env = make_environment(3, 2, 0.0).unwrap();
        for k in 0..3 {
            assert_eq!(env.frame_vector(k), env.pointer(k));
        }
        let env = make_environment(3, 2, 0.4).unwrap();
        for i in 0..3 {
            for k in 0..3 {
                let dot: Complex64 = env
                    .frame_vector(i)
                    .iter()
                    .zip(env.frame_vector(k))
                    .map(|(a, b)| a.conj() * b)
                    .sum();
                let expect = if i == k { 1.0 } else { 0.0 };
                assert!((dot.norm() - expect).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(make_environment(0, 1, 0.0).is_err());
        assert!(make_environment(2, 0, 0.0).is_err());
        assert!(make_environment(2, 1, 1.0).is_err());
        assert!(make_environment(2, 1, -0.1).is_err());
    }
}
