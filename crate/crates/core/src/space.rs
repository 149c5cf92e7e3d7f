//! Labeled tensor-product space descriptions and basis bookkeeping.
//!
//! Amplitude storage is row-major lexicographic over subsystem indices in
//! declaration order: the first subsystem is the most significant digit of
//! the flat index. All index arithmetic in the crate derives from
//! [`SpaceDescription::strides`], which keeps the layout bit-stable across
//! runs.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// What a subsystem plays in the measurement story.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    System,
    LocalEnvironment,
    Observer,
    Ancilla,
}

/// One factor of a tensor-product space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subsystem {
    pub id: String,
    pub dim: usize,
    pub role: Role,
}

impl Subsystem {
    pub fn new(id: impl Into<String>, dim: usize, role: Role) -> Self {
        Subsystem { id: id.into(), dim, role }
    }
}

/// A basis state of one subsystem, carried around for display and ledgers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisLabel {
    pub subsystem: String,
    pub index: usize,
    pub display: String,
}

impl BasisLabel {
    pub fn new(subsystem: impl Into<String>, index: usize, display: impl Into<String>) -> Self {
        BasisLabel { subsystem: subsystem.into(), index, display: display.into() }
    }

    /// The conventional `g_k` labels for a D-outcome system register.
    pub fn g_basis(subsystem: &str, d: usize) -> Vec<BasisLabel> {
        (0..d).map(|k| BasisLabel::new(subsystem, k, format!("g_{k}"))).collect()
    }
}

/// An ordered list of subsystems with the derived index arithmetic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpaceDescription {
    subsystems: Vec<Subsystem>,
}

impl SpaceDescription {
    pub fn new(subsystems: Vec<Subsystem>) -> Result<Self> {
        if subsystems.is_empty() {
            return Err(Error::Argument("a space needs at least one subsystem".into()));
        }
        for s in &subsystems {
            if s.dim == 0 {
                return Err(Error::Argument(format!("subsystem `{}` has dimension 0", s.id)));
            }
        }
        for (i, s) in subsystems.iter().enumerate() {
            if subsystems[..i].iter().any(|t| t.id == s.id) {
                return Err(Error::Composition(format!("duplicate subsystem id `{}`", s.id)));
            }
        }
        Ok(SpaceDescription { subsystems })
    }

    pub fn single(id: impl Into<String>, dim: usize, role: Role) -> Self {
        SpaceDescription { subsystems: vec![Subsystem::new(id, dim, role)] }
    }

    pub fn subsystems(&self) -> &[Subsystem] {
        &self.subsystems
    }

    pub fn total_dim(&self) -> usize {
        self.subsystems.iter().map(|s| s.dim).product()
    }

    pub fn position_of(&self, id: &str) -> Result<usize> {
        self.subsystems
            .iter()
            .position(|s| s.id == id)
            .ok_or_else(|| Error::Argument(format!("no subsystem `{id}` in space")))
    }

    pub fn dim_of(&self, id: &str) -> Result<usize> {
        Ok(self.subsystems[self.position_of(id)?].dim)
    }

    /// Row-major strides: `strides[i]` is the flat-index step of one unit of
    /// subsystem `i`.
    pub fn strides(&self) -> Vec<usize> {
        let n = self.subsystems.len();
        let mut strides = vec![1usize; n];
        for i in (0..n.saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.subsystems[i + 1].dim;
        }
        strides
    }

    /// Flat index of a full multi-index.
    pub fn flat_index(&self, indices: &[usize]) -> Result<usize> {
        if indices.len() != self.subsystems.len() {
            return Err(Error::Argument(format!(
                "multi-index has {} entries, space has {} subsystems",
                indices.len(),
                self.subsystems.len()
            )));
        }
        let strides = self.strides();
        let mut flat = 0;
        for (i, (&idx, sub)) in indices.iter().zip(&self.subsystems).enumerate() {
            if idx >= sub.dim {
                return Err(Error::Argument(format!(
                    "index {idx} out of range for subsystem `{}` (dim {})",
                    sub.id, sub.dim
                )));
            }
            flat += idx * strides[i];
        }
        Ok(flat)
    }

    /// Multi-index of a flat index.
    pub fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        let strides = self.strides();
        let mut out = Vec::with_capacity(self.subsystems.len());
        for stride in strides {
            out.push(flat / stride);
            flat %= stride;
        }
        out
    }

    /// Concatenation of two spaces; ids must be disjoint.
    pub fn concat(&self, other: &SpaceDescription) -> Result<SpaceDescription> {
        for s in &other.subsystems {
            if self.subsystems.iter().any(|t| t.id == s.id) {
                return Err(Error::Composition(format!(
                    "subsystem id `{}` present on both sides of a tensor product",
                    s.id
                )));
            }
        }
        let mut subsystems = self.subsystems.clone();
        subsystems.extend(other.subsystems.iter().cloned());
        SpaceDescription::new(subsystems)
    }

    /// New space keeping only the named subsystems, in their original order.
    pub fn restricted_to(&self, keep: &[String]) -> Result<SpaceDescription> {
        if keep.is_empty() {
            return Err(Error::Argument("cannot restrict a space to zero subsystems".into()));
        }
        for id in keep {
            self.position_of(id)?;
        }
        let subsystems: Vec<Subsystem> = self
            .subsystems
            .iter()
            .filter(|s| keep.iter().any(|k| k == &s.id))
            .cloned()
            .collect();
        SpaceDescription::new(subsystems)
    }
}
