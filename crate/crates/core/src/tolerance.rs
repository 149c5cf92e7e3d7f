//! Numerical tolerances used throughout the crate.
//!
//! Two tiers: `STRUCTURAL` guards invariants that accumulate rounding over
//! compositions (unitarity, normalization, trace preservation), `ORACLE`
//! guards direct comparisons against independently computed values.

/// Structural invariants: unitarity residuals, state norms, density-matrix
/// traces. 1e-10 leaves ~5 digits of headroom over f64 epsilon for chained
/// operator products.
pub const STRUCTURAL: f64 = 1e-10;

/// Direct equality against an independent computation of the same quantity.
pub const ORACLE: f64 = 1e-12;

/// Branches with squared amplitude below this are dropped from the branch
/// list (the joint vector keeps them).
pub const PRUNE_THRESHOLD: f64 = 1e-14;

/// Residual threshold under which a Gram-Schmidt candidate counts as
/// linearly dependent and is skipped.
pub const GRAM_SCHMIDT_DEPENDENT: f64 = 1e-8;
