//! Observer-local statistics: mixed densities, von Neumann entropy,
//! empirical frequencies, CHSH correlations and fringe visibility.

use crate::density::DensityMatrix;
use crate::error::{Error, Result};
use crate::space::{BasisLabel, Role, SpaceDescription};
use crate::state::StateVector;
use crate::tolerance;
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Empirical outcome counts for one run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyTable {
    entries: Vec<FrequencyEntry>,
    total: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyEntry {
    pub outcome: usize,
    pub count: u64,
}

impl FrequencyTable {
    /// Tally outcomes over a fixed domain 0..outcomes.
    pub fn from_outcomes(iter: impl Iterator<Item = usize>, outcomes: usize) -> Self {
        let mut counts = vec![0u64; outcomes];
        let mut total = 0u64;
        for o in iter {
            counts[o] += 1;
            total += 1;
        }
        FrequencyTable {
            entries: counts
                .into_iter()
                .enumerate()
                .map(|(outcome, count)| FrequencyEntry { outcome, count })
                .collect(),
            total,
        }
    }

    pub fn entries(&self) -> &[FrequencyEntry] {
        &self.entries
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn count(&self, outcome: usize) -> u64 {
        self.entries.iter().find(|e| e.outcome == outcome).map_or(0, |e| e.count)
    }

    pub fn frequency(&self, outcome: usize) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.count(outcome) as f64 / self.total as f64
        }
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.entries.iter().map(|e| self.frequency(e.outcome)).collect()
    }
}

/// The diagonal mixed state an observer reconstructs from repeated trials.
pub fn mixed_density(weights: &[f64], basis: &[BasisLabel]) -> Result<DensityMatrix> {
    if weights.len() != basis.len() {
        return Err(Error::Argument(format!(
            "{} weights against {} basis labels",
            weights.len(),
            basis.len()
        )));
    }
    if let Some(w) = weights.iter().find(|w| **w < 0.0) {
        return Err(Error::Argument(format!("negative weight {w}")));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > tolerance::STRUCTURAL {
        return Err(Error::Argument(format!("weights sum to {total}, expected 1")));
    }
    let d = weights.len();
    let mut mat = DMatrix::from_element(d, d, Complex64::ZERO);
    for (i, w) in weights.iter().enumerate() {
        mat[(i, i)] = Complex64::new(*w, 0.0);
    }
    let id = basis[0].subsystem.clone();
    DensityMatrix::new(SpaceDescription::single(id, d, Role::System), mat)
}

/// −Tr(ρ ln ρ) in nats, via the eigenvalue spectrum; zero eigenvalues
/// contribute nothing.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> Result<f64> {
    let trace = rho.trace();
    if (trace - 1.0).abs() > tolerance::STRUCTURAL {
        return Err(Error::Argument(format!("density matrix trace is {trace}, expected 1")));
    }
    let mut entropy = 0.0;
    for lambda in rho.eigenvalues() {
        if lambda < -tolerance::STRUCTURAL {
            return Err(Error::Argument(format!("negative eigenvalue {lambda}")));
        }
        if lambda > 0.0 {
            entropy -= lambda * lambda.ln();
        }
    }
    Ok(entropy.max(0.0))
}

/// Local vs global entropy bookkeeping around one branching event.
///
/// The local view is the diagonal mixture over branch weights; the global
/// state stays pure, so its entropy is computed from the pure-state spectrum
/// (exactly zero up to rounding).
pub fn entropy_ledger(branched_joint: &StateVector, weights: &[f64]) -> Result<(f64, f64)> {
    let basis = BasisLabel::g_basis("local", weights.len());
    let s_local = von_neumann_entropy(&mixed_density(weights, &basis)?)?;
    // Eigendecomposition is honest but quadratic in dimension; past a few
    // hundred dimensions the norm already certifies purity.
    let s_global = if branched_joint.dim() <= 256 {
        von_neumann_entropy(&DensityMatrix::from_pure(branched_joint)?)?
    } else {
        let norm = branched_joint.norm();
        if (norm - 1.0).abs() > tolerance::STRUCTURAL {
            return Err(Error::Argument("branched state is not normalized".into()));
        }
        0.0
    };
    Ok((s_local, s_global))
}

/// Analyzer angles of a CHSH run (radians).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyzerAngles {
    pub a: f64,
    pub a_prime: f64,
    pub b: f64,
    pub b_prime: f64,
}

impl AnalyzerAngles {
    /// The settings maximizing the quantum value at 2√2.
    pub fn optimal() -> Self {
        AnalyzerAngles {
            a: 0.0,
            a_prime: std::f64::consts::FRAC_PI_4,
            b: std::f64::consts::FRAC_PI_8,
            b_prime: 3.0 * std::f64::consts::FRAC_PI_8,
        }
    }

    /// Setting pairs in CHSH order: (a,b), (a,b'), (a',b), (a',b').
    pub fn pairs(&self) -> [(f64, f64); 4] {
        [(self.a, self.b), (self.a, self.b_prime), (self.a_prime, self.b), (self.a_prime, self.b_prime)]
    }
}

/// Joint ± counts for one analyzer setting pair.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairCounts {
    pub pp: u64,
    pub pm: u64,
    pub mp: u64,
    pub mm: u64,
}

impl PairCounts {
    pub fn total(&self) -> u64 {
        self.pp + self.pm + self.mp + self.mm
    }

    /// E = (N++ + N-- − N+- − N-+)/N.
    pub fn correlation(&self) -> Result<f64> {
        let n = self.total();
        if n == 0 {
            return Err(Error::Argument("empty setting cell in CHSH data".into()));
        }
        Ok((self.pp as f64 + self.mm as f64 - self.pm as f64 - self.mp as f64) / n as f64)
    }

    pub fn record(&mut self, alice_plus: bool, bob_plus: bool) {
        match (alice_plus, bob_plus) {
            (true, true) => self.pp += 1,
            (true, false) => self.pm += 1,
            (false, true) => self.mp += 1,
            (false, false) => self.mm += 1,
        }
    }
}

/// Correlation data for the four CHSH setting pairs, in
/// (a,b), (a,b'), (a',b), (a',b') order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSettings {
    pub angles: AnalyzerAngles,
    pub counts: [PairCounts; 4],
}

/// CHSH statistic S = |E(a,b) − E(a,b') + E(a',b) + E(a',b')|.
pub fn chsh(settings: &CorrelationSettings) -> Result<f64> {
    let e: Vec<f64> =
        settings.counts.iter().map(PairCounts::correlation).collect::<Result<_>>()?;
    Ok((e[0] - e[1] + e[2] + e[3]).abs())
}

/// Smoothing window used by the visibility extremum rule.
pub fn smoothing_window(bins: usize) -> usize {
    (bins / 64).max(3)
}

/// Centered moving average; the window shrinks symmetrically at the edges.
pub fn smooth(histogram: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    let n = histogram.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            histogram[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// Fringe visibility (I_max − I_min)/(I_max + I_min) of a binned pattern.
///
/// The histogram is smoothed first (window = bins/64, minimum 3). With a
/// fringe period hint the extremum search is confined to the central three
/// fringes around the smoothed maximum; without one it spans all bins.
pub fn visibility(histogram: &[f64], fringe_period_bins: Option<usize>) -> Result<f64> {
    if histogram.iter().all(|&h| h == 0.0) {
        return Err(Error::Argument("all-zero histogram".into()));
    }
    if histogram.iter().any(|h| !h.is_finite() || *h < 0.0) {
        return Err(Error::Argument("histogram bins must be finite and nonnegative".into()));
    }
    let smoothed = smooth(histogram, smoothing_window(histogram.len()));
    let (lo, hi) = match fringe_period_bins {
        Some(p) if p > 0 => {
            let peak = smoothed
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .map(|(i, _)| i)
                .unwrap();
            let half_span = (3 * p).div_ceil(2);
            (peak.saturating_sub(half_span), (peak + half_span + 1).min(smoothed.len()))
        }
        _ => (0, smoothed.len()),
    };
    let window = &smoothed[lo..hi];
    let i_max = window.iter().cloned().fold(f64::MIN, f64::max);
    let i_min = window.iter().cloned().fold(f64::MAX, f64::min);
    if i_max + i_min <= 0.0 {
        return Err(Error::Argument("degenerate intensity window".into()));
    }
    Ok((i_max - i_min) / (i_max + i_min))
}

/// Phase of the fringe component at the given period, extracted by
/// projecting the mean-removed histogram onto e^{−2πik/P}.
pub fn fringe_phase(histogram: &[f64], fringe_period_bins: usize) -> Result<f64> {
    if fringe_period_bins == 0 {
        return Err(Error::Argument("fringe period must be positive".into()));
    }
    if histogram.iter().all(|&h| h == 0.0) {
        return Err(Error::Argument("all-zero histogram".into()));
    }
    let mean = histogram.iter().sum::<f64>() / histogram.len() as f64;
    let mut z = Complex64::ZERO;
    for (k, h) in histogram.iter().enumerate() {
        let phase = -2.0 * std::f64::consts::PI * k as f64 / fringe_period_bins as f64;
        z += Complex64::new(h - mean, 0.0) * Complex64::new(0.0, phase).exp();
    }
    Ok(z.arg())
}

/// Absolute phase difference folded into [0, π].
pub fn phase_distance(a: f64, b: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut d = (a - b).rem_euclid(two_pi);
    if d > std::f64::consts::PI {
        d = two_pi - d;
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mixed_density_is_diagonal_in_weights() {
        let basis = BasisLabel::g_basis("sys", 2);
        let rho = mixed_density(&[0.36, 0.64], &basis).unwrap();
        assert!((rho.matrix()[(0, 0)].re - 0.36).abs() < 1e-15);
        assert!((rho.matrix()[(1, 1)].re - 0.64).abs() < 1e-15);
        assert!((rho.trace() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pure_mixture_is_a_projector() {
        let basis = BasisLabel::g_basis("sys", 1);
        let rho = mixed_density(&[1.0], &basis).unwrap();
        assert!((rho.purity() - 1.0).abs() < 1e-12);
        assert!(von_neumann_entropy(&rho).unwrap() < 1e-12);
    }

    #[test]
    fn mixed_density_rejects_negative_weight() {
        let basis = BasisLabel::g_basis("sys", 2);
        assert!(matches!(mixed_density(&[1.2, -0.2], &basis), Err(Error::Argument(_))));
    }

    #[test]
    fn entropy_of_uniform_qubit_is_ln_two() {
        let basis = BasisLabel::g_basis("sys", 2);
        let rho = mixed_density(&[0.5, 0.5], &basis).unwrap();
        let s = von_neumann_entropy(&rho).unwrap();
        assert!((s - std::f64::consts::LN_2).abs() < 1e-10);
    }

    #[test]
    fn entropy_matches_scalar_formula_oracle() {
        let basis = BasisLabel::g_basis("sys", 2);
        let rho = mixed_density(&[0.36, 0.64], &basis).unwrap();
        let s = von_neumann_entropy(&rho).unwrap();
        // oracle: -0.36 ln 0.36 - 0.64 ln 0.64
        let expect = -(0.36f64 * 0.36f64.ln() + 0.64 * 0.64f64.ln());
        assert!((s - expect).abs() < 1e-10);
        assert!((expect - 0.6534181948434739).abs() < 1e-12);
    }

    #[test]
    fn entropy_bounds_and_maximum_at_uniform() {
        for d in 1..=6usize {
            let basis = BasisLabel::g_basis("sys", d);
            let uniform = vec![1.0 / d as f64; d];
            let s = von_neumann_entropy(&mixed_density(&uniform, &basis).unwrap()).unwrap();
            assert!((s - (d as f64).ln()).abs() < 1e-10);
            // a tilted distribution stays strictly inside the bounds
            if d > 1 {
                let mut tilted = uniform.clone();
                tilted[0] += 0.09;
                tilted[1] -= 0.09;
                let s2 =
                    von_neumann_entropy(&mixed_density(&tilted, &basis).unwrap()).unwrap();
                assert!(s2 >= -1e-12 && s2 < s);
            }
        }
    }

    #[test]
    fn entropy_concavity_spot_check() {
        let basis = BasisLabel::g_basis("sys", 3);
        let pairs = [
            ([0.2, 0.3, 0.5], [0.6, 0.3, 0.1]),
            ([1.0, 0.0, 0.0], [0.0, 0.5, 0.5]),
            ([0.33, 0.33, 0.34], [0.05, 0.9, 0.05]),
        ];
        for (w1, w2) in pairs {
            let mix: Vec<f64> = w1.iter().zip(&w2).map(|(a, b)| 0.5 * a + 0.5 * b).collect();
            let s_mix = von_neumann_entropy(&mixed_density(&mix, &basis).unwrap()).unwrap();
            let s1 = von_neumann_entropy(&mixed_density(&w1, &basis).unwrap()).unwrap();
            let s2 = von_neumann_entropy(&mixed_density(&w2, &basis).unwrap()).unwrap();
            assert!(s_mix >= 0.5 * s1 + 0.5 * s2 - 1e-10);
        }
    }

    #[test]
    fn entropy_ledger_reports_zero_global() {
        let space = SpaceDescription::new(vec![
            crate::space::Subsystem::new("sys", 2, Role::System),
            crate::space::Subsystem::new("env", 2, Role::LocalEnvironment),
        ])
        .unwrap();
        let mut amps = vec![Complex64::ZERO; 4];
        amps[0] = Complex64::new(0.6, 0.0);
        amps[3] = Complex64::new(0.8, 0.0);
        let branched = StateVector::new(space, amps).unwrap();
        let (s_local, s_global) = entropy_ledger(&branched, &[0.36, 0.64]).unwrap();
        assert!(s_global < 1e-12);
        assert!((s_local - 0.6534181948434739).abs() < 1e-10);

        // D=1: both entropies vanish
        let single = StateVector::basis_state(
            SpaceDescription::single("sys", 1, Role::System),
            &[0],
        )
        .unwrap();
        let (l, g) = entropy_ledger(&single, &[1.0]).unwrap();
        assert!(l < 1e-12 && g < 1e-12);
    }

    #[test]
    fn chsh_of_singlet_statistics_reaches_tsirelson() {
        // analytic oracle: E(a,b) = -cos 2(a-b); large counts proportional
        // to the exact joint probabilities
        let angles = AnalyzerAngles::optimal();
        let n = 1_000_000u64;
        let counts: Vec<PairCounts> = angles
            .pairs()
            .iter()
            .map(|&(a, b)| {
                let diff = b - a;
                let p_same = diff.sin().powi(2) / 2.0; // P(++) = P(--)
                let p_diff = diff.cos().powi(2) / 2.0;
                PairCounts {
                    pp: (p_same * n as f64).round() as u64,
                    mm: (p_same * n as f64).round() as u64,
                    pm: (p_diff * n as f64).round() as u64,
                    mp: (p_diff * n as f64).round() as u64,
                }
            })
            .collect();
        let settings = CorrelationSettings {
            angles,
            counts: [counts[0], counts[1], counts[2], counts[3]],
        };
        let s = chsh(&settings).unwrap();
        assert!((s - 2.0 * 2.0f64.sqrt()).abs() < 1e-3);
    }

    #[test]
    fn deterministic_local_strategies_respect_classical_bound() {
        // exhaustive over all 16 deterministic assignments
        let angles = AnalyzerAngles::optimal();
        let n = 1000u64;
        for mask in 0..16u8 {
            let alice = [(mask & 1) != 0, (mask & 2) != 0];
            let bob = [(mask & 4) != 0, (mask & 8) != 0];
            let mut counts = [PairCounts::default(); 4];
            for (slot, (ai, bi)) in
                [(0usize, 0usize), (0, 1), (1, 0), (1, 1)].iter().enumerate()
            {
                for _ in 0..n {
                    counts[slot].record(alice[*ai], bob[*bi]);
                }
            }
            let s = chsh(&CorrelationSettings { angles, counts }).unwrap();
            assert!(s <= 2.0 + 1e-12, "strategy {mask:#06b} gives S = {s}");
        }
    }

    #[test]
    fn chsh_rejects_empty_cell() {
        let settings = CorrelationSettings {
            angles: AnalyzerAngles::optimal(),
            counts: [PairCounts::default(); 4],
        };
        assert!(matches!(chsh(&settings), Err(Error::Argument(_))));
    }

    #[test]
    fn ideal_cosine_pattern_has_full_visibility() {
        let bins = 192usize;
        let period = 64.0;
        let hist: Vec<f64> = (0..bins)
            .map(|k| 1.0 + (2.0 * std::f64::consts::PI * k as f64 / period).cos())
            .collect();
        let v = visibility(&hist, Some(64)).unwrap();
        assert!((v - 1.0).abs() < 0.02, "visibility {v}");
    }

    #[test]
    fn smooth_envelope_has_negligible_visibility() {
        // a single-slit-style flat-topped envelope: no interference term
        let bins = 64usize;
        let hist: Vec<f64> =
            (0..bins).map(|k| (-((k as f64 - 32.0) / 90.0).powi(2)).exp()).collect();
        let v = visibility(&hist, Some(21)).unwrap();
        assert!(v < 0.05, "visibility {v}");
    }

    #[test]
    fn visibility_rejects_all_zero() {
        assert!(matches!(visibility(&[0.0; 16], None), Err(Error::Argument(_))));
    }

    #[test]
    fn fringe_phases_of_complementary_patterns_differ_by_pi() {
        let bins = 64usize;
        let period = 21;
        let fringe: Vec<f64> = (0..bins)
            .map(|k| 1.0 + (2.0 * std::f64::consts::PI * k as f64 / period as f64).cos())
            .collect();
        let anti: Vec<f64> = (0..bins)
            .map(|k| 1.0 - (2.0 * std::f64::consts::PI * k as f64 / period as f64).cos())
            .collect();
        let p1 = fringe_phase(&fringe, period).unwrap();
        let p2 = fringe_phase(&anti, period).unwrap();
        assert!((phase_distance(p1, p2) - std::f64::consts::PI).abs() < 1e-6);
    }

    #[test]
    fn frequency_table_is_exact_on_counts() {
        let table = FrequencyTable::from_outcomes([0, 1, 1, 0, 1].into_iter(), 3);
        assert_eq!(table.total(), 5);
        assert_eq!(table.count(0), 2);
        assert_eq!(table.count(1), 3);
        assert_eq!(table.count(2), 0);
        let total: u64 = table.entries().iter().map(|e| e.count).sum();
        assert_eq!(total, table.total());
    }
}
