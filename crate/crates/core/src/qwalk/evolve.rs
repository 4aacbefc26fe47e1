//! Moving an encoded annealing state from one stationary density to the
//! next by π/3 amplification between two walk reflectors.
//!
//! States live in register space: the vector `v ∈ ℂ^Ω` stands for
//! `Σ v(x)|x⟩|0⟩`, which is where the alternative walk keeps its fixed
//! state `Σ √π(x)|x⟩|0⟩`. On that space the phase-estimation reflector,
//! with its ancillas projected back onto `|0…0⟩`, acts diagonally in the
//! eigenbasis `{v_j}` of the discriminant: eigenvector `v_j` with
//! `λ_j = cos θ_j` is multiplied by `1 + (α − 1)|c₀(θ_j/π)|^{2c}`, where
//! `c₀` is the zero-outcome amplitude of `a`-bit phase estimation. The
//! norm lost by this projection is reported as leakage.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ledger::{QueryKind, QueryLedger};
use crate::qwalk::amplify::{pi3_amplify, MatrixReflection};
use crate::qwalk::chain::DiscreteChain;
use crate::qwalk::reflector::{charged_walk_calls, pi_third, zero_outcome_amplitude};

/// Overlaps below this are rejected unless the caller lowers it.
pub const DEFAULT_MIN_OVERLAP: f64 = 1e-2;
/// Longest mixing horizon searched when sizing reflectors.
pub const MIXING_CAP: u64 = 1 << 24;
/// Most amplification rounds attempted.
pub const MAX_ROUNDS: u32 = 8;

/// The ancilla-projected reflector about `√π` of `chain` on register space,
/// with `a` phase bits and `c` repetitions.
pub fn effective_reflector(chain: &DiscreteChain, a: usize, c: usize, alpha: Complex64) -> DMatrix<Complex64> {
    let (lambdas, v) = chain.discriminant_spectrum();
    let n = chain.len();
    let multipliers: Vec<Complex64> = lambdas
        .iter()
        .map(|&l| {
            let xi = l.clamp(-1.0, 1.0).acos() / PI;
            Complex64::new(1.0, 0.0) + (alpha - 1.0) * zero_outcome_amplitude(xi, a).powi(2 * c as i32)
        })
        .collect();
    DMatrix::from_fn(n, n, |i, k| {
        (0..n).map(|j| multipliers[j] * (v[(i, j)] * v[(k, j)])).sum()
    })
}

/// Phase resolution in turns that separates eigenphases of a chain whose
/// horizon is `t` steps: `arccos(1 − 1/t)/π`.
pub fn resolution_for_horizon(t: u64) -> f64 {
    let t = t.max(1) as f64;
    (1.0 - 1.0 / t).clamp(-1.0, 1.0).acos() / PI
}

/// `ln max_x max(π₀/π₁, π₁/π₀)`.
pub fn log_sup_warmness(pi0: &[f64], pi1: &[f64]) -> f64 {
    pi0.iter()
        .zip(pi1)
        .map(|(a, b)| (a.ln() - b.ln()).abs())
        .fold(0.0, f64::max)
}

/// `√(t₀+t₁) · p⁻¹ · ln(β/p) · ln²(1/(pε))`, given `ln β`.
pub fn cost_formula(t0: u64, t1: u64, overlap: f64, log_warmness: f64, eps: f64) -> f64 {
    ((t0 + t1) as f64).sqrt() / overlap * (log_warmness - overlap.ln()) * (1.0 / (overlap * eps)).ln().powi(2)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionReport {
    /// `Σ √(π₀π₁)`.
    pub overlap: f64,
    /// `ln` of the sup-ratio warmness between the two densities.
    pub log_warmness: f64,
    /// Mixing horizon of the target chain from `π₀`.
    pub t0: u64,
    /// Mixing horizon of the start chain from `π₁`.
    pub t1: u64,
    pub rounds: u32,
    /// Phase bits and repetitions of the start-side reflector.
    pub start_sizes: (usize, usize),
    /// Phase bits and repetitions of the target-side reflector.
    pub target_sizes: (usize, usize),
    pub start_uses: u64,
    pub target_uses: u64,
    pub walk_calls: u64,
    pub formula: f64,
    /// `|⟨π₁|π̃₁⟩|²` before renormalization, on the ideal input.
    pub fidelity: f64,
    /// `‖π̃₁ − π₁‖` after normalization and global-phase alignment.
    pub error: f64,
    /// Squared norm lost to ancilla projection.
    pub leakage: f64,
}

/// The amplification circuit between two chains, built once and applied
/// to any number of register-space states.
pub struct StageTransition {
    start: MatrixReflection,
    target: MatrixReflection,
    report: TransitionReport,
    states: usize,
}

impl StageTransition {
    pub fn new(m0: &DiscreteChain, m1: &DiscreteChain, eps: f64, min_overlap: f64) -> Result<Self> {
        if m0.len() != m1.len() {
            return Err(Error::DimensionMismatch {
                expected: m0.len(),
                got: m1.len(),
            });
        }
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::InvalidParameter(format!("eps must lie in (0, 1), got {eps}")));
        }
        m0.require_reversible()?;
        m1.require_reversible()?;
        let pi0 = m0.stationary();
        let pi1 = m1.stationary();
        let overlap: f64 = pi0.iter().zip(pi1).map(|(a, b)| (a * b).sqrt()).sum::<f64>().min(1.0);
        if overlap < min_overlap {
            return Err(Error::OverlapTooSmall {
                overlap,
                threshold: min_overlap,
            });
        }
        let log_warmness = log_sup_warmness(pi0, pi1);
        let t0 = m1.mixing_time_from(Some(pi0), eps, MIXING_CAP)?;
        let t1 = m0.mixing_time_from(Some(pi1), eps, MIXING_CAP)?;
        let p = overlap * overlap;
        let rounds = (0..=MAX_ROUNDS)
            .find(|&m| (1.0 - p).max(0.0).powf(3f64.powi(m as i32)) <= eps * eps / 8.0)
            .ok_or(Error::OverlapTooSmall {
                overlap,
                threshold: min_overlap,
            })?;
        let c = ((2.0 * 3f64.powi(rounds as i32) / eps).log2().ceil() as usize).max(1);
        let bits = |t: u64| ((1.0 / resolution_for_horizon(t)).log2().ceil() as usize).max(1);
        let (a_start, a_target) = (bits(t1), bits(t0));
        let alpha = pi_third();
        let mut transition = Self {
            start: MatrixReflection::new(effective_reflector(m0, a_start, c, alpha)),
            target: MatrixReflection::new(effective_reflector(m1, a_target, c, alpha)),
            report: TransitionReport {
                overlap,
                log_warmness,
                t0,
                t1,
                rounds,
                start_sizes: (a_start, c),
                target_sizes: (a_target, c),
                start_uses: 0,
                target_uses: 0,
                walk_calls: 0,
                formula: cost_formula(t0, t1, overlap, log_warmness, eps),
                fidelity: 0.0,
                error: 0.0,
                leakage: 0.0,
            },
            states: m0.len(),
        };
        let ideal = sqrt_state(pi0);
        let target = sqrt_state(pi1);
        let scratch = QueryLedger::new();
        let (out, uses, leakage) = transition.run(&ideal, &scratch)?;
        transition.report.start_uses = uses.0;
        transition.report.target_uses = uses.1;
        transition.report.walk_calls = scratch.count(QueryKind::ControlledWalk);
        transition.report.fidelity = target.dotc(&out).norm_sqr() * (1.0 - leakage);
        transition.report.error = aligned_distance(&out, &target);
        transition.report.leakage = leakage;
        Ok(transition)
    }

    pub fn report(&self) -> &TransitionReport {
        &self.report
    }

    /// Applies the amplification to `state`, charging the walk calls, and
    /// returns the renormalized output with its leakage.
    pub fn apply(&self, state: &DVector<Complex64>, ledger: &QueryLedger) -> Result<(DVector<Complex64>, f64)> {
        let (out, _, leakage) = self.run(state, ledger)?;
        Ok((out, leakage))
    }

    fn run(&self, state: &DVector<Complex64>, ledger: &QueryLedger) -> Result<(DVector<Complex64>, (u64, u64), f64)> {
        if state.len() != self.states {
            return Err(Error::DimensionMismatch {
                expected: self.states,
                got: state.len(),
            });
        }
        let out = pi3_amplify(&self.start, &self.target, self.report.rounds, state);
        let (a0, c0) = self.report.start_sizes;
        let (a1, c1) = self.report.target_sizes;
        ledger.charge(
            QueryKind::ControlledWalk,
            out.start_uses * charged_walk_calls(a0, c0) + out.target_uses * charged_walk_calls(a1, c1),
        );
        ledger.charge(QueryKind::Reflector, out.start_uses + out.target_uses);
        let norm = out.state.norm();
        if norm == 0.0 {
            return Err(Error::MixingPrecondition("amplified state vanished".into()));
        }
        let leakage = (1.0 - out.state.norm_squared() / state.norm_squared()).max(0.0);
        Ok((
            out.state / Complex64::new(norm, 0.0),
            (out.start_uses, out.target_uses),
            leakage,
        ))
    }
}

/// Maps the encoding of `π₀` (stationary for `m0`) to an approximation of
/// the encoding of `π₁` (stationary for `m1`).
pub fn prepare_next_state(
    state: &DVector<Complex64>,
    m0: &DiscreteChain,
    m1: &DiscreteChain,
    eps: f64,
    ledger: &QueryLedger,
) -> Result<(DVector<Complex64>, TransitionReport)> {
    let transition = StageTransition::new(m0, m1, eps, DEFAULT_MIN_OVERLAP)?;
    let (out, _) = transition.apply(state, ledger)?;
    Ok((out, transition.report))
}

/// `Σ √ρ(x)|x⟩` as a complex register-space vector.
pub fn sqrt_state(rho: &[f64]) -> DVector<Complex64> {
    let total: f64 = rho.iter().sum();
    DVector::from_iterator(rho.len(), rho.iter().map(|r| Complex64::new((r / total).sqrt(), 0.0)))
}

/// `min_φ ‖e^{iφ}u − v‖` for unit vectors.
pub fn aligned_distance(u: &DVector<Complex64>, v: &DVector<Complex64>) -> f64 {
    (2.0 - 2.0 * u.dotc(v).norm()).max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qwalk::reflector::ApproxReflector;
    use crate::qwalk::walk::{WalkOperator, WalkVariant};
    use crate::rng::Seeder;

    #[test]
    fn effective_reflector_matches_the_gate_circuit() {
        let chain = DiscreteChain::random_reversible(3, &mut Seeder::new(41).stream(0)).unwrap();
        let walk = WalkOperator::build(&chain, WalkVariant::Alternative).unwrap();
        let (a, c) = (2, 2);
        let circuit = ApproxReflector::new(&walk, a, c, pi_third()).unwrap();
        let effective = effective_reflector(&chain, a, c, pi_third());
        let n = chain.len();
        for x in 0..n {
            let mut basis = DVector::zeros(n * n);
            basis[x * n] = Complex64::new(1.0, 0.0);
            let joint = circuit.apply_to_system(&basis).unwrap();
            for y in 0..n {
                let got = joint[(y * n, 0)];
                let want = effective[(y, x)];
                assert!((got - want).norm() < 1e-9, "({y},{x}): {got} vs {want}");
            }
        }
    }

    #[test]
    fn identical_chains_need_no_rounds() {
        let chain = DiscreteChain::random_reversible(5, &mut Seeder::new(42).stream(0)).unwrap();
        let lazy = chain.lazy().unwrap();
        let state = sqrt_state(lazy.stationary());
        let ledger = QueryLedger::new();
        let (out, report) = prepare_next_state(&state, &lazy, &lazy, 0.05, &ledger).unwrap();
        assert_eq!(report.rounds, 0);
        assert!((&out - &state).norm() < 1e-14);
        assert_eq!(ledger.count(QueryKind::ControlledWalk), 0);
    }
}
