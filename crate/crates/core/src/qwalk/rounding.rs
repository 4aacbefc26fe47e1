//! Non-destructive rounding: estimating coordinate means of encoded
//! copies by amplitude estimation, then undoing the disturbance.
//!
//! For a copy `|ψ⟩` and an observable `f: Ω → [0, 1]`, marking prepares
//! `√a|good⟩ + √(1−a)|bad⟩` with `a = Σ|ψ(x)|² f(x)`. Phase estimation on
//! the Grover iterate is repeated `R` times and only the median estimate
//! `v` is measured, with probability `q_v`. Everything then lives in the
//! two-dimensional block spanned by the initial joint state `Φ` and its
//! projection onto outcome `v`, so alternating between "is it `Φ`?" and
//! "is the median `v`?" (the restoration loop) is a two-state process:
//! testing for `Φ` from the projected state succeeds with probability
//! `q_v`, from its complement with probability `1 − q_v`. If the loop has
//! not returned to `Φ` after its round budget, the marking qubit is
//! measured and the copy collapses onto its good or bad component.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ledger::{QueryKind, QueryLedger};
use crate::meanest::{draw, median_repetitions, outcome_estimate, phase_outcome_distribution};
use crate::qwalk::grid::MAX_GRID_POINTS;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundingParams {
    /// Phase-estimation grid size, a power of two.
    pub grid: usize,
    /// Target failure probability of each estimate.
    pub eta: f64,
    /// Restoration rounds before giving up.
    pub restore_rounds: usize,
}

impl Default for RoundingParams {
    fn default() -> Self {
        Self {
            grid: 16,
            eta: 0.05,
            restore_rounds: 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoundingOutcome {
    /// `estimates[i][k]` estimates `a` for copy `i` and observable `k`.
    pub estimates: Vec<Vec<f64>>,
    /// Exact `a` values, for diagnostics.
    pub amplitudes: Vec<Vec<f64>>,
    pub states: Vec<DVector<Complex64>>,
    /// `|⟨ψ_in|ψ_out⟩|²` per copy.
    pub fidelities: Vec<f64>,
    /// Copies that collapsed after a failed restoration.
    pub collapsed: usize,
    pub reflector_uses: u64,
}

/// Law of the median of `reps` independent phase-estimation estimates, as
/// `(value, probability)` over the distinct estimate values.
pub fn median_law(a: f64, grid: usize, reps: usize) -> Result<Vec<(f64, f64)>> {
    let probs = phase_outcome_distribution(a, grid)?;
    let mut values: Vec<(f64, f64)> = Vec::new();
    for (y, p) in probs.iter().enumerate() {
        let v = outcome_estimate(y, grid);
        match values.iter_mut().find(|(w, _)| (w - v).abs() < 1e-12) {
            Some(entry) => entry.1 += p,
            None => values.push((v, *p)),
        }
    }
    values.sort_by(|x, y| x.0.total_cmp(&y.0));
    let need = reps / 2 + 1;
    let at_most = |f: f64| -> f64 {
        (need..=reps)
            .map(|j| binomial(reps, j) * f.powi(j as i32) * (1.0 - f).powi((reps - j) as i32))
            .sum()
    };
    let mut cdf = 0.0;
    let mut prev = 0.0;
    let mut out = Vec::with_capacity(values.len());
    for (v, p) in values {
        cdf = (cdf + p).min(1.0);
        let cur = at_most(cdf);
        out.push((v, (cur - prev).max(0.0)));
        prev = cur;
    }
    Ok(out)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Estimates `Σ|ψ(x)|² f_k(x)` for every copy and observable, restoring
/// each copy afterwards when the restoration loop succeeds.
pub fn nondestructive_round<R: Rng + ?Sized>(
    states: &[DVector<Complex64>],
    observables: &[Vec<f64>],
    params: &RoundingParams,
    rng: &mut R,
    ledger: &QueryLedger,
) -> Result<RoundingOutcome> {
    let dim = states.first().map_or(0, |s| s.len());
    if dim > MAX_GRID_POINTS {
        return Err(Error::CapExceeded(format!(
            "rounding on {dim} states exceeds {MAX_GRID_POINTS}"
        )));
    }
    if let Some(bad) = states.iter().find(|s| s.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: bad.len(),
        });
    }
    for f in observables {
        if f.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: f.len(),
            });
        }
        if f.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidParameter("observables must take values in [0, 1]".into()));
        }
    }
    if !(params.eta > 0.0 && params.eta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "eta must lie in (0, 1), got {}",
            params.eta
        )));
    }
    let reps = median_repetitions(params.eta);
    let per_pass = 2 * reps as u64 * params.grid as u64;
    let mut out = RoundingOutcome {
        estimates: Vec::with_capacity(states.len()),
        amplitudes: Vec::with_capacity(states.len()),
        states: Vec::with_capacity(states.len()),
        fidelities: Vec::with_capacity(states.len()),
        collapsed: 0,
        reflector_uses: 0,
    };
    for input in states {
        let norm = input.norm();
        let mut psi = input / Complex64::new(norm, 0.0);
        let original = psi.clone();
        let mut estimates = Vec::with_capacity(observables.len());
        let mut amplitudes = Vec::with_capacity(observables.len());
        let mut collapsed = false;
        for f in observables {
            let a: f64 = psi
                .iter()
                .zip(f)
                .map(|(p, w)| p.norm_sqr() * w)
                .sum::<f64>()
                .clamp(0.0, 1.0);
            let law = median_law(a, params.grid, reps)?;
            let weights: Vec<f64> = law.iter().map(|(_, p)| *p).collect();
            let (value, q) = law[draw(&weights, rng)];
            estimates.push(value);
            amplitudes.push(a);
            out.reflector_uses += per_pass;
            let mut projected = true;
            let mut restored = false;
            for _ in 0..params.restore_rounds {
                out.reflector_uses += per_pass;
                let success = if projected { q } else { 1.0 - q };
                if rng.random::<f64>() < success {
                    restored = true;
                    break;
                }
                projected = rng.random::<f64>() >= q;
            }
            if !restored {
                collapsed = true;
                let good = rng.random::<f64>() < a;
                psi = DVector::from_fn(dim, |x, _| {
                    let w = if good { f[x] } else { 1.0 - f[x] };
                    psi[x] * w.sqrt()
                });
                let n = psi.norm();
                psi /= Complex64::new(n, 0.0);
            }
        }
        if collapsed {
            out.collapsed += 1;
        }
        out.fidelities.push(original.dotc(&psi).norm_sqr());
        out.estimates.push(estimates);
        out.amplitudes.push(amplitudes);
        out.states.push(psi);
    }
    ledger.charge(QueryKind::Reflector, out.reflector_uses);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Seeder;

    #[test]
    fn median_law_is_a_distribution() {
        for a in [0.0, 0.2, 0.5, 0.93, 1.0] {
            let law = median_law(a, 16, 7).unwrap();
            let total: f64 = law.iter().map(|(_, p)| p).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn median_of_one_is_the_single_law() {
        let law = median_law(0.2, 8, 1).unwrap();
        let probs = phase_outcome_distribution(0.2, 8).unwrap();
        let zero: f64 = law.iter().filter(|(v, _)| *v == 0.0).map(|(_, p)| p).sum();
        assert!((zero - probs[0]).abs() < 1e-12);
    }

    #[test]
    fn zero_amplitude_leaves_the_copy_alone() {
        let psi = DVector::from_vec(vec![
            Complex64::new(0.6, 0.0),
            Complex64::new(0.0, 0.8),
            Complex64::new(0.0, 0.0),
        ]);
        let f = vec![0.0, 0.0, 0.7];
        let ledger = QueryLedger::new();
        let out = nondestructive_round(
            std::slice::from_ref(&psi),
            &[f],
            &RoundingParams::default(),
            &mut Seeder::new(1).stream(0),
            &ledger,
        )
        .unwrap();
        assert_eq!(out.estimates[0][0], 0.0);
        assert_eq!(out.states[0], psi);
        assert_eq!(out.collapsed, 0);
        assert!(ledger.count(QueryKind::Reflector) > 0);
    }
}
