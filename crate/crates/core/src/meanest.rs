//! Mean estimation: amplitude estimation drawn from its exact outcome law,
//! a model-level quantum sub-Gaussian mean estimator and the classical
//! sample-mean baseline.
//!
//! The quantum mean estimator is simulated at the level of its guarantee,
//! not its circuit. With probability `1 − Δ` the error is uniform on
//! `±σ ln(1/Δ)/τ`; otherwise it is uniform on `±[1, 3]·σ ln(1/Δ)/τ`. The
//! charge is `⌈c · τ · ln^{3/2}τ · ln ln τ⌉` queries, with each logarithm
//! floored at one so the charge never drops below `τ`.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ledger::{QueryKind, QueryLedger};
use crate::oracle::{noise_mean, NoiseFamily};
use crate::rng::Seeder;
use crate::stats::log_log_slope;

/// Default `c` in the quantum query charge.
pub const DEFAULT_COST_CONSTANT: f64 = 1.0;

/// Probability that one phase estimation lands within the error bound,
/// `8/π²`.
pub const SINGLE_RUN_SUCCESS: f64 = 8.0 / (PI * PI);

/// Law of the phase-estimation outcome `y ∈ [0, M)` for the Grover angle
/// `θ = arcsin √a`: `½F_M(y − Mθ/π) + ½F_M(y + Mθ/π)` with the Fejér kernel
/// `F_M(δ) = sin²(πδ) / (M² sin²(πδ/M))`.
pub fn phase_outcome_distribution(a: f64, m: usize) -> Result<Vec<f64>> {
    check_amplitude(a, m)?;
    let theta = a.sqrt().asin();
    let center = m as f64 * theta / PI;
    let probs: Vec<f64> = (0..m)
        .map(|y| 0.5 * fejer(y as f64 - center, m) + 0.5 * fejer(y as f64 + center, m))
        .collect();
    let total: f64 = probs.iter().sum();
    Ok(probs.into_iter().map(|p| p / total).collect())
}

fn fejer(delta: f64, m: usize) -> f64 {
    let mf = m as f64;
    let den = (PI * delta / mf).sin();
    if den.abs() < 1e-12 {
        return 1.0;
    }
    let num = (PI * delta).sin();
    (num * num) / (mf * mf * den * den)
}

fn check_amplitude(a: f64, m: usize) -> Result<()> {
    if !(0.0..=1.0).contains(&a) {
        return Err(Error::InvalidParameter(format!(
            "amplitude must lie in [0, 1], got {a}"
        )));
    }
    if m < 2 || !m.is_power_of_two() {
        return Err(Error::InvalidParameter(format!(
            "grid size must be a power of two at least 2, got {m}"
        )));
    }
    Ok(())
}

/// Estimate `sin²(πy/M)` read off outcome `y`.
pub fn outcome_estimate(y: usize, m: usize) -> f64 {
    (PI * y as f64 / m as f64).sin().powi(2)
}

/// One amplitude estimate with `M` grid points.
pub fn amp_estimate<R: Rng + ?Sized>(a: f64, m: usize, rng: &mut R) -> Result<f64> {
    let probs = phase_outcome_distribution(a, m)?;
    Ok(outcome_estimate(draw(&probs, rng), m))
}

/// Median of `reps` independent amplitude estimates.
pub fn amp_estimate_median<R: Rng + ?Sized>(a: f64, m: usize, reps: usize, rng: &mut R) -> Result<f64> {
    let probs = phase_outcome_distribution(a, m)?;
    let mut draws: Vec<f64> = (0..reps.max(1))
        .map(|_| outcome_estimate(draw(&probs, rng), m))
        .collect();
    draws.sort_by(f64::total_cmp);
    Ok(draws[draws.len() / 2])
}

/// Odd repetition count whose median fails with probability at most `η`,
/// by Hoeffding's bound on the single-run success rate.
pub fn median_repetitions(eta: f64) -> usize {
    let gap = SINGLE_RUN_SUCCESS - 0.5;
    let r = ((1.0 / eta).ln() / (2.0 * gap * gap)).ceil().max(1.0) as usize;
    r | 1
}

/// `2π√(a(1−a))/M + π²/M²`, met by one estimate with probability `8/π²`.
pub fn amplitude_error_bound(a: f64, m: usize) -> f64 {
    let mf = m as f64;
    2.0 * PI * (a * (1.0 - a)).sqrt() / mf + PI * PI / (mf * mf)
}

/// `2πa(1−a)/M + π²/M²`, which is tighter than the achievable bound
/// whenever `a(1−a) < 1`.
pub fn literal_amplitude_error_bound(a: f64, m: usize) -> f64 {
    let mf = m as f64;
    2.0 * PI * a * (1.0 - a) / mf + PI * PI / (mf * mf)
}

pub(crate) fn draw<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub estimate: f64,
    pub delta: f64,
    pub tau: f64,
    /// `σ ln(1/Δ)/τ`.
    pub accuracy: f64,
    pub queries: u64,
}

/// `⌈c · τ · max(ln τ, 1)^{3/2} · max(ln ln τ, 1)⌉`.
pub fn quantum_query_cost(tau: f64, c: f64) -> u64 {
    let l = tau.ln().max(1.0);
    let ll = l.ln().max(1.0);
    (c * tau * l.powf(1.5) * ll).ceil() as u64
}

/// Model-level quantum estimate of a mean `mu` for noise with parameter
/// `sigma`; charges [`quantum_query_cost`] evaluations.
pub fn q_mean_estimate<R: Rng + ?Sized>(
    mu: f64,
    sigma: f64,
    tau: f64,
    delta: f64,
    cost_constant: f64,
    rng: &mut R,
    ledger: &QueryLedger,
) -> Result<MeanEstimate> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    let log_inv = (1.0 / delta).ln();
    if !(tau >= log_inv) || !tau.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "tau = {tau} is below ln(1/delta) = {log_inv}"
        )));
    }
    let accuracy = sigma * log_inv / tau;
    let queries = quantum_query_cost(tau, cost_constant);
    ledger.charge(QueryKind::Evaluation, queries);
    let error = if sigma == 0.0 {
        0.0
    } else {
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        if rng.random::<f64>() < delta {
            sign * accuracy * rng.random_range(1.0..3.0)
        } else {
            sign * accuracy * rng.random::<f64>()
        }
    };
    Ok(MeanEstimate {
        estimate: mu + error,
        delta,
        tau,
        accuracy,
        queries,
    })
}

/// Sample mean of `k` noisy draws around `mu`; charges `k` evaluations.
pub fn classical_mean_estimate<R: Rng + ?Sized>(
    mu: f64,
    family: NoiseFamily,
    sigma: f64,
    k: u64,
    rng: &mut R,
    ledger: &QueryLedger,
) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidParameter(
            "classical estimate needs at least one sample".into(),
        ));
    }
    ledger.charge(QueryKind::Evaluation, k);
    Ok(mu + noise_mean(family, sigma, k, rng))
}

/// Queries the quantum model needs for accuracy `eps` at confidence `Δ`:
/// `τ = max(σ ln(1/Δ)/ε, ln(1/Δ))` charged by [`quantum_query_cost`].
pub fn quantum_queries_for(eps: f64, sigma: f64, delta: f64, c: f64) -> u64 {
    let log_inv = (1.0 / delta).ln();
    quantum_query_cost((sigma * log_inv / eps).max(log_inv), c)
}

/// Queries each estimator needs for one target accuracy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TradeoffPoint {
    pub eps: f64,
    pub quantum_queries: u64,
    pub classical_queries: u64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TradeoffStudy {
    pub sigma: f64,
    pub delta: f64,
    pub trials: usize,
    pub points: Vec<TradeoffPoint>,
    /// Log-log slope of the quantum-to-classical ratio against `ε`.
    pub slope: f64,
}

/// Compares, for each target accuracy, the quantum charge with the
/// smallest classical sample count whose empirical failure rate over
/// `trials` Gaussian runs is at most `Δ`.
pub fn tradeoff_study(eps: &[f64], sigma: f64, delta: f64, trials: usize, seeder: &Seeder) -> Result<TradeoffStudy> {
    let mut points = Vec::with_capacity(eps.len());
    for (i, &e) in eps.iter().enumerate() {
        let quantum_queries = quantum_queries_for(e, sigma, delta, DEFAULT_COST_CONSTANT);
        let classical_queries = classical_samples_for(e, sigma, delta, trials, seeder.child(i as u64))?;
        points.push(TradeoffPoint {
            eps: e,
            quantum_queries,
            classical_queries,
            ratio: quantum_queries as f64 / classical_queries as f64,
        });
    }
    let xs: Vec<f64> = points.iter().map(|p| p.eps).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.ratio).collect();
    let slope = log_log_slope(&xs, &ys)?;
    Ok(TradeoffStudy {
        sigma,
        delta,
        trials,
        points,
        slope,
    })
}

/// Smallest `k` whose sample mean misses by more than `eps` in at most a
/// `delta` fraction of `trials` Gaussian runs, found by bisection.
pub fn classical_samples_for(eps: f64, sigma: f64, delta: f64, trials: usize, seeder: Seeder) -> Result<u64> {
    if sigma == 0.0 {
        return Ok(1);
    }
    let fails = |k: u64| -> bool {
        let mut rng = seeder.stream(k);
        let misses = (0..trials)
            .filter(|_| noise_mean(NoiseFamily::Gaussian, sigma, k, &mut rng).abs() > eps)
            .count();
        misses as f64 > delta * trials as f64
    };
    let mut hi = 1u64;
    while fails(hi) {
        if hi >= 1 << 40 {
            return Err(Error::IterationCap {
                what: "classical sample search",
                cap: 40,
            });
        }
        hi *= 2;
    }
    let mut lo = hi / 2;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if fails(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::{prop_assert, proptest};

    #[test]
    fn zero_amplitude_is_exact() {
        let mut rng = Seeder::new(1).stream(0);
        for _ in 0..100 {
            assert_eq!(amp_estimate(0.0, 16, &mut rng).unwrap(), 0.0);
        }
    }

    #[test]
    fn grid_points_are_exact() {
        let a = (PI * 3.0 / 16.0).sin().powi(2);
        let mut rng = Seeder::new(2).stream(0);
        for _ in 0..100 {
            assert!((amp_estimate(a, 16, &mut rng).unwrap() - a).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_inputs() {
        let mut rng = Seeder::new(3).stream(0);
        assert!(amp_estimate(1.5, 16, &mut rng).is_err());
        assert!(amp_estimate(0.5, 12, &mut rng).is_err());
        let ledger = QueryLedger::new();
        assert!(q_mean_estimate(0.0, 1.0, 1.0, 0.01, 1.0, &mut rng, &ledger).is_err());
        assert!(classical_mean_estimate(0.0, NoiseFamily::Gaussian, 1.0, 0, &mut rng, &ledger).is_err());
    }

    #[test]
    fn noiseless_estimates_are_exact() {
        let mut rng = Seeder::new(4).stream(0);
        let ledger = QueryLedger::new();
        let q = q_mean_estimate(0.7, 0.0, 10.0, 0.1, 1.0, &mut rng, &ledger).unwrap();
        assert_eq!(q.estimate, 0.7);
        let c = classical_mean_estimate(0.7, NoiseFamily::Gaussian, 0.0, 1, &mut rng, &ledger).unwrap();
        assert_eq!(c, 0.7);
    }

    #[test]
    fn median_repetitions_are_odd() {
        for eta in [0.5, 0.1, 0.05, 1e-3] {
            assert_eq!(median_repetitions(eta) % 2, 1);
        }
        assert!(median_repetitions(1e-3) > median_repetitions(0.1));
    }

    proptest! {
        #[test]
        fn outcome_law_is_a_distribution(a in 0.0f64..=1.0, bits in 1u32..8) {
            let p = phase_outcome_distribution(a, 1 << bits).unwrap();
            prop_assert!(p.iter().all(|&v| v >= 0.0));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn charge_is_monotone_and_at_least_tau(tau in 1.0f64..1e6, step in 1.0f64..1e3) {
            let lo = quantum_query_cost(tau, 1.0);
            prop_assert!(lo as f64 >= tau);
            prop_assert!(quantum_query_cost(tau + step, 1.0) >= lo);
        }
    }
}
