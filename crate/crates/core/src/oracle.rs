//! Objective oracles: approximately convex functions `F = f + p` with a
//! bounded deterministic perturbation `p`, and stochastic evaluations
//! `f(x) + noise` with sub-Gaussian noise.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Binomial, Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::dot;
use crate::ledger::{QueryKind, QueryLedger};
use crate::rng::splitmix64;

/// Convex base functions with analytic minimizer and minimum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BaseFunction {
    /// `scale · ‖x − center‖² + offset`.
    Quadratic { center: Vec<f64>, scale: f64, offset: f64 },
    /// `scale · ‖x − center‖ + offset`.
    Norm { center: Vec<f64>, scale: f64, offset: f64 },
    /// `max_i (a_i · x + b_i)`. The caller certifies the minimizer.
    MaxAffine {
        slopes: Vec<Vec<f64>>,
        intercepts: Vec<f64>,
        minimizer: Vec<f64>,
        minimum: f64,
    },
}

impl BaseFunction {
    pub fn quadratic(center: Vec<f64>, scale: f64) -> Self {
        BaseFunction::Quadratic {
            center,
            scale,
            offset: 0.0,
        }
    }

    pub fn norm(center: Vec<f64>, scale: f64) -> Self {
        BaseFunction::Norm {
            center,
            scale,
            offset: 0.0,
        }
    }

    /// `scale · ‖x − center‖∞` written as a maximum of `2n` affine pieces.
    pub fn linf_cone(center: Vec<f64>, scale: f64) -> Self {
        let n = center.len();
        let mut slopes = Vec::with_capacity(2 * n);
        let mut intercepts = Vec::with_capacity(2 * n);
        for i in 0..n {
            for sign in [1.0, -1.0] {
                let mut a = vec![0.0; n];
                a[i] = sign * scale;
                slopes.push(a);
                intercepts.push(-sign * scale * center[i]);
            }
        }
        BaseFunction::MaxAffine {
            slopes,
            intercepts,
            minimizer: center,
            minimum: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            BaseFunction::Quadratic { center, .. } | BaseFunction::Norm { center, .. } => center.len(),
            BaseFunction::MaxAffine { minimizer, .. } => minimizer.len(),
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            BaseFunction::Quadratic { center, scale, offset } => {
                scale * x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum::<f64>() + offset
            }
            BaseFunction::Norm { center, scale, offset } => {
                scale * x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum::<f64>().sqrt() + offset
            }
            BaseFunction::MaxAffine { slopes, intercepts, .. } => slopes
                .iter()
                .zip(intercepts)
                .map(|(a, b)| dot(a, x) + b)
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }

    pub fn minimizer(&self) -> &[f64] {
        match self {
            BaseFunction::Quadratic { center, .. } | BaseFunction::Norm { center, .. } => center,
            BaseFunction::MaxAffine { minimizer, .. } => minimizer,
        }
    }

    pub fn minimum(&self) -> f64 {
        match self {
            BaseFunction::Quadratic { offset, .. } | BaseFunction::Norm { offset, .. } => *offset,
            BaseFunction::MaxAffine { minimum, .. } => *minimum,
        }
    }

    /// Lipschitz constant with respect to `‖·‖∞` over points with
    /// `‖x‖ ≤ domain_radius`.
    pub fn lipschitz_linf(&self, domain_radius: f64) -> f64 {
        let n = self.dim() as f64;
        match self {
            BaseFunction::Quadratic { center, scale, .. } => {
                2.0 * scale.abs() * (domain_radius + dot(center, center).sqrt()) * n.sqrt()
            }
            BaseFunction::Norm { scale, .. } => scale.abs() * n.sqrt(),
            BaseFunction::MaxAffine { slopes, .. } => slopes
                .iter()
                .map(|a| a.iter().map(|v| v.abs()).sum::<f64>())
                .fold(0.0, f64::max),
        }
    }

    /// Modulus of strong convexity, zero for the non-smooth variants.
    pub fn strong_convexity(&self) -> f64 {
        match self {
            BaseFunction::Quadratic { scale, .. } => 2.0 * scale,
            _ => 0.0,
        }
    }
}

/// Bounded perturbations `p` with `|p(x)| ≤ amplitude` by construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Perturbation {
    None,
    /// `amplitude · sin(frequency · w·x + phase)` with `w_i = 1 + 0.618 i`.
    Sinusoidal {
        amplitude: f64,
        frequency: f64,
        phase: f64,
    },
    /// A pseudorandom value in `[−amplitude, amplitude]` keyed by the bit
    /// pattern of `x`.
    SeededHash {
        amplitude: f64,
        seed: u64,
    },
}

impl Perturbation {
    pub fn amplitude(&self) -> f64 {
        match self {
            Perturbation::None => 0.0,
            Perturbation::Sinusoidal { amplitude, .. } | Perturbation::SeededHash { amplitude, .. } => amplitude.abs(),
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Perturbation::None => 0.0,
            Perturbation::Sinusoidal {
                amplitude,
                frequency,
                phase,
            } => {
                let s: f64 = x.iter().enumerate().map(|(i, v)| (1.0 + 0.618 * i as f64) * v).sum();
                amplitude * (frequency * s + phase).sin()
            }
            Perturbation::SeededHash { amplitude, seed } => {
                let mut h = splitmix64(*seed);
                for v in x {
                    h = splitmix64(h ^ v.to_bits());
                }
                let unit = (h >> 11) as f64 / (1u64 << 53) as f64;
                amplitude * (2.0 * unit - 1.0)
            }
        }
    }
}

/// `F = f + p`, evaluated deterministically and charged to a ledger.
#[derive(Clone, Debug)]
pub struct ApproxConvexOracle {
    base: BaseFunction,
    perturbation: Perturbation,
    ledger: Arc<QueryLedger>,
}

impl ApproxConvexOracle {
    pub fn new(base: BaseFunction, perturbation: Perturbation) -> Self {
        Self {
            base,
            perturbation,
            ledger: Arc::new(QueryLedger::new()),
        }
    }

    pub fn with_ledger(mut self, ledger: Arc<QueryLedger>) -> Self {
        self.ledger = ledger;
        self
    }

    pub fn ledger(&self) -> &Arc<QueryLedger> {
        &self.ledger
    }

    pub fn base(&self) -> &BaseFunction {
        &self.base
    }

    pub fn perturbation(&self) -> &Perturbation {
        &self.perturbation
    }

    /// `F(x)`; charges one evaluation.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.ledger.charge(QueryKind::Evaluation, 1);
        self.value(x)
    }

    /// `F(x)` without touching the ledger, for reporting.
    pub fn value(&self, x: &[f64]) -> f64 {
        self.base.value(x) + self.perturbation.value(x)
    }

    /// The convex part `f(x)`, uncharged.
    pub fn convex_value(&self, x: &[f64]) -> f64 {
        self.base.value(x)
    }

    /// Width of the perturbation band, `sup F − f − inf F − f ≤ β`.
    pub fn beta(&self) -> f64 {
        2.0 * self.perturbation.amplitude()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseFamily {
    /// `N(0, σ²)`.
    Gaussian,
    /// Uniform on `[−σ, σ]`.
    Bounded,
    /// `±σ` with equal probability.
    TwoPoint,
}

impl NoiseFamily {
    pub fn sample<R: Rng + ?Sized>(&self, sigma: f64, rng: &mut R) -> f64 {
        match self {
            NoiseFamily::Gaussian => sigma * rng.sample::<f64, _>(StandardNormal),
            NoiseFamily::Bounded => sigma * (2.0 * rng.random::<f64>() - 1.0),
            NoiseFamily::TwoPoint => {
                if rng.random::<bool>() {
                    sigma
                } else {
                    -sigma
                }
            }
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "gaussian" => Ok(NoiseFamily::Gaussian),
            "bounded" => Ok(NoiseFamily::Bounded),
            "two-point" => Ok(NoiseFamily::TwoPoint),
            other => Err(Error::Config(format!("unknown noise family `{other}`"))),
        }
    }
}

/// Mean of `k` independent noise draws, sampled from its exact law where one
/// is cheap to draw (Gaussian, two-point) and by direct summation otherwise.
/// Bounded noise with `k > 4096` falls back to the matching normal law.
pub fn noise_mean<R: Rng + ?Sized>(family: NoiseFamily, sigma: f64, k: u64, rng: &mut R) -> f64 {
    if sigma == 0.0 || k == 0 {
        return 0.0;
    }
    let kf = k as f64;
    match family {
        NoiseFamily::Gaussian => sigma / kf.sqrt() * rng.sample::<f64, _>(StandardNormal),
        NoiseFamily::TwoPoint => {
            let heads = Binomial::new(k, 0.5).expect("valid binomial").sample(rng) as f64;
            sigma * (2.0 * heads - kf) / kf
        }
        NoiseFamily::Bounded if k <= 4096 => (0..k).map(|_| family.sample(sigma, rng)).sum::<f64>() / kf,
        NoiseFamily::Bounded => Normal::new(0.0, sigma / (3.0 * kf).sqrt())
            .expect("valid normal")
            .sample(rng),
    }
}

/// `f(x) + ε_x` with fresh sub-Gaussian noise of parameter `σ` per call.
#[derive(Clone, Debug)]
pub struct StochasticOracle {
    base: BaseFunction,
    noise: NoiseFamily,
    sigma: f64,
    ledger: Arc<QueryLedger>,
}

impl StochasticOracle {
    pub fn new(base: BaseFunction, noise: NoiseFamily, sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "sigma must be finite and nonnegative, got {sigma}"
            )));
        }
        Ok(Self {
            base,
            noise,
            sigma,
            ledger: Arc::new(QueryLedger::new()),
        })
    }

    pub fn with_ledger(mut self, ledger: Arc<QueryLedger>) -> Self {
        self.ledger = ledger;
        self
    }

    pub fn ledger(&self) -> &Arc<QueryLedger> {
        &self.ledger
    }

    pub fn base(&self) -> &BaseFunction {
        &self.base
    }

    pub fn noise(&self) -> NoiseFamily {
        self.noise
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// One noisy evaluation; charges one evaluation.
    pub fn eval<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> f64 {
        self.ledger.charge(QueryKind::Evaluation, 1);
        let fx = self.base.value(x);
        if self.sigma == 0.0 {
            return fx;
        }
        fx + self.noise.sample(self.sigma, rng)
    }

    /// Mean of `k` noisy evaluations at `x`; charges `k` evaluations.
    pub fn sample_mean<R: Rng + ?Sized>(&self, x: &[f64], k: u64, rng: &mut R) -> f64 {
        self.ledger.charge(QueryKind::Evaluation, k);
        self.base.value(x) + noise_mean(self.noise, self.sigma, k, rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Seeder;
    use proptest::{prop_assert, proptest};

    #[test]
    fn unperturbed_oracle_is_exact_and_charged() {
        let o = ApproxConvexOracle::new(BaseFunction::quadratic(vec![0.5, 0.0], 1.0), Perturbation::None);
        assert_eq!(o.eval(&[0.5, 1.0]), 1.0);
        assert_eq!(o.eval(&[0.5, 1.0]), o.eval(&[0.5, 1.0]));
        assert_eq!(o.ledger().count(QueryKind::Evaluation), 3);
    }

    #[test]
    fn perturbation_bounds_hold_on_probes() {
        let mut rng = Seeder::new(1).stream(0);
        for p in [
            Perturbation::Sinusoidal {
                amplitude: 0.05,
                frequency: 40.0,
                phase: 0.3,
            },
            Perturbation::SeededHash {
                amplitude: 0.05,
                seed: 9,
            },
        ] {
            let o = ApproxConvexOracle::new(BaseFunction::norm(vec![0.0; 3], 1.0), p);
            let mut worst: f64 = 0.0;
            for _ in 0..10_000 {
                let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
                worst = worst.max((o.eval(&x) - o.convex_value(&x)).abs());
            }
            assert!(worst <= 0.05);
            assert!(worst > 0.04);
        }
    }

    #[test]
    fn linf_cone_matches_definition() {
        let f = BaseFunction::linf_cone(vec![0.2, -0.1], 2.0);
        assert!((f.value(&[0.7, 0.0]) - 1.0).abs() < 1e-15);
        assert_eq!(f.value(&[0.2, -0.1]), 0.0);
        assert_eq!(f.lipschitz_linf(1.0), 2.0);
    }

    #[test]
    fn noiseless_stochastic_oracle_is_exact() {
        let o = StochasticOracle::new(BaseFunction::quadratic(vec![0.0], 1.0), NoiseFamily::Gaussian, 0.0).unwrap();
        let mut rng = Seeder::new(0).stream(0);
        assert_eq!(o.eval(&[0.3], &mut rng), 0.09);
    }

    #[test]
    fn gaussian_mean_and_tail() {
        let o = StochasticOracle::new(BaseFunction::quadratic(vec![0.0], 1.0), NoiseFamily::Gaussian, 1.0).unwrap();
        let mut rng = Seeder::new(2).stream(0);
        let draws = 100_000;
        let mut sum = 0.0;
        let mut tail = 0usize;
        for _ in 0..draws {
            let e = o.eval(&[0.5], &mut rng) - 0.25;
            sum += e;
            if e.abs() >= 2.0 {
                tail += 1;
            }
        }
        assert!((sum / draws as f64).abs() <= 3.0 / (draws as f64).sqrt());
        let freq = tail as f64 / draws as f64;
        let bound = 2.0 * (-2.0f64).exp();
        assert!(freq <= bound + 3.0 * (bound / draws as f64).sqrt());
    }

    #[test]
    fn noise_mean_matches_variance() {
        let mut rng = Seeder::new(4).stream(0);
        for family in [NoiseFamily::Gaussian, NoiseFamily::Bounded, NoiseFamily::TwoPoint] {
            let k = 50;
            let reps = 20_000;
            let var: f64 = (0..reps)
                .map(|_| noise_mean(family, 1.0, k, &mut rng).powi(2))
                .sum::<f64>()
                / reps as f64;
            let single = match family {
                NoiseFamily::Bounded => 1.0 / 3.0,
                _ => 1.0,
            };
            let target = single / k as f64;
            assert!((var - target).abs() < 0.06 * target, "{family:?}: {var} vs {target}");
        }
    }

    proptest! {
        #[test]
        fn sub_gaussian_tails(seed in 0u64..50, t in 0.5f64..3.0) {
            let mut rng = Seeder::new(seed).stream(0);
            for family in [NoiseFamily::Gaussian, NoiseFamily::Bounded, NoiseFamily::TwoPoint] {
                let draws = 4000;
                let hits = (0..draws).filter(|_| family.sample(1.0, &mut rng).abs() >= t).count();
                let bound = 2.0 * (-t * t / 2.0).exp();
                let freq = hits as f64 / draws as f64;
                prop_assert!(freq <= bound.min(1.0) + 4.0 * (0.25 / draws as f64).sqrt());
            }
        }
    }
}
