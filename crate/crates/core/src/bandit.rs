//! Zeroth-order stochastic convex bandits.
//!
//! The learner plays a point every round and pays `f(x_t) − f*`. It sees
//! `f` only through a snapped oracle: points are rounded to an `α`-grid and
//! each evaluation is a mean estimate of the noisy value at the grid point.
//! Rounds are split into doubling intervals. During interval `i` the
//! learner keeps playing the previous interval's output while it spends the
//! interval's query budget on `K` budgeted annealing runs, then picks the
//! run output with the lowest estimated value.
//!
//! One round buys [`BanditParams::queries_per_round`] oracle queries. The
//! quantum-model estimator pays `τ`-linear cost per evaluation and the
//! classical estimator pays `1/accuracy²`, so at equal accuracy targets the
//! classical learner runs out of budget first.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::annealing::{make_schedule, sim_annealing, AnnealOptions, Objective, ScheduleOverrides};
use crate::error::{Error, Result};
use crate::geometry::ConvexBody;
use crate::ledger::{QueryKind, QueryLedger};
use crate::meanest::{classical_mean_estimate, q_mean_estimate, quantum_query_cost, DEFAULT_COST_CONSTANT};
use crate::oracle::{BaseFunction, NoiseFamily};
use crate::rng::{Seeder, StreamRng};
use crate::stats::log_log_slope;

/// Largest per-interval accuracy handed to the annealer; coarser targets
/// are clamped here.
pub const MAX_INTERVAL_EPS: f64 = 0.5;

/// Evaluations a standalone [`qmin_stoc_conv`] call is budgeted for; a
/// complete run of the default inner schedule on the two-dimensional
/// quadratic instance takes 5 000 to 35 000.
pub const DEFAULT_EVALUATIONS: u64 = 50_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    QuantumModel,
    Classical,
}

/// A convex `f` on the ball of radius `R` about the origin, with values in
/// `[0, 1]` there.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BanditInstance {
    pub function: BaseFunction,
    pub radius: f64,
    pub sigma: f64,
    pub noise: NoiseFamily,
    pub horizon: usize,
}

impl BanditInstance {
    pub fn new(function: BaseFunction, radius: f64, sigma: f64, noise: NoiseFamily, horizon: usize) -> Result<Self> {
        if !(radius >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "radius must be at least 1, got {radius}"
            )));
        }
        if !(sigma >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sigma must be nonnegative, got {sigma}"
            )));
        }
        if horizon == 0 {
            return Err(Error::InvalidParameter("horizon must be at least 1".into()));
        }
        let instance = Self {
            function,
            radius,
            sigma,
            noise,
            horizon,
        };
        let norm: f64 = instance.function.minimizer().iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > radius {
            return Err(Error::InvalidParameter("minimizer lies outside the body".into()));
        }
        let (lo, hi) = (instance.optimum(), instance.max_value());
        if lo < 0.0 || hi > 1.0 + 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "f ranges over [{lo}, {hi}], outside [0, 1]"
            )));
        }
        Ok(instance)
    }

    /// Quadratic with minimum 0 at `(0.4, −0.3, 0, …)`, scaled so that its
    /// maximum over the ball is 1.
    pub fn quadratic(dim: usize, radius: f64, sigma: f64, horizon: usize) -> Result<Self> {
        let mut center = vec![0.0; dim];
        center[0] = 0.4;
        if dim > 1 {
            center[1] = -0.3;
        }
        let reach = radius + center.iter().map(|v| v * v).sum::<f64>().sqrt();
        let function = BaseFunction::quadratic(center, 1.0 / (reach * reach));
        Self::new(function, radius, sigma, NoiseFamily::Gaussian, horizon)
    }

    pub fn dim(&self) -> usize {
        self.function.dim()
    }

    pub fn body(&self) -> Result<ConvexBody> {
        ConvexBody::ball(vec![0.0; self.dim()], self.radius)
    }

    pub fn optimum(&self) -> f64 {
        self.function.minimum()
    }

    pub fn lipschitz(&self) -> f64 {
        self.function.lipschitz_linf(self.radius)
    }

    pub fn regret(&self, x: &[f64]) -> f64 {
        self.function.value(x) - self.optimum()
    }

    /// Exact maximum of `f` over the ball.
    pub fn max_value(&self) -> f64 {
        let r = self.radius;
        match &self.function {
            BaseFunction::Quadratic { center, scale, offset } => {
                let reach = r + center.iter().map(|v| v * v).sum::<f64>().sqrt();
                offset + scale * reach * reach
            }
            BaseFunction::Norm { center, scale, offset } => {
                offset + scale * (r + center.iter().map(|v| v * v).sum::<f64>().sqrt())
            }
            BaseFunction::MaxAffine { slopes, intercepts, .. } => slopes
                .iter()
                .zip(intercepts)
                .map(|(a, b)| b + r * a.iter().map(|v| v * v).sum::<f64>().sqrt())
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// Evaluation on the grid `α ℤⁿ` with a mean estimate per call, sized so
/// that every answer is within `ε/(2n)` of `f` at the grid point with
/// probability `1 − Δ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnappedOracle {
    pub eps: f64,
    pub alpha: f64,
    /// `t = √(n ln(R/α) + ln 10)`.
    pub t: f64,
    /// `Δ = e^{−t²}`.
    pub delta: f64,
    /// `τ = 2nσt²/ε`, raised to `t²` where the estimator needs it.
    pub tau: f64,
    pub sigma: f64,
    pub noise: NoiseFamily,
    pub estimator: Estimator,
    pub cost_constant: f64,
}

impl SnappedOracle {
    pub fn new(instance: &BanditInstance, eps: f64, estimator: Estimator, cost_constant: f64) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
        }
        let n = instance.dim() as f64;
        let alpha = eps / (2.0 * n * instance.lipschitz().max(f64::MIN_POSITIVE));
        let t2 = n * (instance.radius / alpha).ln() + 10f64.ln();
        let tau = (2.0 * n * instance.sigma * t2 / eps).max(t2);
        Ok(Self {
            eps,
            alpha,
            t: t2.sqrt(),
            delta: (-t2).exp(),
            tau,
            sigma: instance.sigma,
            noise: instance.noise,
            estimator,
            cost_constant,
        })
    }

    /// Target accuracy `ε/(2n)` of a single evaluation.
    pub fn accuracy(&self, dim: usize) -> f64 {
        self.eps / (2.0 * dim as f64)
    }

    /// Classical samples for accuracy `ε/(2n)` at confidence `1 − Δ` under
    /// the sub-Gaussian tail `2 exp(−k s²/(2σ²))`.
    pub fn classical_samples(&self, dim: usize) -> u64 {
        let s = self.accuracy(dim);
        let k = 2.0 * self.sigma * self.sigma * (self.t * self.t + 2f64.ln()) / (s * s);
        (k.ceil() as u64).max(1)
    }

    /// Queries one evaluation charges. A noiseless oracle is read once.
    pub fn cost(&self, dim: usize) -> u64 {
        if self.sigma == 0.0 {
            return 1;
        }
        match self.estimator {
            Estimator::QuantumModel => quantum_query_cost(self.tau, self.cost_constant),
            Estimator::Classical => self.classical_samples(dim),
        }
    }

    /// [`DEFAULT_EVALUATIONS`] evaluations at this oracle's cost.
    pub fn default_budget(&self, dim: usize) -> u64 {
        DEFAULT_EVALUATIONS.saturating_mul(self.cost(dim))
    }

    /// Nearest point of `α ℤⁿ` coordinatewise, with ties rounded down.
    pub fn snap(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|v| self.alpha * (v / self.alpha - 0.5).ceil()).collect()
    }

    pub fn eval<R: Rng + ?Sized>(
        &self,
        function: &BaseFunction,
        x: &[f64],
        rng: &mut R,
        ledger: &QueryLedger,
    ) -> Result<f64> {
        let mu = function.value(&self.snap(x));
        if self.sigma == 0.0 {
            ledger.charge(QueryKind::Evaluation, 1);
            return Ok(mu);
        }
        match self.estimator {
            Estimator::QuantumModel => {
                Ok(q_mean_estimate(mu, self.sigma, self.tau, self.delta, self.cost_constant, rng, ledger)?.estimate)
            }
            Estimator::Classical => {
                classical_mean_estimate(mu, self.noise, self.sigma, self.classical_samples(x.len()), rng, ledger)
            }
        }
    }
}

/// The snapped oracle behind a hard query budget.
struct BudgetedObjective<'a> {
    instance: &'a BanditInstance,
    oracle: &'a SnappedOracle,
    ledger: &'a QueryLedger,
    budget: u64,
    cost: u64,
}

impl Objective for BudgetedObjective<'_> {
    fn beta(&self) -> f64 {
        self.oracle.eps / self.instance.dim() as f64
    }

    fn eval(&self, x: &[f64], noise: &mut StreamRng) -> Result<f64> {
        if self.ledger.count(QueryKind::Evaluation) + self.cost > self.budget {
            return Err(Error::BudgetExhausted(self.budget));
        }
        self.oracle.eval(&self.instance.function, x, noise, self.ledger)
    }
}

/// Annealing schedule knobs for the inner optimizer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InnerSchedule {
    pub strands: usize,
    pub steps: usize,
}

impl Default for InnerSchedule {
    fn default() -> Self {
        Self { strands: 4, steps: 4 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinReport {
    pub point: Vec<f64>,
    /// Estimated value at `point`, infinite when nothing was evaluated.
    pub estimate: f64,
    pub truncated: bool,
    pub budget_exhausted: bool,
    pub epochs_completed: usize,
    pub queries: u64,
}

/// Budgeted annealing against the snapped oracle at accuracy `ε`.
pub fn qmin_stoc_conv(
    instance: &BanditInstance,
    oracle: &SnappedOracle,
    budget: u64,
    inner: &InnerSchedule,
    seeder: &Seeder,
) -> Result<MinReport> {
    if budget == 0 {
        return Err(Error::InvalidParameter("budget must be positive".into()));
    }
    let n = instance.dim();
    let body = instance.body()?;
    let overrides = ScheduleOverrides {
        strands: Some(inner.strands),
        steps: Some(inner.steps),
        ..Default::default()
    };
    let schedule = make_schedule(n, oracle.eps.min(MAX_INTERVAL_EPS), &overrides)?;
    let ledger = QueryLedger::new();
    let objective = BudgetedObjective {
        instance,
        oracle,
        ledger: &ledger,
        budget,
        cost: oracle.cost(n),
    };
    let options = AnnealOptions {
        sequential: true,
        ..Default::default()
    };
    let report = sim_annealing(&objective, &body, &schedule, seeder, options, &|| ledger.snapshot())?;
    Ok(MinReport {
        point: report.best_point,
        estimate: report.best_value,
        truncated: report.truncated,
        budget_exhausted: report.budget_exhausted,
        epochs_completed: report.epochs_completed,
        queries: ledger.count(QueryKind::Evaluation),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BanditParams {
    /// Oracle queries one round buys.
    pub queries_per_round: u64,
    /// `c` in the per-interval accuracy `c · n⁵ ln(TR) / |T_i|`.
    pub accuracy_constant: f64,
    pub cost_constant: f64,
    pub inner: InnerSchedule,
}

impl Default for BanditParams {
    fn default() -> Self {
        Self {
            queries_per_round: 1 << 33,
            accuracy_constant: 3e-4,
            cost_constant: DEFAULT_COST_CONSTANT,
            inner: InnerSchedule::default(),
        }
    }
}

impl BanditParams {
    pub fn interval_eps(&self, instance: &BanditInstance, len: usize) -> f64 {
        let n = instance.dim() as f64;
        let log = (instance.horizon as f64 * instance.radius).ln().max(1.0);
        (self.accuracy_constant * n.powi(5) * log / len as f64).min(MAX_INTERVAL_EPS)
    }
}

/// Lengths `1, 2, 4, …` with the last one cut so they sum to `T`.
pub fn doubling_intervals(horizon: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let (mut left, mut len) = (horizon, 1usize);
    while left > 0 {
        let l = len.min(left);
        out.push(l);
        left -= l;
        len = len.saturating_mul(2);
    }
    out
}

/// `⌊log₂(TR)⌋`, at least one.
pub fn repeats(horizon: usize, radius: f64) -> usize {
    ((horizon as f64 * radius).log2().floor() as usize).max(1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegretRow {
    pub t: usize,
    pub x: Vec<f64>,
    pub instant_regret: f64,
    pub cum_regret: f64,
    pub queries: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalSummary {
    pub len: usize,
    pub eps: f64,
    pub repeats: usize,
    pub repeat_budget: u64,
    /// Repeats stopped before their first epoch finished.
    pub truncated_repeats: usize,
    /// Repeats stopped by the budget at any point.
    pub exhausted_repeats: usize,
    pub queries: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegretTrace {
    pub estimator: Estimator,
    pub rows: Vec<RegretRow>,
    pub intervals: Vec<IntervalSummary>,
}

impl RegretTrace {
    pub fn cumulative_regret(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.cum_regret)
    }

    pub fn queries(&self) -> u64 {
        self.rows.last().map_or(0, |r| r.queries)
    }

    pub fn to_csv(&self) -> String {
        let dim = self.rows.first().map_or(0, |r| r.x.len());
        let mut out = String::from("t");
        for i in 1..=dim {
            out.push_str(&format!(",x{i}"));
        }
        out.push_str(",instant_regret,cum_regret,queries\n");
        for r in &self.rows {
            out.push_str(&r.t.to_string());
            for v in &r.x {
                out.push_str(&format!(",{v}"));
            }
            out.push_str(&format!(",{},{},{}\n", r.instant_regret, r.cum_regret, r.queries));
        }
        out
    }
}

/// The doubling-interval learner with quantum-model mean estimation.
pub fn qbandits(instance: &BanditInstance, params: &BanditParams, seeder: &Seeder) -> Result<RegretTrace> {
    run_bandit(instance, params, Estimator::QuantumModel, seeder)
}

/// The same learner with classical sample means.
pub fn classical_epoch_bandit(
    instance: &BanditInstance,
    params: &BanditParams,
    seeder: &Seeder,
) -> Result<RegretTrace> {
    run_bandit(instance, params, Estimator::Classical, seeder)
}

pub fn run_bandit(
    instance: &BanditInstance,
    params: &BanditParams,
    estimator: Estimator,
    seeder: &Seeder,
) -> Result<RegretTrace> {
    let n = instance.dim();
    let k_full = repeats(instance.horizon, instance.radius);
    let mut play = vec![0.0; n];
    let mut rows = Vec::with_capacity(instance.horizon);
    let mut intervals = Vec::new();
    let (mut t, mut cum, mut queries) = (0usize, 0.0, 0u64);
    for (i, len) in doubling_intervals(instance.horizon).into_iter().enumerate() {
        let eps = params.interval_eps(instance, len);
        let oracle = SnappedOracle::new(instance, eps, estimator, params.cost_constant)?;
        let cost = oracle.cost(n);
        let k = k_full.min(len);
        let budget = params.queries_per_round.saturating_mul(len as u64);
        let repeat_budget = budget.saturating_sub(k as u64 * cost) / k as u64;
        let node = seeder.child(i as u64);
        let selection = QueryLedger::new();
        let mut select_rng = node.stream(u64::MAX);
        let mut spent = 0u64;
        let (mut truncated_repeats, mut exhausted_repeats) = (0, 0);
        let mut best: Option<(f64, Vec<f64>)> = None;
        for j in 0..k {
            let out = if repeat_budget > 0 {
                qmin_stoc_conv(instance, &oracle, repeat_budget, &params.inner, &node.child(j as u64))?
            } else {
                MinReport {
                    point: vec![0.0; n],
                    estimate: f64::INFINITY,
                    truncated: true,
                    budget_exhausted: true,
                    epochs_completed: 0,
                    queries: 0,
                }
            };
            spent += out.queries;
            if out.truncated {
                truncated_repeats += 1;
            }
            if out.budget_exhausted {
                exhausted_repeats += 1;
            }
            let value = oracle.eval(&instance.function, &out.point, &mut select_rng, &selection)?;
            if best.as_ref().is_none_or(|(v, _)| value < *v) {
                best = Some((value, out.point));
            }
        }
        spent += selection.count(QueryKind::Evaluation);
        debug_assert!(spent <= budget);
        for l in 0..len {
            t += 1;
            let r = instance.regret(&play);
            cum += r;
            rows.push(RegretRow {
                t,
                x: play.clone(),
                instant_regret: r,
                cum_regret: cum,
                queries: queries + spent * (l as u64 + 1) / len as u64,
            });
        }
        queries += spent;
        intervals.push(IntervalSummary {
            len,
            eps,
            repeats: k,
            repeat_budget,
            truncated_repeats,
            exhausted_repeats,
            queries: spent,
        });
        if let Some((_, x)) = best {
            play = x;
        }
    }
    Ok(RegretTrace {
        estimator,
        rows,
        intervals,
    })
}

/// Mean cumulative regret of both learners over paired seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegretStudy {
    pub horizons: Vec<usize>,
    pub seeds: u64,
    pub quantum: Vec<f64>,
    pub classical: Vec<f64>,
    /// Log-log slopes of mean cumulative regret against `T`.
    pub quantum_slope: f64,
    pub classical_slope: f64,
}

impl RegretStudy {
    /// Smallest horizon from which the quantum-model learner stays strictly
    /// below the classical one.
    pub fn crossover(&self) -> Option<usize> {
        let mut out = None;
        for ((t, q), c) in self.horizons.iter().zip(&self.quantum).zip(&self.classical).rev() {
            if q < c {
                out = Some(*t);
            } else {
                break;
            }
        }
        out
    }
}

/// Runs both learners on `instance` at every horizon with seeds
/// `seeder.child(0..seeds)`, shared between the learners.
pub fn regret_study(
    instance: &BanditInstance,
    horizons: &[usize],
    seeds: u64,
    params: &BanditParams,
    seeder: &Seeder,
) -> Result<RegretStudy> {
    if horizons.len() < 2 || seeds == 0 {
        return Err(Error::InvalidParameter(
            "a study needs two horizons and one seed".into(),
        ));
    }
    let jobs: Vec<(usize, u64, Estimator)> = horizons
        .iter()
        .flat_map(|&t| (0..seeds).flat_map(move |s| [(t, s, Estimator::QuantumModel), (t, s, Estimator::Classical)]))
        .collect();
    let regrets: Vec<f64> = jobs
        .par_iter()
        .map(|&(t, s, est)| {
            let inst = BanditInstance {
                horizon: t,
                ..instance.clone()
            };
            Ok(run_bandit(&inst, params, est, &seeder.child(s))?.cumulative_regret())
        })
        .collect::<Result<_>>()?;
    let mean = |offset: usize| -> Vec<f64> {
        regrets
            .chunks(2 * seeds as usize)
            .map(|c| c.iter().skip(offset).step_by(2).sum::<f64>() / seeds as f64)
            .collect()
    };
    let (quantum, classical) = (mean(0), mean(1));
    let xs: Vec<f64> = horizons.iter().map(|&t| t as f64).collect();
    Ok(RegretStudy {
        horizons: horizons.to_vec(),
        seeds,
        quantum_slope: log_log_slope(&xs, &quantum)?,
        classical_slope: log_log_slope(&xs, &classical)?,
        quantum,
        classical,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::{prop_assert, prop_assert_eq, proptest};

    fn instance(sigma: f64, horizon: usize) -> BanditInstance {
        BanditInstance::quadratic(2, 2.0, sigma, horizon).unwrap()
    }

    #[test]
    fn snapping_rounds_ties_down() {
        let oracle = SnappedOracle::new(&instance(0.1, 4), 0.1, Estimator::QuantumModel, 1.0).unwrap();
        let a = oracle.alpha;
        assert_eq!(oracle.snap(&[0.5 * a, -0.5 * a]), vec![0.0, -a]);
        assert_eq!(oracle.snap(&[0.6 * a, 1.4 * a]), vec![a, a]);
    }

    #[test]
    fn quadratic_instance_spans_the_unit_interval() {
        let inst = instance(0.1, 4);
        assert!((inst.max_value() - 1.0).abs() < 1e-12);
        assert_eq!(inst.optimum(), 0.0);
    }

    #[test]
    fn tiny_budget_truncates() {
        let inst = instance(0.1, 4);
        let oracle = SnappedOracle::new(&inst, 0.1, Estimator::QuantumModel, 1.0).unwrap();
        let out = qmin_stoc_conv(&inst, &oracle, 1, &InnerSchedule::default(), &Seeder::new(1)).unwrap();
        assert!(out.truncated);
        assert_eq!(out.queries, 0);
    }

    proptest! {
        #[test]
        fn intervals_partition_the_horizon(t in 1usize..(1 << 20)) {
            let ls = doubling_intervals(t);
            prop_assert_eq!(ls.iter().sum::<usize>(), t);
            for (i, l) in ls.iter().enumerate() {
                prop_assert!(*l <= 1 << i);
            }
        }
    }
}
