//! Simulated annealing over hit-and-run walks.
//!
//! Epoch `i` targets the density proportional to `exp(-F(x)/T_i)` with
//! `T_i = (1 - 1/√n)^i`. Between epochs the strands' empirical second moment
//! is used to round the walk's direction distribution toward isotropic
//! position.

use std::cell::RefCell;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ConvexBody, LinearMap};
use crate::hitrun::{default_chord_accuracy, hit_and_run, Target, WalkState};
use crate::ledger::LedgerSnapshot;
use crate::oracle::{ApproxConvexOracle, BaseFunction, Perturbation};
use crate::rng::{Seeder, StreamRng};

/// Proposal cap for the initial uniform draws.
pub const UNIFORM_PROPOSAL_CAP: usize = 1_000_000;

/// A function the annealer can minimize.
pub trait Objective: Sync {
    /// Width `β` of the band around a convex function that contains `F`.
    fn beta(&self) -> f64;

    /// Charged evaluation of `F(x)`. `noise` is the calling strand's private
    /// stream; deterministic objectives ignore it.
    fn eval(&self, x: &[f64], noise: &mut StreamRng) -> Result<f64>;
}

impl Objective for ApproxConvexOracle {
    fn beta(&self) -> f64 {
        ApproxConvexOracle::beta(self)
    }

    fn eval(&self, x: &[f64], _noise: &mut StreamRng) -> Result<f64> {
        Ok(ApproxConvexOracle::eval(self, x))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScheduleOverrides {
    pub epochs: Option<usize>,
    pub strands: Option<usize>,
    pub steps: Option<usize>,
    /// Multiplier in `N = ⌈c_N n ln n⌉`.
    pub strand_factor: Option<f64>,
    /// Target per-epoch total-variation accuracy used to size `ε_ℓ`.
    pub gamma: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub n: usize,
    pub epsilon: f64,
    pub epochs: usize,
    /// `T_0 = 1, …, T_K`.
    pub temperatures: Vec<f64>,
    pub strands: usize,
    pub steps: usize,
    pub gamma: f64,
}

/// Default strand multiplier `c_N`.
pub const DEFAULT_STRAND_FACTOR: f64 = 4.0;
/// Default hit-and-run steps per epoch.
pub const DEFAULT_STEPS: usize = 500;
/// Default per-epoch accuracy `γ`.
pub const DEFAULT_GAMMA: f64 = 0.1;

/// Cooling factor `1 - 1/√n`. A single dimension would give zero, so it
/// borrows the two-dimensional rate.
pub fn cooling_factor(n: usize) -> f64 {
    1.0 - 1.0 / (n.max(2) as f64).sqrt()
}

pub fn make_schedule(n: usize, epsilon: f64, overrides: &ScheduleOverrides) -> Result<Schedule> {
    if n == 0 {
        return Err(Error::InvalidParameter("dimension must be at least 1".into()));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )));
    }
    let nf = n as f64;
    let q = cooling_factor(n);
    let epochs = overrides.epochs.unwrap_or_else(|| {
        let rate = -q.ln();
        // ⌈√n ln(n/ε)⌉ generalized so that T_K ≤ ε/n also holds for n = 1.
        let k = (nf.sqrt() * (nf / epsilon).ln()).ceil();
        let needed = ((nf / epsilon).ln() / rate).ceil();
        k.max(needed).max(0.0) as usize
    });
    let c_n = overrides.strand_factor.unwrap_or(DEFAULT_STRAND_FACTOR);
    let strands = overrides
        .strands
        .unwrap_or_else(|| ((c_n * nf * nf.ln()).ceil() as usize).max(n + 1));
    let steps = overrides.steps.unwrap_or(DEFAULT_STEPS);
    let temperatures = (0..=epochs).map(|i| q.powi(i as i32)).collect();
    Ok(Schedule {
        n,
        epsilon,
        epochs,
        temperatures,
        strands,
        steps,
        gamma: overrides.gamma.unwrap_or(DEFAULT_GAMMA),
    })
}

/// Output of [`estimate_rounding`].
#[derive(Clone, Debug)]
pub struct Rounding {
    /// `M^{1/2}` for the moment matrix `M`; directions drawn through it are
    /// spread like the samples.
    pub map: LinearMap,
    pub moment: DMatrix<f64>,
    pub sigma_min: f64,
    pub sigma_max: f64,
}

/// Second moment `(1/N) Σ (x_j - c)(x_j - c)^T` about `center` (the origin
/// when `None`) and its symmetric square root.
pub fn estimate_rounding(samples: &[Vec<f64>], center: Option<&[f64]>) -> Result<Rounding> {
    let n = samples.first().map(|x| x.len()).unwrap_or(0);
    if n == 0 || samples.len() < n + 1 {
        return Err(Error::InvalidParameter(format!(
            "rounding needs at least n+1 = {} samples, got {}",
            n + 1,
            samples.len()
        )));
    }
    let zero = vec![0.0; n];
    let c = center.unwrap_or(&zero);
    let mut moment = DMatrix::<f64>::zeros(n, n);
    for x in samples {
        if x.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: x.len(),
            });
        }
        for i in 0..n {
            let di = x[i] - c[i];
            for j in 0..n {
                moment[(i, j)] += di * (x[j] - c[j]);
            }
        }
    }
    moment /= samples.len() as f64;
    let eig = moment.clone().symmetric_eigen();
    let sigma_min = eig.eigenvalues.min();
    let sigma_max = eig.eigenvalues.max();
    if !(sigma_min > 1e-12 * sigma_max) || !sigma_max.is_finite() {
        return Err(Error::DegenerateRounding { sigma_min, sigma_max });
    }
    let sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt));
    let root = &eig.eigenvectors * sqrt * eig.eigenvectors.transpose();
    Ok(Rounding {
        map: LinearMap::new(root)?,
        moment,
        sigma_min,
        sigma_max,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochDiagnostics {
    pub epoch: usize,
    pub temperature: f64,
    /// Extreme eigenvalues of the moment matrix measured in the previous
    /// epoch's rounded frame.
    pub sigma_min: f64,
    pub sigma_max: f64,
    /// Row-major direction map used in this epoch.
    pub map: Vec<f64>,
    /// Best objective value seen up to and including this epoch.
    pub best_value: f64,
    /// Defect handed to the chord sampler, after [`AnnealOptions::beta_cap`].
    pub sampler_beta: f64,
    /// Walk steps that stayed in place because the capped-defect sampler
    /// hit its rejection cap.
    pub stalled_steps: usize,
    /// Hit-and-run steps the mixing bound asks for at this epoch's defect,
    /// with the bound's universal constant set to one.
    pub asymptotic_steps: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnealReport {
    pub best_point: Vec<f64>,
    pub best_value: f64,
    pub schedule: Schedule,
    pub epochs: Vec<EpochDiagnostics>,
    pub epochs_completed: usize,
    /// Set when a query budget ran out before the first epoch finished.
    pub truncated: bool,
    pub budget_exhausted: bool,
    pub queries: LedgerSnapshot,
}

/// Largest defect handed to the chord sampler. The defect of
/// `exp(-F/T)` is `β/T`, which grows without bound as the schedule cools
/// below `β`; the rejection envelope `e^{3β/T}` then makes each chord draw
/// exponentially expensive. Above the cap the sampler runs with the capped
/// envelope and its total-variation guarantee no longer applies.
pub const DEFAULT_BETA_CAP: f64 = 1.0;

#[derive(Clone, Copy, Debug)]
pub struct AnnealOptions {
    /// Run strands one after another instead of on the rayon pool.
    /// Required when the objective enforces a shared budget, so that the
    /// stopping point does not depend on thread timing.
    pub sequential: bool,
    pub beta_cap: f64,
}

impl Default for AnnealOptions {
    fn default() -> Self {
        Self {
            sequential: false,
            beta_cap: DEFAULT_BETA_CAP,
        }
    }
}

/// `n² e^{6β} (R/r)² ln⁴(e^β n R / (r γ²))`: the order of the hit-and-run
/// mixing requirement, reported for comparison with the configured steps.
pub fn asymptotic_steps(n: usize, beta: f64, outer: f64, inner: f64, gamma: f64) -> f64 {
    let nf = n as f64;
    let ratio = outer / inner;
    let l = (beta.exp() * nf * ratio / (gamma * gamma)).ln().max(1.0);
    nf * nf * (6.0 * beta).exp() * ratio * ratio * l.powi(4)
}

/// Runs the annealer and returns the best evaluated strand endpoint.
///
/// `ledger_probe` reads the running query total that is reported; pass the
/// ledger of whatever oracle the objective charges.
pub fn sim_annealing<O: Objective>(
    objective: &O,
    body: &ConvexBody,
    schedule: &Schedule,
    seeder: &Seeder,
    options: AnnealOptions,
    ledger_probe: &dyn Fn() -> LedgerSnapshot,
) -> Result<AnnealReport> {
    let n = body.dim();
    if schedule.n != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: schedule.n,
        });
    }
    let start = ledger_probe();
    let mut report = AnnealReport {
        best_point: body.center().to_vec(),
        best_value: f64::INFINITY,
        schedule: schedule.clone(),
        epochs: Vec::new(),
        epochs_completed: 0,
        truncated: false,
        budget_exhausted: false,
        queries: LedgerSnapshot::default(),
    };

    let init = seeder.child(0);
    let mut points = Vec::with_capacity(schedule.strands);
    for j in 0..schedule.strands {
        let mut rng = init.stream(j as u64);
        points.push(body.sample_uniform(&mut rng, UNIFORM_PROPOSAL_CAP)?);
    }

    let noise_root = seeder.child(1);
    let mut noise: Vec<StreamRng> = (0..schedule.strands).map(|j| noise_root.stream(j as u64)).collect();

    match evaluate_all(objective, &points, &mut noise) {
        Ok(values) => record_best(&mut report, &points, &values),
        Err(Error::BudgetExhausted(_)) => {
            report.truncated = true;
            report.budget_exhausted = true;
            report.queries = ledger_probe().since(&start);
            return Ok(report);
        }
        Err(e) => return Err(e),
    }

    let mut map = LinearMap::identity(n);
    for epoch in 1..=schedule.epochs {
        let temperature = schedule.temperatures[epoch];
        let mean = column_mean(&points);
        let local: Vec<Vec<f64>> = points
            .iter()
            .map(|x| {
                let d: Vec<f64> = x.iter().zip(&mean).map(|(a, b)| a - b).collect();
                map.apply_inverse(&d)
            })
            .collect();
        let rounding = estimate_rounding(&local, None)?;
        map = map.compose(&rounding.map);

        let true_beta = objective.beta() / temperature;
        let beta = true_beta.min(options.beta_cap);
        let eps = default_chord_accuracy(beta, schedule.steps, schedule.gamma).min(0.5 * (-2.0 * beta).exp());
        let walk = seeder.child(2 + epoch as u64);
        let step = |j: usize, x0: &Vec<f64>, noise: &mut StreamRng| -> Result<(Vec<f64>, usize)> {
            let cell = RefCell::new(noise);
            let log_g = |x: &[f64]| -> Result<f64> {
                let mut guard = cell.borrow_mut();
                Ok(-objective.eval(x, &mut guard)? / temperature)
            };
            let target = Target {
                log_g: &log_g,
                beta,
                stay_on_cap: beta < true_beta,
            };
            let mut rng = walk.stream(j as u64);
            let state = WalkState::new(x0.clone(), map.clone());
            hit_and_run(body, &target, state, schedule.steps, eps, &mut rng, None).map(|s| (s.point, s.stalls))
        };
        let moved: Result<Vec<(Vec<f64>, usize)>> = if options.sequential {
            points
                .iter()
                .zip(noise.iter_mut())
                .enumerate()
                .map(|(j, (x0, nz))| step(j, x0, nz))
                .collect()
        } else {
            points
                .par_iter()
                .zip(noise.par_iter_mut())
                .enumerate()
                .map(|(j, (x0, nz))| step(j, x0, nz))
                .collect()
        };
        let (moved, stalls): (Vec<Vec<f64>>, Vec<usize>) = match moved {
            Ok(m) => m.into_iter().unzip(),
            Err(Error::BudgetExhausted(_)) => {
                report.budget_exhausted = true;
                report.truncated = report.epochs_completed == 0;
                break;
            }
            Err(e) => return Err(e),
        };
        let values = match evaluate_all(objective, &moved, &mut noise) {
            Ok(v) => v,
            Err(Error::BudgetExhausted(_)) => {
                report.budget_exhausted = true;
                report.truncated = report.epochs_completed == 0;
                break;
            }
            Err(e) => return Err(e),
        };
        points = moved;
        record_best(&mut report, &points, &values);
        report.epochs_completed = epoch;
        report.epochs.push(EpochDiagnostics {
            epoch,
            temperature,
            sigma_min: rounding.sigma_min,
            sigma_max: rounding.sigma_max,
            map: row_major(map.matrix()),
            best_value: report.best_value,
            sampler_beta: beta,
            stalled_steps: stalls.iter().sum(),
            asymptotic_steps: asymptotic_steps(n, beta, body.outer_radius(), body.inner_radius(), schedule.gamma),
        });
    }
    report.queries = ledger_probe().since(&start);
    Ok(report)
}

fn evaluate_all<O: Objective>(objective: &O, points: &[Vec<f64>], noise: &mut [StreamRng]) -> Result<Vec<f64>> {
    points
        .iter()
        .zip(noise.iter_mut())
        .map(|(x, nz)| objective.eval(x, nz))
        .collect()
}

fn record_best(report: &mut AnnealReport, points: &[Vec<f64>], values: &[f64]) {
    for (x, v) in points.iter().zip(values) {
        if *v < report.best_value {
            report.best_value = *v;
            report.best_point = x.clone();
        }
    }
}

fn column_mean(points: &[Vec<f64>]) -> Vec<f64> {
    let n = points[0].len();
    let mut mean = vec![0.0; n];
    for x in points {
        for i in 0..n {
            mean[i] += x[i];
        }
    }
    mean.iter().map(|m| m / points.len() as f64).collect()
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

/// Local non-convexity model `Δ(r) = sup_{‖x - x_min‖ ≤ r} |F - f|`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FluctuationModel {
    /// `c r^p` with `0 < p < 2`.
    Power {
        c: f64,
        p: f64,
    },
    /// `c ln(1 + d r)`.
    Log {
        c: f64,
        d: f64,
    },
    Zero,
}

impl FluctuationModel {
    pub fn delta(&self, r: f64) -> f64 {
        match *self {
            FluctuationModel::Power { c, p } => c * r.powf(p),
            FluctuationModel::Log { c, d } => c * (1.0 + d * r).ln(),
            FluctuationModel::Zero => 0.0,
        }
    }

    /// Radius at which `(α / 2Cn) r² = Δ(3r)` stops shrinking.
    pub fn fixed_point(&self, alpha: f64, c_const: f64, n: usize) -> f64 {
        let k = 2.0 * c_const * n as f64 / alpha;
        match *self {
            FluctuationModel::Zero => 0.0,
            FluctuationModel::Power { c, p } => (k * 3f64.powf(p) * c).powf(1.0 / (2.0 - p)),
            FluctuationModel::Log { c, d } => {
                // r² = k c ln(1 + 3 d r) has a unique positive root; bisect.
                let h = |r: f64| r * r - k * c * (1.0 + 3.0 * d * r).ln();
                let mut lo = 1e-300;
                let mut hi = 1.0;
                while h(hi) < 0.0 {
                    hi *= 2.0;
                }
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if h(mid) < 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluctuationStep {
    pub radius: f64,
    pub point: Vec<f64>,
    /// `‖x_t − x_min‖`, to compare against the radius bound.
    pub distance: f64,
    pub amplitude: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluctuationReport {
    pub point: Vec<f64>,
    pub final_radius: f64,
    pub predicted_radius: f64,
    pub trace: Vec<FluctuationStep>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluctuationParams {
    pub model: FluctuationModel,
    /// Strong convexity modulus of `f`.
    pub alpha: f64,
    /// Constant in `f(x_t) − f* ≤ C n Δ(3 r_{t−1})`.
    pub c_const: f64,
    pub base_epsilon: f64,
    pub initial_radius: f64,
    pub max_outer: usize,
    pub overrides: ScheduleOverrides,
}

/// Repeatedly anneals on shrinking balls around the current iterate.
///
/// In outer step `t` the objective is `f` plus a sinusoidal perturbation of
/// amplitude `Δ(3 r_{t−1})` on `B(x_{t−1}, 2 r_{t−1})`, and the next radius is
/// `r_t = sqrt(2 C n Δ(3 r_{t−1}) / α)`. The loop stops once `r_t` fails to
/// shrink by more than one percent.
pub fn decreasing_fluctuations(
    base: &BaseFunction,
    start: &[f64],
    params: &FluctuationParams,
    seeder: &Seeder,
) -> Result<FluctuationReport> {
    let n = start.len();
    let alpha = params.alpha;
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter(
            "strong convexity modulus must be positive".into(),
        ));
    }
    let next_radius = |r: f64| (2.0 * params.c_const * n as f64 * params.model.delta(3.0 * r) / alpha).sqrt();
    let mut radius = params.initial_radius;
    let mut point = start.to_vec();
    let mut trace = Vec::new();
    let first = next_radius(radius);
    if first >= radius {
        return Err(Error::NonContracting {
            first: radius,
            next: first,
        });
    }
    for outer in 0..params.max_outer {
        let amplitude = params.model.delta(3.0 * radius);
        let eps = (n as f64 * amplitude).max(params.base_epsilon).min(0.9);
        let body = ConvexBody::ball(point.clone(), 2.0 * radius)?;
        let perturbation = if amplitude > 0.0 {
            Perturbation::Sinusoidal {
                amplitude,
                frequency: 7.0 / radius,
                phase: 0.25 * outer as f64,
            }
        } else {
            Perturbation::None
        };
        let oracle = ApproxConvexOracle::new(base.clone(), perturbation);
        let schedule = make_schedule(n, eps, &params.overrides)?;
        let ledger = oracle.ledger().clone();
        let report = sim_annealing(
            &oracle,
            &body,
            &schedule,
            &seeder.child(outer as u64),
            AnnealOptions::default(),
            &|| ledger.snapshot(),
        )?;
        point = report.best_point;
        let next = next_radius(radius);
        let distance = point
            .iter()
            .zip(base.minimizer())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        trace.push(FluctuationStep {
            radius: next,
            point: point.clone(),
            distance,
            amplitude,
        });
        let shrinking = next < 0.99 * radius && next > 1e-12;
        radius = next;
        if !shrinking {
            break;
        }
    }
    Ok(FluctuationReport {
        point,
        final_radius: radius,
        predicted_radius: params.model.fixed_point(alpha, params.c_const, n),
        trace,
    })
}

/// Annealing density `exp(-F(x)/T)` on a uniform 1-D grid, normalized as a
/// probability vector. Computed in log space.
pub fn grid_density(values: &[f64], temperature: f64) -> Vec<f64> {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = values.iter().map(|v| (-(v - min) / temperature).exp()).collect();
    let z: f64 = w.iter().sum();
    w.iter().map(|v| v / z).collect()
}

/// `‖π_a/π_b‖ = ∫ (π_a/π_b) dπ_a` for probability vectors on a common grid.
pub fn l2_warmness(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).filter(|(x, _)| **x > 0.0).map(|(x, y)| x * x / y).sum()
}

/// `∫ √(π_a π_b)`.
pub fn overlap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x * y).sqrt()).sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaCheck {
    pub epoch: usize,
    pub t_from: f64,
    pub t_to: f64,
    pub forward_warmness: f64,
    pub forward_bound: f64,
    pub backward_warmness: f64,
    pub backward_bound: f64,
    pub overlap: f64,
    pub overlap_bound: f64,
}

impl LemmaCheck {
    pub fn forward_ok(&self) -> bool {
        self.forward_warmness <= self.forward_bound
    }

    pub fn backward_ok(&self) -> bool {
        self.backward_warmness <= self.backward_bound
    }

    pub fn overlap_ok(&self) -> bool {
        self.overlap >= self.overlap_bound
    }
}

/// Warmness and overlap of adjacent annealing densities for a 1-D objective
/// sampled on `grid_points` midpoints of `[lo, hi]`, at every temperature
/// pair of `schedule`, compared with `5e^{2β/T_i}`, `8e^{2β/T_{i+1}}` and
/// `exp(−(β/T_{i+1} + 1)/2)`.
pub fn check_annealing_lemmas(
    f: &dyn Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    grid_points: usize,
    schedule: &Schedule,
    beta: f64,
) -> Vec<LemmaCheck> {
    let h = (hi - lo) / grid_points as f64;
    let values: Vec<f64> = (0..grid_points).map(|k| f(lo + (k as f64 + 0.5) * h)).collect();
    let t = &schedule.temperatures;
    (0..t.len().saturating_sub(1))
        .map(|i| {
            let a = grid_density(&values, t[i]);
            let b = grid_density(&values, t[i + 1]);
            LemmaCheck {
                epoch: i,
                t_from: t[i],
                t_to: t[i + 1],
                forward_warmness: l2_warmness(&a, &b),
                forward_bound: 5.0 * (2.0 * beta / t[i]).exp(),
                backward_warmness: l2_warmness(&b, &a),
                backward_bound: 8.0 * (2.0 * beta / t[i + 1]).exp(),
                overlap: overlap(&a, &b),
                overlap_bound: (-(beta / t[i + 1] + 1.0) / 2.0).exp(),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Seeder;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn schedule_examples() {
        let s = make_schedule(4, 0.5, &ScheduleOverrides::default()).unwrap();
        assert_eq!(s.temperatures[1], 0.5);
        let s = make_schedule(4, 0.04, &ScheduleOverrides::default()).unwrap();
        assert_eq!(s.epochs, 10);
        assert_eq!(s.strands, (16.0 * 4f64.ln()).ceil() as usize);
        for n in [2, 4, 9] {
            for eps in [0.1, 0.01] {
                let s = make_schedule(n, eps, &ScheduleOverrides::default()).unwrap();
                assert!(*s.temperatures.last().unwrap() <= eps / n as f64);
                assert!(s.temperatures.windows(2).all(|w| w[1] < w[0]));
            }
        }
        let s = make_schedule(1, 0.1, &ScheduleOverrides::default()).unwrap();
        assert!(*s.temperatures.last().unwrap() <= 0.1);
        assert!(s.strands >= 2);
    }

    #[test]
    fn rounding_rejects_rank_one() {
        let samples = vec![vec![1.0, 0.0]; 10];
        assert!(matches!(
            estimate_rounding(&samples, None),
            Err(Error::DegenerateRounding { .. })
        ));
    }

    #[test]
    fn rounding_of_normal_samples() {
        let mut rng = Seeder::new(3).stream(0);
        let samples: Vec<Vec<f64>> = (0..10_000)
            .map(|_| (0..4).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        let r = estimate_rounding(&samples, None).unwrap();
        assert!(r.sigma_min >= 0.9 && r.sigma_max <= 1.1);
        let m = r.map.matrix();
        let back = m * m;
        assert!((back - &r.moment).norm() < 1e-10);
    }

    #[test]
    fn zero_epochs_is_best_uniform_draw() {
        let body = ConvexBody::unit_ball(2).unwrap();
        let oracle = ApproxConvexOracle::new(BaseFunction::quadratic(vec![0.2, 0.0], 1.0), Perturbation::None);
        let overrides = ScheduleOverrides {
            epochs: Some(0),
            ..Default::default()
        };
        let schedule = make_schedule(2, 0.1, &overrides).unwrap();
        let ledger = oracle.ledger().clone();
        let report = sim_annealing(
            &oracle,
            &body,
            &schedule,
            &Seeder::new(1),
            AnnealOptions::default(),
            &|| ledger.snapshot(),
        )
        .unwrap();
        assert_eq!(report.epochs_completed, 0);
        assert_eq!(report.queries.evaluation, schedule.strands as u64);
        assert_eq!(report.best_value, oracle.value(&report.best_point));
    }

    #[test]
    fn best_value_is_monotone_over_epochs() {
        let body = ConvexBody::unit_ball(2).unwrap();
        let oracle = ApproxConvexOracle::new(BaseFunction::quadratic(vec![0.3, -0.2], 1.0), Perturbation::None);
        let overrides = ScheduleOverrides {
            steps: Some(30),
            ..Default::default()
        };
        let schedule = make_schedule(2, 0.1, &overrides).unwrap();
        let ledger = oracle.ledger().clone();
        let report = sim_annealing(
            &oracle,
            &body,
            &schedule,
            &Seeder::new(2),
            AnnealOptions::default(),
            &|| ledger.snapshot(),
        )
        .unwrap();
        assert!(report.epochs.windows(2).all(|w| w[1].best_value <= w[0].best_value));
        assert_eq!(report.epochs_completed, schedule.epochs);
    }

    #[test]
    fn fixed_points_solve_their_equations() {
        let m = FluctuationModel::Log { c: 0.01, d: 5.0 };
        let r = m.fixed_point(2.0, 1.0, 2);
        assert!((2.0 * 0.01 * 2.0 / 2.0 * (1.0 + 15.0 * r).ln() - r * r).abs() < 1e-12);
        let m = FluctuationModel::Power { c: 0.01, p: 1.0 };
        let r = m.fixed_point(2.0, 1.0, 2);
        assert!((r - 2.0 * 3.0 * 0.01 * 2.0 / 2.0).abs() < 1e-15);
    }
}
