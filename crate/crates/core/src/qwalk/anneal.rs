//! Annealing on a grid, quantum and classical.
//!
//! The quantum annealer carries `N` register-space copies from the uniform
//! density through the Gibbs densities at `T_1 > … > T_K`. Before each
//! stage it rounds every copy non-destructively, then applies the stage's
//! amplification circuit. Measuring the final copies gives the samples.
//! The classical annealer runs `N` strands of the same chains, each stage
//! for the chain's mixing horizon from the previous density.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ledger::{LedgerSnapshot, QueryKind, QueryLedger};
use crate::meanest::draw;
use crate::qwalk::chain::DiscreteChain;
use crate::qwalk::evolve::{sqrt_state, StageTransition, TransitionReport, DEFAULT_MIN_OVERLAP, MIXING_CAP};
use crate::qwalk::grid::{gibbs_density, Grid, GridKernel};
use crate::qwalk::rounding::{nondestructive_round, RoundingParams};
use crate::rng::Seeder;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QAnnealParams {
    pub copies: usize,
    /// Per-stage state-preparation accuracy.
    pub eps: f64,
    pub kernel: GridKernel,
    pub rounding: RoundingParams,
    pub min_overlap: f64,
}

impl Default for QAnnealParams {
    fn default() -> Self {
        Self {
            copies: 4,
            eps: 0.05,
            kernel: GridKernel::Metropolis,
            rounding: RoundingParams::default(),
            min_overlap: DEFAULT_MIN_OVERLAP,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageSummary {
    pub temperature: f64,
    pub transition: TransitionReport,
    /// Mean of the rounding estimates over copies, per coordinate.
    pub rounded_means: Vec<f64>,
    pub collapsed: usize,
    pub min_rounding_fidelity: f64,
    pub mean_leakage: f64,
    /// Controlled-walk calls spent on this stage across all copies.
    pub walk_calls: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QAnnealReport {
    pub samples: Vec<usize>,
    pub best_index: usize,
    pub best_point: Vec<f64>,
    pub best_value: f64,
    pub stages: Vec<StageSummary>,
    /// `Σ_i N · (walk calls of stage i per copy)`, which must equal the
    /// ledger's controlled-walk count.
    pub walk_calls_decomposed: u64,
    /// `Σ_i N · (cost formula of stage i)`.
    pub formula_total: f64,
    pub ledger: LedgerSnapshot,
}

impl QAnnealReport {
    pub fn histogram(&self, len: usize) -> Vec<f64> {
        histogram(&self.samples, len)
    }
}

/// Empirical frequencies of grid indices.
pub fn histogram(samples: &[usize], len: usize) -> Vec<f64> {
    let mut h = vec![0.0; len];
    for &s in samples {
        h[s] += 1.0;
    }
    let total = samples.len().max(1) as f64;
    h.iter().map(|c| c / total).collect()
}

fn check_inputs(grid: &Grid, values: &[f64], temperatures: &[f64]) -> Result<()> {
    if values.len() != grid.len() {
        return Err(Error::DimensionMismatch {
            expected: grid.len(),
            got: values.len(),
        });
    }
    if temperatures.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::InvalidParameter("temperatures must be positive".into()));
    }
    Ok(())
}

/// Stationary densities `π_0 = uniform, π_1, …, π_K` and their chains.
fn stage_chains(grid: &Grid, values: &[f64], temperatures: &[f64], kernel: GridKernel) -> Result<Vec<DiscreteChain>> {
    std::iter::once(f64::INFINITY)
        .chain(temperatures.iter().copied())
        .map(|t| kernel.chain(grid, &gibbs_density(values, t)))
        .collect()
}

pub fn simulate_q_annealing(
    grid: &Grid,
    values: &[f64],
    temperatures: &[f64],
    params: &QAnnealParams,
    seeder: &Seeder,
) -> Result<QAnnealReport> {
    check_inputs(grid, values, temperatures)?;
    if params.copies == 0 {
        return Err(Error::InvalidParameter("at least one copy is needed".into()));
    }
    let chains = stage_chains(grid, values, temperatures, params.kernel)?;
    let observables: Vec<Vec<f64>> = (0..grid.dim())
        .map(|k| grid.points().iter().map(|p| (p[k] + 1.0) / 2.0).collect())
        .collect();
    let ledger = QueryLedger::new();
    let mut rng = seeder.stream(0);
    let mut copies: Vec<DVector<Complex64>> = vec![sqrt_state(chains[0].stationary()); params.copies];
    let mut stages = Vec::with_capacity(temperatures.len());
    let mut walk_calls_decomposed = 0u64;
    let mut formula_total = 0.0;
    for (i, &temperature) in temperatures.iter().enumerate() {
        let rounded = nondestructive_round(&copies, &observables, &params.rounding, &mut rng, &ledger)?;
        let transition = StageTransition::new(&chains[i], &chains[i + 1], params.eps, params.min_overlap)?;
        let before = ledger.count(QueryKind::ControlledWalk);
        let mut leakage = 0.0;
        copies = rounded
            .states
            .iter()
            .map(|c| {
                let (out, leak) = transition.apply(c, &ledger)?;
                leakage += leak;
                Ok(out)
            })
            .collect::<Result<_>>()?;
        let walk_calls = ledger.count(QueryKind::ControlledWalk) - before;
        let report = transition.report().clone();
        walk_calls_decomposed += params.copies as u64 * report.walk_calls;
        formula_total += params.copies as f64 * report.formula;
        let rounded_means = (0..observables.len())
            .map(|k| {
                let mean = rounded.estimates.iter().map(|e| e[k]).sum::<f64>() / params.copies as f64;
                2.0 * mean - 1.0
            })
            .collect();
        stages.push(StageSummary {
            temperature,
            transition: report,
            rounded_means,
            collapsed: rounded.collapsed,
            min_rounding_fidelity: rounded.fidelities.iter().copied().fold(1.0, f64::min),
            mean_leakage: leakage / params.copies as f64,
            walk_calls,
        });
    }
    let samples: Vec<usize> = copies
        .iter()
        .map(|c| {
            let probs: Vec<f64> = c.iter().map(|z| z.norm_sqr()).collect();
            draw(&probs, &mut rng)
        })
        .collect();
    let best_index = *samples
        .iter()
        .min_by(|a, b| values[**a].total_cmp(&values[**b]))
        .expect("at least one copy");
    Ok(QAnnealReport {
        best_point: grid.points()[best_index].clone(),
        best_value: values[best_index],
        best_index,
        samples,
        stages,
        walk_calls_decomposed,
        formula_total,
        ledger: ledger.snapshot(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalGridReport {
    pub samples: Vec<usize>,
    /// Walk steps per strand at each stage.
    pub steps: Vec<u64>,
}

impl ClassicalGridReport {
    pub fn histogram(&self, len: usize) -> Vec<f64> {
        histogram(&self.samples, len)
    }
}

/// `strands` independent walks started uniformly; stage `i` runs chain
/// `i` for its mixing horizon to accuracy `eps` from `π_{i−1}`.
pub fn classical_grid_annealing(
    grid: &Grid,
    values: &[f64],
    temperatures: &[f64],
    strands: usize,
    eps: f64,
    kernel: GridKernel,
    seeder: &Seeder,
) -> Result<ClassicalGridReport> {
    check_inputs(grid, values, temperatures)?;
    let chains = stage_chains(grid, values, temperatures, kernel)?;
    let steps: Vec<u64> = (1..chains.len())
        .map(|i| chains[i].mixing_time_from(Some(chains[i - 1].stationary()), eps, MIXING_CAP))
        .collect::<Result<_>>()?;
    let rows: Vec<Vec<Vec<f64>>> = chains
        .iter()
        .map(|c| {
            (0..c.len())
                .map(|x| c.transition().row(x).iter().copied().collect())
                .collect()
        })
        .collect();
    let samples = (0..strands)
        .map(|s| {
            let mut rng = seeder.stream(s as u64);
            let mut x = draw(chains[0].stationary(), &mut rng);
            for (i, &t) in steps.iter().enumerate() {
                for _ in 0..t {
                    x = draw(&rows[i + 1][x], &mut rng);
                }
            }
            x
        })
        .collect();
    Ok(ClassicalGridReport { samples, steps })
}
