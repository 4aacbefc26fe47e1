//! The subcommands. Each writes its report files into `out` and returns
//! their paths; a violated invariant is reported after the files are
//! written.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use qanneal::annealing::{
    check_annealing_lemmas, estimate_rounding, make_schedule, sim_annealing, AnnealOptions, LemmaCheck,
    ScheduleOverrides, DEFAULT_GAMMA,
};
use qanneal::bandit::{run_bandit, BanditInstance, Estimator, IntervalSummary};
use qanneal::geometry::LinearMap;
use qanneal::hitrun::{default_chord_accuracy, hit_and_run, write_trajectory_csv, Target, WalkState};
use qanneal::qwalk::amplify::{pi3_amplify, rounds_for, ExactReflection};
use qanneal::qwalk::chain::DiscreteChain;
use qanneal::qwalk::gap::{effective_gap_report, GapCriterion, GapReport, Warmness};
use qanneal::qwalk::reflector::{pi_third, predicted_error, reflector_sizes, ApproxReflector};
use qanneal::qwalk::walk::{phase_mismatch, predicted_phases, WalkOperator, WalkVariant};
use qanneal::rng::Seeder;
use serde::Serialize;

use crate::config::{ChainKind, VariantKind};
use crate::{write_file, write_report, CliError, RunConfig, Suite};

/// Chains used by `spectrum` and `validate-lemmas` are capped here so that
/// the dense walk operator stays small.
const MAX_CHAIN_STATES: usize = 64;

fn violation(suite: Suite, detail: String) -> CliError {
    CliError::Violation { suite, detail }
}

pub fn optimize(config: &RunConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let seed = config.require_seed()?;
    let inst = &config.instance;
    let body = inst.body()?;
    let oracle = inst.approx_oracle();
    let schedule = inst.schedule()?;
    let options = AnnealOptions {
        beta_cap: inst.beta_cap,
        ..AnnealOptions::default()
    };
    let ledger = oracle.ledger().clone();
    let report = sim_annealing(&oracle, &body, &schedule, &Seeder::new(seed), options, &|| {
        ledger.snapshot()
    })?;
    let path = write_report(out, "optimize.json", "optimize", config, &report)?;
    Ok(vec![path])
}

#[derive(Serialize)]
struct SampleReport {
    temperature: f64,
    beta: f64,
    strands: usize,
    steps: usize,
    mean: Vec<f64>,
    mean_objective: f64,
    sigma_min: f64,
    sigma_max: f64,
    stalled_steps: usize,
    evaluations: u64,
}

pub fn sample(config: &RunConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let seed = config.require_seed()?;
    let inst = &config.instance;
    let s = &config.sample;
    if !(s.temperature > 0.0) || s.strands <= inst.n {
        return Err(CliError::Config(
            "`sample` needs a positive temperature and more than n strands".into(),
        ));
    }
    let body = inst.body()?;
    let oracle = inst.approx_oracle();
    let true_beta = oracle.beta() / s.temperature;
    let beta = true_beta.min(inst.beta_cap);
    let eps = default_chord_accuracy(beta, s.steps, DEFAULT_GAMMA);
    let log_g = |x: &[f64]| Ok(-oracle.eval(x) / s.temperature);
    let target = Target {
        log_g: &log_g,
        beta,
        stay_on_cap: beta < true_beta,
    };
    let seeder = Seeder::new(seed);
    let mut trajectories = Vec::with_capacity(s.strands);
    let mut finals = Vec::with_capacity(s.strands);
    let mut stalled_steps = 0;
    for j in 0..s.strands {
        let mut rng = seeder.stream(j as u64);
        let mut traj = vec![body.center().to_vec()];
        let state = WalkState::new(body.center().to_vec(), LinearMap::identity(inst.n));
        let end = hit_and_run(&body, &target, state, s.steps, eps, &mut rng, Some(&mut traj))?;
        stalled_steps += end.stalls;
        finals.push(end.point);
        trajectories.push(traj);
    }
    let points: Vec<Vec<f64>> = trajectories.iter().flat_map(|t| t[1..].iter().cloned()).collect();
    let count = points.len() as f64;
    let mean: Vec<f64> = (0..inst.n)
        .map(|i| points.iter().map(|p| p[i]).sum::<f64>() / count)
        .collect();
    let mean_objective = points.iter().map(|p| oracle.eval(p)).sum::<f64>() / count;
    let rounding = estimate_rounding(&points, Some(&mean))?;
    let mut csv = Vec::new();
    write_trajectory_csv(&mut csv, &trajectories)?;
    let csv_path = write_file(out, "sample-trajectories.csv", &String::from_utf8_lossy(&csv))?;
    let report = SampleReport {
        temperature: s.temperature,
        beta,
        strands: s.strands,
        steps: s.steps,
        mean,
        mean_objective,
        sigma_min: rounding.sigma_min,
        sigma_max: rounding.sigma_max,
        stalled_steps,
        evaluations: oracle.ledger().total(),
    };
    let json = write_report(out, "sample.json", "sample", config, &report)?;
    Ok(vec![json, csv_path])
}

/// Holds with probability ½, otherwise moves to a uniform cycle neighbour.
pub fn lazy_cycle(n: usize) -> Result<DiscreteChain, CliError> {
    let mut p = DMatrix::zeros(n, n);
    for x in 0..n {
        p[(x, x)] += 0.5;
        p[(x, (x + 1) % n)] += 0.25;
        p[(x, (x + n - 1) % n)] += 0.25;
    }
    Ok(DiscreteChain::new(p)?)
}

fn build_chain(config: &RunConfig) -> Result<DiscreteChain, CliError> {
    let s = &config.spectrum;
    if s.chain != ChainKind::File && !(1..=MAX_CHAIN_STATES).contains(&s.states) {
        return Err(CliError::Config(format!(
            "`spectrum.states` must lie in 1..={MAX_CHAIN_STATES}"
        )));
    }
    match s.chain {
        ChainKind::Uniform => Ok(DiscreteChain::new(DMatrix::from_element(
            s.states,
            s.states,
            1.0 / s.states as f64,
        ))?),
        ChainKind::LazyCycle => lazy_cycle(s.states),
        ChainKind::Random => {
            let seed = config.require_seed()?;
            Ok(DiscreteChain::random_reversible(
                s.states,
                &mut Seeder::new(seed).stream(0),
            )?)
        }
        ChainKind::File => {
            let path = s.path.as_ref().expect("checked at parse time");
            let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
                path: path.clone(),
                source,
            })?;
            Ok(DiscreteChain::from_text(&text)?)
        }
    }
}

#[derive(Serialize)]
struct SpectrumReport {
    states: usize,
    dim: usize,
    unitarity_defect: f64,
    discriminant: Vec<f64>,
    phases: Vec<f64>,
    /// Largest circular gap to the phases predicted from the discriminant,
    /// primal walk only.
    prediction_mismatch: Option<f64>,
}

pub fn spectrum(config: &RunConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let chain = build_chain(config)?;
    let variant = match config.spectrum.variant {
        VariantKind::Primal => WalkVariant::Primal,
        VariantKind::Alternative => WalkVariant::Alternative,
    };
    let walk = WalkOperator::build(&chain, variant)?;
    let (discriminant, _) = chain.discriminant_spectrum();
    let mismatch =
        (variant == WalkVariant::Primal).then(|| phase_mismatch(walk.phases(), &predicted_phases(&discriminant)));
    let csv = write_file(out, "spectrum.csv", &walk.spectrum_csv())?;
    let report = SpectrumReport {
        states: chain.len(),
        dim: walk.dim(),
        unitarity_defect: walk.unitarity_defect(),
        discriminant,
        phases: walk.phases().to_vec(),
        prediction_mismatch: mismatch,
    };
    let json = write_report(out, "spectrum.json", "spectrum", config, &report)?;
    if let Some(m) = mismatch.filter(|m| *m > 1e-8) {
        return Err(violation(
            Suite::Spectral,
            format!("walk phases differ from the prediction by {m:e}"),
        ));
    }
    Ok(vec![csv, json])
}

#[derive(Serialize)]
struct AmplifyReport {
    overlap: f64,
    rounds: u32,
    fidelity: f64,
    fidelity_bound: f64,
    start_uses: u64,
    target_uses: u64,
    reflector: ReflectorDemo,
}

#[derive(Serialize)]
struct ReflectorDemo {
    states: usize,
    phase_bits: usize,
    repetitions: usize,
    fixed_state_error: f64,
    /// Largest error on eigenvectors with phase at least `Δ` turns.
    max_far_error: f64,
    max_far_predicted: f64,
    error_bound: f64,
}

pub fn amplify(config: &RunConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let a = &config.amplify;
    if a.dim < 2 || !(a.overlap > 0.0 && a.overlap <= 1.0) {
        return Err(CliError::Config("`amplify` needs dim ≥ 2 and overlap in (0, 1]".into()));
    }
    let mut start = DVector::zeros(a.dim);
    start[0] = Complex64::new(1.0, 0.0);
    let mut target = DVector::zeros(a.dim);
    target[0] = Complex64::new(a.overlap.sqrt(), 0.0);
    target[1] = Complex64::new((1.0 - a.overlap).sqrt(), 0.0);
    let alpha = pi_third();
    let rounds = a.rounds.unwrap_or_else(|| rounds_for(a.overlap, a.tolerance));
    let rs = ExactReflection::new(start.clone(), alpha);
    let rt = ExactReflection::new(target.clone(), alpha);
    let amplified = pi3_amplify(&rs, &rt, rounds, &start);
    let fidelity = target.dotc(&amplified.state).norm_sqr();
    let fidelity_bound = 1.0 - (1.0 - a.overlap).powi(3i32.pow(rounds));

    let chain = lazy_cycle(a.reflector_states)?;
    let walk = WalkOperator::build(&chain, WalkVariant::Primal)?;
    let (bits, reps) = reflector_sizes(a.delta, a.eps)?;
    let reflector = ApproxReflector::new(&walk, bits, reps, alpha)?;
    let fixed: DVector<Complex64> = walk.fixed_state().map(|v| Complex64::new(v, 0.0));
    let joint = reflector.apply_to_system(&fixed)?;
    let mut ideal = DMatrix::zeros(joint.nrows(), joint.ncols());
    ideal.set_column(0, &(&fixed * alpha));
    let fixed_state_error = (&joint - &ideal).norm();
    let (mut max_far_error, mut max_far_predicted) = (0.0f64, 0.0f64);
    for j in 0..walk.dim() {
        let xi = walk.phases()[j].abs() / (2.0 * PI);
        if xi < a.delta {
            continue;
        }
        let psi: DVector<Complex64> = walk.eigenvectors().column(j).into_owned();
        let joint = reflector.apply_to_system(&psi)?;
        let mut ideal = DMatrix::zeros(joint.nrows(), joint.ncols());
        ideal.set_column(0, &psi);
        max_far_error = max_far_error.max((&joint - &ideal).norm());
        max_far_predicted = max_far_predicted.max(predicted_error(xi, bits, reps, alpha));
    }
    let error_bound = a.eps.sqrt();
    let report = AmplifyReport {
        overlap: a.overlap,
        rounds,
        fidelity,
        fidelity_bound,
        start_uses: amplified.start_uses,
        target_uses: amplified.target_uses,
        reflector: ReflectorDemo {
            states: a.reflector_states,
            phase_bits: bits,
            repetitions: reps,
            fixed_state_error,
            max_far_error,
            max_far_predicted,
            error_bound,
        },
    };
    let json = write_report(out, "amplify.json", "amplify", config, &report)?;
    if fidelity < fidelity_bound - 1e-9 {
        return Err(violation(
            Suite::Amplification,
            format!("fidelity {fidelity} below 1 − (1 − p)^(3^m) = {fidelity_bound}"),
        ));
    }
    if fixed_state_error > 1e-9 || max_far_error > error_bound {
        return Err(violation(
            Suite::Reflector,
            format!("fixed-state error {fixed_state_error:e}, far error {max_far_error:e} against {error_bound:e}"),
        ));
    }
    Ok(vec![json])
}

#[derive(Serialize)]
struct ValidateReport {
    lemmas: Vec<LemmaCheck>,
    backward_violations: usize,
    overlap_violations: usize,
    /// Reported only; the forward bound is not part of the checked suite.
    forward_violations: usize,
    spectral: Vec<SpectralCheck>,
    effective_gap: GapReport,
}

#[derive(Serialize)]
struct SpectralCheck {
    chain: &'static str,
    states: usize,
    unitarity_defect: f64,
    mismatch: f64,
}

pub fn validate_lemmas(config: &RunConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let v = &config.validate;
    if !(2..=MAX_CHAIN_STATES).contains(&v.chain_states) {
        return Err(CliError::Config(format!(
            "`validate.chain-states` must lie in 2..={MAX_CHAIN_STATES}"
        )));
    }
    let schedule = make_schedule(v.n, v.epsilon, &ScheduleOverrides::default())?;
    let lemmas = check_annealing_lemmas(&|x: f64| x.abs(), -1.0, 1.0, v.grid_points, &schedule, v.beta);

    let mut spectral = Vec::new();
    let mut chains = vec![("lazy-cycle", lazy_cycle(v.chain_states)?)];
    if let Some(seed) = config.seed {
        chains.push((
            "random",
            DiscreteChain::random_reversible(v.chain_states, &mut Seeder::new(seed).stream(1))?,
        ));
    }
    for (name, chain) in &chains {
        let walk = WalkOperator::build(chain, WalkVariant::Primal)?;
        let (d, _) = chain.discriminant_spectrum();
        spectral.push(SpectralCheck {
            chain: name,
            states: chain.len(),
            unitarity_defect: walk.unitarity_defect(),
            mismatch: phase_mismatch(walk.phases(), &predicted_phases(&d)),
        });
    }

    let chain = &chains[0].1;
    let walk = WalkOperator::build(chain, WalkVariant::Primal)?;
    let n = chain.len();
    let rho0: Vec<f64> = (0..n)
        .map(|x| if x < n / 2 { 1.0 / (n / 2) as f64 } else { 0.0 })
        .collect();
    let t = chain.mixing_time_from(Some(&rho0), v.gap_eps, 1 << 24)?;
    let warm = Warmness::sup(&rho0, chain.stationary());
    let effective_gap = effective_gap_report(
        &walk,
        chain,
        &rho0,
        t,
        warm,
        GapCriterion {
            eps: v.gap_eps,
            band: v.gap_band,
            constant: v.gap_constant,
        },
    )?;

    let report = ValidateReport {
        backward_violations: lemmas.iter().filter(|c| !c.backward_ok()).count(),
        overlap_violations: lemmas.iter().filter(|c| !c.overlap_ok()).count(),
        forward_violations: lemmas.iter().filter(|c| !c.forward_ok()).count(),
        lemmas,
        spectral,
        effective_gap,
    };
    let json = write_report(out, "validate.json", "validate-lemmas", config, &report)?;
    if report.backward_violations > 0 {
        return Err(violation(
            Suite::Warmness,
            format!("{} temperature pairs", report.backward_violations),
        ));
    }
    if report.overlap_violations > 0 {
        return Err(violation(
            Suite::Overlap,
            format!("{} temperature pairs", report.overlap_violations),
        ));
    }
    if let Some(bad) = report
        .spectral
        .iter()
        .find(|s| s.mismatch > 1e-8 || s.unitarity_defect > 1e-10)
    {
        return Err(violation(
            Suite::Spectral,
            format!(
                "{} chain: mismatch {:e}, defect {:e}",
                bad.chain, bad.mismatch, bad.unitarity_defect
            ),
        ));
    }
    if report.effective_gap.violated {
        return Err(violation(
            Suite::EffectiveGap,
            format!(
                "mass {} above bound {}",
                report.effective_gap.mass, report.effective_gap.bound
            ),
        ));
    }
    Ok(vec![json])
}

#[derive(Serialize)]
struct BanditRun {
    estimator: Estimator,
    seed: u64,
    trace: String,
    cumulative_regret: f64,
    queries: u64,
    intervals: Vec<IntervalSummary>,
}

pub fn bandit(config: &RunConfig, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let seed = config.require_seed()?;
    let b = &config.bandit;
    let instance = BanditInstance::quadratic(b.n, b.radius, b.sigma, b.horizon)?;
    let params = b.params();
    let seeder = Seeder::new(seed);
    let mut paths = Vec::new();
    let mut runs = Vec::new();
    for s in 0..b.seeds {
        for est in b.estimator.estimators() {
            let trace = run_bandit(&instance, &params, est, &seeder.child(s))?;
            let name = match est {
                Estimator::QuantumModel => format!("bandit-quantum-model-{s}.csv"),
                Estimator::Classical => format!("bandit-classical-{s}.csv"),
            };
            paths.push(write_file(out, &name, &trace.to_csv())?);
            let monotone = trace.rows.windows(2).all(|w| w[1].cum_regret >= w[0].cum_regret);
            if trace.rows.len() != b.horizon || !monotone {
                return Err(violation(
                    Suite::Regret,
                    format!("trace {name} breaks the trace invariants"),
                ));
            }
            runs.push(BanditRun {
                estimator: est,
                seed: s,
                cumulative_regret: trace.cumulative_regret(),
                queries: trace.queries(),
                intervals: trace.intervals,
                trace: name,
            });
        }
    }
    paths.push(write_report(out, "bandit.json", "bandit", config, &runs)?);
    Ok(paths)
}
