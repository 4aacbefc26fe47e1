use nalgebra::DMatrix;
use qanneal::qwalk::chain::DiscreteChain;
use qanneal::qwalk::gap::{effective_gap_report, GapCriterion, Warmness};
use qanneal::qwalk::walk::{WalkOperator, WalkVariant};

/// Lazy simple random walk on the `n`-cycle.
fn lazy_cycle(n: usize) -> DiscreteChain {
    let mut p = DMatrix::zeros(n, n);
    for x in 0..n {
        p[(x, x)] += 0.5;
        p[(x, (x + 1) % n)] += 0.25;
        p[(x, (x + n - 1) % n)] += 0.25;
    }
    DiscreteChain::new(p).unwrap()
}

/// `Σ |⟨v_j|√ρ₀⟩|²` over discriminant eigenvalues in `[floor, 1)`.
fn band_mass_from_discriminant(chain: &DiscreteChain, rho0: &[f64], floor: f64) -> f64 {
    let (lambdas, v) = chain.discriminant_spectrum();
    lambdas
        .iter()
        .enumerate()
        .filter(|(_, &l)| l >= floor && l < 1.0 - 1e-9)
        .map(|(j, _)| {
            let dot: f64 = (0..chain.len()).map(|x| v[(x, j)] * rho0[x].sqrt()).sum();
            dot * dot
        })
        .sum()
}

fn half_cycle(n: usize) -> Vec<f64> {
    (0..n).map(|x| if x < n / 2 { 2.0 / n as f64 } else { 0.0 }).collect()
}

#[test]
fn half_cycle_start_stays_within_the_bound() {
    let chain = lazy_cycle(16);
    let walk = WalkOperator::build(&chain, WalkVariant::Primal).unwrap();
    let pi = chain.stationary().to_vec();
    let rho0 = half_cycle(16);
    let warm = Warmness::sup(&rho0, &pi);
    assert!(matches!(warm, Warmness::Sup(b) if (b - 2.0).abs() < 1e-12));
    for eps in [0.3, 0.1, 0.03, 0.01] {
        let t = chain.mixing_time_from(Some(&rho0), eps, 1 << 20).unwrap();
        let report = effective_gap_report(&walk, &chain, &rho0, t, warm, GapCriterion::new(eps)).unwrap();
        assert!(!report.violated, "eps {eps}: {report:?}");
        let oracle = band_mass_from_discriminant(&chain, &rho0, report.floor);
        assert!(
            (report.mass - oracle).abs() < 1e-9,
            "eps {eps}: {} vs {oracle}",
            report.mass
        );
    }
}

#[test]
fn exact_mixing_horizon_leaves_little_bad_mass() {
    let chain = lazy_cycle(16);
    let walk = WalkOperator::build(&chain, WalkVariant::Primal).unwrap();
    let pi = chain.stationary().to_vec();
    let rho0 = half_cycle(16);
    let t = chain.mixing_time_from(Some(&rho0), 1e-6, 1 << 20).unwrap();
    let report = effective_gap_report(
        &walk,
        &chain,
        &rho0,
        t,
        Warmness::sup(&rho0, &pi),
        GapCriterion::new(1e-6),
    )
    .unwrap();
    assert!(report.mass <= 1e-2);
}

#[test]
fn stationary_start_has_no_bad_mass() {
    let chain = lazy_cycle(16);
    let walk = WalkOperator::build(&chain, WalkVariant::Primal).unwrap();
    let pi = chain.stationary().to_vec();
    let report = effective_gap_report(&walk, &chain, &pi, 1, Warmness::sup(&pi, &pi), GapCriterion::new(0.1)).unwrap();
    assert!(report.bad_vectors > 0);
    assert!(report.mass < 1e-20);
}

#[test]
fn too_short_horizon_is_rejected() {
    let chain = lazy_cycle(16);
    let walk = WalkOperator::build(&chain, WalkVariant::Primal).unwrap();
    let pi = chain.stationary().to_vec();
    let rho0 = half_cycle(16);
    assert!(effective_gap_report(
        &walk,
        &chain,
        &rho0,
        2,
        Warmness::sup(&rho0, &pi),
        GapCriterion::new(0.01)
    )
    .is_err());
}
