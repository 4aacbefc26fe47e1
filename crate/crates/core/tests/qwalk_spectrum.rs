use std::f64::consts::PI;

use nalgebra::DMatrix;
use proptest::{prop_assert, proptest};
use qanneal::qwalk::chain::DiscreteChain;
use qanneal::qwalk::walk::{
    coherent_encoding, phase_mismatch, predicted_phases, wrap_phase, WalkOperator, WalkVariant,
};
use qanneal::rng::Seeder;

/// Eigenvalues of `diag(√π) P diag(1/√π)`, which is symmetric for a
/// reversible chain and similar to `P`.
fn symmetrized_spectrum(chain: &DiscreteChain) -> Vec<f64> {
    let pi = chain.stationary();
    let p = chain.transition();
    let n = chain.len();
    let a = DMatrix::from_fn(n, n, |i, j| pi[i].sqrt() * p[(i, j)] / pi[j].sqrt());
    let sym = (&a + a.transpose()) * 0.5;
    let mut v: Vec<f64> = sym.symmetric_eigen().eigenvalues.iter().copied().collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

#[test]
fn discriminant_spectrum_matches_transition_spectrum() {
    let seeder = Seeder::new(11);
    for trial in 0..20u64 {
        let chain = DiscreteChain::random_reversible(8, &mut seeder.stream(trial)).unwrap();
        let (d, _) = chain.discriminant_spectrum();
        let p = symmetrized_spectrum(&chain);
        for (a, b) in d.iter().zip(&p) {
            assert!((a - b).abs() <= 1e-10, "trial {trial}: {a} vs {b}");
        }
    }
}

#[test]
fn walk_spectrum_follows_the_discriminant() {
    let seeder = Seeder::new(12);
    for (k, n) in [2usize, 4, 8, 16].iter().enumerate() {
        for trial in 0..5u64 {
            let chain = DiscreteChain::random_reversible(*n, &mut seeder.stream(100 * k as u64 + trial)).unwrap();
            let w = WalkOperator::build(&chain, WalkVariant::Primal).unwrap();
            let predicted = predicted_phases(&symmetrized_spectrum(&chain));
            let mismatch = phase_mismatch(w.phases(), &predicted);
            assert!(mismatch <= 1e-8, "n={n} trial {trial}: mismatch {mismatch:e}");
        }
    }
}

#[test]
fn fixed_state_is_invariant_for_both_variants() {
    let seeder = Seeder::new(13);
    for trial in 0..10u64 {
        let chain = DiscreteChain::random_reversible(6, &mut seeder.stream(trial)).unwrap();
        for variant in [WalkVariant::Primal, WalkVariant::Alternative] {
            let w = WalkOperator::build(&chain, variant).unwrap();
            assert!(w.unitarity_defect() <= 1e-10);
            let moved = (w.matrix() * w.fixed_state() - w.fixed_state()).norm();
            assert!(moved <= 1e-9, "{variant:?} trial {trial}: {moved:e}");
        }
    }
}

#[test]
fn alternative_walk_has_the_doubled_phases() {
    // W′ = U†W²U, so its eigenphases are the primal ones doubled.
    let seeder = Seeder::new(14);
    for trial in 0..10u64 {
        let chain = DiscreteChain::random_reversible(5, &mut seeder.stream(trial)).unwrap();
        let primal = WalkOperator::build(&chain, WalkVariant::Primal).unwrap();
        let alt = WalkOperator::build(&chain, WalkVariant::Alternative).unwrap();
        let mut doubled: Vec<f64> = primal.phases().iter().map(|p| wrap_phase(2.0 * p)).collect();
        doubled.sort_by(f64::total_cmp);
        assert!(phase_mismatch(alt.phases(), &doubled) <= 1e-8, "trial {trial}");
        // The two spectra differ as sets whenever some phase is not 0 or π.
        assert!(phase_mismatch(alt.phases(), primal.phases()) > 1e-3);
    }
}

#[test]
fn uniform_two_state_chain_has_quarter_turn_phases() {
    let chain = DiscreteChain::new(DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.5, 0.5])).unwrap();
    let w = WalkOperator::build(&chain, WalkVariant::Primal).unwrap();
    assert!(phase_mismatch(w.phases(), &[-PI / 2.0, 0.0, PI / 2.0, PI]) <= 1e-9);
}

#[test]
fn stationary_encoding_is_the_fixed_state() {
    let chain = DiscreteChain::random_reversible(6, &mut Seeder::new(15).stream(0)).unwrap();
    let w = WalkOperator::build(&chain, WalkVariant::Primal).unwrap();
    let phi = coherent_encoding(&chain, chain.stationary());
    assert!((w.matrix() * &phi - &phi).norm() <= 1e-9);
}

#[test]
fn point_mass_encodes_one_row() {
    let chain = DiscreteChain::random_reversible(5, &mut Seeder::new(16).stream(0)).unwrap();
    let mut rho = vec![0.0; 5];
    rho[2] = 1.0;
    let phi = coherent_encoding(&chain, &rho);
    for k in 0..25 {
        let want = if k / 5 == 2 {
            chain.transition()[(2, k % 5)].sqrt()
        } else {
            0.0
        };
        assert!((phi[k] - want).abs() < 1e-15);
    }
}

proptest! {
    #[test]
    fn encodings_are_unit_vectors(seed in 0u64..1000, weights in proptest::collection::vec(0.01f64..1.0, 4)) {
        let chain = DiscreteChain::random_reversible(4, &mut Seeder::new(seed).stream(0)).unwrap();
        let total: f64 = weights.iter().sum();
        let rho: Vec<f64> = weights.iter().map(|w| w / total).collect();
        prop_assert!((coherent_encoding(&chain, &rho).norm() - 1.0).abs() < 1e-12);
    }
}
