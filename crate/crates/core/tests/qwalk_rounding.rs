use std::f64::consts::PI;

use nalgebra::DVector;
use num_complex::Complex64;
use qanneal::ledger::{QueryKind, QueryLedger};
use qanneal::meanest::{amplitude_error_bound, literal_amplitude_error_bound, median_repetitions};
use qanneal::qwalk::rounding::{nondestructive_round, RoundingParams};
use qanneal::rng::Seeder;

/// A two-point copy whose observable has mean exactly `a`.
fn copy_with_amplitude(a: f64) -> (DVector<Complex64>, Vec<f64>) {
    let psi = DVector::from_vec(vec![
        Complex64::new(a.sqrt(), 0.0),
        Complex64::new(0.0, (1.0 - a).sqrt()),
    ]);
    (psi, vec![1.0, 0.0])
}

fn run(a: f64, trials: usize, seed: u64) -> (usize, f64, u64) {
    let (psi, f) = copy_with_amplitude(a);
    let params = RoundingParams::default();
    let ledger = QueryLedger::new();
    let mut rng = Seeder::new(seed).stream(0);
    let copies = vec![psi; trials];
    let out = nondestructive_round(&copies, &[f], &params, &mut rng, &ledger).unwrap();
    let bound = amplitude_error_bound(a, params.grid).max(literal_amplitude_error_bound(a, params.grid));
    let hits = out.estimates.iter().filter(|e| (e[0] - a).abs() <= bound).count();
    let fidelity = out.fidelities.iter().sum::<f64>() / trials as f64;
    (hits, fidelity, ledger.count(QueryKind::Reflector))
}

#[test]
fn half_amplitude_is_estimated_and_restored() {
    let (hits, fidelity, _) = run(0.5, 2000, 61);
    assert!(hits >= 1900, "{hits}");
    assert!(fidelity >= 0.95, "{fidelity}");
}

#[test]
fn grid_points_are_exact_and_restored() {
    let a = (PI * 3.0 / 16.0).sin().powi(2);
    let (psi, f) = copy_with_amplitude(a);
    let ledger = QueryLedger::new();
    let out = nondestructive_round(
        &vec![psi.clone(); 200],
        &[f],
        &RoundingParams::default(),
        &mut Seeder::new(62).stream(0),
        &ledger,
    )
    .unwrap();
    assert!(out.estimates.iter().all(|e| (e[0] - a).abs() < 1e-12));
    assert_eq!(out.collapsed, 0);
    assert!(out.states.iter().all(|s| (s - &psi).norm() < 1e-12));
}

#[test]
fn off_grid_amplitudes_meet_the_confidence() {
    let eta = RoundingParams::default().eta;
    for a in [0.05, 0.2, 0.37, 0.61, 0.9] {
        let (hits, fidelity, _) = run(a, 2000, 63);
        assert!(hits as f64 >= (1.0 - eta) * 2000.0, "a={a}: {hits}");
        assert!(fidelity >= 1.0 - eta, "a={a}: {fidelity}");
    }
}

#[test]
fn reflector_charge_is_logarithmic_in_eta_and_linear_in_grid() {
    let (psi, f) = copy_with_amplitude(0.5);
    for (grid, eta) in [(8usize, 0.1), (16, 0.1), (16, 0.01)] {
        let params = RoundingParams {
            grid,
            eta,
            restore_rounds: 8,
        };
        let ledger = QueryLedger::new();
        nondestructive_round(
            std::slice::from_ref(&psi),
            std::slice::from_ref(&f),
            &params,
            &mut Seeder::new(64).stream(0),
            &ledger,
        )
        .unwrap();
        let per_pass = 2 * median_repetitions(eta) as u64 * grid as u64;
        // One estimation pass and one successful restoration test.
        assert_eq!(ledger.count(QueryKind::Reflector), 2 * per_pass);
    }
}
