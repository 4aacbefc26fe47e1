use qanneal::ledger::QueryLedger;
use qanneal::qwalk::evolve::{prepare_next_state, sqrt_state};
use qanneal::qwalk::grid::{gibbs_density, metropolis_chain, Grid};

#[test]
fn explore() {
    for &temp in &[1.0, 0.3, 0.1] {
        for side in [8usize, 16, 32, 64] {
            let grid = Grid::line(side).unwrap();
            let values = grid.values(&|x| (x[0] - 0.3).powi(2));
            let d0 = gibbs_density(&values, temp);
            let d1 = gibbs_density(&values, temp * 0.5);
            let m0 = metropolis_chain(&grid, &d0).unwrap();
            let m1 = metropolis_chain(&grid, &d1).unwrap();
            let ledger = QueryLedger::new();
            let (_, r) = prepare_next_state(&sqrt_state(&d0), &m0, &m1, 0.05, &ledger).unwrap();
            println!("T={temp} side={side} {r:?}");
        }
    }
}
