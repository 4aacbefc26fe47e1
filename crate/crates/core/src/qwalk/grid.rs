//! Grid discretizations of `[-1, 1]^d` for `d ∈ {1, 2}` and the reversible
//! chains that sample annealing densities on them.
//!
//! The hit-and-run kernel integrates the continuous transition density over
//! grid cells. Its off-diagonal part `g(y)·s(x, y)` has a symmetric factor
//! `s`, so scaling every row by one constant and putting the remainder on
//! the diagonal keeps the chain exactly reversible with respect to `g`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::annealing::grid_density;
use crate::error::{Error, Result};
use crate::qwalk::chain::DiscreteChain;

/// Largest grid the quantum-walk simulators accept.
pub const MAX_GRID_POINTS: usize = 64;

/// Quadrature nodes per chord when integrating the density along a line.
const CHORD_NODES: usize = 256;

/// Cell centers of a uniform grid on `[-1, 1]^dim`, listed with the first
/// coordinate varying slowest.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    dim: usize,
    side: usize,
    points: Vec<Vec<f64>>,
}

impl Grid {
    pub fn line(side: usize) -> Result<Self> {
        Self::new(1, side)
    }

    pub fn square(side: usize) -> Result<Self> {
        Self::new(2, side)
    }

    fn new(dim: usize, side: usize) -> Result<Self> {
        let total = side.checked_pow(dim as u32).unwrap_or(usize::MAX);
        if side < 2 || total > MAX_GRID_POINTS {
            return Err(Error::CapExceeded(format!(
                "grid with side {side} in dimension {dim} must have between 2 and {MAX_GRID_POINTS} points"
            )));
        }
        let h = 2.0 / side as f64;
        let coord = |k: usize| -1.0 + (k as f64 + 0.5) * h;
        let points = (0..total)
            .map(|idx| {
                let mut rest = idx;
                let mut p = vec![0.0; dim];
                for axis in (0..dim).rev() {
                    p[axis] = coord(rest % side);
                    rest /= side;
                }
                p
            })
            .collect();
        Ok(Self { dim, side, points })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        2.0 / self.side as f64
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn values(&self, f: &dyn Fn(&[f64]) -> f64) -> Vec<f64> {
        self.points.iter().map(|p| f(p)).collect()
    }

    /// Index of the cell containing `x`, or `None` outside `[-1, 1]^d`.
    pub fn cell_of(&self, x: &[f64]) -> Option<usize> {
        let h = self.spacing();
        let mut idx = 0;
        for &c in x {
            if !(-1.0..=1.0).contains(&c) {
                return None;
            }
            let k = (((c + 1.0) / h).floor() as usize).min(self.side - 1);
            idx = idx * self.side + k;
        }
        Some(idx)
    }

    /// Indices of the axis-aligned neighbors of cell `idx`.
    pub fn neighbors(&self, idx: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(2 * self.dim);
        let mut stride = 1;
        for _ in 0..self.dim {
            let k = (idx / stride) % self.side;
            if k > 0 {
                out.push(idx - stride);
            }
            if k + 1 < self.side {
                out.push(idx + stride);
            }
            stride *= self.side;
        }
        out
    }
}

/// Gibbs density `∝ exp(−F/T)` over the grid cells; `T = ∞` gives the
/// uniform density.
pub fn gibbs_density(values: &[f64], temperature: f64) -> Vec<f64> {
    grid_density(values, temperature)
}

/// Which reversible chain targets a grid density.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridKernel {
    Metropolis,
    HitAndRun,
}

impl GridKernel {
    pub fn chain(self, grid: &Grid, density: &[f64]) -> Result<DiscreteChain> {
        match self {
            GridKernel::Metropolis => metropolis_chain(grid, density),
            GridKernel::HitAndRun => hit_and_run_chain(grid, density),
        }
    }
}

/// Lazy Metropolis walk over axis neighbors: propose each of the `2d`
/// directions with probability `1/(4d)`, accept with `min(1, g(y)/g(x))`.
pub fn metropolis_chain(grid: &Grid, density: &[f64]) -> Result<DiscreteChain> {
    check_density(grid, density)?;
    let n = grid.len();
    let propose = 1.0 / (4.0 * grid.dim() as f64);
    let mut p = DMatrix::zeros(n, n);
    for x in 0..n {
        let mut moved = 0.0;
        for y in grid.neighbors(x) {
            let step = propose * (density[y] / density[x]).min(1.0);
            p[(x, y)] = step;
            moved += step;
        }
        p[(x, x)] = 1.0 - moved;
    }
    DiscreteChain::new(p)
}

/// Discretized hit-and-run: from cell `x`, the chance of landing in cell
/// `y ≠ x` is `A·g(y)·s(x, y)`, with `s(x, y) = h^d / (κ_d |x−y|^{d−1} μ(x, y))`
/// where `μ` integrates `g` along the line through both centers and
/// `κ_1 = 1`, `κ_2 = π`. `A` scales the largest off-diagonal row sum to
/// one half; the remainder stays at `x`.
pub fn hit_and_run_chain(grid: &Grid, density: &[f64]) -> Result<DiscreteChain> {
    check_density(grid, density)?;
    let n = grid.len();
    let h = grid.spacing();
    let pts = grid.points();
    let kappa = if grid.dim() == 1 { 1.0 } else { PI };
    let mut k = DMatrix::zeros(n, n);
    for x in 0..n {
        for y in (x + 1)..n {
            let r = distance(&pts[x], &pts[y]);
            let mu = line_integral(grid, density, &pts[x], &pts[y]);
            let s = h.powi(grid.dim() as i32) / (kappa * r.powi(grid.dim() as i32 - 1) * mu);
            k[(x, y)] = s;
            k[(y, x)] = s;
        }
    }
    let mut max_row = 0.0f64;
    for x in 0..n {
        let mut row = 0.0;
        for y in 0..n {
            k[(x, y)] *= density[y];
            row += k[(x, y)];
        }
        max_row = max_row.max(row);
    }
    let scale = 0.5 / max_row;
    for x in 0..n {
        let mut row = 0.0;
        for y in 0..n {
            k[(x, y)] *= scale;
            row += k[(x, y)];
        }
        k[(x, x)] = 1.0 - row;
    }
    DiscreteChain::new(k)
}

fn check_density(grid: &Grid, density: &[f64]) -> Result<()> {
    if density.len() != grid.len() {
        return Err(Error::DimensionMismatch {
            expected: grid.len(),
            got: density.len(),
        });
    }
    if density.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
        return Err(Error::InvalidParameter("grid density must be positive".into()));
    }
    Ok(())
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Integral of the piecewise-constant density (per unit length, with cell
/// masses spread over cell volumes) along the chord of `[-1, 1]^d` through
/// `a` and `b`, by the midpoint rule.
fn line_integral(grid: &Grid, density: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let r = distance(a, b);
    let u: Vec<f64> = a.iter().zip(b).map(|(x, y)| (y - x) / r).collect();
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for (&c, &d) in a.iter().zip(&u) {
        if d.abs() > 1e-15 {
            let (t1, t2) = ((-1.0 - c) / d, (1.0 - c) / d);
            lo = lo.max(t1.min(t2));
            hi = hi.min(t1.max(t2));
        }
    }
    let cell_volume = grid.spacing().powi(grid.dim() as i32);
    let step = (hi - lo) / CHORD_NODES as f64;
    let mut total = 0.0;
    let mut point = vec![0.0; a.len()];
    for k in 0..CHORD_NODES {
        let t = lo + (k as f64 + 0.5) * step;
        for i in 0..a.len() {
            point[i] = a[i] + t * u[i];
        }
        if let Some(cell) = grid.cell_of(&point) {
            total += density[cell] / cell_volume;
        }
    }
    total * step
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_layout() {
        let g = Grid::square(3).unwrap();
        assert_eq!(g.len(), 9);
        let p = &g.points()[1];
        assert!((p[0] + 2.0 / 3.0).abs() < 1e-15 && p[1].abs() < 1e-15);
        assert_eq!(g.cell_of(&[0.0, 0.9]), Some(5));
        let mut nb = g.neighbors(4);
        nb.sort();
        assert_eq!(nb, vec![1, 3, 5, 7]);
        assert_eq!(g.neighbors(0).len(), 2);
        assert!(Grid::line(65).is_err());
        assert!(Grid::square(9).is_err());
    }

    #[test]
    fn infinite_temperature_is_uniform() {
        let g = Grid::line(8).unwrap();
        let d = gibbs_density(&g.values(&|x| x[0] * x[0]), f64::INFINITY);
        assert!(d.iter().all(|&v| (v - 0.125).abs() < 1e-15));
    }

    #[test]
    fn chains_are_reversible_for_their_density() {
        for grid in [Grid::line(16).unwrap(), Grid::square(5).unwrap()] {
            let d = gibbs_density(&grid.values(&|x| x.iter().map(|c| (c - 0.3).powi(2)).sum()), 0.2);
            for kernel in [GridKernel::Metropolis, GridKernel::HitAndRun] {
                let chain = kernel.chain(&grid, &d).unwrap();
                assert!(chain.is_reversible(), "{kernel:?}");
                let pi = chain.stationary();
                for (a, b) in pi.iter().zip(&d) {
                    assert!((a - b).abs() < 1e-9, "{kernel:?}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn one_dimensional_hit_and_run_proposes_from_the_density() {
        let grid = Grid::line(8).unwrap();
        let d = gibbs_density(&grid.values(&|x| x[0].abs()), 0.5);
        let chain = hit_and_run_chain(&grid, &d).unwrap();
        let p = chain.transition();
        // Off the diagonal, every row is proportional to the density.
        for x in 0..8 {
            let y0 = if x == 0 { 1 } else { 0 };
            for y in 0..8 {
                if y != x {
                    assert!((p[(x, y)] / d[y] - p[(x, y0)] / d[y0]).abs() < 1e-12);
                }
            }
        }
    }
}
