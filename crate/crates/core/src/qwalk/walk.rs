//! Dense walk operators on the doubled space `C^Ω ⊗ C^Ω`, with basis index
//! `x·|Ω| + y` for `|x⟩|y⟩`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::qwalk::chain::DiscreteChain;

/// Largest chain the dense walk operator accepts.
pub const MAX_WALK_STATES: usize = 16;
/// Unitarity tolerance.
pub const UNITARY_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WalkVariant {
    /// `W = S(2Π − I)`.
    Primal,
    /// `W′ = U†SU R_A U†SU R_A`.
    Alternative,
}

/// A real orthogonal walk operator together with its eigendecomposition.
#[derive(Clone, Debug)]
pub struct WalkOperator {
    states: usize,
    variant: WalkVariant,
    matrix: DMatrix<f64>,
    /// Eigenphases in `(−π, π]`, sorted increasingly.
    phases: Vec<f64>,
    /// Orthonormal eigenvectors as columns, in the order of `phases`.
    vectors: DMatrix<Complex64>,
    fixed: DVector<f64>,
}

impl WalkOperator {
    pub fn build(chain: &DiscreteChain, variant: WalkVariant) -> Result<Self> {
        let n = chain.len();
        if n > MAX_WALK_STATES {
            return Err(Error::CapExceeded(format!(
                "walk operator on {n} states exceeds the dense cap of {MAX_WALK_STATES}"
            )));
        }
        chain.require_reversible()?;
        let u = update_operator(chain);
        let s = swap(n);
        let matrix = match variant {
            WalkVariant::Primal => {
                let reflect = projector_reflection(chain);
                &s * reflect
            }
            WalkVariant::Alternative => {
                let r_a = ancilla_reflection(n);
                let half = u.transpose() * &s * &u * r_a;
                &half * &half
            }
        };
        let fixed = match variant {
            WalkVariant::Primal => coherent_encoding(chain, chain.stationary()),
            WalkVariant::Alternative => register_state(chain.stationary()),
        };
        let (phases, vectors) = eigen_phases(&matrix)?;
        Ok(Self {
            states: n,
            variant,
            matrix,
            phases,
            vectors,
            fixed,
        })
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn variant(&self) -> WalkVariant {
        self.variant
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn eigenvectors(&self) -> &DMatrix<Complex64> {
        &self.vectors
    }

    /// The stationary state fixed by the operator: `|Π⟩ = Σ √π(x)|x⟩|ψ_x⟩`
    /// for `W`, and `Σ √π(x)|x⟩|0⟩` for `W′`.
    pub fn fixed_state(&self) -> &DVector<f64> {
        &self.fixed
    }

    /// `‖WᵀW − I‖` in the max-entry norm.
    pub fn unitarity_defect(&self) -> f64 {
        let n = self.dim();
        (self.matrix.transpose() * &self.matrix - DMatrix::<f64>::identity(n, n)).amax()
    }

    /// `|⟨Π|v_j⟩|²` for every eigenvector.
    pub fn fixed_overlaps(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|j| {
                self.vectors
                    .column(j)
                    .iter()
                    .zip(self.fixed.iter())
                    .map(|(v, f)| v.conj() * f)
                    .sum::<Complex64>()
                    .norm_sqr()
            })
            .collect()
    }

    /// Spectrum rows `(index, eigenphase, |⟨Π|v_j⟩|²)` as CSV.
    pub fn spectrum_csv(&self) -> String {
        let mut out = String::from("index,eigenphase,fixed_overlap\n");
        for (j, (phase, overlap)) in self.phases.iter().zip(self.fixed_overlaps()).enumerate() {
            out.push_str(&format!("{j},{phase:.17e},{overlap:.17e}\n"));
        }
        out
    }
}

/// The unitary `U = ⊕_x H_x` with `H_x|0⟩ = |ψ_x⟩ = Σ_y √P(x,y)|y⟩`, where
/// each block is a Householder reflection.
pub fn update_operator(chain: &DiscreteChain) -> DMatrix<f64> {
    let n = chain.len();
    let p = chain.transition();
    let mut u = DMatrix::zeros(n * n, n * n);
    for x in 0..n {
        let psi: Vec<f64> = (0..n).map(|y| p[(x, y)].sqrt()).collect();
        let block = householder_to(&psi);
        for i in 0..n {
            for j in 0..n {
                u[(x * n + i, x * n + j)] = block[(i, j)];
            }
        }
    }
    u
}

/// A symmetric orthogonal matrix whose first column is the unit vector `v`.
fn householder_to(v: &[f64]) -> DMatrix<f64> {
    let n = v.len();
    let mut w: Vec<f64> = v.to_vec();
    w[0] -= 1.0;
    let norm2: f64 = w.iter().map(|a| a * a).sum();
    let mut h = DMatrix::identity(n, n);
    if norm2 < 1e-30 {
        return h;
    }
    for i in 0..n {
        for j in 0..n {
            h[(i, j)] -= 2.0 * w[i] * w[j] / norm2;
        }
    }
    h
}

pub fn swap(n: usize) -> DMatrix<f64> {
    let mut s = DMatrix::zeros(n * n, n * n);
    for x in 0..n {
        for y in 0..n {
            s[(y * n + x, x * n + y)] = 1.0;
        }
    }
    s
}

/// `2Π − I` for the projector onto `span{|x⟩|ψ_x⟩}`.
fn projector_reflection(chain: &DiscreteChain) -> DMatrix<f64> {
    let n = chain.len();
    let p = chain.transition();
    let mut r = -DMatrix::<f64>::identity(n * n, n * n);
    for x in 0..n {
        for y in 0..n {
            for z in 0..n {
                r[(x * n + y, x * n + z)] += 2.0 * (p[(x, y)] * p[(x, z)]).sqrt();
            }
        }
    }
    r
}

/// `R_A = 2Σ_x |x⟩|0⟩⟨x|⟨0| − I`.
fn ancilla_reflection(n: usize) -> DMatrix<f64> {
    let mut r = -DMatrix::<f64>::identity(n * n, n * n);
    for x in 0..n {
        r[(x * n, x * n)] = 1.0;
    }
    r
}

/// `|φ_ρ⟩ = Σ √ρ(x) √P(x,y) |x⟩|y⟩`.
pub fn coherent_encoding(chain: &DiscreteChain, rho: &[f64]) -> DVector<f64> {
    let n = chain.len();
    let p = chain.transition();
    let norm: f64 = rho.iter().sum();
    DVector::from_fn(n * n, |k, _| {
        let (x, y) = (k / n, k % n);
        (rho[x] / norm).sqrt() * p[(x, y)].sqrt()
    })
}

/// `Σ √ρ(x) |x⟩|0⟩`.
pub fn register_state(rho: &[f64]) -> DVector<f64> {
    let n = rho.len();
    let norm: f64 = rho.iter().sum();
    let mut v = DVector::zeros(n * n);
    for (x, r) in rho.iter().enumerate() {
        v[x * n] = (r / norm).sqrt();
    }
    v
}

/// Eigenphases and eigenvectors of a real orthogonal matrix.
///
/// For a unitary `A`, the Hermitian matrix `(A + A†)/2 + c(A − A†)/(2i)`
/// has the eigenvalue `cos φ + c sin φ` on the eigenspace of `e^{iφ}`, so
/// its eigenvectors diagonalize `A` except where two phases collide under
/// that map. Colliding clusters are split again with a different `c`.
fn eigen_phases(m: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<Complex64>)> {
    let n = m.nrows();
    let a = m.map(|v| Complex64::new(v, 0.0));
    let mut columns: Vec<DVector<Complex64>> = Vec::with_capacity(n);
    refine(&a, DMatrix::identity(n, n), 0, &mut columns)?;
    let mut order: Vec<(f64, usize)> = columns
        .iter()
        .enumerate()
        .map(|(j, v)| (wrap_phase((v.adjoint() * &a * v)[(0, 0)].arg()), j))
        .collect();
    order.sort_by(|x, y| x.0.total_cmp(&y.0));
    let phases = order.iter().map(|(p, _)| *p).collect();
    let vectors = DMatrix::from_fn(n, n, |i, j| columns[order[j].1][i]);
    Ok((phases, vectors))
}

const SPLIT_COEFFICIENTS: [f64; 4] = [
    std::f64::consts::FRAC_1_PI,
    1.732_050_808,
    -0.618_033_989,
    std::f64::consts::E,
];
const CLUSTER_TOL: f64 = 1e-7;

fn refine(
    a: &DMatrix<Complex64>,
    basis: DMatrix<Complex64>,
    depth: usize,
    out: &mut Vec<DVector<Complex64>>,
) -> Result<()> {
    let k = basis.ncols();
    if k == 1 {
        out.push(basis.column(0).into_owned());
        return Ok(());
    }
    let restricted = basis.adjoint() * a * &basis;
    let mean = restricted.trace() / Complex64::new(k as f64, 0.0);
    let scalar_defect = (&restricted - DMatrix::<Complex64>::identity(k, k) * mean).camax();
    if scalar_defect <= 1e-9 {
        out.extend(basis.column_iter().map(|c| c.into_owned()));
        return Ok(());
    }
    if depth >= SPLIT_COEFFICIENTS.len() {
        return Err(Error::InvalidParameter(format!(
            "eigenspace splitting failed to converge (defect {scalar_defect:e})"
        )));
    }
    let c = SPLIT_COEFFICIENTS[depth];
    let adj = restricted.adjoint();
    let h = (&restricted + &adj) * Complex64::new(0.5, 0.0) + (&restricted - &adj) * Complex64::new(0.0, -0.5 * c);
    let (values, vectors) = hermitian_eigen(&h);
    let mut start = 0;
    while start < k {
        let mut end = start + 1;
        while end < k && values[end] - values[end - 1] <= CLUSTER_TOL {
            end += 1;
        }
        let cols: Vec<DVector<Complex64>> = (start..end).map(|j| &basis * vectors.column(j)).collect();
        if end - start == 1 {
            out.extend(cols);
        } else {
            refine(a, DMatrix::from_columns(&cols), depth + 1, out)?;
        }
        start = end;
    }
    Ok(())
}

/// Eigenpairs of a Hermitian matrix in increasing order, through the real
/// symmetric embedding `[[Re, −Im], [Im, Re]]`. Each eigenvalue appears
/// twice in the embedding, once for `v` and once for `iv`; every cluster is
/// reduced back to an orthonormal complex basis of half its size.
fn hermitian_eigen(h: &DMatrix<Complex64>) -> (Vec<f64>, DMatrix<Complex64>) {
    let k = h.nrows();
    let big = DMatrix::from_fn(2 * k, 2 * k, |i, j| {
        let z = h[(i % k, j % k)];
        match (i < k, j < k) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    });
    let eig = big.symmetric_eigen();
    let mut order: Vec<usize> = (0..2 * k).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
    let mut values = Vec::with_capacity(k);
    let mut columns: Vec<DVector<Complex64>> = Vec::with_capacity(k);
    let mut start = 0;
    while start < 2 * k {
        let mut end = start + 1;
        while end < 2 * k && eig.eigenvalues[order[end]] - eig.eigenvalues[order[end - 1]] <= 1e-10 {
            end += 1;
        }
        let mut candidates: Vec<DVector<Complex64>> = order[start..end]
            .iter()
            .map(|&j| {
                let col = eig.eigenvectors.column(j);
                DVector::from_fn(k, |i, _| Complex64::new(col[i], col[i + k]))
            })
            .collect();
        let mut basis: Vec<DVector<Complex64>> = Vec::new();
        for _ in 0..(end - start).div_ceil(2) {
            let (best, norm) = candidates
                .iter()
                .enumerate()
                .map(|(i, v)| (i, v.norm()))
                .fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if norm < 1e-6 {
                break;
            }
            let b = candidates.swap_remove(best) / Complex64::new(norm, 0.0);
            for v in candidates.iter_mut() {
                let proj = b.dotc(v);
                *v -= &b * proj;
            }
            basis.push(b);
        }
        let value = eig.eigenvalues[order[start]];
        for v in basis {
            values.push(value);
            columns.push(v);
        }
        start = end;
    }
    (values, DMatrix::from_columns(&columns))
}

/// Maps an angle into `(−π, π]`, sending values within `1e-9` of `−π` to `π`.
pub fn wrap_phase(phi: f64) -> f64 {
    let mut p = phi.rem_euclid(2.0 * PI);
    if p > PI {
        p -= 2.0 * PI;
    }
    if p <= -PI + 1e-9 {
        p = PI;
    }
    p
}

/// Eigenphases of `W` predicted from the discriminant spectrum: `±arccos λ`
/// for every `λ ≠ ±1`, and the remaining dimensions split between `0` and
/// `π` according to the symmetric and antisymmetric parts of the doubled
/// space.
pub fn predicted_phases(lambdas: &[f64]) -> Vec<f64> {
    let n = lambdas.len();
    let tol = 1e-9;
    let plus = lambdas.iter().filter(|l| (*l - 1.0).abs() <= tol).count();
    let minus = lambdas.iter().filter(|l| (*l + 1.0).abs() <= tol).count();
    let mut phases = Vec::with_capacity(n * n);
    let mut pairs = 0;
    for &l in lambdas {
        if (l - 1.0).abs() > tol && (l + 1.0).abs() > tol {
            let theta = l.clamp(-1.0, 1.0).acos();
            phases.push(theta);
            phases.push(-theta);
            pairs += 1;
        }
    }
    let zeros = plus + n * (n - 1) / 2 - pairs - minus;
    let pis = minus + n * (n + 1) / 2 - pairs - plus;
    phases.extend(std::iter::repeat_n(0.0, zeros));
    phases.extend(std::iter::repeat_n(PI, pis));
    phases.sort_by(f64::total_cmp);
    phases
}

/// Largest gap between two sorted phase lists, compared on the circle.
pub fn phase_mismatch(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter()
        .zip(b)
        .map(|(x, y)| circular_distance(*x, *y))
        .fold(0.0, f64::max)
}

pub fn circular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}
