//! Approximate reflection about the fixed state of a walk operator, built
//! from `c` independent `a`-qubit phase estimations on controlled powers of
//! the walk and simulated gate by gate on `system ⊗ ancilla`.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::ledger::{QueryKind, QueryLedger};
use crate::qwalk::walk::WalkOperator;

/// Largest system the gate-level reflector accepts.
pub const MAX_REFLECTOR_STATES: usize = 8;
/// Largest ancilla count `a·c`.
pub const MAX_ANCILLAS: usize = 12;
/// Largest dense dimension `|system| · 2^{ac}`.
pub const MAX_DENSE_DIM: usize = 1 << 16;

/// `e^{iπ/3}`, the phase used by π/3 amplification.
pub fn pi_third() -> Complex64 {
    Complex64::from_polar(1.0, PI / 3.0)
}

/// Bits of phase precision `a = ⌈log₂(1/Δ)⌉` and repetitions
/// `c = ⌈log₂(1/√ε)⌉`.
pub fn reflector_sizes(delta: f64, eps: f64) -> Result<(usize, usize)> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "delta must lie in (0, 1], got {delta}"
        )));
    }
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::InvalidParameter(format!("eps must lie in (0, 1/2), got {eps}")));
    }
    let a = (1.0 / delta).log2().ceil().max(1.0) as usize;
    let c = (1.0 / eps.sqrt()).log2().ceil().max(1.0) as usize;
    Ok((a, c))
}

/// Amplitude of the all-zero outcome of `a`-bit phase estimation on an
/// eigenvector with phase `ξ` turns: `|sin(π M ξ) / (M sin(π ξ))|`, `M = 2^a`.
pub fn zero_outcome_amplitude(xi: f64, a: usize) -> f64 {
    let m = (1u64 << a) as f64;
    let s = (PI * xi).sin();
    if s.abs() < 1e-15 {
        return 1.0;
    }
    ((PI * m * xi).sin() / (m * s)).abs()
}

/// Controlled-walk invocations charged per reflector application,
/// `2^{a+1} c`.
pub fn charged_walk_calls(a: usize, c: usize) -> u64 {
    (1u64 << (a + 1)) * c as u64
}

/// Controlled-walk invocations the circuit literally performs: each of the
/// `c` phase estimations applies `W^{2^k}` for `k < a`, once forward and
/// once to uncompute, `2c(2^a − 1)` in total.
pub fn literal_walk_calls(a: usize, c: usize) -> u64 {
    2 * c as u64 * ((1u64 << a) - 1)
}

/// The circuit `R̃` for a given walk operator.
pub struct ApproxReflector {
    a: usize,
    c: usize,
    alpha: Complex64,
    sys_dim: usize,
    /// `W^{2^k}` and its inverse for `k < a`.
    powers: Vec<DMatrix<Complex64>>,
    inverse_powers: Vec<DMatrix<Complex64>>,
    ledger: Arc<QueryLedger>,
}

impl ApproxReflector {
    pub fn new(walk: &WalkOperator, a: usize, c: usize, alpha: Complex64) -> Result<Self> {
        if walk.states() > MAX_REFLECTOR_STATES {
            return Err(Error::CapExceeded(format!(
                "reflector on {} states exceeds the cap of {MAX_REFLECTOR_STATES}",
                walk.states()
            )));
        }
        if a == 0 || c == 0 || a * c > MAX_ANCILLAS {
            return Err(Error::CapExceeded(format!(
                "a·c = {} ancillas must lie in [1, {MAX_ANCILLAS}]",
                a * c
            )));
        }
        let sys_dim = walk.dim();
        if sys_dim << (a * c) > MAX_DENSE_DIM {
            return Err(Error::CapExceeded(format!(
                "dense dimension {} exceeds {MAX_DENSE_DIM}",
                sys_dim << (a * c)
            )));
        }
        let w = walk.matrix().map(|v| Complex64::new(v, 0.0));
        let mut powers = Vec::with_capacity(a);
        let mut current = w;
        for _ in 0..a {
            powers.push(current.clone());
            current = &current * &current;
        }
        let inverse_powers = powers.iter().map(|p| p.adjoint()).collect();
        Ok(Self {
            a,
            c,
            alpha,
            sys_dim,
            powers,
            inverse_powers,
            ledger: Arc::new(QueryLedger::new()),
        })
    }

    pub fn with_ledger(mut self, ledger: Arc<QueryLedger>) -> Self {
        self.ledger = ledger;
        self
    }

    pub fn ledger(&self) -> &Arc<QueryLedger> {
        &self.ledger
    }

    pub fn ancillas(&self) -> usize {
        self.a * self.c
    }

    pub fn sizes(&self) -> (usize, usize) {
        (self.a, self.c)
    }

    /// Applies `R̃` to `|ψ⟩|0…0⟩` and returns the joint state as a
    /// `system × 2^{ac}` matrix whose column index is the ancilla bit string.
    pub fn apply_to_system(&self, psi: &DVector<Complex64>) -> Result<DMatrix<Complex64>> {
        if psi.len() != self.sys_dim {
            return Err(Error::DimensionMismatch {
                expected: self.sys_dim,
                got: psi.len(),
            });
        }
        let mut state = DMatrix::zeros(self.sys_dim, 1 << self.ancillas());
        state.set_column(0, psi);
        self.apply(&mut state);
        Ok(state)
    }

    /// Applies `R̃` in place to a joint state.
    pub fn apply(&self, state: &mut DMatrix<Complex64>) {
        let m = 1usize << self.a;
        let hadamard = hadamard_matrix(self.a);
        let qft = dft_matrix(m, 1.0);
        let iqft = dft_matrix(m, -1.0);
        for r in 0..self.c {
            apply_register(state, r * self.a, self.a, &hadamard);
            for k in 0..self.a {
                apply_controlled(state, r * self.a + k, &self.powers[k]);
            }
            apply_register(state, r * self.a, self.a, &iqft);
        }
        let zero = state.column(0) * self.alpha;
        state.set_column(0, &zero);
        for r in 0..self.c {
            apply_register(state, r * self.a, self.a, &qft);
            for k in 0..self.a {
                apply_controlled(state, r * self.a + k, &self.inverse_powers[k]);
            }
            apply_register(state, r * self.a, self.a, &hadamard);
        }
        self.ledger
            .charge(QueryKind::ControlledWalk, charged_walk_calls(self.a, self.c));
        self.ledger.charge(QueryKind::Reflector, 1);
    }
}

fn hadamard_matrix(bits: usize) -> DMatrix<Complex64> {
    let m = 1usize << bits;
    let scale = 1.0 / (m as f64).sqrt();
    DMatrix::from_fn(m, m, |i, j| {
        let sign = if (i & j).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
        Complex64::new(sign * scale, 0.0)
    })
}

/// `F[j,k] = e^{sign·2πi jk/M}/√M`.
fn dft_matrix(m: usize, sign: f64) -> DMatrix<Complex64> {
    let scale = 1.0 / (m as f64).sqrt();
    DMatrix::from_fn(m, m, |j, k| {
        Complex64::from_polar(scale, sign * 2.0 * PI * ((j * k) % m) as f64 / m as f64)
    })
}

/// Applies `u` to the register occupying ancilla bits `[shift, shift+bits)`.
fn apply_register(state: &mut DMatrix<Complex64>, shift: usize, bits: usize, u: &DMatrix<Complex64>) {
    let m = 1usize << bits;
    let mask = (m - 1) << shift;
    let cols = state.ncols();
    let rows = state.nrows();
    let mut gathered = DMatrix::<Complex64>::zeros(rows, m);
    for base in (0..cols).filter(|c| c & mask == 0) {
        for k in 0..m {
            gathered.set_column(k, &state.column(base | (k << shift)));
        }
        let mixed = &gathered * u.transpose();
        for j in 0..m {
            state.set_column(base | (j << shift), &mixed.column(j));
        }
    }
}

/// Applies `w` to the system on every ancilla basis state with `bit` set.
fn apply_controlled(state: &mut DMatrix<Complex64>, bit: usize, w: &DMatrix<Complex64>) {
    for col in (0..state.ncols()).filter(|c| c >> bit & 1 == 1) {
        let moved = w * state.column(col);
        state.set_column(col, &moved);
    }
}

/// Error of the register-space reflector on an eigenvector with phase `ξ`
/// turns: `|α − 1| |c₀(ξ)|^c`.
pub fn predicted_error(xi: f64, a: usize, c: usize, alpha: Complex64) -> f64 {
    (alpha - 1.0).norm() * zero_outcome_amplitude(xi, a).powi(c as i32)
}
