//! Fixed-point π/3 amplitude amplification.
//!
//! `V₀ = I` and `V_{j+1} = V_j R_s V_j† R_t V_j`, where `R_s` and `R_t`
//! multiply the start and target states by `e^{iπ/3}`. Then
//! `|⟨t|V_m|s⟩|² ≥ 1 − (1 − |⟨t|s⟩|²)^{3^m}`.

use std::cell::Cell;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// An operator applied to state vectors, with access to its adjoint.
pub trait Reflection {
    fn apply(&self, v: &DVector<Complex64>) -> DVector<Complex64>;
    fn apply_adjoint(&self, v: &DVector<Complex64>) -> DVector<Complex64>;
}

/// `R = I + (α − 1)|s⟩⟨s|` for a unit vector `s`.
#[derive(Clone, Debug)]
pub struct ExactReflection {
    state: DVector<Complex64>,
    alpha: Complex64,
}

impl ExactReflection {
    pub fn new(state: DVector<Complex64>, alpha: Complex64) -> Self {
        let norm = state.norm();
        Self {
            state: state / Complex64::new(norm, 0.0),
            alpha,
        }
    }

    fn apply_with(&self, v: &DVector<Complex64>, alpha: Complex64) -> DVector<Complex64> {
        let overlap = self.state.dotc(v);
        v + &self.state * (overlap * (alpha - 1.0))
    }
}

impl Reflection for ExactReflection {
    fn apply(&self, v: &DVector<Complex64>) -> DVector<Complex64> {
        self.apply_with(v, self.alpha)
    }

    fn apply_adjoint(&self, v: &DVector<Complex64>) -> DVector<Complex64> {
        self.apply_with(v, self.alpha.conj())
    }
}

/// A dense matrix used as a reflection, for effective reflectors that
/// need not be exactly unitary.
#[derive(Clone, Debug)]
pub struct MatrixReflection {
    matrix: DMatrix<Complex64>,
    adjoint: DMatrix<Complex64>,
}

impl MatrixReflection {
    pub fn new(matrix: DMatrix<Complex64>) -> Self {
        let adjoint = matrix.adjoint();
        Self { matrix, adjoint }
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }
}

impl Reflection for MatrixReflection {
    fn apply(&self, v: &DVector<Complex64>) -> DVector<Complex64> {
        &self.matrix * v
    }

    fn apply_adjoint(&self, v: &DVector<Complex64>) -> DVector<Complex64> {
        &self.adjoint * v
    }
}

/// Result of [`pi3_amplify`].
#[derive(Clone, Debug)]
pub struct Amplified {
    pub state: DVector<Complex64>,
    /// Applications of `R_s` or its adjoint.
    pub start_uses: u64,
    /// Applications of `R_t` or its adjoint.
    pub target_uses: u64,
}

/// Applies `V_m` to `start`.
pub fn pi3_amplify(
    start_reflection: &dyn Reflection,
    target_reflection: &dyn Reflection,
    m: u32,
    start: &DVector<Complex64>,
) -> Amplified {
    let amp = Amplifier {
        rs: start_reflection,
        rt: target_reflection,
        start_uses: Cell::new(0),
        target_uses: Cell::new(0),
    };
    let state = amp.v(m, false, start.clone());
    Amplified {
        state,
        start_uses: amp.start_uses.get(),
        target_uses: amp.target_uses.get(),
    }
}

/// The smallest `m` with `(1 − p)^{3^m} ≤ tolerance`, for `p = |⟨t|s⟩|²`.
pub fn rounds_for(p: f64, tolerance: f64) -> u32 {
    if p >= 1.0 {
        return 0;
    }
    let mut m = 0u32;
    while (1.0 - p).powf(3f64.powi(m as i32)) > tolerance && m < 64 {
        m += 1;
    }
    m
}

struct Amplifier<'a> {
    rs: &'a dyn Reflection,
    rt: &'a dyn Reflection,
    start_uses: Cell<u64>,
    target_uses: Cell<u64>,
}

impl Amplifier<'_> {
    fn v(&self, j: u32, adjoint: bool, x: DVector<Complex64>) -> DVector<Complex64> {
        if j == 0 {
            return x;
        }
        if !adjoint {
            let x = self.v(j - 1, false, x);
            let x = self.target(&x, false);
            let x = self.v(j - 1, true, x);
            let x = self.start(&x, false);
            self.v(j - 1, false, x)
        } else {
            let x = self.v(j - 1, true, x);
            let x = self.start(&x, true);
            let x = self.v(j - 1, false, x);
            let x = self.target(&x, true);
            self.v(j - 1, true, x)
        }
    }

    fn start(&self, x: &DVector<Complex64>, adjoint: bool) -> DVector<Complex64> {
        self.start_uses.set(self.start_uses.get() + 1);
        if adjoint {
            self.rs.apply_adjoint(x)
        } else {
            self.rs.apply(x)
        }
    }

    fn target(&self, x: &DVector<Complex64>, adjoint: bool) -> DVector<Complex64> {
        self.target_uses.set(self.target_uses.get() + 1);
        if adjoint {
            self.rt.apply_adjoint(x)
        } else {
            self.rt.apply(x)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qwalk::reflector::pi_third;

    fn two_dim(p: f64) -> (DVector<Complex64>, DVector<Complex64>) {
        let s = DVector::from_vec(vec![
            Complex64::new(p.sqrt(), 0.0),
            Complex64::new((1.0 - p).sqrt(), 0.0),
        ]);
        let t = DVector::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]);
        (s, t)
    }

    #[test]
    fn identity_at_zero_rounds() {
        let (s, t) = two_dim(0.3);
        let rs = ExactReflection::new(s.clone(), pi_third());
        let rt = ExactReflection::new(t.clone(), pi_third());
        let out = pi3_amplify(&rs, &rt, 0, &s);
        assert_eq!(out.state, s);
        assert_eq!(out.start_uses + out.target_uses, 0);
    }

    #[test]
    fn two_dimensional_examples() {
        let (s, t) = two_dim(0.3);
        let rs = ExactReflection::new(s.clone(), pi_third());
        let rt = ExactReflection::new(t.clone(), pi_third());
        for (m, bound) in [(1u32, 1.0 - 0.7f64.powi(3)), (2, 1.0 - 0.7f64.powi(9))] {
            let out = pi3_amplify(&rs, &rt, m, &s);
            let fidelity = t.dotc(&out.state).norm_sqr();
            assert!(fidelity >= bound - 1e-12, "m={m}: {fidelity} < {bound}");
            // One π/3 round on a 2-d system is exact: 1 − (1−p)³.
            if m == 1 {
                assert!((fidelity - bound).abs() < 1e-12);
            }
            let total = 3u64.pow(m) - 1;
            assert_eq!(out.start_uses + out.target_uses, total);
            assert!(out.start_uses <= 3u64.pow(m) && out.target_uses <= 3u64.pow(m));
        }
    }

    #[test]
    fn rounds_for_tolerance() {
        assert_eq!(rounds_for(1.0, 0.01), 0);
        assert_eq!(rounds_for(0.3, 0.7), 0);
        assert_eq!(rounds_for(0.3, 0.5), 1);
        assert_eq!(rounds_for(0.3, 0.05), 2);
    }
}
