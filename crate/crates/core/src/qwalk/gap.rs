//! How much of a warm start's coherent encoding sits on walk eigenvectors
//! whose eigenvalue is close to, but below, one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qwalk::chain::DiscreteChain;
use crate::qwalk::walk::{coherent_encoding, WalkOperator, WalkVariant};

/// Eigenvalues within this distance of one count as the fixed eigenspace.
const FIXED_TOL: f64 = 1e-9;

/// How warm the start density is relative to the stationary one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Warmness {
    /// `sup ρ₀/π ≤ β`.
    Sup(f64),
    /// `‖ρ₀/π‖ = Σ ρ₀²/π ≤ γ`.
    L2(f64),
}

impl Warmness {
    pub fn sup(rho0: &[f64], pi: &[f64]) -> Self {
        Warmness::Sup(rho0.iter().zip(pi).map(|(r, p)| r / p).fold(0.0, f64::max))
    }

    pub fn l2(rho0: &[f64], pi: &[f64]) -> Self {
        Warmness::L2(rho0.iter().zip(pi).map(|(r, p)| r * r / p).sum())
    }

    /// `C·β·√ε` or `C·(γ^{1/4} ε^{3/4} + √ε)`.
    pub fn bound(self, eps: f64, constant: f64) -> f64 {
        match self {
            Warmness::Sup(beta) => constant * beta * eps.sqrt(),
            Warmness::L2(gamma) => constant * (gamma.powf(0.25) * eps.powf(0.75) + eps.sqrt()),
        }
    }
}

/// Accuracy, band width and constant of the effective-gap check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapCriterion {
    /// Accuracy the start must mix to within the horizon `t`.
    pub eps: f64,
    /// Eigenvalues with real part in `[1 − band/t, 1)` count as bad.
    pub band: f64,
    /// `C` in the warmness bound.
    pub constant: f64,
}

impl GapCriterion {
    /// Unit band and `C = 10`.
    pub fn new(eps: f64) -> Self {
        Self {
            eps,
            band: 1.0,
            constant: 10.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub t: u64,
    /// Eigenvalues in `[1 − band/t, 1)` count as bad.
    pub floor: f64,
    /// Eigenvectors of the walk in the bad band.
    pub bad_vectors: usize,
    /// `Σ |⟨φ|ψ_i⟩|²` over the bad band.
    pub mass: f64,
    pub max_overlap: f64,
    pub bound: f64,
    pub violated: bool,
}

/// Overlap of `|φ_{ρ₀}⟩` with the walk eigenvectors whose eigenvalue
/// real part lies in `[1 − band/t, 1)`. Fails unless `ρ₀` mixes to within
/// `criterion.eps` in `t` steps.
pub fn effective_gap_report(
    walk: &WalkOperator,
    chain: &DiscreteChain,
    rho0: &[f64],
    t: u64,
    warmness: Warmness,
    criterion: GapCriterion,
) -> Result<GapReport> {
    let GapCriterion { eps, band, constant } = criterion;
    if walk.variant() != WalkVariant::Primal {
        return Err(Error::InvalidParameter("effective gap needs the primal walk".into()));
    }
    if rho0.len() != chain.len() || walk.states() != chain.len() {
        return Err(Error::DimensionMismatch {
            expected: chain.len(),
            got: rho0.len(),
        });
    }
    let mixes = chain.mixing_time_from(Some(rho0), eps, t.max(1))?;
    if mixes > t {
        return Err(Error::MixingPrecondition(format!(
            "start needs {mixes} steps to reach accuracy {eps:e}, more than {t}"
        )));
    }
    let phi = coherent_encoding(chain, rho0);
    let floor = 1.0 - band / t.max(1) as f64;
    let vectors = walk.eigenvectors();
    let mut mass = 0.0;
    let mut max_overlap = 0.0f64;
    let mut bad_vectors = 0;
    for (j, &phase) in walk.phases().iter().enumerate() {
        let re = phase.cos();
        if re >= 1.0 - FIXED_TOL || re < floor {
            continue;
        }
        bad_vectors += 1;
        let overlap: f64 = vectors
            .column(j)
            .iter()
            .zip(phi.iter())
            .map(|(v, p)| v.conj() * *p)
            .sum::<num_complex::Complex64>()
            .norm_sqr();
        mass += overlap;
        max_overlap = max_overlap.max(overlap);
    }
    let bound = warmness.bound(eps, constant);
    Ok(GapReport {
        t,
        floor,
        bad_vectors,
        mass,
        max_overlap,
        bound,
        violated: mass > bound,
    })
}
