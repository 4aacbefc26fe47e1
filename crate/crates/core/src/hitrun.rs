//! Hit-and-run over a convex body and the unidimensional rejection sampler
//! it uses on each chord.
//!
//! Densities are handled through their logarithm so that annealing targets
//! `exp(-F/T)` at small temperatures neither underflow nor overflow. A chord
//! is parametrized by signed arclength `τ ∈ [s, t]` from the current point.

use std::cell::Cell;
use std::io::Write;

use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::{dot, sample_direction, ConvexBody, LinearMap};

/// Cap on InitP and bisection loops.
pub const SEARCH_CAP: usize = 64;

/// Floor applied to the logconcavity defect inside the sampler. With a
/// defect of exactly zero the probe-gap test in `init_p` only passes on flat
/// densities, so a strictly logconcave `g` would never terminate.
pub const MIN_BETA: f64 = 1e-3;

/// `γ e^{-2β} / (12 m)`, the per-chord accuracy that keeps `m` steps within
/// `γ` of the exact walk.
pub fn default_chord_accuracy(beta: f64, steps: usize, gamma: f64) -> f64 {
    gamma * (-2.0 * beta).exp() / (12.0 * steps.max(1) as f64)
}

/// Rejection-round cap `200 e^{3β}` for a given effective defect.
pub fn rejection_cap(beta: f64) -> usize {
    (200.0 * (3.0 * beta).exp()).ceil() as usize
}

/// A `β`-logconcave density restricted to a chord `[s, t]`.
pub struct ChordDensity<'a> {
    s: f64,
    t: f64,
    log_g: Box<dyn Fn(f64) -> Result<f64> + 'a>,
    beta: f64,
    eps: f64,
    evals: Cell<u64>,
}

impl<'a> ChordDensity<'a> {
    /// `log_g` is the logarithm of the (unnormalized) density at arclength
    /// `τ`. `eps` must lie in `(0, e^{-2β}/2]`.
    pub fn from_log(s: f64, t: f64, log_g: impl Fn(f64) -> f64 + 'a, beta: f64, eps: f64) -> Result<Self> {
        Self::from_fallible_log(s, t, move |x| Ok(log_g(x)), beta, eps)
    }

    /// As [`ChordDensity::from_log`], for densities whose evaluation can fail
    /// (for example when a query budget runs out).
    pub fn from_fallible_log(
        s: f64,
        t: f64,
        log_g: impl Fn(f64) -> Result<f64> + 'a,
        beta: f64,
        eps: f64,
    ) -> Result<Self> {
        if !(s < t) || !s.is_finite() || !t.is_finite() {
            return Err(Error::InvalidParameter(format!("chord needs s < t, got [{s}, {t}]")));
        }
        if !(beta >= 0.0) {
            return Err(Error::InvalidParameter(format!("beta must be nonnegative, got {beta}")));
        }
        let upper = 0.5 * (-2.0 * beta).exp();
        if !(eps > 0.0 && eps <= upper) {
            return Err(Error::InvalidParameter(format!(
                "chord accuracy {eps} outside (0, {upper}]"
            )));
        }
        Ok(Self {
            s,
            t,
            log_g: Box::new(log_g),
            beta,
            eps,
            evals: Cell::new(0),
        })
    }

    /// Convenience constructor from a positive density.
    pub fn from_density(s: f64, t: f64, g: impl Fn(f64) -> f64 + 'a, beta: f64, eps: f64) -> Result<Self> {
        Self::from_log(s, t, move |x| g(x).ln(), beta, eps)
    }

    pub fn endpoints(&self) -> (f64, f64) {
        (self.s, self.t)
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Defect actually used by the sampler, `max(β, MIN_BETA)`.
    pub fn effective_beta(&self) -> f64 {
        self.beta.max(MIN_BETA)
    }

    pub fn accuracy(&self) -> f64 {
        self.eps
    }

    /// Density evaluations made so far.
    pub fn evaluations(&self) -> u64 {
        self.evals.get()
    }

    /// `log g(τ)`; counts one evaluation.
    pub fn log_g(&self, x: f64) -> Result<f64> {
        self.evals.set(self.evals.get() + 1);
        (self.log_g)(x)
    }
}

/// Trisection search for a point `p` near the mode. Returns `(p, log g(p))`.
pub fn init_p(d: &ChordDensity) -> Result<(f64, f64)> {
    let beta = d.effective_beta();
    let (mut s, mut t) = d.endpoints();
    for _ in 0..SEARCH_CAP {
        let x = [0.75 * s + 0.25 * t, 0.5 * s + 0.5 * t, 0.25 * s + 0.75 * t];
        let v = [d.log_g(x[0])?, d.log_g(x[1])?, d.log_g(x[2])?];
        if (v[0] - v[2]).abs() > beta {
            if v[0] > v[2] {
                t = x[2];
            } else {
                s = x[0];
            }
        } else if (v[0] - v[1]).abs() > beta {
            if v[0] > v[1] {
                t = x[1];
            } else {
                s = x[0];
            }
        } else if (v[1] - v[2]).abs() > beta {
            if v[1] > v[2] {
                t = x[2];
            } else {
                s = x[1];
            }
        } else {
            let mut best = 0;
            for i in 1..3 {
                if v[i] > v[best] {
                    best = i;
                }
            }
            return Ok((x[best], v[best]));
        }
    }
    Err(Error::IterationCap {
        what: "InitP",
        cap: SEARCH_CAP,
    })
}

/// Bisection for a point whose density lies in `[e^{log_lo}, e^{log_hi}]`.
/// `below` is the end where `g` falls short of the window and `above` the end
/// where it exceeds it; the two may be given in either spatial order.
pub fn bin_search(d: &ChordDensity, below: f64, above: f64, log_lo: f64, log_hi: f64) -> Result<f64> {
    let (mut below, mut above) = (below, above);
    for _ in 0..SEARCH_CAP {
        let mid = 0.5 * (below + above);
        let v = d.log_g(mid)?;
        if v > log_hi {
            above = mid;
        } else if v < log_lo {
            below = mid;
        } else {
            return Ok(mid);
        }
    }
    Err(Error::IterationCap {
        what: "BinSearch",
        cap: SEARCH_CAP,
    })
}

/// Effective support `[e0, e1]` outside of which the density is below
/// `½ e^{-β} ε g(p)`.
pub fn init_e(d: &ChordDensity, p: f64, log_gp: f64) -> Result<(f64, f64)> {
    let beta = d.effective_beta();
    let (s, t) = d.endpoints();
    let log_lo = (0.5 * d.accuracy()).ln() - beta + log_gp;
    let log_hi = d.accuracy().ln() + log_gp;
    let e0 = if d.log_g(s)? >= log_lo {
        s
    } else {
        bin_search(d, s, p, log_lo, log_hi)?
    };
    let e1 = if d.log_g(t)? >= log_lo {
        t
    } else {
        bin_search(d, t, p, log_lo, log_hi)?
    };
    Ok((e0, e1))
}

/// One draw from the chord density, accurate to `3 e^{2β} ε` in total
/// variation.
pub fn uni_sampler<R: Rng + ?Sized>(d: &ChordDensity, rng: &mut R) -> Result<f64> {
    let beta = d.effective_beta();
    let (p, log_gp) = init_p(d)?;
    let (e0, e1) = init_e(d, p, log_gp)?;
    let cap = rejection_cap(beta);
    let ceiling = 3.0 * beta + log_gp;
    for _ in 0..cap {
        let x = e0 + (e1 - e0) * rng.random::<f64>();
        let r: f64 = rng.random();
        if r.ln() <= d.log_g(x)? - ceiling {
            return Ok(x);
        }
    }
    Err(Error::IterationCap {
        what: "rejection sampling",
        cap,
    })
}

/// Position of a walk together with the rounding map in force.
#[derive(Clone, Debug, PartialEq)]
pub struct WalkState {
    pub point: Vec<f64>,
    pub step: usize,
    pub map: LinearMap,
    /// Steps that left the point in place because the chord sampler hit an
    /// iteration cap (only with [`Target::stay_on_cap`]).
    pub stalls: usize,
}

impl WalkState {
    pub fn new(point: Vec<f64>, map: LinearMap) -> Self {
        Self {
            point,
            step: 0,
            map,
            stalls: 0,
        }
    }
}

/// Target of a walk: `log g` over the body plus its logconcavity defect.
pub struct Target<'a> {
    pub log_g: &'a dyn Fn(&[f64]) -> Result<f64>,
    pub beta: f64,
    /// Treat an iteration cap in the chord sampler as a rejected move instead
    /// of an error. Used when `beta` understates the true defect.
    pub stay_on_cap: bool,
}

/// Runs `steps` hit-and-run steps. Each step draws a direction through the
/// state's map, clips the line to the body and samples the chord density.
/// When `trajectory` is given, every visited point is appended to it.
pub fn hit_and_run<R: Rng + ?Sized>(
    body: &ConvexBody,
    target: &Target,
    mut state: WalkState,
    steps: usize,
    eps: f64,
    rng: &mut R,
    mut trajectory: Option<&mut Vec<Vec<f64>>>,
) -> Result<WalkState> {
    for _ in 0..steps {
        let raw = sample_direction(&state.map, rng);
        let norm = dot(&raw, &raw).sqrt();
        let u: Vec<f64> = raw.iter().map(|v| v / norm).collect();
        let (s, t) = body.chord(&state.point, &u)?;
        let x = &state.point;
        let chord = ChordDensity::from_fallible_log(
            s,
            t,
            |tau| {
                let y: Vec<f64> = x.iter().zip(&u).map(|(a, b)| a + tau * b).collect();
                (target.log_g)(&y)
            },
            target.beta,
            eps,
        )?;
        let tau = match uni_sampler(&chord, rng) {
            Ok(tau) => tau,
            Err(Error::IterationCap { .. }) if target.stay_on_cap => {
                state.stalls += 1;
                0.0
            }
            Err(e) => return Err(e),
        };
        drop(chord);
        state.point = state.point.iter().zip(&u).map(|(a, b)| a + tau * b).collect();
        state.step += 1;
        if let Some(traj) = trajectory.as_deref_mut() {
            traj.push(state.point.clone());
        }
    }
    Ok(state)
}

/// Writes trajectory rows `strand,step,x1..xn` with a header.
pub fn write_trajectory_csv<W: Write>(out: &mut W, trajectories: &[Vec<Vec<f64>>]) -> Result<()> {
    let n = trajectories
        .iter()
        .flat_map(|t| t.first())
        .map(|x| x.len())
        .next()
        .unwrap_or(0);
    let mut header = String::from("strand,step");
    for i in 1..=n {
        header.push_str(&format!(",x{i}"));
    }
    writeln!(out, "{header}")?;
    for (strand, traj) in trajectories.iter().enumerate() {
        for (step, x) in traj.iter().enumerate() {
            let coords: Vec<String> = x.iter().map(|v| format!("{v:.17e}")).collect();
            writeln!(out, "{strand},{step},{}", coords.join(","))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Seeder;

    #[test]
    fn init_p_flat_returns_first_probe() {
        let d = ChordDensity::from_log(-1.0, 1.0, |_| 0.0, 0.0, 0.1).unwrap();
        let (p, _) = init_p(&d).unwrap();
        assert_eq!(p, -0.5);
        assert_eq!(d.evaluations(), 3);
    }

    #[test]
    fn init_p_gaussian_and_monotone() {
        let d = ChordDensity::from_log(-1.0, 1.0, |x| -x * x, 0.1, 0.1).unwrap();
        let (p, _) = init_p(&d).unwrap();
        assert!(p.abs() <= 0.5);
        assert!((p + 0.078125).abs() < 1e-12, "{p}");

        let d = ChordDensity::from_log(0.0, 1.0, |x| 10.0 * x, 0.1, 0.1).unwrap();
        let (p, _) = init_p(&d).unwrap();
        assert!((p - 1.0).abs() <= 0.01, "{p}");
    }

    #[test]
    fn bin_search_examples() {
        // Linear g with the midpoint value inside the window.
        let d = ChordDensity::from_density(0.0, 1.0, |x| 1.0 + x, 0.0, 0.1).unwrap();
        let m = bin_search(&d, 0.0, 1.0, 1.4f64.ln(), 1.6f64.ln()).unwrap();
        assert_eq!(m, 0.5);
        assert_eq!(d.evaluations(), 1);

        let d = ChordDensity::from_log(0.0, 10.0, |x| -x, 0.0, 0.1).unwrap();
        let lo = (-5.0f64).exp() * 0.9;
        let hi = (-5.0f64).exp() * 1.1;
        let m = bin_search(&d, 10.0, 0.0, lo.ln(), hi.ln()).unwrap();
        assert!(m >= -(1.1f64.ln()) + 5.0 && m <= 5.0 + (1.0 / 0.9f64).ln());
    }

    #[test]
    fn init_e_examples() {
        let d = ChordDensity::from_log(-2.0, 3.0, |_| 0.0, 0.0, 0.1).unwrap();
        let (p, lp) = init_p(&d).unwrap();
        assert_eq!(init_e(&d, p, lp).unwrap(), (-2.0, 3.0));

        let d = ChordDensity::from_log(-20.0, 20.0, |x: f64| -x.abs(), 0.0, 1e-3).unwrap();
        let (p, lp) = init_p(&d).unwrap();
        let (e0, e1) = init_e(&d, p, lp).unwrap();
        assert!((-7.61..=-6.9).contains(&(e0 - p)), "{e0} {p}");
        assert!((6.9..=7.61).contains(&(e1 - p)), "{e1} {p}");
    }

    #[test]
    fn accuracy_upper_bound_is_admissible() {
        let beta: f64 = 0.2;
        let eps = 0.5 * (-2.0 * beta).exp();
        let d = ChordDensity::from_log(-3.0, 3.0, |x| -x * x, beta, eps).unwrap();
        let (p, lp) = init_p(&d).unwrap();
        let (e0, e1) = init_e(&d, p, lp).unwrap();
        assert!(e0 < e1);
        assert!(ChordDensity::from_log(-3.0, 3.0, |x| -x * x, beta, eps * 1.01).is_err());
    }

    #[test]
    fn sampler_outputs_stay_in_window() {
        let d = ChordDensity::from_log(0.0, 1.0, |x| -10.0 * x, 0.0, 1e-4).unwrap();
        let (p, lp) = init_p(&d).unwrap();
        let (e0, e1) = init_e(&d, p, lp).unwrap();
        let mut rng = Seeder::new(8).stream(0);
        for _ in 0..2000 {
            let x = uni_sampler(&d, &mut rng).unwrap();
            assert!(x >= e0 && x <= e1);
        }
    }

    #[test]
    fn zero_steps_is_identity() {
        let body = ConvexBody::unit_ball(3).unwrap();
        let g = |_: &[f64]| Ok(0.0);
        let target = Target {
            log_g: &g,
            beta: 0.0,
            stay_on_cap: false,
        };
        let state = WalkState::new(vec![0.1, 0.2, 0.3], LinearMap::identity(3));
        let mut rng = Seeder::new(0).stream(0);
        let out = hit_and_run(&body, &target, state.clone(), 0, 0.01, &mut rng, None).unwrap();
        assert_eq!(out, state);
    }

    #[test]
    fn trajectory_csv_has_header_and_rows() {
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &[vec![vec![0.0, 1.0], vec![0.5, 0.5]]]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "strand,step,x1,x2");
        assert_eq!(lines.len(), 3);
        assert!(lines[2].starts_with("0,1,"));
    }
}
