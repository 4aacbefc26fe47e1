//! Finite Markov chains: stationary densities, reversibility, the
//! discriminant matrix and a plain-text exchange format.

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};

/// Row-sum tolerance for transition matrices.
pub const STOCHASTIC_TOL: f64 = 1e-12;
/// Detailed-balance tolerance.
pub const REVERSIBLE_TOL: f64 = 1e-10;

/// A row-stochastic matrix together with its stationary density.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteChain {
    p: DMatrix<f64>,
    pi: Vec<f64>,
    balance_residual: f64,
}

impl DiscreteChain {
    /// Validates `p` and solves for its stationary density.
    pub fn new(p: DMatrix<f64>) -> Result<Self> {
        let n = p.nrows();
        if n == 0 || p.ncols() != n {
            return Err(Error::InvalidParameter(format!(
                "transition matrix must be square and nonempty, got {}x{}",
                p.nrows(),
                p.ncols()
            )));
        }
        for i in 0..n {
            let row = p.row(i);
            if row.iter().any(|v| !(*v >= 0.0)) {
                return Err(Error::InvalidParameter(format!("row {i} has a negative or NaN entry")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > STOCHASTIC_TOL * n as f64 {
                return Err(Error::InvalidParameter(format!("row {i} sums to {sum}")));
            }
        }
        let pi = stationary_of(&p)?;
        let balance_residual = balance_residual(&p, &pi);
        Ok(Self {
            p,
            pi,
            balance_residual,
        })
    }

    /// A chain with symmetric edge weights `w`, which is reversible with
    /// respect to the normalized row sums of `w`.
    pub fn from_weights(w: &DMatrix<f64>) -> Result<Self> {
        let n = w.nrows();
        let mut p = DMatrix::zeros(n, n);
        for i in 0..n {
            let total: f64 = w.row(i).iter().sum();
            if !(total > 0.0) {
                return Err(Error::InvalidParameter(format!("state {i} has no outgoing weight")));
            }
            for j in 0..n {
                p[(i, j)] = w[(i, j)] / total;
            }
        }
        Self::new(p)
    }

    /// A random reversible chain on `n` states with dense positive weights.
    pub fn random_reversible<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        let mut w = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = 0.05 + rng.random::<f64>();
                w[(i, j)] = v;
                w[(j, i)] = v;
            }
        }
        Self::from_weights(&w)
    }

    /// The lazy version `(I + P)/2`, whose spectrum lies in `[0, 1]`.
    pub fn lazy(&self) -> Result<Self> {
        let n = self.len();
        Self::new((DMatrix::identity(n, n) + &self.p) * 0.5)
    }

    pub fn len(&self) -> usize {
        self.p.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn transition(&self) -> &DMatrix<f64> {
        &self.p
    }

    /// The unique density with `πP = π`.
    pub fn stationary(&self) -> &[f64] {
        &self.pi
    }

    /// `max |π(x)P(x,y) − π(y)P(y,x)|`.
    pub fn balance_residual(&self) -> f64 {
        self.balance_residual
    }

    pub fn is_reversible(&self) -> bool {
        self.balance_residual <= REVERSIBLE_TOL
    }

    pub fn require_reversible(&self) -> Result<()> {
        if self.is_reversible() {
            Ok(())
        } else {
            Err(Error::NonReversible(self.balance_residual))
        }
    }

    /// Period of the chain: the gcd of the lengths of all cycles through
    /// state 0, computed from breadth-first levels of the transition graph.
    pub fn period(&self) -> usize {
        let n = self.len();
        let mut level = vec![usize::MAX; n];
        level[0] = 0;
        let mut queue = std::collections::VecDeque::from([0usize]);
        let mut g = 0usize;
        while let Some(x) = queue.pop_front() {
            for y in 0..n {
                if self.p[(x, y)] <= 0.0 {
                    continue;
                }
                if level[y] == usize::MAX {
                    level[y] = level[x] + 1;
                    queue.push_back(y);
                } else {
                    g = gcd(g, level[x] + 1 - level[y]);
                }
            }
        }
        g
    }

    /// `D(x,y) = √(P(x,y) P(y,x))`.
    pub fn discriminant(&self) -> Discriminant {
        let n = self.len();
        let matrix = DMatrix::from_fn(n, n, |i, j| (self.p[(i, j)] * self.p[(j, i)]).sqrt());
        let warning = (!self.is_reversible()).then(|| {
            format!(
                "chain is not reversible (detailed-balance residual {:e}); spectra of D and P may differ",
                self.balance_residual
            )
        });
        Discriminant { matrix, warning }
    }

    /// Eigenvalues of the discriminant in decreasing order, with matching
    /// orthonormal eigenvectors as columns.
    pub fn discriminant_spectrum(&self) -> (Vec<f64>, DMatrix<f64>) {
        let eig = self.discriminant().matrix.symmetric_eigen();
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let vectors = DMatrix::from_fn(self.len(), self.len(), |i, j| eig.eigenvectors[(i, order[j])]);
        (values, vectors)
    }

    /// Worst-case total-variation distance `max_x ‖P^t(x,·) − π‖_TV`.
    pub fn tv_after(&self, t: u64) -> f64 {
        let pt = matrix_power(&self.p, t);
        max_row_tv(&pt, &self.pi)
    }

    /// Smallest `t` with `max_x ‖P^t(x,·) − π‖_TV ≤ eps`, found by powering
    /// the transition matrix. Fails if no `t ≤ cap` qualifies.
    pub fn mixing_time(&self, eps: f64, cap: u64) -> Result<u64> {
        self.mixing_time_from(None, eps, cap)
    }

    /// As [`mixing_time`](Self::mixing_time) but for the single start
    /// density `rho0` when given.
    pub fn mixing_time_from(&self, rho0: Option<&[f64]>, eps: f64, cap: u64) -> Result<u64> {
        let tv = |t: u64| -> f64 {
            let pt = matrix_power(&self.p, t);
            match rho0 {
                None => max_row_tv(&pt, &self.pi),
                Some(r) => {
                    let n = self.len();
                    let mut dist = vec![0.0; n];
                    for x in 0..n {
                        for y in 0..n {
                            dist[y] += r[x] * pt[(x, y)];
                        }
                    }
                    tv_distance(&dist, &self.pi)
                }
            }
        };
        if tv(0) <= eps {
            return Ok(0);
        }
        let mut hi = 1u64;
        while tv(hi) > eps {
            if hi >= cap {
                return Err(Error::MixingPrecondition(format!(
                    "no mixing within {cap} steps at accuracy {eps:e}"
                )));
            }
            hi = (hi * 2).min(cap);
        }
        let mut lo = hi / 2;
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if tv(mid) <= eps {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }

    /// Plain-text form: the state count on the first line, then one row of
    /// `P` per line.
    pub fn to_text(&self) -> String {
        let mut out = format!("{}\n", self.len());
        for i in 0..self.len() {
            let row: Vec<String> = self.p.row(i).iter().map(|v| format!("{v:.17e}")).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or_else(|| Error::Config("empty chain file".into()))?;
        let n: usize = header
            .parse()
            .map_err(|_| Error::Config(format!("bad state count `{header}`")))?;
        let mut p = DMatrix::zeros(n, n);
        for i in 0..n {
            let line = lines
                .next()
                .ok_or_else(|| Error::Config(format!("chain file has {i} rows, expected {n}")))?;
            let row: Vec<f64> = line
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|_| Error::Config(format!("bad entry `{s}` in row {i}")))
                })
                .collect::<Result<_>>()?;
            if row.len() != n {
                return Err(Error::Config(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            for (j, v) in row.into_iter().enumerate() {
                p[(i, j)] = v;
            }
        }
        Self::new(p)
    }
}

/// Output of [`DiscreteChain::discriminant`].
#[derive(Clone, Debug, PartialEq)]
pub struct Discriminant {
    pub matrix: DMatrix<f64>,
    /// Set for non-reversible chains.
    pub warning: Option<String>,
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Left null vector of `P − I`. Two numerically zero singular values mean
/// the stationary density is not unique.
fn stationary_of(p: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = p.nrows();
    let a = (p - DMatrix::<f64>::identity(n, n)).transpose();
    let svd = a.svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| Error::InvalidParameter("SVD failed".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let tol = 1e-9 * n as f64;
    if n > 1 && svd.singular_values[order[1]] <= tol {
        return Err(Error::ReducibleChain);
    }
    let v = v_t.row(order[0]);
    let sum: f64 = v.iter().sum();
    let pi: Vec<f64> = v.iter().map(|x| (x / sum).max(0.0)).collect();
    let total: f64 = pi.iter().sum();
    Ok(pi.into_iter().map(|x| x / total).collect())
}

fn balance_residual(p: &DMatrix<f64>, pi: &[f64]) -> f64 {
    let n = p.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            worst = worst.max((pi[i] * p[(i, j)] - pi[j] * p[(j, i)]).abs());
        }
    }
    worst
}

pub(crate) fn matrix_power(p: &DMatrix<f64>, mut t: u64) -> DMatrix<f64> {
    let n = p.nrows();
    let mut result = DMatrix::identity(n, n);
    let mut base = p.clone();
    while t > 0 {
        if t & 1 == 1 {
            result = &result * &base;
        }
        t >>= 1;
        if t > 0 {
            base = &base * &base;
        }
    }
    result
}

/// `½ Σ |p − q|`.
pub fn tv_distance(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

fn max_row_tv(pt: &DMatrix<f64>, pi: &[f64]) -> f64 {
    (0..pt.nrows())
        .map(|i| tv_distance(pt.row(i).iter().copied().collect::<Vec<_>>().as_slice(), pi))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Seeder;

    #[test]
    fn symmetric_two_state_is_uniform() {
        let c = DiscreteChain::new(DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.5, 0.5])).unwrap();
        assert!((c.stationary()[0] - 0.5).abs() < 1e-12);
        assert!(c.is_reversible());
        assert_eq!(c.discriminant().matrix, *c.transition());
    }

    #[test]
    fn reducible_chain_is_rejected() {
        let p = DMatrix::identity(3, 3);
        assert!(matches!(DiscreteChain::new(p), Err(Error::ReducibleChain)));
    }

    #[test]
    fn rows_must_be_stochastic() {
        let p = DMatrix::from_row_slice(2, 2, &[0.5, 0.6, 0.5, 0.5]);
        assert!(matches!(DiscreteChain::new(p), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn permutation_cycle_has_period_three() {
        let p = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0]);
        let c = DiscreteChain::new(p).unwrap();
        assert_eq!(c.period(), 3);
        for v in c.stationary() {
            assert!((v - 1.0 / 3.0).abs() < 1e-12);
        }
        assert!(c.lazy().unwrap().period() == 1);
    }

    #[test]
    fn non_reversible_discriminant_warns() {
        let p = DMatrix::from_row_slice(3, 3, &[0.1, 0.8, 0.1, 0.1, 0.1, 0.8, 0.8, 0.1, 0.1]);
        let c = DiscreteChain::new(p).unwrap();
        assert!(!c.is_reversible());
        assert!(c.discriminant().warning.is_some());
        assert!(matches!(c.require_reversible(), Err(Error::NonReversible(_))));
    }

    #[test]
    fn text_round_trip() {
        let c = DiscreteChain::random_reversible(5, &mut Seeder::new(1).stream(0)).unwrap();
        let back = DiscreteChain::from_text(&c.to_text()).unwrap();
        assert_eq!(back.transition(), c.transition());
    }

    #[test]
    fn mixing_time_is_the_first_admissible_power() {
        let c = DiscreteChain::random_reversible(6, &mut Seeder::new(2).stream(0)).unwrap();
        let t = c.mixing_time(1e-6, 1 << 20).unwrap();
        assert!(c.tv_after(t) <= 1e-6);
        assert!(t == 0 || c.tv_after(t - 1) > 1e-6);
    }
}
