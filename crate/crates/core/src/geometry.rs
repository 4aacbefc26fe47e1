//! Convex bodies with membership and chord queries, and the invertible
//! linear maps used to round them.
//!
//! Bodies are closed: points on the boundary report as contained. Radii are
//! measured from the body's reference center, so a body satisfies
//! `B(center, inner) ⊆ K ⊆ B(center, outer)`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ledger::{QueryKind, QueryLedger};

/// Relative slack applied to membership tests so boundary points computed in
/// floating point still count as contained.
const BOUNDARY_SLACK: f64 = 1e-12;

/// Tolerance on the unit-norm precondition of chord directions.
pub const DIRECTION_NORM_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Shape {
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    /// `{x : (x - c)^T Q (x - c) <= 1}` with `Q` symmetric positive definite,
    /// stored row-major.
    Ellipsoid {
        center: Vec<f64>,
        form: Vec<f64>,
    },
    Box {
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
    /// `{x : a_i . x <= b_i for all i}`.
    Halfspaces {
        normals: Vec<Vec<f64>>,
        offsets: Vec<f64>,
    },
}

#[derive(Clone, Debug)]
pub struct ConvexBody {
    shape: Shape,
    dim: usize,
    center: Vec<f64>,
    inner_radius: f64,
    outer_radius: f64,
    lower: Vec<f64>,
    upper: Vec<f64>,
    ledger: Arc<QueryLedger>,
}

impl ConvexBody {
    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || center.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "ball needs positive radius and dimension, got r={radius}, n={}",
                center.len()
            )));
        }
        let lower = center.iter().map(|c| c - radius).collect();
        let upper = center.iter().map(|c| c + radius).collect();
        Ok(Self {
            dim: center.len(),
            center: center.clone(),
            inner_radius: radius,
            outer_radius: radius,
            lower,
            upper,
            shape: Shape::Ball { center, radius },
            ledger: Arc::new(QueryLedger::new()),
        })
    }

    /// Unit-radius ball at the origin in `n` dimensions.
    pub fn unit_ball(n: usize) -> Result<Self> {
        Self::ball(vec![0.0; n], 1.0)
    }

    pub fn cube(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(u > l)) {
            return Err(Error::InvalidParameter("box needs lower < upper".into()));
        }
        let center: Vec<f64> = lower.iter().zip(&upper).map(|(l, u)| 0.5 * (l + u)).collect();
        let inner = lower
            .iter()
            .zip(&upper)
            .map(|(l, u)| 0.5 * (u - l))
            .fold(f64::INFINITY, f64::min);
        let outer = lower
            .iter()
            .zip(&upper)
            .map(|(l, u)| 0.25 * (u - l) * (u - l))
            .sum::<f64>()
            .sqrt();
        Ok(Self {
            dim: lower.len(),
            center,
            inner_radius: inner,
            outer_radius: outer,
            lower: lower.clone(),
            upper: upper.clone(),
            shape: Shape::Box { lower, upper },
            ledger: Arc::new(QueryLedger::new()),
        })
    }

    pub fn ellipsoid(center: Vec<f64>, form: DMatrix<f64>) -> Result<Self> {
        let n = center.len();
        if form.nrows() != n || form.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: form.nrows(),
            });
        }
        let sym = 0.5 * (&form + form.transpose());
        let eig = sym.clone().symmetric_eigen();
        let lmin = eig.eigenvalues.min();
        let lmax = eig.eigenvalues.max();
        if !(lmin > 0.0) {
            return Err(Error::InvalidParameter(
                "ellipsoid form must be positive definite".into(),
            ));
        }
        let inv = sym.clone().try_inverse().ok_or(Error::SingularMap)?;
        let lower = (0..n).map(|i| center[i] - inv[(i, i)].sqrt()).collect();
        let upper = (0..n).map(|i| center[i] + inv[(i, i)].sqrt()).collect();
        Ok(Self {
            dim: n,
            center: center.clone(),
            inner_radius: 1.0 / lmax.sqrt(),
            outer_radius: 1.0 / lmin.sqrt(),
            lower,
            upper,
            shape: Shape::Ellipsoid {
                center,
                form: sym.transpose().as_slice().to_vec(),
            },
            ledger: Arc::new(QueryLedger::new()),
        })
    }

    /// Intersection of halfspaces `a_i . x <= b_i`. The caller supplies a
    /// reference center together with certified inner and outer radii.
    pub fn halfspaces(
        normals: Vec<Vec<f64>>,
        offsets: Vec<f64>,
        center: Vec<f64>,
        inner_radius: f64,
        outer_radius: f64,
    ) -> Result<Self> {
        let n = center.len();
        if normals.len() != offsets.len() || normals.iter().any(|a| a.len() != n) {
            return Err(Error::InvalidParameter("halfspace normals/offsets do not match".into()));
        }
        if !(inner_radius > 0.0 && outer_radius >= inner_radius) {
            return Err(Error::InvalidParameter("need 0 < r <= R".into()));
        }
        for (a, b) in normals.iter().zip(&offsets) {
            let norm = dot(a, a).sqrt();
            if dot(a, &center) + inner_radius * norm > b + 1e-9 * (1.0 + b.abs()) {
                return Err(Error::InvalidParameter(
                    "inner ball is not contained in the halfspace intersection".into(),
                ));
            }
        }
        let lower = center.iter().map(|c| c - outer_radius).collect();
        let upper = center.iter().map(|c| c + outer_radius).collect();
        Ok(Self {
            dim: n,
            center: center.clone(),
            inner_radius,
            outer_radius,
            lower,
            upper,
            shape: Shape::Halfspaces { normals, offsets },
            ledger: Arc::new(QueryLedger::new()),
        })
    }

    /// Attach a shared ledger; membership queries are charged to it.
    pub fn with_ledger(mut self, ledger: Arc<QueryLedger>) -> Self {
        self.ledger = ledger;
        self
    }

    pub fn ledger(&self) -> &Arc<QueryLedger> {
        &self.ledger
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn inner_radius(&self) -> f64 {
        self.inner_radius
    }

    pub fn outer_radius(&self) -> f64 {
        self.outer_radius
    }

    /// Axis-aligned bounding box `(lower, upper)`.
    pub fn bounding_box(&self) -> (&[f64], &[f64]) {
        (&self.lower, &self.upper)
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Membership query; charges one membership unit.
    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        self.check_dim(x)?;
        self.ledger.charge(QueryKind::Membership, 1);
        Ok(self.contains_uncharged(x))
    }

    fn contains_uncharged(&self, x: &[f64]) -> bool {
        match &self.shape {
            Shape::Ball { center, radius } => {
                let d2: f64 = x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum();
                d2 <= radius * radius * (1.0 + BOUNDARY_SLACK)
            }
            Shape::Ellipsoid { center, form } => {
                let d: Vec<f64> = x.iter().zip(center).map(|(a, c)| a - c).collect();
                quad_form(form, &d) <= 1.0 + BOUNDARY_SLACK
            }
            Shape::Box { lower, upper } => x.iter().zip(lower.iter().zip(upper)).all(|(v, (l, u))| {
                let slack = BOUNDARY_SLACK * (1.0 + l.abs().max(u.abs()));
                *v >= l - slack && *v <= u + slack
            }),
            Shape::Halfspaces { normals, offsets } => normals
                .iter()
                .zip(offsets)
                .all(|(a, b)| dot(a, x) <= b + BOUNDARY_SLACK * (1.0 + b.abs())),
        }
    }

    /// Signed arclength interval `(s, t)` with `x + s u` and `x + t u` on the
    /// boundary. Requires `x` interior and `‖u‖ = 1`. Charges two membership
    /// units, one per endpoint.
    pub fn chord(&self, x: &[f64], u: &[f64]) -> Result<(f64, f64)> {
        self.check_dim(x)?;
        self.check_dim(u)?;
        let un = dot(u, u).sqrt();
        if (un - 1.0).abs() > DIRECTION_NORM_TOL {
            return Err(Error::InvalidParameter(format!(
                "chord direction must be a unit vector, got norm {un}"
            )));
        }
        if !self.contains_uncharged(x) {
            return Err(Error::NotInterior);
        }
        self.ledger.charge(QueryKind::Membership, 2);
        let (s, t) = match &self.shape {
            Shape::Ball { center, radius } => {
                let d: Vec<f64> = x.iter().zip(center).map(|(a, c)| a - c).collect();
                quadratic_roots(1.0, dot(u, &d), dot(&d, &d) - radius * radius)
            }
            Shape::Ellipsoid { center, form } => {
                let d: Vec<f64> = x.iter().zip(center).map(|(a, c)| a - c).collect();
                let n = d.len();
                let mut qu = vec![0.0; n];
                for i in 0..n {
                    qu[i] = (0..n).map(|j| form[i * n + j] * u[j]).sum();
                }
                quadratic_roots(dot(u, &qu), dot(&qu, &d), quad_form(form, &d) - 1.0)
            }
            Shape::Box { lower, upper } => {
                let mut s = f64::NEG_INFINITY;
                let mut t = f64::INFINITY;
                for i in 0..self.dim {
                    if u[i] > 0.0 {
                        t = t.min((upper[i] - x[i]) / u[i]);
                        s = s.max((lower[i] - x[i]) / u[i]);
                    } else if u[i] < 0.0 {
                        t = t.min((lower[i] - x[i]) / u[i]);
                        s = s.max((upper[i] - x[i]) / u[i]);
                    }
                }
                (s, t)
            }
            Shape::Halfspaces { normals, offsets } => {
                let mut s = f64::NEG_INFINITY;
                let mut t = f64::INFINITY;
                for (a, b) in normals.iter().zip(offsets) {
                    let rate = dot(a, u);
                    let room = b - dot(a, x);
                    if rate > 0.0 {
                        t = t.min(room / rate);
                    } else if rate < 0.0 {
                        s = s.max(room / rate);
                    }
                }
                (s, t)
            }
        };
        if !s.is_finite() || !t.is_finite() {
            return Err(Error::UnboundedChord);
        }
        if !(s < 0.0 && t > 0.0) {
            return Err(Error::NotInterior);
        }
        if t - s <= 1e-14 * (1.0 + self.outer_radius) {
            return Err(Error::DegenerateChord(t - s));
        }
        Ok((s, t))
    }

    /// `{y : map(y) ∈ K}`. Used to express a walk in rounded coordinates.
    pub fn preimage(&self, map: &LinearMap) -> Result<ConvexBody> {
        if map.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: map.dim(),
            });
        }
        let m = map.matrix();
        let center = map.apply_inverse(&self.center);
        let inner = self.inner_radius / map.operator_norm();
        let outer = self.outer_radius * map.inverse_operator_norm();
        let body = match &self.shape {
            Shape::Ball { radius, .. } => {
                let form = m.transpose() * m / (radius * radius);
                ConvexBody::ellipsoid(center, form)?
            }
            Shape::Ellipsoid { form, .. } => {
                let q = DMatrix::from_row_slice(self.dim, self.dim, form);
                ConvexBody::ellipsoid(center, m.transpose() * q * m)?
            }
            Shape::Box { lower, upper } => {
                let mut normals = Vec::with_capacity(2 * self.dim);
                let mut offsets = Vec::with_capacity(2 * self.dim);
                for i in 0..self.dim {
                    let row: Vec<f64> = m.row(i).iter().copied().collect();
                    normals.push(row.clone());
                    offsets.push(upper[i]);
                    normals.push(row.iter().map(|v| -v).collect());
                    offsets.push(-lower[i]);
                }
                ConvexBody::halfspaces(normals, offsets, center, inner * (1.0 - 1e-12), outer)?
            }
            Shape::Halfspaces { normals, offsets } => {
                let normals = normals
                    .iter()
                    .map(|a| {
                        let row = DVector::from_column_slice(a).transpose() * m;
                        row.iter().copied().collect()
                    })
                    .collect();
                ConvexBody::halfspaces(normals, offsets.clone(), center, inner * (1.0 - 1e-12), outer)?
            }
        };
        Ok(body.with_ledger(Arc::clone(&self.ledger)))
    }

    /// Uniform point by rejection from the bounding box. Charges one
    /// membership unit per proposal.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R, max_proposals: usize) -> Result<Vec<f64>> {
        for _ in 0..max_proposals {
            let x: Vec<f64> = self
                .lower
                .iter()
                .zip(&self.upper)
                .map(|(l, u)| l + (u - l) * rng.random::<f64>())
                .collect();
            if self.contains(&x)? {
                return Ok(x);
            }
        }
        Err(Error::InitialSampling(max_proposals))
    }
}

/// Roots of `a τ² + 2 b τ + c = 0`, ordered, computed without cancellation.
fn quadratic_roots(a: f64, b: f64, c: f64) -> (f64, f64) {
    let disc = b * b - a * c;
    if disc < 0.0 {
        return (f64::NAN, f64::NAN);
    }
    let sq = disc.sqrt();
    let q = -(b + b.signum() * sq);
    if q == 0.0 {
        // b = 0 and c = 0: x sits on the boundary with a tangent direction.
        return (0.0, 0.0);
    }
    let r1 = q / a;
    let r2 = c / q;
    (r1.min(r2), r1.max(r2))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn quad_form(form: &[f64], d: &[f64]) -> f64 {
    let n = d.len();
    let mut acc = 0.0;
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            row += form[i * n + j] * d[j];
        }
        acc += d[i] * row;
    }
    acc
}

/// Invertible linear map with its inverse cached.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearMap {
    matrix: DMatrix<f64>,
    inverse: DMatrix<f64>,
}

impl LinearMap {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::InvalidParameter("linear map must be square".into()));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularMap);
        }
        let inverse = matrix.clone().try_inverse().ok_or(Error::SingularMap)?;
        let n = matrix.nrows();
        let residual = (&matrix * &inverse - DMatrix::<f64>::identity(n, n)).norm();
        if !residual.is_finite() || residual > 1e-8 {
            return Err(Error::SingularMap);
        }
        Ok(Self { matrix, inverse })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            matrix: DMatrix::identity(n, n),
            inverse: DMatrix::identity(n, n),
        }
    }

    pub fn diagonal(entries: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(entries)))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    /// `self ∘ inner`: apply `inner` first.
    pub fn compose(&self, inner: &LinearMap) -> LinearMap {
        LinearMap {
            matrix: &self.matrix * &inner.matrix,
            inverse: &inner.inverse * &self.inverse,
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        mat_vec(&self.matrix, x)
    }

    pub fn apply_inverse(&self, x: &[f64]) -> Vec<f64> {
        mat_vec(&self.inverse, x)
    }

    pub fn operator_norm(&self) -> f64 {
        self.matrix.clone().svd(false, false).singular_values.max()
    }

    pub fn inverse_operator_norm(&self) -> f64 {
        self.inverse.clone().svd(false, false).singular_values.max()
    }
}

fn mat_vec(m: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    let n = m.nrows();
    (0..n).map(|i| (0..m.ncols()).map(|j| m[(i, j)] * x[j]).sum()).collect()
}

/// Direction `Σ z / ‖z‖` for standard normal `z`: a uniform point of the unit
/// sphere pushed through the map.
pub fn sample_direction<R: Rng + ?Sized>(map: &LinearMap, rng: &mut R) -> Vec<f64> {
    let n = map.dim();
    loop {
        let z: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = dot(&z, &z).sqrt();
        if norm > 0.0 {
            let unit: Vec<f64> = z.iter().map(|v| v / norm).collect();
            return map.apply(&unit);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Seeder;

    #[test]
    fn membership_examples() {
        let ball = ConvexBody::unit_ball(2).unwrap();
        assert!(ball.contains(&[0.0, 0.0]).unwrap());
        assert!(!ball.contains(&[2.0, 0.0]).unwrap());
        let cube = ConvexBody::cube(vec![-1.0; 2], vec![1.0; 2]).unwrap();
        assert!(cube.contains(&[1.0, 1.0]).unwrap());
        assert!(matches!(
            ball.contains(&[0.0]),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
        assert_eq!(ball.ledger().count(QueryKind::Membership), 2);
    }

    #[test]
    fn chord_examples() {
        let ball = ConvexBody::unit_ball(2).unwrap();
        let (s, t) = ball.chord(&[0.0, 0.0], &[1.0, 0.0]).unwrap();
        assert!((s + 1.0).abs() < 1e-15 && (t - 1.0).abs() < 1e-15);
        let (s, t) = ball.chord(&[0.5, 0.0], &[1.0, 0.0]).unwrap();
        assert!((s + 1.5).abs() < 1e-15 && (t - 0.5).abs() < 1e-15);

        // Per-facet clipping: along (1,1)/√2 from the center the walls x=1
        // and y=1 are hit together at arclength 0.5·√2.
        let cube = ConvexBody::cube(vec![0.0; 2], vec![1.0; 2]).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let (s, t) = cube.chord(&[0.5, 0.5], &[h, h]).unwrap();
        let expect = 0.5 / h;
        assert!((s + expect).abs() < 1e-12, "{s}");
        assert!((t - expect).abs() < 1e-12, "{t}");
        assert!((expect - std::f64::consts::SQRT_2 / 2.0).abs() < 1e-15);
    }

    #[test]
    fn chord_errors() {
        let ball = ConvexBody::unit_ball(2).unwrap();
        assert!(matches!(ball.chord(&[2.0, 0.0], &[1.0, 0.0]), Err(Error::NotInterior)));
        assert!(matches!(ball.chord(&[1.0, 0.0], &[1.0, 0.0]), Err(Error::NotInterior)));
        assert!(matches!(
            ball.chord(&[0.0, 0.0], &[2.0, 0.0]),
            Err(Error::InvalidParameter(_))
        ));
        let half = ConvexBody::halfspaces(vec![vec![1.0, 0.0]], vec![1.0], vec![0.0, 0.0], 1.0, 1.0).unwrap();
        assert!(matches!(
            half.chord(&[0.0, 0.0], &[0.0, 1.0]),
            Err(Error::UnboundedChord)
        ));
    }

    #[test]
    fn sample_direction_lands_on_ellipse() {
        let map = LinearMap::diagonal(&[2.0, 1.0]).unwrap();
        let mut rng = Seeder::new(11).stream(0);
        for _ in 0..1000 {
            let u = sample_direction(&map, &mut rng);
            let back = map.apply_inverse(&u);
            assert!((dot(&back, &back).sqrt() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sample_direction_moments() {
        let n = 3;
        let map = LinearMap::identity(n);
        let mut rng = Seeder::new(5).stream(0);
        let draws = 100_000;
        let mut mean = vec![0.0; n];
        let mut cov = vec![0.0; n * n];
        for _ in 0..draws {
            let u = sample_direction(&map, &mut rng);
            for i in 0..n {
                mean[i] += u[i];
                for j in 0..n {
                    cov[i * n + j] += u[i] * u[j];
                }
            }
        }
        let mean: Vec<f64> = mean.iter().map(|m| m / draws as f64).collect();
        assert!(dot(&mean, &mean).sqrt() <= 0.02);
        for i in 0..n {
            for j in 0..n {
                let c = cov[i * n + j] / draws as f64;
                let target = if i == j { 1.0 / n as f64 } else { 0.0 };
                assert!((c - target).abs() <= 0.05 / n as f64, "cov[{i}{j}] = {c}");
            }
        }
    }

    #[test]
    fn singular_map_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(LinearMap::new(m), Err(Error::SingularMap)));
    }

    #[test]
    fn map_inverse_composition_is_identity() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.0, -0.1, 1.5, 0.2, 0.4, 0.0, 0.7]);
        let map = LinearMap::new(m).unwrap();
        let id = map.matrix() * map.inverse();
        let err = (id - DMatrix::<f64>::identity(3, 3))
            .svd(false, false)
            .singular_values
            .max();
        assert!(err <= 1e-10);
    }

    #[test]
    fn preimage_matches_membership() {
        let map = LinearMap::new(DMatrix::from_row_slice(2, 2, &[1.5, 0.4, -0.2, 0.8])).unwrap();
        let mut rng = Seeder::new(3).stream(0);
        for body in [
            ConvexBody::unit_ball(2).unwrap(),
            ConvexBody::cube(vec![-1.0; 2], vec![1.0; 2]).unwrap(),
        ] {
            let pre = body.preimage(&map).unwrap();
            for _ in 0..2000 {
                let y: Vec<f64> = (0..2).map(|_| rng.random_range(-3.0..3.0)).collect();
                assert_eq!(pre.contains(&y).unwrap(), body.contains(&map.apply(&y)).unwrap());
            }
        }
    }
}
