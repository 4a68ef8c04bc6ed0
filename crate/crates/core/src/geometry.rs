//! Catalog of model covers and their exact metric geometry.
//!
//! Every space uses one global chart: Cartesian coordinates for `ℝⁿ`, the
//! upper half-plane `{(x, y) : y > 0}` with metric `y⁻²(dx² + dy²)` for `ℍ²`,
//! and concatenated factor coordinates for products.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::brownian::RngSeed;
use crate::error::{Error, Result};

/// Largest Euclidean dimension in the catalog.
pub const MAX_EUCLIDEAN_DIM: usize = 8;

/// Tolerance on the metric norm of a direction handed to [`geodesic_ray`].
pub const UNIT_TOLERANCE: f64 = 1e-9;

/// Default sample count for the Monte Carlo product ball volume.
pub const PRODUCT_VOLUME_SAMPLES: usize = 20_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub coords: Vec<f64>,
}

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        Self { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// Concatenate two factor points into a product point.
    pub fn concat(left: &Point, right: &Point) -> Point {
        let mut coords = Vec::with_capacity(left.dim() + right.dim());
        coords.extend_from_slice(&left.coords);
        coords.extend_from_slice(&right.coords);
        Point { coords }
    }
}

impl From<Vec<f64>> for Point {
    fn from(coords: Vec<f64>) -> Self {
        Point { coords }
    }
}

impl<const N: usize> From<[f64; N]> for Point {
    fn from(coords: [f64; N]) -> Self {
        Point {
            coords: coords.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SpaceKind {
    Euclidean(usize),
    HyperbolicHalfPlane,
    Product(Box<ModelSpace>, Box<ModelSpace>),
}

/// An immutable catalog cover together with its basepoint `x₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpace {
    kind: SpaceKind,
    basepoint: Point,
}

impl ModelSpace {
    pub fn euclidean(dim: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_EUCLIDEAN_DIM {
            return Err(Error::UnsupportedSpace(format!(
                "euclidean dimension {dim} outside 1..={MAX_EUCLIDEAN_DIM}"
            )));
        }
        Ok(Self {
            kind: SpaceKind::Euclidean(dim),
            basepoint: Point::new(vec![0.0; dim]),
        })
    }

    pub fn half_plane() -> Self {
        Self {
            kind: SpaceKind::HyperbolicHalfPlane,
            basepoint: Point::from([0.0, 1.0]),
        }
    }

    /// Product of two non-product factors (nesting depth is at most two).
    pub fn product(left: ModelSpace, right: ModelSpace) -> Result<Self> {
        if left.is_product() || right.is_product() {
            return Err(Error::UnsupportedSpace(
                "product factors must not be products themselves".into(),
            ));
        }
        let basepoint = Point::concat(&left.basepoint, &right.basepoint);
        Ok(Self {
            kind: SpaceKind::Product(Box::new(left), Box::new(right)),
            basepoint,
        })
    }

    /// Replace the basepoint; for products the factor basepoints follow.
    pub fn with_basepoint(self, basepoint: Point) -> Result<Self> {
        self.validate(&basepoint)?;
        match self.kind {
            SpaceKind::Product(left, right) => {
                let (a, b) = basepoint.coords.split_at(left.dim());
                let left = left.with_basepoint(Point::new(a.to_vec()))?;
                let right = right.with_basepoint(Point::new(b.to_vec()))?;
                ModelSpace::product(left, right)
            }
            kind => Ok(Self { kind, basepoint }),
        }
    }

    /// Parse a space id: `euclidean:<n>`, `h2`, `h2xh2`, `euclidean:<n>xh2`.
    pub fn from_id(id: &str) -> Result<Self> {
        let unknown = || Error::UnknownId {
            kind: "space",
            id: id.to_string(),
        };
        let factors: Vec<&str> = id.trim().split('x').collect();
        let leaf = |name: &str| -> Result<ModelSpace> {
            if name == "h2" {
                return Ok(ModelSpace::half_plane());
            }
            let n = name
                .strip_prefix("euclidean:")
                .and_then(|n| n.parse::<usize>().ok())
                .ok_or_else(unknown)?;
            ModelSpace::euclidean(n).map_err(|_| unknown())
        };
        match factors.as_slice() {
            [one] => leaf(one),
            [a, b] => ModelSpace::product(leaf(a)?, leaf(b)?),
            _ => Err(unknown()),
        }
    }

    pub fn id(&self) -> String {
        match &self.kind {
            SpaceKind::Euclidean(n) => format!("euclidean:{n}"),
            SpaceKind::HyperbolicHalfPlane => "h2".to_string(),
            SpaceKind::Product(a, b) => format!("{}x{}", a.id(), b.id()),
        }
    }

    pub fn kind(&self) -> &SpaceKind {
        &self.kind
    }

    pub fn basepoint(&self) -> &Point {
        &self.basepoint
    }

    pub fn is_product(&self) -> bool {
        matches!(self.kind, SpaceKind::Product(..))
    }

    pub fn factors(&self) -> Option<(&ModelSpace, &ModelSpace)> {
        match &self.kind {
            SpaceKind::Product(a, b) => Some((a, b)),
            _ => None,
        }
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            SpaceKind::Euclidean(n) => *n,
            SpaceKind::HyperbolicHalfPlane => 2,
            SpaceKind::Product(a, b) => a.dim() + b.dim(),
        }
    }

    /// True if any factor is the hyperbolic plane.
    pub fn has_hyperbolic_factor(&self) -> bool {
        match &self.kind {
            SpaceKind::Euclidean(_) => false,
            SpaceKind::HyperbolicHalfPlane => true,
            SpaceKind::Product(a, b) => a.has_hyperbolic_factor() || b.has_hyperbolic_factor(),
        }
    }

    /// Split a product point into its factor coordinates.
    pub fn split<'a>(&self, p: &'a Point) -> Option<(&'a [f64], &'a [f64])> {
        match &self.kind {
            SpaceKind::Product(a, _) => Some(p.coords.split_at(a.dim())),
            _ => None,
        }
    }

    pub fn validate(&self, p: &Point) -> Result<()> {
        if p.dim() != self.dim() {
            return Err(Error::InvalidPoint(format!(
                "point has dimension {}, {} expects {}",
                p.dim(),
                self.id(),
                self.dim()
            )));
        }
        if p.coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidPoint(format!("non-finite coordinate in {p:?}")));
        }
        match &self.kind {
            SpaceKind::HyperbolicHalfPlane if p.coords[1] <= 0.0 => Err(Error::InvalidPoint(
                format!("half-plane point needs y > 0, got y = {}", p.coords[1]),
            )),
            SpaceKind::Product(a, b) => {
                let (pa, pb) = p.coords.split_at(a.dim());
                a.validate(&Point::new(pa.to_vec()))?;
                b.validate(&Point::new(pb.to_vec()))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for ModelSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

/// Chart realization of the Riemannian metric. All catalog metrics are
/// diagonal in their chart, so only the diagonal is stored.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricTensor {
    pub diag: Vec<f64>,
}

impl MetricTensor {
    pub fn g(&self, i: usize, j: usize) -> f64 {
        if i == j {
            self.diag[i]
        } else {
            0.0
        }
    }

    pub fn inverse(&self, i: usize, j: usize) -> f64 {
        if i == j {
            1.0 / self.diag[i]
        } else {
            0.0
        }
    }

    pub fn sqrt_det(&self) -> f64 {
        self.diag.iter().map(|g| g.sqrt()).product()
    }

    /// Squared norm of a tangent vector given in chart components.
    pub fn norm_sq(&self, v: &[f64]) -> f64 {
        self.diag.iter().zip(v).map(|(g, c)| g * c * c).sum()
    }

    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        self.diag
            .iter()
            .zip(u.iter().zip(v))
            .map(|(g, (a, b))| g * a * b)
            .sum()
    }
}

pub fn metric(space: &ModelSpace, p: &Point) -> Result<MetricTensor> {
    space.validate(p)?;
    let mut diag = Vec::with_capacity(space.dim());
    push_metric(space, &p.coords, &mut diag);
    Ok(MetricTensor { diag })
}

fn push_metric(space: &ModelSpace, c: &[f64], out: &mut Vec<f64>) {
    match space.kind() {
        SpaceKind::Euclidean(n) => out.extend(std::iter::repeat_n(1.0, *n)),
        SpaceKind::HyperbolicHalfPlane => {
            let w = 1.0 / (c[1] * c[1]);
            out.extend([w, w]);
        }
        SpaceKind::Product(a, b) => {
            let (ca, cb) = c.split_at(a.dim());
            push_metric(a, ca, out);
            push_metric(b, cb, out);
        }
    }
}

/// `acosh(1 + delta)` without ever forming `1 + delta`.
pub fn acosh1p(delta: f64) -> f64 {
    if delta < 1e-8 {
        // acosh(1+δ) = √(2δ)·(1 − δ/12 + 3δ²/160 − …)
        (2.0 * delta).sqrt() * (1.0 - delta / 12.0 + 3.0 * delta * delta / 160.0)
    } else if delta > 1e150 {
        (2.0 * delta).ln()
    } else {
        (delta + (delta * (2.0 + delta)).sqrt()).ln_1p()
    }
}

/// Half-plane distance from raw coordinates; no validation.
pub(crate) fn h2_distance(p: &[f64], q: &[f64]) -> f64 {
    let dx = p[0] - q[0];
    let dy = p[1] - q[1];
    acosh1p((dx * dx + dy * dy) / (2.0 * p[1] * q[1]))
}

pub(crate) fn raw_distance(space: &ModelSpace, p: &[f64], q: &[f64]) -> f64 {
    match space.kind() {
        SpaceKind::Euclidean(_) => p
            .iter()
            .zip(q)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt(),
        SpaceKind::HyperbolicHalfPlane => h2_distance(p, q),
        SpaceKind::Product(a, b) => {
            let (pa, pb) = p.split_at(a.dim());
            let (qa, qb) = q.split_at(a.dim());
            raw_distance(a, pa, qa).hypot(raw_distance(b, pb, qb))
        }
    }
}

pub fn distance(space: &ModelSpace, p: &Point, q: &Point) -> Result<f64> {
    space.validate(p)?;
    space.validate(q)?;
    Ok(raw_distance(space, &p.coords, &q.coords))
}

/// Point at parameter `t` along the unit-speed geodesic leaving `p` with
/// initial velocity `direction` (chart components, unit metric norm).
pub fn geodesic_ray(space: &ModelSpace, p: &Point, direction: &[f64], t: f64) -> Result<Point> {
    space.validate(p)?;
    if direction.len() != space.dim() {
        return Err(Error::Contract(format!(
            "direction has {} components, space has dimension {}",
            direction.len(),
            space.dim()
        )));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::Contract(format!("ray parameter must be finite and >= 0, got {t}")));
    }
    let norm = metric(space, p)?.norm_sq(direction).sqrt();
    if (norm - 1.0).abs() > UNIT_TOLERANCE {
        return Err(Error::Contract(format!(
            "direction has metric norm {norm}, expected 1"
        )));
    }
    Ok(Point::new(ray_unchecked(space, &p.coords, direction, t)))
}

fn ray_unchecked(space: &ModelSpace, p: &[f64], v: &[f64], t: f64) -> Vec<f64> {
    match space.kind() {
        SpaceKind::Euclidean(_) => p.iter().zip(v).map(|(a, b)| a + t * b).collect(),
        SpaceKind::HyperbolicHalfPlane => {
            let angle = v[1].atan2(v[0]);
            let z = h2_ray_from_i(angle, t);
            vec![p[0] + p[1] * z.re, p[1] * z.im]
        }
        SpaceKind::Product(a, b) => {
            let (pa, pb) = p.split_at(a.dim());
            let (va, vb) = v.split_at(a.dim());
            let mut out = Vec::with_capacity(p.len());
            for (factor, pf, vf) in [(a, pa, va), (b, pb, vb)] {
                let g = {
                    let mut diag = Vec::new();
                    push_metric(factor, pf, &mut diag);
                    MetricTensor { diag }
                };
                let speed = g.norm_sq(vf).sqrt();
                if speed > 0.0 {
                    let unit: Vec<f64> = vf.iter().map(|c| c / speed).collect();
                    out.extend(ray_unchecked(factor, pf, &unit, speed * t));
                } else {
                    out.extend_from_slice(pf);
                }
            }
            out
        }
    }
}

/// Unit-speed geodesic from `i` whose initial direction makes `angle` with
/// the positive real axis: the vertical ray `i·eᵗ` conjugated by the elliptic
/// Möbius rotation about `i`. Written in `u = e⁻ᵗ` so large `t` stays exact.
fn h2_ray_from_i(angle: f64, t: f64) -> Complex64 {
    let alpha = angle - PI / 2.0;
    let (s, c) = (alpha / 2.0).sin_cos();
    let u = (-t).exp();
    let den = c * c * u * u + s * s;
    Complex64::new(c * s * (u * u - 1.0) / den, u / den)
}

/// Riemannian volume of a ball, with a standard error for the Monte Carlo
/// product case (zero for closed forms).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallVolume {
    pub value: f64,
    pub stderr: f64,
    pub exact: bool,
}

/// Volume of the unit ball in `ℝⁿ`.
pub fn unit_ball_volume(n: usize) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * PI / n as f64 * unit_ball_volume(n - 2),
    }
}

/// Closed-form ball volume for a non-product space.
fn leaf_ball_volume(space: &ModelSpace, r: f64) -> f64 {
    match space.kind() {
        SpaceKind::Euclidean(n) => unit_ball_volume(*n) * r.powi(*n as i32),
        SpaceKind::HyperbolicHalfPlane => 2.0 * PI * (r.cosh() - 1.0),
        SpaceKind::Product(..) => unreachable!("leaf volume asked of a product"),
    }
}

/// Area of the geodesic sphere of radius `r` in a non-product space.
pub(crate) fn leaf_sphere_area(space: &ModelSpace, r: f64) -> f64 {
    match space.kind() {
        SpaceKind::Euclidean(n) => *n as f64 * unit_ball_volume(*n) * r.powi(*n as i32 - 1),
        SpaceKind::HyperbolicHalfPlane => 2.0 * PI * r.sinh(),
        SpaceKind::Product(..) => unreachable!("leaf sphere area asked of a product"),
    }
}

pub fn ball_volume(space: &ModelSpace, r: f64) -> Result<BallVolume> {
    ball_volume_mc(space, r, PRODUCT_VOLUME_SAMPLES, RngSeed::new(0x0b41_1701, 0))
}

/// Ball volume with explicit Monte Carlo controls (used only for products).
///
/// For a product `A × B` the volume is `∫_{B_A(R)} vol_B(√(R² − d_A²)) dx_A`.
/// The first factor is sampled by its radius, uniform on `[0, R]`, and the
/// second factor's ball is integrated in closed form.
pub fn ball_volume_mc(space: &ModelSpace, r: f64, samples: usize, seed: RngSeed) -> Result<BallVolume> {
    if !(r >= 0.0) {
        return Err(Error::Contract(format!("radius must be >= 0, got {r}")));
    }
    let Some((a, b)) = space.factors() else {
        return Ok(BallVolume {
            value: leaf_ball_volume(space, r),
            stderr: 0.0,
            exact: true,
        });
    };
    if r == 0.0 {
        return Ok(BallVolume {
            value: 0.0,
            stderr: 0.0,
            exact: true,
        });
    }
    if samples < 2 {
        return Err(Error::Contract("product ball volume needs >= 2 samples".into()));
    }
    let mut rng = seed.rng();
    let values: Vec<f64> = (0..samples)
        .map(|_| {
            let r1 = r * rng.random::<f64>();
            r * leaf_sphere_area(a, r1) * leaf_ball_volume(b, (r * r - r1 * r1).max(0.0).sqrt())
        })
        .collect();
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    Ok(BallVolume {
        value: mean,
        stderr: (var / n).sqrt(),
        exact: false,
    })
}

/// i.i.d. points uniform for the Riemannian volume on `B(x₀, R)`.
pub fn sample_uniform_ball(space: &ModelSpace, r: f64, count: usize, seed: RngSeed) -> Result<Vec<Point>> {
    if !(r > 0.0) {
        return Err(Error::Contract(format!("radius must be > 0, got {r}")));
    }
    let mut rng = seed.rng();
    let x0 = &space.basepoint().coords;
    let points = match space.factors() {
        None => (0..count)
            .map(|_| Point::new(sample_leaf_ball(space, x0, r, &mut rng)))
            .collect(),
        Some((a, b)) => {
            // Marginal density of the first factor's radius is
            // S_A(r₁)·vol_B(√(R² − r₁²)); rejection from uniform on [0, R].
            let density = |r1: f64| leaf_sphere_area(a, r1) * leaf_ball_volume(b, (r * r - r1 * r1).max(0.0).sqrt());
            let envelope = 1.1
                * (0..=2048)
                    .map(|i| density(r * i as f64 / 2048.0))
                    .fold(0.0, f64::max);
            let (xa, xb) = x0.split_at(a.dim());
            (0..count)
                .map(|_| {
                    let r1 = loop {
                        let cand = r * rng.random::<f64>();
                        if rng.random::<f64>() * envelope <= density(cand) {
                            break cand;
                        }
                    };
                    let pa = sample_leaf_sphere(a, xa, r1, &mut rng);
                    let rb = (r * r - r1 * r1).max(0.0).sqrt();
                    let pb = if rb > 0.0 {
                        sample_leaf_ball(b, xb, rb, &mut rng)
                    } else {
                        xb.to_vec()
                    };
                    let mut c = pa;
                    c.extend(pb);
                    Point::new(c)
                })
                .collect()
        }
    };
    Ok(points)
}

fn sample_leaf_ball<R: Rng>(space: &ModelSpace, center: &[f64], r: f64, rng: &mut R) -> Vec<f64> {
    let u: f64 = rng.random();
    let radius = match space.kind() {
        SpaceKind::Euclidean(n) => r * u.powf(1.0 / *n as f64),
        // CDF (cosh ρ − 1)/(cosh R − 1), inverted.
        _ => acosh1p(u * (r.cosh() - 1.0)),
    };
    sample_leaf_sphere(space, center, radius, rng)
}

fn sample_leaf_sphere<R: Rng>(space: &ModelSpace, center: &[f64], radius: f64, rng: &mut R) -> Vec<f64> {
    match space.kind() {
        SpaceKind::Euclidean(n) => {
            let dir = loop {
                let g: Vec<f64> = (0..*n).map(|_| rng.sample(StandardNormal)).collect();
                let norm = g.iter().map(|c| c * c).sum::<f64>().sqrt();
                if norm > 0.0 {
                    break g.into_iter().map(|c| c / norm).collect::<Vec<_>>();
                }
            };
            center.iter().zip(dir).map(|(c, d)| c + radius * d).collect()
        }
        _ => {
            let phi = 2.0 * PI * rng.random::<f64>();
            let (s, c) = phi.sin_cos();
            let y = center[1];
            ray_unchecked(space, center, &[c * y, s * y], radius)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn h2() -> ModelSpace {
        ModelSpace::half_plane()
    }

    fn h2xh2() -> ModelSpace {
        ModelSpace::product(h2(), h2()).unwrap()
    }

    #[test]
    fn distance_examples() {
        let e2 = ModelSpace::euclidean(2).unwrap();
        assert_eq!(distance(&e2, &[0.0, 0.0].into(), &[3.0, 4.0].into()).unwrap(), 5.0);
        let d = distance(&h2(), &[0.0, 1.0].into(), &[0.0, 2.0].into()).unwrap();
        assert_relative_eq!(d, 2f64.ln(), max_relative = 1e-15);
        let d = distance(
            &h2xh2(),
            &[0.0, 1.0, 0.0, 1.0].into(),
            &[0.0, 2.0, 0.0, 2.0].into(),
        )
        .unwrap();
        assert_relative_eq!(d, 2f64.sqrt() * 2f64.ln(), max_relative = 1e-15);
        assert_relative_eq!(d, 0.980258, epsilon = 1e-6);
    }

    #[test]
    fn chart_violation_is_rejected() {
        let err = distance(&h2(), &[0.0, 0.0].into(), &[0.0, 1.0].into()).unwrap_err();
        assert_eq!(err.code(), "invalid_point");
        let err = distance(&h2(), &[0.0, -1.0].into(), &[0.0, 1.0].into()).unwrap_err();
        assert_eq!(err.code(), "invalid_point");
        assert!(h2xh2().validate(&[0.0, 1.0, 0.0, -2.0].into()).is_err());
    }

    #[test]
    fn nearby_points_keep_precision() {
        // Vertical segment: exact distance is ln(1 + ε).
        let eps = 1e-12;
        let d = distance(&h2(), &[0.3, 1.0].into(), &[0.3, 1.0 + eps].into()).unwrap();
        assert_relative_eq!(d, eps.ln_1p(), max_relative = 1e-9);
        assert_eq!(acosh1p(0.0), 0.0);
        assert_relative_eq!(acosh1p(0.5), 1.5f64.acosh(), max_relative = 1e-15);
    }

    #[test]
    fn geodesic_examples() {
        let p = geodesic_ray(&h2(), &[0.0, 1.0].into(), &[0.0, 1.0], 1.0).unwrap();
        assert!(p.coords[0].abs() < 1e-15);
        assert_relative_eq!(p.coords[1], std::f64::consts::E, max_relative = 1e-14);
        let e2 = ModelSpace::euclidean(2).unwrap();
        let p = geodesic_ray(&e2, &[0.0, 0.0].into(), &[1.0, 0.0], 2.5).unwrap();
        assert_eq!(p.coords, vec![2.5, 0.0]);
        for space in [e2, h2(), h2xh2()] {
            let x0 = space.basepoint().clone();
            let mut v = vec![0.0; space.dim()];
            v[space.dim() - 1] = 1.0;
            assert_eq!(geodesic_ray(&space, &x0, &v, 0.0).unwrap(), x0);
        }
    }

    #[test]
    fn non_unit_direction_is_a_contract_error() {
        let err = geodesic_ray(&h2(), &[0.0, 2.0].into(), &[0.0, 1.0], 1.0).unwrap_err();
        assert_eq!(err.code(), "contract");
        // Unit in the metric at y = 2 means Euclidean length 2.
        assert!(geodesic_ray(&h2(), &[0.0, 2.0].into(), &[0.0, 2.0], 1.0).is_ok());
    }

    #[test]
    fn long_rays_stay_exact() {
        let p0: Point = [0.7, 0.4].into();
        for angle in [0.1, 1.0, 2.5, -0.7, -PI / 2.0] {
            let v = [0.4 * f64::cos(angle), 0.4 * f64::sin(angle)];
            for t in [1e-3, 1.0, 10.0, 30.0] {
                let q = geodesic_ray(&h2(), &p0, &v, t).unwrap();
                assert_relative_eq!(distance(&h2(), &p0, &q).unwrap(), t, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn ball_volume_examples() {
        let e2 = ModelSpace::euclidean(2).unwrap();
        assert_relative_eq!(ball_volume(&e2, 1.0).unwrap().value, PI, max_relative = 1e-15);
        let v = ball_volume(&h2(), 2.0).unwrap();
        assert!(v.exact);
        assert_relative_eq!(v.value, 2.0 * PI * (2f64.cosh() - 1.0), max_relative = 1e-15);
        assert_relative_eq!(v.value, 17.355387, epsilon = 1e-6);
        assert_relative_eq!(unit_ball_volume(3), 4.0 * PI / 3.0, max_relative = 1e-15);
        assert_relative_eq!(unit_ball_volume(8), PI.powi(4) / 24.0, max_relative = 1e-14);
    }

    /// 1-D Simpson oracle for `∫₀^R 2π sinh r · 2π(cosh √(R²−r²) − 1) dr`.
    fn h2xh2_volume_oracle(r: f64) -> f64 {
        let n = 20_000;
        let h = r / n as f64;
        let f = |x: f64| 4.0 * PI * PI * x.sinh() * (((r * r - x * x).max(0.0)).sqrt().cosh() - 1.0);
        let mut s = f(0.0) + f(r);
        for i in 1..n {
            s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn product_ball_volume_matches_quadrature() {
        for r in [1.0, 6.0, 12.0] {
            let v = ball_volume(&h2xh2(), r).unwrap();
            let exact = h2xh2_volume_oracle(r);
            assert!(!v.exact && v.stderr > 0.0);
            assert!((v.value - exact).abs() <= 4.0 * v.stderr, "R={r}: {v:?} vs {exact}");
            assert!(v.stderr / v.value < 0.01);
        }
        // ln(vol)/R at R = 6 is dominated by prefactors; the oracle pins it.
        let v6 = ball_volume(&h2xh2(), 6.0).unwrap();
        assert_relative_eq!(v6.value.ln() / 6.0, 1.98918, epsilon = 2e-3);
    }

    #[test]
    fn ball_volume_is_monotone_and_grows_at_rate_one_on_h2() {
        let mut last = 0.0;
        for i in 0..=40 {
            let v = ball_volume(&h2(), i as f64 * 0.5).unwrap().value;
            assert!(v >= last);
            last = v;
        }
        // ln(2π(cosh R − 1))/R = 1 + ln(π)/R + O(e^{-R}/R).
        let v20 = ball_volume(&h2(), 20.0).unwrap().value;
        assert_relative_eq!(v20.ln() / 20.0, 1.0 + PI.ln() / 20.0, epsilon = 1e-9);
        let slope = (ball_volume(&h2(), 20.0).unwrap().value.ln()
            - ball_volume(&h2(), 15.0).unwrap().value.ln())
            / 5.0;
        assert!((slope - 1.0).abs() < 0.02);
    }

    #[test]
    fn sampling_examples() {
        let e1 = ModelSpace::euclidean(1).unwrap();
        let pts = sample_uniform_ball(&e1, 1.0, 20_000, RngSeed::new(3, 0)).unwrap();
        let xs: Vec<f64> = pts.iter().map(|p| p.coords[0]).collect();
        let (m, se) = mean_se(&xs);
        assert!(m.abs() <= 3.0 * se, "mean {m} se {se}");
        assert!(xs.iter().all(|x| x.abs() <= 1.0));

        // ∫₀³ r sinh r dr / ∫₀³ sinh r dr = (3 cosh 3 − sinh 3)/(cosh 3 − 1).
        let oracle = (3.0 * 3f64.cosh() - 3f64.sinh()) / (3f64.cosh() - 1.0);
        assert_relative_eq!(oracle, 2.226055, epsilon = 1e-6);
        let pts = sample_uniform_ball(&h2(), 3.0, 20_000, RngSeed::new(4, 0)).unwrap();
        let x0 = h2().basepoint().clone();
        let ds: Vec<f64> = pts.iter().map(|p| distance(&h2(), &x0, p).unwrap()).collect();
        let (m, se) = mean_se(&ds);
        assert!((m - oracle).abs() <= 3.0 * se, "mean {m} se {se}");
        assert!(ds.iter().all(|d| *d <= 3.0 + 1e-9));

        assert!(sample_uniform_ball(&h2(), 1.0, 0, RngSeed::new(0, 0)).unwrap().is_empty());
    }

    #[test]
    fn product_samples_stay_inside_the_ball() {
        let space = ModelSpace::from_id("euclidean:1xh2").unwrap();
        let pts = sample_uniform_ball(&space, 4.0, 2000, RngSeed::new(9, 1)).unwrap();
        let x0 = space.basepoint().clone();
        for p in &pts {
            assert!(distance(&space, &x0, p).unwrap() <= 4.0 + 1e-9);
        }
        // Fraction inside the half-radius ball matches the volume ratio.
        let inside = pts
            .iter()
            .filter(|p| distance(&space, &x0, p).unwrap() <= 2.0)
            .count() as f64
            / pts.len() as f64;
        let ratio = ball_volume(&space, 2.0).unwrap().value / ball_volume(&space, 4.0).unwrap().value;
        let se = (ratio * (1.0 - ratio) / pts.len() as f64).sqrt();
        assert!((inside - ratio).abs() < 4.0 * se + 0.01, "{inside} vs {ratio}");
    }

    #[test]
    fn space_ids_round_trip() {
        for id in ["euclidean:2", "h2", "h2xh2", "euclidean:3xh2", "euclidean:8"] {
            assert_eq!(ModelSpace::from_id(id).unwrap().id(), id);
        }
        for bad in ["nosuch", "euclidean:0", "euclidean:9", "h2xh2xh2", "h3", ""] {
            assert_eq!(ModelSpace::from_id(bad).unwrap_err().code(), "unknown_id", "{bad}");
        }
        assert_eq!(h2xh2().basepoint().coords, vec![0.0, 1.0, 0.0, 1.0]);
    }

    fn mean_se(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
        (m, (v / n).sqrt())
    }

    fn h2_point() -> impl Strategy<Value = Point> {
        (-5.0..5.0f64, -4.0..3.0f64).prop_map(|(x, ly)| Point::from([x, ly.exp()]))
    }

    fn e3_point() -> impl Strategy<Value = Point> {
        prop::array::uniform3(-10.0..10.0f64).prop_map(Point::from)
    }

    fn h2xh2_point() -> impl Strategy<Value = Point> {
        (h2_point(), h2_point()).prop_map(|(a, b)| Point::concat(&a, &b))
    }

    fn metric_axioms(space: &ModelSpace, p: &Point, q: &Point, r: &Point) {
        let d = |a: &Point, b: &Point| distance(space, a, b).unwrap();
        assert_eq!(d(p, p), 0.0);
        assert!((d(p, q) - d(q, p)).abs() <= 1e-12);
        assert!(d(p, r) <= d(p, q) + d(q, r) + 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(3000))]

        #[test]
        fn h2_metric_axioms(p in h2_point(), q in h2_point(), r in h2_point()) {
            metric_axioms(&h2(), &p, &q, &r);
        }

        #[test]
        fn e3_metric_axioms(p in e3_point(), q in e3_point(), r in e3_point()) {
            metric_axioms(&ModelSpace::euclidean(3).unwrap(), &p, &q, &r);
        }

        #[test]
        fn product_metric_axioms(p in h2xh2_point(), q in h2xh2_point(), r in h2xh2_point()) {
            let space = h2xh2();
            metric_axioms(&space, &p, &q, &r);
            let (p1, p2) = space.split(&p).unwrap();
            let (q1, q2) = space.split(&q).unwrap();
            let d1 = h2_distance(p1, q1);
            let d2 = h2_distance(p2, q2);
            prop_assert_eq!(distance(&space, &p, &q).unwrap(), d1.hypot(d2));
        }

        #[test]
        fn geodesic_additivity(p in h2xh2_point(), a in 0.0..6.3f64, b in 0.0..6.3f64,
                               theta in 0.0..1.5f64, s in 0.0..8.0f64, t in 0.0..8.0f64) {
            let space = h2xh2();
            let (y1, y2) = (p.coords[1], p.coords[3]);
            let v = [theta.cos() * a.cos() * y1, theta.cos() * a.sin() * y1,
                     theta.sin() * b.cos() * y2, theta.sin() * b.sin() * y2];
            let ps = geodesic_ray(&space, &p, &v, s).unwrap();
            let pst = geodesic_ray(&space, &p, &v, s + t).unwrap();
            let d = distance(&space, &ps, &pst).unwrap();
            prop_assert!((d - t).abs() <= 1e-9 * (1.0 + s + t), "d={} t={}", d, t);
        }
    }
}
