//! Horofunctions, minimal harmonic functions and chart differential operators.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{self, metric, ModelSpace, Point, SpaceKind};

/// Boundary coordinates of a Busemann function.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryParams {
    /// Euclidean unit direction `v`; `ξ(z) = −⟨z − x₀, v⟩`.
    Direction(Vec<f64>),
    /// Half-plane boundary point `q ∈ ℝ ∪ {∞}`.
    HalfPlane(HalfPlaneBoundary),
    /// `cos θ·ξ₁ + sin θ·ξ₂` with `θ ∈ [0, π/2]`.
    Product {
        left: Box<BoundaryParams>,
        right: Box<BoundaryParams>,
        theta: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HalfPlaneBoundary {
    Infinity,
    Real(f64),
}

impl BoundaryParams {
    /// Parse `dir:<v1,...>`, `q:inf`, `q:<real>` or
    /// `prod:<left>,<right>,theta=<real>` and validate against `space`.
    pub fn parse(spec: &str, space: &ModelSpace) -> Result<Self> {
        let compact: String = spec.chars().filter(|c| !c.is_whitespace()).collect();
        let params = Self::parse_unchecked(&compact)?;
        params.validate(space)?;
        Ok(params)
    }

    fn parse_unchecked(spec: &str) -> Result<Self> {
        let bad = |why: &str| Error::InvalidBoundary(format!("{spec}: {why}"));
        if let Some(rest) = spec.strip_prefix("prod:") {
            let (pair, theta) = rest.rsplit_once(",theta=").ok_or_else(|| bad("missing ,theta="))?;
            let theta: f64 = theta.trim().parse().map_err(|_| bad("theta is not a number"))?;
            let split = [",q:", ",dir:"]
                .iter()
                .filter_map(|m| pair.find(m))
                .min()
                .ok_or_else(|| bad("expected two factor specs"))?;
            let left = Self::parse_unchecked(&pair[..split])?;
            let right = Self::parse_unchecked(&pair[split + 1..])?;
            return Ok(BoundaryParams::Product {
                left: Box::new(left),
                right: Box::new(right),
                theta,
            });
        }
        if let Some(q) = spec.strip_prefix("q:") {
            return match q.trim() {
                "inf" | "infinity" => Ok(BoundaryParams::HalfPlane(HalfPlaneBoundary::Infinity)),
                other => other
                    .parse()
                    .map(|q| BoundaryParams::HalfPlane(HalfPlaneBoundary::Real(q)))
                    .map_err(|_| bad("q is neither inf nor a number")),
            };
        }
        if let Some(v) = spec.strip_prefix("dir:") {
            let comps = v
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| bad("direction components must be numbers"))?;
            return Ok(BoundaryParams::Direction(comps));
        }
        Err(bad("unknown boundary form"))
    }

    pub fn validate(&self, space: &ModelSpace) -> Result<()> {
        let bad = |why: String| Err(Error::InvalidBoundary(why));
        match (self, space.kind()) {
            (BoundaryParams::Direction(v), SpaceKind::Euclidean(n)) => {
                if v.len() != *n {
                    return bad(format!("direction has {} components, expected {n}", v.len()));
                }
                let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
                if !norm.is_finite() || (norm - 1.0).abs() > geometry::UNIT_TOLERANCE {
                    return bad(format!("direction must be a unit vector, norm is {norm}"));
                }
                Ok(())
            }
            (BoundaryParams::HalfPlane(HalfPlaneBoundary::Infinity), SpaceKind::HyperbolicHalfPlane) => Ok(()),
            (BoundaryParams::HalfPlane(HalfPlaneBoundary::Real(q)), SpaceKind::HyperbolicHalfPlane) => {
                if q.is_finite() {
                    Ok(())
                } else {
                    bad(format!("boundary point {q} is not finite"))
                }
            }
            (BoundaryParams::Product { left, right, theta }, SpaceKind::Product(a, b)) => {
                if !(0.0..=FRAC_PI_2).contains(theta) {
                    return bad(format!("theta = {theta} outside [0, pi/2]"));
                }
                left.validate(a)?;
                right.validate(b)
            }
            _ => bad(format!("{self} does not fit {}", space.id())),
        }
    }
}

impl fmt::Display for BoundaryParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundaryParams::Direction(v) => {
                let parts: Vec<String> = v.iter().map(|c| c.to_string()).collect();
                write!(f, "dir:{}", parts.join(","))
            }
            BoundaryParams::HalfPlane(HalfPlaneBoundary::Infinity) => f.write_str("q:inf"),
            BoundaryParams::HalfPlane(HalfPlaneBoundary::Real(q)) => write!(f, "q:{q}"),
            BoundaryParams::Product { left, right, theta } => write!(f, "prod:{left},{right},theta={theta}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum HoroForm {
    FinitePoint(Point),
    Boundary(BoundaryParams),
    GridSampled { probes: Vec<Point>, values: Vec<f64> },
}

/// A horofunction normalized to vanish at the basepoint.
#[derive(Debug, Clone, PartialEq)]
pub struct Horofunction {
    space: ModelSpace,
    form: HoroForm,
}

impl Horofunction {
    pub fn finite_point(space: &ModelSpace, x: Point) -> Result<Self> {
        space.validate(&x)?;
        Ok(Self {
            space: space.clone(),
            form: HoroForm::FinitePoint(x),
        })
    }

    pub fn boundary(space: &ModelSpace, params: BoundaryParams) -> Result<Self> {
        params.validate(space)?;
        Ok(Self {
            space: space.clone(),
            form: HoroForm::Boundary(params),
        })
    }

    pub fn parse(space: &ModelSpace, spec: &str) -> Result<Self> {
        Self::boundary(space, BoundaryParams::parse(spec, space)?)
    }

    /// Probe-restricted horofunction. If the basepoint is a probe, values are
    /// shifted so that it reads zero there.
    pub fn grid_sampled(space: &ModelSpace, probes: Vec<Point>, mut values: Vec<f64>) -> Result<Self> {
        if probes.len() != values.len() {
            return Err(Error::Contract(format!(
                "{} probes but {} values",
                probes.len(),
                values.len()
            )));
        }
        for p in &probes {
            space.validate(p)?;
        }
        if let Some(i) = probes.iter().position(|p| p == space.basepoint()) {
            let shift = values[i];
            for v in &mut values {
                *v -= shift;
            }
            values[i] = 0.0;
        }
        Ok(Self {
            space: space.clone(),
            form: HoroForm::GridSampled { probes, values },
        })
    }

    pub fn space(&self) -> &ModelSpace {
        &self.space
    }

    pub fn form(&self) -> &HoroForm {
        &self.form
    }

    pub fn boundary_params(&self) -> Option<&BoundaryParams> {
        match &self.form {
            HoroForm::Boundary(b) => Some(b),
            _ => None,
        }
    }

    pub fn eval(&self, z: &Point) -> Result<f64> {
        self.space.validate(z)?;
        match &self.form {
            HoroForm::FinitePoint(x) => {
                let x0 = self.space.basepoint();
                if z == x0 {
                    return Ok(0.0);
                }
                Ok(geometry::raw_distance(&self.space, &x.coords, &z.coords)
                    - geometry::raw_distance(&self.space, &x.coords, &x0.coords))
            }
            HoroForm::Boundary(params) => Ok(eval_boundary(
                &self.space,
                params,
                &self.space.basepoint().coords,
                &z.coords,
            )),
            HoroForm::GridSampled { probes, values } => probes
                .iter()
                .position(|p| p == z)
                .map(|i| values[i])
                .ok_or_else(|| Error::Contract("grid-sampled horofunction evaluated off its probes".into())),
        }
    }

    /// Largest difference to `other` over this function's probe points.
    pub fn sup_distance_on_probes(&self, other: &Horofunction) -> Result<f64> {
        let HoroForm::GridSampled { probes, values } = &self.form else {
            return Err(Error::Contract("sup distance needs a grid-sampled horofunction".into()));
        };
        probes.iter().zip(values).try_fold(0.0f64, |acc, (p, v)| Ok(acc.max((other.eval(p)? - v).abs())))
    }

    /// Chart partials `∂ᵢξ` and `Δξ` for boundary forms.
    fn analytic(&self, z: &[f64]) -> Option<(Vec<f64>, f64)> {
        match &self.form {
            HoroForm::Boundary(params) => {
                let mut d = Vec::with_capacity(z.len());
                let lap = boundary_derivatives(&self.space, params, z, &mut d);
                Some((d, lap))
            }
            _ => None,
        }
    }
}

pub fn busemann_from_point(space: &ModelSpace, x: &Point, z: &Point) -> Result<f64> {
    Horofunction::finite_point(space, x.clone())?.eval(z)
}

pub fn busemann_boundary(space: &ModelSpace, params: &BoundaryParams, z: &Point) -> Result<f64> {
    params.validate(space)?;
    space.validate(z)?;
    Ok(eval_boundary(space, params, &space.basepoint().coords, &z.coords))
}

fn eval_boundary(space: &ModelSpace, params: &BoundaryParams, x0: &[f64], z: &[f64]) -> f64 {
    match (params, space.kind()) {
        (BoundaryParams::Direction(v), _) => -z.iter().zip(x0).zip(v).map(|((a, b), c)| (a - b) * c).sum::<f64>(),
        (BoundaryParams::HalfPlane(HalfPlaneBoundary::Infinity), _) => -(z[1] / x0[1]).ln(),
        (BoundaryParams::HalfPlane(HalfPlaneBoundary::Real(q)), _) => {
            let dz = (z[0] - q).powi(2) + z[1] * z[1];
            let d0 = (x0[0] - q).powi(2) + x0[1] * x0[1];
            (dz / z[1]).ln() - (d0 / x0[1]).ln()
        }
        (BoundaryParams::Product { left, right, theta }, SpaceKind::Product(a, b)) => {
            let k = a.dim();
            theta.cos() * eval_boundary(a, left, &x0[..k], &z[..k])
                + theta.sin() * eval_boundary(b, right, &x0[k..], &z[k..])
        }
        _ => unreachable!("boundary params validated against the space"),
    }
}

/// Pushes `∂ᵢξ` onto `out` and returns `Δξ`.
fn boundary_derivatives(space: &ModelSpace, params: &BoundaryParams, z: &[f64], out: &mut Vec<f64>) -> f64 {
    match (params, space.kind()) {
        (BoundaryParams::Direction(v), _) => {
            out.extend(v.iter().map(|c| -c));
            0.0
        }
        (BoundaryParams::HalfPlane(HalfPlaneBoundary::Infinity), _) => {
            out.extend([0.0, -1.0 / z[1]]);
            1.0
        }
        (BoundaryParams::HalfPlane(HalfPlaneBoundary::Real(q)), _) => {
            let dx = z[0] - q;
            let d = dx * dx + z[1] * z[1];
            out.extend([2.0 * dx / d, 2.0 * z[1] / d - 1.0 / z[1]]);
            1.0
        }
        (BoundaryParams::Product { left, right, theta }, SpaceKind::Product(a, b)) => {
            let k = a.dim();
            let (c, s) = (theta.cos(), theta.sin());
            let start = out.len();
            let la = boundary_derivatives(a, left, &z[..k], out);
            for d in &mut out[start..] {
                *d *= c;
            }
            let mid = out.len();
            let lb = boundary_derivatives(b, right, &z[k..], out);
            for d in &mut out[mid..] {
                *d *= s;
            }
            c * la + s * lb
        }
        _ => unreachable!("boundary params validated against the space"),
    }
}

/// Unit initial direction at `from` of the geodesic ray ending at the
/// boundary point `params`.
fn ray_direction(space: &ModelSpace, params: &BoundaryParams, from: &[f64]) -> Vec<f64> {
    match (params, space.kind()) {
        (BoundaryParams::Direction(v), _) => v.clone(),
        (BoundaryParams::HalfPlane(HalfPlaneBoundary::Infinity), _) => vec![0.0, from[1]],
        (BoundaryParams::HalfPlane(HalfPlaneBoundary::Real(q)), _) => {
            let (a, b) = (from[0], from[1]);
            if a == *q {
                return vec![0.0, -b];
            }
            // Semicircle through `from` centered on the real axis at `c`.
            let c = (a * a + b * b - q * q) / (2.0 * (a - q));
            let mut t = [b, c - a];
            if t[0] * (q - a) < 0.0 {
                t = [-t[0], -t[1]];
            }
            let n = t[0].hypot(t[1]);
            vec![b * t[0] / n, b * t[1] / n]
        }
        (BoundaryParams::Product { left, right, theta }, SpaceKind::Product(a, b)) => {
            let k = a.dim();
            let mut v: Vec<f64> = ray_direction(a, left, &from[..k]).into_iter().map(|c| c * theta.cos()).collect();
            v.extend(ray_direction(b, right, &from[k..]).into_iter().map(|c| c * theta.sin()));
            v
        }
        _ => unreachable!("boundary params validated against the space"),
    }
}

/// Point at parameter `t` on the ray from the basepoint whose Busemann limit
/// is the boundary horofunction `params`.
pub fn defining_ray_point(space: &ModelSpace, params: &BoundaryParams, t: f64) -> Result<Point> {
    params.validate(space)?;
    let x0 = space.basepoint();
    let v = ray_direction(space, params, &x0.coords);
    geometry::geodesic_ray(space, x0, &v, t)
}

/// Lattice translation `z ↦ z + g` acting on horofunctions of `ℝⁿ`.
pub fn deck_action(space: &ModelSpace, g: &[i64], xi: &Horofunction) -> Result<Horofunction> {
    let SpaceKind::Euclidean(n) = space.kind() else {
        return Err(Error::UnsupportedSpace(format!(
            "deck action is only modeled on euclidean spaces, not {}",
            space.id()
        )));
    };
    if g.len() != *n {
        return Err(Error::Contract(format!("lattice vector has {} entries, expected {n}", g.len())));
    }
    match &xi.form {
        HoroForm::FinitePoint(x) => {
            let moved = x.coords.iter().zip(g).map(|(c, k)| c + *k as f64).collect();
            Horofunction::finite_point(space, Point::new(moved))
        }
        HoroForm::Boundary(_) => Ok(xi.clone()),
        HoroForm::GridSampled { .. } => Err(Error::Contract(
            "deck action is not defined for grid-sampled horofunctions".into(),
        )),
    }
}

type Evaluator = dyn Fn(&Point) -> Result<f64> + Send + Sync;
type Derivatives = dyn Fn(&Point) -> Option<(Vec<f64>, f64)> + Send + Sync;

/// A smooth function on a space, optionally with closed-form chart partials
/// and Laplacian, and optionally with a direct log evaluator.
#[derive(Clone)]
pub struct ScalarField {
    space: ModelSpace,
    eval: Arc<Evaluator>,
    ln_eval: Option<Arc<Evaluator>>,
    analytic: Option<Arc<Derivatives>>,
    singular: Option<Point>,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("space", &self.space.id())
            .field("analytic", &self.analytic.is_some())
            .finish()
    }
}

impl ScalarField {
    pub fn new(space: &ModelSpace, eval: impl Fn(&Point) -> Result<f64> + Send + Sync + 'static) -> Self {
        Self {
            space: space.clone(),
            eval: Arc::new(eval),
            ln_eval: None,
            analytic: None,
            singular: None,
        }
    }

    pub fn constant(space: &ModelSpace, c: f64) -> Self {
        let n = space.dim();
        let mut f = Self::new(space, move |_| Ok(c));
        f.ln_eval = Some(Arc::new(move |_| Ok(c.ln())));
        f.analytic = Some(Arc::new(move |_| Some((vec![0.0; n], 0.0))));
        f
    }

    /// The horofunction itself as a field.
    pub fn from_horofunction(xi: &Horofunction) -> Self {
        let h = xi.clone();
        let mut f = Self::new(&xi.space, move |p| h.eval(p));
        if xi.boundary_params().is_some() {
            let h = xi.clone();
            f.analytic = Some(Arc::new(move |p: &Point| h.analytic(&p.coords)));
        }
        if let HoroForm::FinitePoint(x) = &xi.form {
            f.singular = Some(x.clone());
        }
        f
    }

    /// `exp(−s·ξ)`, with `Δ e^{−sξ} = (s²‖∇ξ‖² − sΔξ)·e^{−sξ}` when ξ has
    /// closed-form derivatives.
    pub fn exp_horofunction(xi: &Horofunction, s: f64) -> Self {
        let h = xi.clone();
        let mut f = Self::new(&xi.space, move |p| Ok((-s * h.eval(p)?).exp()));
        let h = xi.clone();
        f.ln_eval = Some(Arc::new(move |p| Ok(-s * h.eval(p)?)));
        if xi.boundary_params().is_some() {
            let h = xi.clone();
            let space = xi.space.clone();
            f.analytic = Some(Arc::new(move |p: &Point| {
                let (d, lap) = h.analytic(&p.coords)?;
                let k = (-s * h.eval(p).ok()?).exp();
                let g = metric(&space, p).ok()?;
                let norm_sq: f64 = d.iter().enumerate().map(|(i, c)| g.inverse(i, i) * c * c).sum();
                Some((d.iter().map(|c| -s * k * c).collect(), (s * s * norm_sq - s * lap) * k))
            }));
        }
        if let HoroForm::FinitePoint(x) = &xi.form {
            f.singular = Some(x.clone());
        }
        f
    }

    pub fn space(&self) -> &ModelSpace {
        &self.space
    }

    pub fn value(&self, p: &Point) -> Result<f64> {
        (self.eval)(p)
    }

    pub fn ln_value(&self, p: &Point) -> Result<f64> {
        match &self.ln_eval {
            Some(f) => f(p),
            None => Ok(self.value(p)?.ln()),
        }
    }

    pub fn has_analytic(&self) -> bool {
        self.analytic.is_some()
    }
}

/// Finite-difference step per chart coordinate at `p`.
fn fd_steps(space: &ModelSpace, c: &[f64], out: &mut Vec<f64>) {
    match space.kind() {
        SpaceKind::Euclidean(_) => out.extend(c.iter().map(|x| 1e-4 * x.abs().max(1.0))),
        SpaceKind::HyperbolicHalfPlane => out.extend([1e-4 * c[1], 1e-4 * c[1]]),
        SpaceKind::Product(a, b) => {
            let (ca, cb) = c.split_at(a.dim());
            fd_steps(a, ca, out);
            fd_steps(b, cb, out);
        }
    }
}

fn check_regular(field: &ScalarField, p: &Point) -> Result<Vec<f64>> {
    field.space.validate(p)?;
    let mut steps = Vec::with_capacity(p.dim());
    fd_steps(&field.space, &p.coords, &mut steps);
    if let Some(x) = &field.singular {
        let reach = 2.0 * steps.iter().cloned().fold(0.0, f64::max);
        let d = geometry::raw_distance(&field.space, &x.coords, &p.coords);
        let scale = metric(&field.space, p)?.diag.iter().cloned().fold(0.0, f64::max).sqrt();
        if d <= 4.0 * reach * scale.max(1.0) {
            return Err(Error::Singularity(format!(
                "point {:?} is within the stencil of the defining point {:?}",
                p.coords, x.coords
            )));
        }
    }
    Ok(steps)
}

fn shifted(p: &Point, i: usize, h: f64) -> Point {
    let mut q = p.clone();
    q.coords[i] += h;
    q
}

/// Fourth-order central first and second partials along coordinate `i`.
fn central(f: &dyn Fn(&Point) -> Result<f64>, p: &Point, i: usize, h: f64, f0: f64) -> Result<(f64, f64)> {
    let fp1 = f(&shifted(p, i, h))?;
    let fm1 = f(&shifted(p, i, -h))?;
    let fp2 = f(&shifted(p, i, 2.0 * h))?;
    let fm2 = f(&shifted(p, i, -2.0 * h))?;
    let d1 = (-fp2 + 8.0 * fp1 - 8.0 * fm1 + fm2) / (12.0 * h);
    let d2 = (-fp2 + 16.0 * fp1 - 30.0 * f0 + 16.0 * fm1 - fm2) / (12.0 * h * h);
    Ok((d1, d2))
}

/// Riemannian gradient `gⁱⁱ∂ᵢf` by finite differences.
pub fn gradient_fd(field: &ScalarField, p: &Point) -> Result<Vec<f64>> {
    let steps = check_regular(field, p)?;
    let g = metric(&field.space, p)?;
    let f0 = field.value(p)?;
    let eval = |q: &Point| field.value(q);
    (0..p.dim())
        .map(|i| Ok(g.inverse(i, i) * central(&eval, p, i, steps[i], f0)?.0))
        .collect()
}

/// Laplace–Beltrami operator in divergence form,
/// `Δf = Σᵢ (1/√g)·∂ᵢ(cᵢ·∂ᵢf)` with `cᵢ = √g·gⁱⁱ` (diagonal metrics).
pub fn laplacian_fd(field: &ScalarField, p: &Point) -> Result<f64> {
    let steps = check_regular(field, p)?;
    let g = metric(&field.space, p)?;
    let sqrt_g = g.sqrt_det();
    let f0 = field.value(p)?;
    let eval = |q: &Point| field.value(q);
    let mut total = 0.0;
    for (i, &h) in steps.iter().enumerate() {
        let (d1, d2) = central(&eval, p, i, h, f0)?;
        let c = |q: &Point| -> Result<f64> {
            let gq = metric(&field.space, q)?;
            Ok(gq.sqrt_det() * gq.inverse(i, i))
        };
        let ci = c(p)?;
        let (dc, _) = central(&c, p, i, h, ci)?;
        total += (ci * d2 + dc * d1) / sqrt_g;
    }
    Ok(total)
}

/// Gradient, from closed forms where registered.
pub fn gradient(field: &ScalarField, p: &Point) -> Result<Vec<f64>> {
    if let Some(a) = &field.analytic {
        field.space.validate(p)?;
        if let Some((d, _)) = a(p) {
            let g = metric(&field.space, p)?;
            return Ok(d.iter().enumerate().map(|(i, c)| g.inverse(i, i) * c).collect());
        }
    }
    gradient_fd(field, p)
}

/// Laplacian, from closed forms where registered.
pub fn laplacian(field: &ScalarField, p: &Point) -> Result<f64> {
    if let Some(a) = &field.analytic {
        field.space.validate(p)?;
        if let Some((_, lap)) = a(p) {
            return Ok(lap);
        }
    }
    laplacian_fd(field, p)
}

/// Metric norm of a tangent vector at `p`.
pub fn norm(space: &ModelSpace, p: &Point, v: &[f64]) -> Result<f64> {
    Ok(metric(space, p)?.norm_sq(v).sqrt())
}

pub fn inner(space: &ModelSpace, p: &Point, u: &[f64], v: &[f64]) -> Result<f64> {
    Ok(metric(space, p)?.inner(u, v))
}

/// Linear drift of the space in closed form: 0 on `ℝⁿ`, 1 on `ℍ²`, and the
/// Euclidean combination of factor drifts on products.
pub fn space_drift(space: &ModelSpace) -> f64 {
    match space.kind() {
        SpaceKind::Euclidean(_) => 0.0,
        SpaceKind::HyperbolicHalfPlane => 1.0,
        SpaceKind::Product(a, b) => space_drift(a).hypot(space_drift(b)),
    }
}

/// `k_ξ = exp(−ℓ·ξ)` with `ℓ` the space's drift; the constant 1 on `ℝⁿ`.
pub fn minimal_harmonic(space: &ModelSpace, xi: &Horofunction) -> Result<ScalarField> {
    if xi.boundary_params().is_none() {
        return Err(Error::Contract("minimal harmonic function needs a boundary horofunction".into()));
    }
    if xi.space() != space {
        return Err(Error::Contract("horofunction belongs to another space".into()));
    }
    match space.kind() {
        SpaceKind::Euclidean(_) => Ok(ScalarField::constant(space, 1.0)),
        _ => Ok(ScalarField::exp_horofunction(xi, space_drift(space))),
    }
}
