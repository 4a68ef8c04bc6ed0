use std::f64::consts::{LN_2, PI};

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::RngSeed;
use crate::error::{Error, Result};
use crate::geometry::{self, ModelSpace, Point, SpaceKind};
use crate::quadrature::{integrate, QuadOptions};

/// Heat kernel of `∂ₜu = Δu`, evaluated in log space.
pub trait HeatKernel: Sync {
    fn ln_kernel(&self, space: &ModelSpace, t: f64, p: &Point, q: &Point) -> Result<f64>;

    fn kernel(&self, space: &ModelSpace, t: f64, p: &Point, q: &Point) -> Result<f64> {
        self.ln_kernel(space, t, p, q).map(f64::exp)
    }
}

/// Closed forms on Euclidean factors, McKean's integral on the half-plane.
#[derive(Debug, Clone, Copy, Default)]
pub struct McKeanKernel;

impl HeatKernel for McKeanKernel {
    fn ln_kernel(&self, space: &ModelSpace, t: f64, p: &Point, q: &Point) -> Result<f64> {
        ln_heat_kernel(space, t, p, q)
    }
}

/// Multiplies the kernel by a constant on spaces with a hyperbolic factor.
/// Fault injection only.
#[derive(Debug, Clone, Copy)]
pub struct ScaledKernel {
    pub factor: f64,
}

impl HeatKernel for ScaledKernel {
    fn ln_kernel(&self, space: &ModelSpace, t: f64, p: &Point, q: &Point) -> Result<f64> {
        let base = ln_heat_kernel(space, t, p, q)?;
        Ok(if space.has_hyperbolic_factor() {
            base + self.factor.ln()
        } else {
            base
        })
    }
}

pub fn ln_heat_kernel(space: &ModelSpace, t: f64, p: &Point, q: &Point) -> Result<f64> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("heat kernel needs t > 0, got {t}")));
    }
    space.validate(p)?;
    space.validate(q)?;
    ln_kernel_raw(space, t, &p.coords, &q.coords)
}

pub fn heat_kernel(space: &ModelSpace, t: f64, p: &Point, q: &Point) -> Result<f64> {
    ln_heat_kernel(space, t, p, q).map(f64::exp)
}

fn ln_kernel_raw(space: &ModelSpace, t: f64, p: &[f64], q: &[f64]) -> Result<f64> {
    match space.kind() {
        SpaceKind::Euclidean(n) => {
            let d = geometry::raw_distance(space, p, q);
            Ok(ln_euclidean(*n, t, d))
        }
        SpaceKind::HyperbolicHalfPlane => ln_heat_kernel_h2(t, geometry::h2_distance(p, q)),
        SpaceKind::Product(a, b) => {
            let (pa, pb) = p.split_at(a.dim());
            let (qa, qb) = q.split_at(a.dim());
            Ok(ln_kernel_raw(a, t, pa, qa)? + ln_kernel_raw(b, t, pb, qb)?)
        }
    }
}

fn ln_euclidean(n: usize, t: f64, d: f64) -> f64 {
    -0.5 * n as f64 * (4.0 * PI * t).ln() - d * d / (4.0 * t)
}

/// `ln sinh x` without overflow or cancellation.
fn ln_sinh(x: f64) -> f64 {
    if x < 1e-5 {
        x.ln() + x * x / 6.0
    } else if x < 20.0 {
        x.sinh().ln()
    } else {
        x - LN_2 + (-(-2.0 * x).exp()).ln_1p()
    }
}

/// Log of the half-plane heat kernel at time `t` and distance `r`:
///
/// `p(t, r) = √2·e^{−t/4}·(4πt)^{−3/2} ∫_r^∞ s·e^{−s²/4t} (cosh s − cosh r)^{−1/2} ds`.
///
/// With `s = r + w²` the endpoint singularity disappears; the integrand is
/// formed in log space and rescaled by its maximum before integration.
pub fn ln_heat_kernel_h2(t: f64, r: f64) -> Result<f64> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("heat kernel needs t > 0, got {t}")));
    }
    if !(r >= 0.0) || !r.is_finite() {
        return Err(Error::Domain(format!("distance must be finite and >= 0, got {r}")));
    }
    let ln_g = |w: f64| -> f64 {
        if w == 0.0 {
            return if r > 0.0 {
                (2.0 * r).ln() - r * r / (4.0 * t) - 0.5 * ln_sinh(r)
            } else {
                f64::NEG_INFINITY
            };
        }
        let h = 0.5 * w * w;
        let s = r + w * w;
        LN_2 + w.ln() + s.ln() - s * s / (4.0 * t) - 0.5 * (LN_2 + ln_sinh(r + h) + ln_sinh(h))
    };

    // Locate the bulk: double the cutoff until the tail is below e^{-690}
    // relative to the largest value seen. The scale only has to be within a
    // few hundred nats of the true maximum, so a coarse scan suffices.
    let scan = |lo: f64, hi: f64| -> f64 {
        (1..=24)
            .map(|i| ln_g(lo + (hi - lo) * i as f64 / 24.0))
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let mut upper = 1.0;
    let mut peak = ln_g(0.0).max(scan(0.0, upper));
    loop {
        if ln_g(upper) - peak < -690.0 {
            break;
        }
        peak = peak.max(scan(upper, 2.0 * upper));
        upper *= 2.0;
        if upper > 1e6 {
            return Err(Error::Numerical {
                message: format!("kernel integrand does not decay (t = {t}, r = {r})"),
                intervals: 0,
                evals: 0,
                estimate: f64::NAN,
                error: f64::NAN,
            });
        }
    }
    let res = integrate(|w| (ln_g(w) - peak).exp(), 0.0, upper, QuadOptions::default())?;
    if !(res.value > 0.0) {
        return Err(Error::Numerical {
            message: format!("kernel integral vanished (t = {t}, r = {r})"),
            intervals: res.intervals,
            evals: res.evals,
            estimate: res.value,
            error: res.error,
        });
    }
    Ok(0.5 * LN_2 - 0.25 * t - 1.5 * (4.0 * PI * t).ln() + peak + res.value.ln())
}

/// Heat kernel on the flat torus `ℝ²/ℤ²`, by direct lattice summation.
pub fn torus_heat_kernel(t: f64, x: &[f64; 2], y: &[f64; 2]) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("heat kernel needs t > 0, got {t}")));
    }
    let wrapped = |d: f64| -> f64 {
        let d = d - d.round();
        let norm = (4.0 * PI * t).sqrt();
        let term = |k: i64| (-(d + k as f64).powi(2) / (4.0 * t)).exp() / norm;
        let mut sum = term(0);
        let mut k = 1;
        loop {
            let add = term(k) + term(-k);
            sum += add;
            if add < 1e-15 * sum {
                break sum;
            }
            k += 1;
        }
    };
    Ok(wrapped(x[0] - y[0]) * wrapped(x[1] - y[1]))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemigroupCheck {
    pub lhs: f64,
    pub lhs_stderr: f64,
    pub rhs: f64,
}

impl SemigroupCheck {
    pub fn relative_gap(&self) -> f64 {
        (self.lhs - self.rhs).abs() / self.rhs
    }
}

/// Importance-sampled `∫ p(s, p, y)·p(t, y, q) dy` against `p(s + t, p, q)`.
///
/// The proposal is independent of the kernel under test: on half-plane
/// factors a folded `N(s, 4s)` radius about `p` with uniform angle, on
/// Euclidean factors `N(p, 4s·I)`.
pub fn semigroup_check(
    kernel: &dyn HeatKernel,
    space: &ModelSpace,
    s: f64,
    t: f64,
    p: &Point,
    q: &Point,
    samples: usize,
    seed: RngSeed,
) -> Result<SemigroupCheck> {
    if !(s > 0.0 && t > 0.0) {
        return Err(Error::Domain(format!("semigroup check needs s, t > 0, got {s}, {t}")));
    }
    if samples < 2 {
        return Err(Error::Contract("semigroup check needs >= 2 samples".into()));
    }
    space.validate(p)?;
    space.validate(q)?;
    let terms: Vec<f64> = (0..samples as u64)
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let mut rng = seed.with_stream(seed.stream.wrapping_add(i)).rng();
            let mut y = Vec::with_capacity(space.dim());
            let ln_q = propose(space, &p.coords, s, &mut rng, &mut y);
            let y = Point::new(y);
            Ok((kernel.ln_kernel(space, s, p, &y)? + kernel.ln_kernel(space, t, &y, q)? - ln_q).exp())
        })
        .collect::<Result<_>>()?;
    let n = terms.len() as f64;
    let mean = terms.iter().sum::<f64>() / n;
    let var = terms.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    Ok(SemigroupCheck {
        lhs: mean,
        lhs_stderr: (var / n).sqrt(),
        rhs: kernel.kernel(space, s + t, p, q)?,
    })
}

/// Draw a proposal point around `center`, returning the log density with
/// respect to Riemannian volume.
fn propose<R: Rng>(space: &ModelSpace, center: &[f64], s: f64, rng: &mut R, out: &mut Vec<f64>) -> f64 {
    let sd = (4.0 * s).sqrt();
    match space.kind() {
        SpaceKind::Euclidean(n) => {
            let mut sq = 0.0;
            for c in center {
                let z: f64 = rng.sample(StandardNormal);
                sq += z * z;
                out.push(c + sd * z);
            }
            -0.5 * sq - *n as f64 * (sd * (2.0 * PI).sqrt()).ln()
        }
        SpaceKind::HyperbolicHalfPlane => {
            let rho = (s + sd * rng.sample::<f64, _>(StandardNormal)).abs();
            let phi = 2.0 * PI * rng.random::<f64>();
            let ln_normal = |x: f64| -0.5 * ((x - s) / sd).powi(2) - (sd * (2.0 * PI).sqrt()).ln();
            let a = ln_normal(rho);
            let b = ln_normal(-rho);
            let ln_radial = a.max(b) + (-(a - b).abs()).exp().ln_1p();
            let y = center[1];
            let point = geometry::geodesic_ray(
                space,
                &Point::new(center.to_vec()),
                &[phi.cos() * y, phi.sin() * y],
                rho,
            )
            .expect("unit direction by construction");
            out.extend(point.coords);
            ln_radial - (2.0 * PI).ln() - ln_sinh(rho)
        }
        SpaceKind::Product(a, b) => {
            let (ca, cb) = center.split_at(a.dim());
            propose(a, ca, s, rng, out) + propose(b, cb, s, rng, out)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianBound {
    pub t: f64,
    pub holds: bool,
    /// Smallest `C` (to bisection accuracy) with `p ≤ C·e^{−(d/C)²}` on the sample.
    pub c: f64,
    /// Minimum over the sample of `ln(C·e^{−(d/C)²}) − ln p`.
    pub margin: f64,
}

/// Largest log-kernel among points at distance `d` from the basepoint.
/// For products the split of `d` between factors is scanned.
fn ln_kernel_at_distance(kernel: &dyn HeatKernel, space: &ModelSpace, t: f64, d: f64) -> Result<f64> {
    let x0 = space.basepoint();
    let directions: Vec<Vec<f64>> = match space.factors() {
        None => {
            let mut v = vec![0.0; space.dim()];
            v[space.dim() - 1] = 1.0;
            vec![v]
        }
        Some((a, b)) => (0..=8)
            .map(|k| {
                let phi = PI / 2.0 * k as f64 / 8.0;
                let mut v = vec![0.0; space.dim()];
                v[a.dim() - 1] = phi.cos();
                v[a.dim() + b.dim() - 1] = phi.sin();
                v
            })
            .collect(),
    };
    let mut best = f64::NEG_INFINITY;
    for v in directions {
        // Basepoints have unit chart scale, so coordinate-unit vectors are unit.
        let q = geometry::geodesic_ray(space, x0, &v, d)?;
        best = best.max(kernel.ln_kernel(space, t, x0, &q)?);
    }
    Ok(best)
}

/// Certify `p(t, x, y) ≤ C·exp(−(d(x, y)/C)²)` on the given distances.
pub fn gaussian_bound_check(
    kernel: &dyn HeatKernel,
    space: &ModelSpace,
    t: f64,
    distances: &[f64],
) -> Result<GaussianBound> {
    if distances.is_empty() {
        return Ok(GaussianBound {
            t,
            holds: true,
            c: 1.0,
            margin: f64::INFINITY,
        });
    }
    let ln_p: Vec<f64> = distances
        .iter()
        .map(|&d| ln_kernel_at_distance(kernel, space, t, d))
        .collect::<Result<_>>()?;
    // ln C − d²/C² is increasing in C, so each distance has a smallest
    // admissible C; bisect in ln C.
    let bound = |ln_c: f64, d: f64| ln_c - d * d * (-2.0 * ln_c).exp();
    let mut ln_c_needed = f64::NEG_INFINITY;
    for (&d, &lp) in distances.iter().zip(&ln_p) {
        let mut lo = lp - 1.0;
        let mut hi = lp.max(0.0) + 1.0;
        while bound(hi, d) < lp {
            hi += 1.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if bound(mid, d) >= lp {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        ln_c_needed = ln_c_needed.max(hi);
    }
    let margin = distances
        .iter()
        .zip(&ln_p)
        .map(|(&d, &lp)| bound(ln_c_needed, d) - lp)
        .fold(f64::INFINITY, f64::min);
    Ok(GaussianBound {
        t,
        holds: margin >= 0.0,
        c: ln_c_needed.exp(),
        margin,
    })
}

/// Tabulated law of `d(X₀, X_t)` on the half-plane: density `p(t, ρ)·2π sinh ρ`.
#[derive(Debug, Clone)]
pub struct RadialCdf {
    step: f64,
    cdf: Vec<f64>,
}

impl RadialCdf {
    pub fn eval(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        let x = r / self.step;
        let i = x.floor() as usize;
        if i + 1 >= self.cdf.len() {
            return 1.0;
        }
        let f = x - i as f64;
        self.cdf[i] * (1.0 - f) + self.cdf[i + 1] * f
    }

    pub fn total_mass(&self) -> f64 {
        *self.cdf.last().unwrap()
    }
}

pub fn h2_radial_cdf(t: f64) -> Result<RadialCdf> {
    let step = 2e-3;
    let r_max = 2.0 * t + 12.0 * (2.0 * t).sqrt() + 10.0;
    let n = (r_max / step).ceil() as usize;
    let density: Vec<f64> = (0..=n)
        .into_par_iter()
        .map(|i| {
            let r = i as f64 * step;
            if r == 0.0 {
                Ok(0.0)
            } else {
                Ok((ln_heat_kernel_h2(t, r)? + (2.0 * PI).ln() + ln_sinh(r)).exp())
            }
        })
        .collect::<Result<_>>()?;
    // Cumulative trapezoid with a midpoint correction from the neighbours.
    let mut cdf = Vec::with_capacity(n + 1);
    cdf.push(0.0);
    let mut acc = 0.0;
    for i in 0..n {
        let mut seg = 0.5 * (density[i] + density[i + 1]) * step;
        if i >= 1 && i + 2 <= n {
            seg -= (density[i + 2] - density[i + 1] - density[i] + density[i - 1]) * step / 24.0;
        }
        acc += seg;
        cdf.push(acc);
    }
    Ok(RadialCdf { step, cdf })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Independent mpmath evaluations (50 digits) of McKean's integral.
    const H2_ORACLE: [(f64, f64, f64); 8] = [
        (1.0, 0.5, -2.9375054253166952775),
        (1.0, 1.0, -3.1822743090642142092),
        (1.0, 2.0, -4.1405487793950647778),
        (1.0, 5.0, -10.418463019743400056),
        (2.0, 3.0, -5.5518630678373076102),
        (0.5, 0.1, -2.0078753488078547253),
        (10.0, 10.0, -13.531053367634314656),
        (50.0, 50.0, -54.359587136095511893),
    ];

    #[test]
    fn half_plane_kernel_matches_oracle() {
        let p0 = ln_heat_kernel_h2(1.0, 0.0).unwrap().exp();
        assert_relative_eq!(p0, 0.0575357552057219746, max_relative = 1e-8);
        assert!(p0 > 0.0 && p0 < 1.0 / (4.0 * PI));
        for (t, r, expected) in H2_ORACLE {
            let got = ln_heat_kernel_h2(t, r).unwrap();
            assert!((got - expected).abs() <= 1e-8 * expected.abs().max(1.0), "t={t} r={r}: {got} vs {expected}");
        }
        assert_relative_eq!(ln_heat_kernel_h2(1.0, 1.0).unwrap().exp(), 0.04149118395782221757, max_relative = 1e-8);
    }

    #[test]
    fn euclidean_kernel_examples() {
        let e2 = ModelSpace::euclidean(2).unwrap();
        let o: Point = [0.0, 0.0].into();
        assert_relative_eq!(heat_kernel(&e2, 1.0, &o, &o).unwrap(), 1.0 / (4.0 * PI), max_relative = 1e-15);
        assert_relative_eq!(
            heat_kernel(&e2, 1.0, &o, &[2.0, 0.0].into()).unwrap(),
            (-1f64).exp() / (4.0 * PI),
            max_relative = 1e-14
        );
        assert_eq!(heat_kernel(&e2, 0.0, &o, &o).unwrap_err().code(), "domain");
    }

    #[test]
    fn half_plane_kernel_is_a_probability_density() {
        let cdf = h2_radial_cdf(1.0).unwrap();
        assert!((cdf.total_mass() - 1.0).abs() < 1e-7, "{}", cdf.total_mass());
    }

    #[test]
    fn kernel_is_far_below_underflow_in_log_space() {
        let lp = ln_heat_kernel_h2(0.5, 20.0).unwrap();
        assert!(lp < -200.0 && lp.is_finite());
        let lp = ln_heat_kernel_h2(50.0, 150.0).unwrap();
        assert!(lp.is_finite());
    }

    #[test]
    fn product_kernel_is_the_factor_product() {
        let space = ModelSpace::from_id("euclidean:1xh2").unwrap();
        let p: Point = [0.3, 0.0, 1.0].into();
        let q: Point = [-0.2, 1.0, 2.0].into();
        let lp = ln_heat_kernel(&space, 0.7, &p, &q).unwrap();
        let e1 = ModelSpace::euclidean(1).unwrap();
        let expect = ln_heat_kernel(&e1, 0.7, &[0.3].into(), &[-0.2].into()).unwrap()
            + ln_heat_kernel(&ModelSpace::half_plane(), 0.7, &[0.0, 1.0].into(), &[1.0, 2.0].into()).unwrap();
        assert_relative_eq!(lp, expect, max_relative = 1e-15);
    }

    #[test]
    fn euclidean_semigroup_is_gaussian_convolution() {
        // N(0, 2s) * N(0, 2t) = N(0, 2(s+t)) evaluated pointwise.
        let (s, t, x, z) = (0.5, 0.5, 0.3, -1.1);
        let e1 = ModelSpace::euclidean(1).unwrap();
        let conv = integrate(
            |y| {
                heat_kernel(&e1, s, &[x].into(), &[y].into()).unwrap()
                    * heat_kernel(&e1, t, &[y].into(), &[z].into()).unwrap()
            },
            -30.0,
            30.0,
            QuadOptions::default(),
        )
        .unwrap()
        .value;
        let rhs = heat_kernel(&e1, s + t, &[x].into(), &[z].into()).unwrap();
        assert_relative_eq!(conv, rhs, max_relative = 1e-10);
        let mc = semigroup_check(&McKeanKernel, &e1, s, t, &[x].into(), &[z].into(), 20_000, RngSeed::new(1, 0)).unwrap();
        assert!((mc.lhs - mc.rhs).abs() <= 3.0 * mc.lhs_stderr);
    }

    #[test]
    fn half_plane_semigroup_within_two_percent() {
        let h2 = ModelSpace::half_plane();
        let p: Point = [0.0, 1.0].into();
        let q: Point = [0.0, 1f64.exp()].into();
        let c = semigroup_check(&McKeanKernel, &h2, 1.0, 1.0, &p, &q, 100_000, RngSeed::new(2, 0)).unwrap();
        assert!(c.relative_gap() <= 0.02, "{c:?}");
        assert!(c.lhs_stderr / c.rhs < 0.005);
        let swapped = semigroup_check(&McKeanKernel, &h2, 0.5, 1.5, &p, &q, 10, RngSeed::new(2, 0)).unwrap();
        let again = semigroup_check(&McKeanKernel, &h2, 1.5, 0.5, &p, &q, 10, RngSeed::new(2, 0)).unwrap();
        assert_eq!(swapped.rhs, again.rhs);
    }

    #[test]
    fn scaled_kernel_breaks_the_semigroup() {
        let h2 = ModelSpace::half_plane();
        let p: Point = [0.0, 1.0].into();
        let q: Point = [0.0, 1f64.exp()].into();
        let c = semigroup_check(&ScaledKernel { factor: 1.1 }, &h2, 1.0, 1.0, &p, &q, 20_000, RngSeed::new(2, 0)).unwrap();
        assert!(c.relative_gap() > 0.05, "{c:?}");
    }

    #[test]
    fn gaussian_bound_examples() {
        let grid: Vec<f64> = (0..=200).map(|i| i as f64 * 0.1).collect();
        let e2 = ModelSpace::euclidean(2).unwrap();
        let b = gaussian_bound_check(&McKeanKernel, &e2, 1.0, &grid).unwrap();
        assert!(b.holds && b.c <= 2.0 && b.margin >= 0.0, "{b:?}");
        for t in [0.5, 1.0, 2.0] {
            let b = gaussian_bound_check(&McKeanKernel, &ModelSpace::half_plane(), t, &grid).unwrap();
            assert!(b.holds && b.c.is_finite() && b.c > 0.0, "{b:?}");
        }
        let b = gaussian_bound_check(&McKeanKernel, &ModelSpace::half_plane(), 1.0, &[]).unwrap();
        assert!(b.holds);
    }

    #[test]
    fn torus_kernel_integrates_to_one() {
        let mass = integrate(
            |a| {
                integrate(|b| torus_heat_kernel(0.05, &[0.1, 0.2], &[a, b]).unwrap(), 0.0, 1.0, QuadOptions::default())
                    .unwrap()
                    .value
            },
            0.0,
            1.0,
            QuadOptions::default(),
        )
        .unwrap()
        .value;
        assert_relative_eq!(mass, 1.0, max_relative = 1e-8);
        assert_relative_eq!(torus_heat_kernel(1e3, &[0.1, 0.2], &[0.7, 0.9]).unwrap(), 1.0, max_relative = 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn kernel_is_symmetric(x1 in -3.0..3.0f64, ly1 in -2.0..2.0f64, x2 in -3.0..3.0f64, ly2 in -2.0..2.0f64,
                               t in 0.1..5.0f64) {
            let h2 = ModelSpace::half_plane();
            let p: Point = [x1, ly1.exp()].into();
            let q: Point = [x2, ly2.exp()].into();
            let a = heat_kernel(&h2, t, &p, &q).unwrap();
            let b = heat_kernel(&h2, t, &q, &p).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.max(1e-300));
        }
    }
}
