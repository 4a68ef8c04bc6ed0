//! Monte Carlo and quadrature estimators for drift, entropy, volume growth,
//! spectral bottom and the harmonic-measure functionals.
//!
//! Trajectory estimators report two numbers. `raw` is the horizon-`T`
//! statistic itself. `limit` removes the leading `T^{−a}` term with the paired
//! per-path combination `(2^a·S(T) − S(T/2))/(2^a − 1)`, where `S(t)` is the
//! statistic divided by `t`. The order is `a = 1` except for the drift on
//! spaces without a hyperbolic factor, where `S(T) ~ c/√T` and `a = 1/2`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::brownian::{self, HeatKernel, Path, RngSeed, Scheme};
use crate::error::{Error, Result};
use crate::geometry::{self, ModelSpace, Point, SpaceKind};
use crate::horofield::{Horofunction, ScalarField};
use crate::quadrature::{integrate, QuadOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateWithCI {
    pub value: f64,
    pub stderr: f64,
    pub n: usize,
    pub horizon: f64,
    pub method: String,
}

impl EstimateWithCI {
    pub fn from_samples(samples: &[f64], horizon: f64, method: impl Into<String>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::Contract(format!(
                "an estimate needs at least 2 samples, got {}",
                samples.len()
            )));
        }
        let (value, stderr) = mean_stderr(samples);
        Ok(Self {
            value,
            stderr,
            n: samples.len(),
            horizon,
            method: method.into(),
        })
    }

    /// `|value − target| ≤ max(3·stderr, bias)`.
    pub fn agrees_with(&self, target: f64, bias: f64) -> bool {
        (self.value - target).abs() <= (3.0 * self.stderr).max(bias)
    }
}

pub(crate) fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryEstimate {
    pub raw: EstimateWithCI,
    pub limit: EstimateWithCI,
    /// The statistic at earlier checkpoints, in increasing time.
    pub sequence: Vec<EstimateWithCI>,
}

/// Common space and horizon of an ensemble.
fn ensemble(paths: &[Path]) -> Result<(&ModelSpace, f64)> {
    let first = paths
        .first()
        .ok_or_else(|| Error::Contract("empty path ensemble".into()))?;
    if paths.len() < 2 {
        return Err(Error::Contract("an estimate needs at least 2 paths".into()));
    }
    for p in paths {
        if p.horizon != first.horizon {
            return Err(Error::MismatchedHorizon(first.horizon, p.horizon));
        }
        if p.space != first.space {
            return Err(Error::Contract(format!(
                "paths on {} and {} mixed in one ensemble",
                first.space.id(),
                p.space.id()
            )));
        }
    }
    Ok((&first.space, first.horizon))
}

/// Checkpoint times used by every trajectory statistic (t ≥ T/16).
pub fn statistic_times(horizon: f64) -> Vec<f64> {
    (0..=4).rev().map(|k| horizon / 2f64.powi(k)).collect()
}

fn point_at(path: &Path, t: f64) -> &Point {
    path.at(t).expect("statistic times lie on the checkpoint grid")
}

/// `columns[j][i]`: statistic of path `i` at `times[j]`, already divided by `t`.
fn summarize(columns: &[Vec<f64>], times: &[f64], method: &str) -> Result<TrajectoryEstimate> {
    summarize_order(columns, times, method, 1.0)
}

fn summarize_order(columns: &[Vec<f64>], times: &[f64], method: &str, order: f64) -> Result<TrajectoryEstimate> {
    let k = times.len();
    let horizon = times[k - 1];
    let sequence = columns
        .iter()
        .zip(times)
        .map(|(c, &t)| EstimateWithCI::from_samples(c, t, method))
        .collect::<Result<Vec<_>>>()?;
    let w = 2f64.powf(order);
    let paired: Vec<f64> = columns[k - 1]
        .iter()
        .zip(&columns[k - 2])
        .map(|(a, b)| (w * a - b) / (w - 1.0))
        .collect();
    let tag = if order == 1.0 {
        format!("{method}+richardson")
    } else {
        format!("{method}+richardson({order})")
    };
    Ok(TrajectoryEstimate {
        raw: sequence[k - 1].clone(),
        limit: EstimateWithCI::from_samples(&paired, horizon, tag)?,
        sequence,
    })
}

fn columns<F>(paths: &[Path], times: &[f64], stat: F) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&Path, f64) -> Result<f64> + Sync,
{
    let rows: Vec<Vec<f64>> = paths
        .par_iter()
        .map(|p| times.iter().map(|&t| stat(p, t)).collect::<Result<Vec<f64>>>())
        .collect::<Result<_>>()?;
    Ok((0..times.len()).map(|j| rows.iter().map(|r| r[j]).collect()).collect())
}

fn drift_columns(paths: &[Path], times: &[f64]) -> Result<Vec<Vec<f64>>> {
    let (space, _) = ensemble(paths)?;
    columns(paths, times, |p, t| {
        Ok(geometry::raw_distance(space, &p.start.coords, &point_at(p, t).coords) / t)
    })
}

fn entropy_columns(kernel: &dyn HeatKernel, paths: &[Path], times: &[f64]) -> Result<Vec<Vec<f64>>> {
    let (space, _) = ensemble(paths)?;
    columns(paths, times, |p, t| Ok(-kernel.ln_kernel(space, t, &p.start, point_at(p, t))? / t))
}

/// Order of the leading finite-horizon term of `E d(X₀, X_T)/T`.
pub fn drift_order(space: &ModelSpace) -> f64 {
    if space.has_hyperbolic_factor() {
        1.0
    } else {
        0.5
    }
}

/// Linear drift: mean of `d(X₀, X_T)/T`.
pub fn estimate_drift(paths: &[Path]) -> Result<TrajectoryEstimate> {
    let (space, horizon) = ensemble(paths)?;
    let times = statistic_times(horizon);
    summarize_order(&drift_columns(paths, &times)?, &times, "drift", drift_order(space))
}

/// Stochastic entropy: mean of `−ln p(T, X₀, X_T)/T`.
pub fn estimate_entropy(kernel: &dyn HeatKernel, paths: &[Path]) -> Result<TrajectoryEstimate> {
    let (_, horizon) = ensemble(paths)?;
    let times = statistic_times(horizon);
    summarize(&entropy_columns(kernel, paths, &times)?, &times, "entropy")
}

/// `ξ(X_t) − ξ(X_s)` between two checkpoints.
pub fn horospherical_displacement_between(path: &Path, xi: &Horofunction, s: f64, t: f64) -> Result<f64> {
    let at = |u: f64| {
        path.at(u)
            .ok_or_else(|| Error::Contract(format!("{u} is not a checkpoint time")))
    };
    Ok(xi.eval(at(t)?)? - xi.eval(at(s)?)?)
}

pub fn horospherical_displacement(path: &Path, xi: &Horofunction) -> Result<f64> {
    horospherical_displacement_between(path, xi, 0.0, path.horizon)
}

/// `ln k(X_s) − ln k(X_t)` between two checkpoints.
pub fn transverse_kernel_between(path: &Path, k: &ScalarField, s: f64, t: f64) -> Result<f64> {
    let at = |u: f64| {
        path.at(u)
            .ok_or_else(|| Error::Contract(format!("{u} is not a checkpoint time")))
    };
    Ok(k.ln_value(at(s)?)? - k.ln_value(at(t)?)?)
}

pub fn transverse_kernel(path: &Path, k: &ScalarField) -> Result<f64> {
    transverse_kernel_between(path, k, 0.0, path.horizon)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmKm {
    pub lm: TrajectoryEstimate,
    pub km: TrajectoryEstimate,
    pub h: TrajectoryEstimate,
    /// Reverse entropy; its values are `h − k(m)` of the estimates above.
    pub h_prime: TrajectoryEstimate,
}

impl LmKm {
    /// `ĥ′ ≥ −3·stderr` for both the raw and the extrapolated estimate.
    pub fn reverse_entropy_nonnegative(&self) -> bool {
        [&self.h_prime.raw, &self.h_prime.limit]
            .iter()
            .all(|e| e.value >= -3.0 * e.stderr)
    }
}

fn difference(h: &EstimateWithCI, k: &EstimateWithCI, h_col: &[f64], k_col: &[f64]) -> Result<EstimateWithCI> {
    let diff: Vec<f64> = h_col.iter().zip(k_col).map(|(a, b)| a - b).collect();
    let mut est = EstimateWithCI::from_samples(&diff, h.horizon, "reverse_entropy")?;
    est.value = h.value - k.value;
    Ok(est)
}

/// `ℓ(m)`, `k(m)` and `h′(m)` from one ensemble; `h′` shares samples with `h`
/// and `k(m)`.
pub fn estimate_lm_km(kernel: &dyn HeatKernel, xi: &Horofunction, k: &ScalarField, paths: &[Path]) -> Result<LmKm> {
    let (space, horizon) = ensemble(paths)?;
    if xi.space() != space || k.space() != space {
        return Err(Error::Contract("horofunction, kernel field and paths must share a space".into()));
    }
    let times = statistic_times(horizon);
    let l_cols = columns(paths, &times, |p, t| Ok(horospherical_displacement_between(p, xi, 0.0, t)? / t))?;
    let k_cols = columns(paths, &times, |p, t| Ok(transverse_kernel_between(p, k, 0.0, t)? / t))?;
    let h_cols = entropy_columns(kernel, paths, &times)?;
    let lm = summarize(&l_cols, &times, "horospherical_displacement")?;
    let km = summarize(&k_cols, &times, "harmonic_kernel")?;
    let h = summarize(&h_cols, &times, "entropy")?;

    let last = times.len() - 1;
    let paired = |cols: &[Vec<f64>]| -> Vec<f64> {
        cols[last].iter().zip(&cols[last - 1]).map(|(a, b)| 2.0 * a - b).collect()
    };
    let sequence = h
        .sequence
        .iter()
        .zip(&km.sequence)
        .enumerate()
        .map(|(j, (he, ke))| difference(he, ke, &h_cols[j], &k_cols[j]))
        .collect::<Result<Vec<_>>>()?;
    let mut limit = difference(&h.limit, &km.limit, &paired(&h_cols), &paired(&k_cols))?;
    limit.method = "reverse_entropy+richardson".into();
    let h_prime = TrajectoryEstimate {
        raw: sequence[last].clone(),
        limit,
        sequence,
    };
    Ok(LmKm { lm, km, h, h_prime })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelDrift {
    /// `E[d(x, X_T)]/T` for each horizon of the grid.
    pub sequence: Vec<EstimateWithCI>,
    pub last: EstimateWithCI,
}

/// Drift through the kernel integral `∫ d(x, z)·p(T, x, z) dz / T`, sampling
/// `z` by the simulator independently for each horizon.
pub fn estimate_drift_kernel(
    space: &ModelSpace,
    horizons: &[f64],
    samples: usize,
    dt: f64,
    master: u64,
) -> Result<KernelDrift> {
    if horizons.is_empty() || horizons.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Contract("horizon grid must be non-empty and increasing".into()));
    }
    let x0 = space.basepoint();
    let scheme = Scheme::for_space(space, dt);
    let sequence = horizons
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let seed = master.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(j as u64 + 1);
            let paths = brownian::sample_paths(space, x0, t, scheme, seed, samples)?;
            let d: Vec<f64> = paths
                .iter()
                .map(|p| geometry::raw_distance(space, &x0.coords, &p.end().coords) / t)
                .collect();
            EstimateWithCI::from_samples(&d, t, "drift_kernel")
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(KernelDrift {
        last: sequence.last().cloned().expect("non-empty grid"),
        sequence,
    })
}

/// Area of the geodesic sphere of radius `r` about the basepoint.
pub fn sphere_area(space: &ModelSpace, r: f64) -> Result<f64> {
    match space.factors() {
        None => Ok(geometry::leaf_sphere_area(space, r)),
        Some((a, b)) => {
            if r == 0.0 {
                return Ok(0.0);
            }
            let res = integrate(
                |phi| geometry::leaf_sphere_area(a, r * phi.cos()) * geometry::leaf_sphere_area(b, r * phi.sin()) * r,
                0.0,
                PI / 2.0,
                QuadOptions {
                    rel_tol: 1e-10,
                    ..Default::default()
                },
            )?;
            Ok(res.value)
        }
    }
}

/// Least-squares slope of `ln vol B(R)` over the upper half of `radii`.
pub fn volume_growth_slope(space: &ModelSpace, radii: &[f64], master: u64) -> Result<EstimateWithCI> {
    if radii.windows(2).any(|w| w[0] >= w[1]) || radii.last().copied().unwrap_or(0.0) < 10.0 {
        return Err(Error::Contract("radius grid must be increasing with maximum >= 10".into()));
    }
    let top = &radii[radii.len() / 2..];
    if top.len() < 2 {
        return Err(Error::Contract("radius grid too short for a slope".into()));
    }
    let logs = top
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let v = geometry::ball_volume_mc(space, r, geometry::PRODUCT_VOLUME_SAMPLES, RngSeed::new(master, i as u64))?;
            if !(v.value > 0.0) {
                return Err(Error::Numerical {
                    message: format!("ball volume at R = {r} is not positive"),
                    intervals: 0,
                    evals: 0,
                    estimate: v.value,
                    error: v.stderr,
                });
            }
            Ok((v.value.ln(), v.stderr / v.value))
        })
        .collect::<Result<Vec<_>>>()?;
    let mean_r = top.iter().sum::<f64>() / top.len() as f64;
    let sxx: f64 = top.iter().map(|r| (r - mean_r).powi(2)).sum();
    let weights: Vec<f64> = top.iter().map(|r| (r - mean_r) / sxx).collect();
    let slope = weights.iter().zip(&logs).map(|(w, (l, _))| w * l).sum();
    let var: f64 = weights.iter().zip(&logs).map(|(w, (_, s))| (w * s).powi(2)).sum();
    Ok(EstimateWithCI {
        value: slope,
        stderr: var.sqrt(),
        n: top.len(),
        horizon: *radii.last().unwrap(),
        method: "volume_slope".into(),
    })
}

/// Closed-form volume entropy where the catalog knows it.
pub fn exact_volume_entropy(space: &ModelSpace) -> Option<f64> {
    match space.kind() {
        SpaceKind::Euclidean(_) => Some(0.0),
        SpaceKind::HyperbolicHalfPlane => Some(1.0),
        SpaceKind::Product(..) => None,
    }
}

/// Volume entropy: exact for `ℝⁿ` and `ℍ²`, fitted slope otherwise.
pub fn estimate_volume_entropy(space: &ModelSpace, radii: &[f64], master: u64) -> Result<InvariantValue> {
    match exact_volume_entropy(space) {
        Some(v) => Ok(InvariantValue::exact(v, "volume_entropy:exact")),
        None => Ok(InvariantValue::estimated(
            &volume_growth_slope(space, radii, master)?,
            bias_budget(Invariant::V, space),
        )),
    }
}

pub fn default_radius_grid() -> Vec<f64> {
    (1..=20).map(f64::from).collect()
}

/// Closed-form bottom of the spectrum: 0 on `ℝⁿ`, 1/4 on `ℍ²`, additive on products.
pub fn exact_lambda(space: &ModelSpace) -> f64 {
    match space.kind() {
        SpaceKind::Euclidean(_) => 0.0,
        SpaceKind::HyperbolicHalfPlane => 0.25,
        SpaceKind::Product(a, b) => exact_lambda(a) + exact_lambda(b),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaEstimate {
    /// Minimal Rayleigh quotient found; an upper bound for λ.
    pub bound: EstimateWithCI,
    pub s_star: f64,
    pub exact: f64,
}

/// Radial Rayleigh quotients `∫ f′² A / ∫ f² A` for test functions
/// `f(r) = e^{−sr}·c(r)`, with `c` a cosine taper from 1 at `R/2` to 0 at `R`.
struct RadialQuotient {
    radii: Vec<f64>,
    area: Vec<f64>,
    truncation: f64,
}

impl RadialQuotient {
    const INTERVALS: usize = 4000;

    fn new(space: &ModelSpace, truncation: f64) -> Result<Self> {
        let step = truncation / Self::INTERVALS as f64;
        let radii: Vec<f64> = (0..=Self::INTERVALS).map(|i| i as f64 * step).collect();
        let area = radii.iter().map(|&r| sphere_area(space, r)).collect::<Result<_>>()?;
        Ok(Self {
            radii,
            area,
            truncation,
        })
    }

    fn taper(&self, r: f64) -> (f64, f64) {
        let half = 0.5 * self.truncation;
        if r <= half {
            (1.0, 0.0)
        } else {
            let a = PI * (r - half) / half;
            (0.5 * (1.0 + a.cos()), -0.5 * a.sin() * PI / half)
        }
    }

    fn eval(&self, s: f64) -> f64 {
        // Composite Simpson; R/2 falls on an even node.
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, (&r, &a)) in self.radii.iter().zip(&self.area).enumerate() {
            let w = if i == 0 || i == Self::INTERVALS {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let e = (-s * r).exp();
            let (c, dc) = self.taper(r);
            let f = e * c;
            let df = -s * f + e * dc;
            num += w * df * df * a;
            den += w * f * f * a;
        }
        num / den
    }
}

pub fn default_s_grid() -> Vec<f64> {
    (0..=40).map(|i| i as f64 * 0.05).collect()
}

/// Upper bound for λ by minimizing the radial Rayleigh quotient over `s`.
pub fn estimate_lambda(space: &ModelSpace, truncation: f64, s_grid: &[f64]) -> Result<LambdaEstimate> {
    if truncation < 20.0 {
        return Err(Error::Contract(format!("truncation radius must be >= 20, got {truncation}")));
    }
    if s_grid.len() < 2 || s_grid.windows(2).any(|w| w[0] >= w[1]) || s_grid[0] < 0.0 {
        return Err(Error::Contract("s grid must be increasing, nonnegative, >= 2 points".into()));
    }
    let q = RadialQuotient::new(space, truncation)?;
    let values: Vec<f64> = s_grid.iter().map(|&s| q.eval(s)).collect();
    let best = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .expect("non-empty grid");
    let mut lo = s_grid[best.saturating_sub(1)];
    let mut hi = s_grid[(best + 1).min(s_grid.len() - 1)];
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut evals = s_grid.len();
    let mut c = hi - g * (hi - lo);
    let mut d = lo + g * (hi - lo);
    let (mut fc, mut fd) = (q.eval(c), q.eval(d));
    while hi - lo > 1e-4 {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - g * (hi - lo);
            fc = q.eval(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + g * (hi - lo);
            fd = q.eval(d);
        }
        evals += 1;
    }
    let (s_star, value) = [(s_grid[best], values[best]), (c, fc), (d, fd)]
        .into_iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    Ok(LambdaEstimate {
        bound: EstimateWithCI {
            value,
            stderr: 0.0,
            n: evals,
            horizon: truncation,
            method: "rayleigh_upper_bound".into(),
        },
        s_star,
        exact: exact_lambda(space),
    })
}

/// Probe points `{−w, …, w}²` with `per_side` points per axis.
pub fn probe_grid(half_width: f64, per_side: usize) -> Vec<Point> {
    let coord = |i: usize| -half_width + 2.0 * half_width * i as f64 / (per_side - 1) as f64;
    (0..per_side)
        .flat_map(|i| (0..per_side).map(move |j| Point::from([coord(i), coord(j)])))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicSample {
    /// Starting point in the fundamental square `[0, 1)²`.
    pub x: Point,
    /// Point of the cover reached at time `t`.
    pub y: Point,
    pub t: f64,
    /// `z ↦ |y − z| − |y − x₀|` restricted to the probes.
    pub xi: Horofunction,
}

fn sample_pair<R: Rng>(plane: &ModelSpace, t: f64, probes: &[Point], rng: &mut R) -> Result<HarmonicSample> {
    let x = Point::from([rng.random::<f64>(), rng.random::<f64>()]);
    let sd = (2.0 * t).sqrt();
    let y = Point::from([
        x.coords[0] + sd * rng.sample::<f64, _>(StandardNormal),
        x.coords[1] + sd * rng.sample::<f64, _>(StandardNormal),
    ]);
    let norm_y = y.coords[0].hypot(y.coords[1]);
    let values = probes
        .iter()
        .map(|z| (y.coords[0] - z.coords[0]).hypot(y.coords[1] - z.coords[1]) - norm_y)
        .collect();
    Ok(HarmonicSample {
        xi: Horofunction::grid_sampled(plane, probes.to_vec(), values)?,
        x,
        y,
        t,
    })
}

/// Draws from `ν_t` on the flat torus `ℝ²/ℤ²`: `x` uniform on the unit
/// square, `y` from the heat kernel of the cover at time `t`.
pub fn harmonic_measure_sample(t: f64, n: usize, probes: &[Point], seed: RngSeed) -> Result<Vec<HarmonicSample>> {
    if !(t > 0.0) {
        return Err(Error::Contract(format!("t must be positive, got {t}")));
    }
    let plane = ModelSpace::euclidean(2)?;
    let mut rng = seed.rng();
    (0..n).map(|_| sample_pair(&plane, t, probes, &mut rng)).collect()
}

/// Cesàro average `(1/T)∫₀ᵀ ν_t dt`: each draw uses its own `t ~ U(0, T]`.
pub fn cesaro_sample(horizon: f64, n: usize, probes: &[Point], seed: RngSeed) -> Result<Vec<HarmonicSample>> {
    if !(horizon > 0.0) {
        return Err(Error::Contract(format!("horizon must be positive, got {horizon}")));
    }
    let plane = ModelSpace::euclidean(2)?;
    let mut rng = seed.rng();
    (0..n)
        .map(|_| {
            let t = horizon * (1.0 - rng.random::<f64>());
            sample_pair(&plane, t, probes, &mut rng)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub direction: [f64; 2],
    /// `sup` over probes of `|ξ(z) + ⟨z, v⟩|`.
    pub sup_distance: f64,
}

/// Best linear horofunction `−⟨z, v⟩` for a probe-sampled horofunction on `ℝ²`.
pub fn linear_fit(xi: &Horofunction) -> Result<LinearFit> {
    let crate::horofield::HoroForm::GridSampled { probes, values } = xi.form() else {
        return Err(Error::Contract("linear fit needs a grid-sampled horofunction".into()));
    };
    let (mut a, mut b, mut c, mut r0, mut r1) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (z, v) in probes.iter().zip(values) {
        let (z0, z1) = (z.coords[0], z.coords[1]);
        a += z0 * z0;
        b += z0 * z1;
        c += z1 * z1;
        r0 -= v * z0;
        r1 -= v * z1;
    }
    let det = a * c - b * b;
    let w = if det.abs() > 0.0 {
        [(c * r0 - b * r1) / det, (a * r1 - b * r0) / det]
    } else {
        [1.0, 0.0]
    };
    let n = w[0].hypot(w[1]);
    let direction = if n > 0.0 { [w[0] / n, w[1] / n] } else { [1.0, 0.0] };
    let sup_distance = probes
        .iter()
        .zip(values)
        .map(|(z, v)| (v + z.coords[0] * direction[0] + z.coords[1] * direction[1]).abs())
        .fold(0.0, f64::max);
    Ok(LinearFit { direction, sup_distance })
}

/// `E[ξ_y(X_τ) − ξ_y(X₀)]/τ` under the sampled pairs, with `X₀ = x` and an
/// independent Brownian increment over time `τ`.
pub fn drift_functional(samples: &[HarmonicSample], tau: f64, seed: RngSeed) -> Result<EstimateWithCI> {
    if !(tau > 0.0) {
        return Err(Error::Contract(format!("tau must be positive, got {tau}")));
    }
    let plane = ModelSpace::euclidean(2)?;
    let mut rng = seed.rng();
    let sd = (2.0 * tau).sqrt();
    let values = samples
        .iter()
        .map(|s| {
            let xi = Horofunction::finite_point(&plane, s.y.clone())?;
            let end = Point::from([
                s.x.coords[0] + sd * rng.sample::<f64, _>(StandardNormal),
                s.x.coords[1] + sd * rng.sample::<f64, _>(StandardNormal),
            ]);
            Ok((xi.eval(&end)? - xi.eval(&s.x)?) / tau)
        })
        .collect::<Result<Vec<f64>>>()?;
    EstimateWithCI::from_samples(&values, tau, "cesaro_drift")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CesaroReport {
    pub t: f64,
    pub median_sup_distance: f64,
    pub drift: EstimateWithCI,
}

pub fn cesaro_report(t: f64, n: usize, probes: &[Point], tau: f64, seed: RngSeed) -> Result<CesaroReport> {
    let samples = harmonic_measure_sample(t, n, probes, seed)?;
    let mut sups = samples
        .iter()
        .map(|s| linear_fit(&s.xi).map(|f| f.sup_distance))
        .collect::<Result<Vec<_>>>()?;
    sups.sort_by(f64::total_cmp);
    let m = sups.len();
    let median = if m == 0 {
        f64::NAN
    } else if m % 2 == 1 {
        sups[m / 2]
    } else {
        0.5 * (sups[m / 2 - 1] + sups[m / 2])
    };
    Ok(CesaroReport {
        t,
        median_sup_distance: median,
        drift: drift_functional(&samples, tau, seed.with_stream(seed.stream.wrapping_add(1)))?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Invariant {
    Ell,
    H,
    V,
    Lambda,
}

/// Finite-horizon bias allowance declared for each estimated invariant.
pub fn bias_budget(q: Invariant, space: &ModelSpace) -> f64 {
    match q {
        Invariant::Ell => 0.05,
        Invariant::H if space.is_product() => 0.1,
        Invariant::H => 0.05,
        Invariant::V => 0.15,
        // Excess of the truncated Rayleigh bound at R = 50.
        Invariant::Lambda => 0.02,
    }
}

/// An invariant as consumed by the inequality checker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantValue {
    pub value: f64,
    pub stderr: f64,
    pub bias_budget: f64,
    pub exact: bool,
    pub n: usize,
    pub method: String,
}

impl InvariantValue {
    pub fn exact(value: f64, method: impl Into<String>) -> Self {
        Self {
            value,
            stderr: 0.0,
            bias_budget: 0.0,
            exact: true,
            n: 0,
            method: method.into(),
        }
    }

    pub fn estimated(e: &EstimateWithCI, bias_budget: f64) -> Self {
        Self {
            value: e.value,
            stderr: e.stderr,
            bias_budget,
            exact: false,
            n: e.n,
            method: e.method.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantSet {
    pub space: String,
    pub ell: InvariantValue,
    pub h: InvariantValue,
    pub v: InvariantValue,
    pub lambda: InvariantValue,
}

impl InvariantSet {
    /// Every value is nonnegative up to three standard errors plus its budget.
    pub fn nonnegative(&self) -> bool {
        [&self.ell, &self.h, &self.v, &self.lambda]
            .iter()
            .all(|q| q.value >= -(3.0 * q.stderr + q.bias_budget))
    }
}
