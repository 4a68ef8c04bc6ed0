//! Reduced-size invariant suite covering every module.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::fmt::Write as _;

use rand::Rng;
use serde::Serialize;

use crate::brownian::{
    gaussian_bound_check, h2_radial_cdf, sample_paths, semigroup_check, HeatKernel, McKeanKernel, RngSeed,
    ScaledKernel, Scheme,
};
use crate::error::Result;
use crate::estimators;
use crate::geometry::{self, distance, ModelSpace, Point, SpaceKind};
use crate::group_walks::{self, GroupSpec};
use crate::horofield::{self, minimal_harmonic, Horofunction, ScalarField};

use super::config::parse_config;
use super::store::ResultRecord;
use super::verdict::{judge, Inequality, Side, Verdict};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelftestOptions {
    pub master: u64,
    /// Fault-injection hook: multiplies the heat kernel seen by the semigroup check.
    pub kernel_scale: f64,
}

impl Default for SelftestOptions {
    fn default() -> Self {
        Self {
            master: 0,
            kernel_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelftestItem {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelftestReport {
    pub items: Vec<SelftestItem>,
}

impl SelftestReport {
    pub fn all_passed(&self) -> bool {
        self.items.iter().all(|i| i.passed)
    }

    pub fn passed_names(&self) -> Vec<&str> {
        self.items.iter().filter(|i| i.passed).map(|i| i.name.as_str()).collect()
    }

    /// One `PASS`/`FAIL` line per invariant.
    pub fn render(&self) -> String {
        let mut s = String::new();
        for i in &self.items {
            let _ = writeln!(s, "{} {}: {}", if i.passed { "PASS" } else { "FAIL" }, i.name, i.detail);
        }
        let passed = self.items.iter().filter(|i| i.passed).count();
        let _ = writeln!(s, "{passed}/{} invariants passed", self.items.len());
        s
    }
}

type Check = fn(&SelftestOptions) -> Result<(bool, String)>;

fn random_point<R: Rng>(space: &ModelSpace, rng: &mut R) -> Point {
    fn fill<R: Rng>(space: &ModelSpace, rng: &mut R, out: &mut Vec<f64>) {
        match space.kind() {
            SpaceKind::Euclidean(n) => out.extend((0..*n).map(|_| rng.random_range(-3.0..3.0))),
            SpaceKind::HyperbolicHalfPlane => {
                out.push(rng.random_range(-3.0..3.0));
                out.push(rng.random_range(-2.5f64..2.5).exp());
            }
            SpaceKind::Product(a, b) => {
                fill(a, rng, out);
                fill(b, rng, out);
            }
        }
    }
    let mut v = Vec::with_capacity(space.dim());
    fill(space, rng, &mut v);
    Point::new(v)
}

fn catalog() -> Vec<ModelSpace> {
    ["euclidean:2", "h2", "h2xh2"]
        .iter()
        .map(|id| ModelSpace::from_id(id).expect("catalog id"))
        .collect()
}

fn metric_axioms(o: &SelftestOptions) -> Result<(bool, String)> {
    let mut rng = RngSeed::new(o.master, 1).rng();
    let mut worst: f64 = 0.0;
    for space in catalog() {
        for _ in 0..300 {
            let (p, q, r) = (random_point(&space, &mut rng), random_point(&space, &mut rng), random_point(&space, &mut rng));
            let (pq, qp, qr, pr) = (distance(&space, &p, &q)?, distance(&space, &q, &p)?, distance(&space, &q, &r)?, distance(&space, &p, &r)?);
            worst = worst.max((pq - qp).abs()).max(pr - pq - qr).max(distance(&space, &p, &p)?);
        }
    }
    Ok((worst <= 1e-9, format!("worst axiom defect {worst:.3e}")))
}

fn product_distance(o: &SelftestOptions) -> Result<(bool, String)> {
    let mut rng = RngSeed::new(o.master, 2).rng();
    let s = ModelSpace::from_id("h2xh2")?;
    let h2 = ModelSpace::half_plane();
    let mut worst: f64 = 0.0;
    for _ in 0..300 {
        let (p, q) = (random_point(&s, &mut rng), random_point(&s, &mut rng));
        let d1 = distance(&h2, &p.coords[..2].to_vec().into(), &q.coords[..2].to_vec().into())?;
        let d2 = distance(&h2, &p.coords[2..].to_vec().into(), &q.coords[2..].to_vec().into())?;
        let d = distance(&s, &p, &q)?;
        worst = worst.max((d - d1.hypot(d2)).abs() / d.max(1.0));
    }
    Ok((worst <= 1e-12, format!("worst relative defect {worst:.3e}")))
}

fn geodesic_speed(o: &SelftestOptions) -> Result<(bool, String)> {
    let mut rng = RngSeed::new(o.master, 3).rng();
    let mut worst: f64 = 0.0;
    for space in catalog() {
        for _ in 0..100 {
            let p = random_point(&space, &mut rng);
            let g = geometry::metric(&space, &p)?;
            let raw: Vec<f64> = (0..space.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let n = g.norm_sq(&raw).sqrt();
            let v: Vec<f64> = raw.iter().map(|c| c / n).collect();
            let (s, t) = (rng.random_range(0.0..5.0), rng.random_range(0.0..5.0));
            let a = geometry::geodesic_ray(&space, &p, &v, s)?;
            let b = geometry::geodesic_ray(&space, &p, &v, s + t)?;
            worst = worst
                .max((distance(&space, &p, &b)? - (s + t)).abs())
                .max((distance(&space, &a, &b)? - t).abs());
        }
    }
    Ok((worst <= 1e-8, format!("worst speed defect {worst:.3e}")))
}

fn ball_volume(_: &SelftestOptions) -> Result<(bool, String)> {
    let v = geometry::ball_volume(&ModelSpace::half_plane(), 2.0)?;
    let exact = 2.0 * PI * (2f64.cosh() - 1.0);
    let err = (v.value - exact).abs();
    Ok((err <= 1e-9 * exact, format!("B(2) = {:.9} vs {exact:.9}", v.value)))
}

fn busemann_lipschitz(o: &SelftestOptions) -> Result<(bool, String)> {
    let mut rng = RngSeed::new(o.master, 4).rng();
    let mut worst = f64::NEG_INFINITY;
    for (id, spec) in [("euclidean:2", "dir:0.6,0.8"), ("h2", "q:inf"), ("h2", "q:0.5"), ("h2xh2", "prod:q:inf,q:-1,theta=0.4")] {
        let space = ModelSpace::from_id(id)?;
        let xi = Horofunction::parse(&space, spec)?;
        let fp = Horofunction::finite_point(&space, random_point(&space, &mut rng))?;
        for _ in 0..200 {
            let (z, w) = (random_point(&space, &mut rng), random_point(&space, &mut rng));
            let d = distance(&space, &z, &w)?;
            for f in [&xi, &fp] {
                worst = worst.max((f.eval(&z)? - f.eval(&w)?).abs() - d);
            }
        }
    }
    Ok((worst <= 1e-9, format!("max |ξ(z) − ξ(w)| − d(z, w) = {worst:.3e}")))
}

fn eigenvalue_identity(o: &SelftestOptions) -> Result<(bool, String)> {
    let mut rng = RngSeed::new(o.master, 5).rng();
    let s = ModelSpace::from_id("h2xh2")?;
    let mut worst: f64 = 0.0;
    for theta in [0.0, FRAC_PI_4 / 2.0, FRAC_PI_4, 3.0 * FRAC_PI_4 / 2.0, FRAC_PI_2] {
        let xi = Horofunction::parse(&s, &format!("prod:q:inf,q:inf,theta={theta}"))?;
        let f = ScalarField::exp_horofunction(&xi, 2f64.sqrt());
        let expect = 2.0 - 2f64.sqrt() * (theta.cos() + theta.sin());
        for _ in 0..4 {
            let p = random_point(&s, &mut rng);
            worst = worst.max((horofield::laplacian_fd(&f, &p)? / f.value(&p)? - expect).abs());
        }
    }
    Ok((worst <= 1e-4, format!("worst FD ratio error {worst:.3e}")))
}

/// `‖∇ ln k‖²` and `⟨−∇ξ, ∇ ln k⟩` at `p`, by finite differences.
pub fn integrand_values(space: &ModelSpace, xi: &Horofunction, p: &Point) -> Result<(f64, f64)> {
    let k = minimal_harmonic(space, xi)?;
    let ln_k = ScalarField::new(space, move |q| k.ln_value(q));
    let g = horofield::gradient_fd(&ln_k, p)?;
    let z: Vec<f64> = horofield::gradient_fd(&ScalarField::from_horofunction(xi), p)?
        .into_iter()
        .map(|c| -c)
        .collect();
    Ok((horofield::norm(space, p, &g)?.powi(2), horofield::inner(space, p, &z, &g)?))
}

fn integrand_identities(o: &SelftestOptions) -> Result<(bool, String)> {
    let mut rng = RngSeed::new(o.master, 6).rng();
    let mut worst: f64 = 0.0;
    for (id, spec) in [("h2", "q:inf"), ("h2xh2", "prod:q:inf,q:inf,theta=0.7853981633974483")] {
        let space = ModelSpace::from_id(id)?;
        let xi = Horofunction::parse(&space, spec)?;
        let ell = horofield::space_drift(&space);
        for _ in 0..20 {
            let (sq, inner) = integrand_values(&space, &xi, &random_point(&space, &mut rng))?;
            worst = worst.max((sq - ell * ell).abs()).max((inner - ell).abs());
        }
    }
    Ok((worst <= 1e-5, format!("worst integrand error {worst:.3e}")))
}

fn kernel_symmetry(o: &SelftestOptions) -> Result<(bool, String)> {
    let mut rng = RngSeed::new(o.master, 7).rng();
    let k = ScaledKernel { factor: o.kernel_scale };
    let mut worst: f64 = 0.0;
    for space in catalog() {
        for _ in 0..30 {
            let (p, q) = (random_point(&space, &mut rng), random_point(&space, &mut rng));
            let t = rng.random_range(0.1..5.0);
            let (a, b) = (k.ln_kernel(&space, t, &p, &q)?, k.ln_kernel(&space, t, &q, &p)?);
            worst = worst.max((a - b).abs() / a.abs().max(1.0));
        }
    }
    Ok((worst <= 1e-12, format!("worst relative asymmetry {worst:.3e}")))
}

fn kernel_mass(_: &SelftestOptions) -> Result<(bool, String)> {
    let m = h2_radial_cdf(1.0)?.total_mass();
    Ok(((m - 1.0).abs() <= 1e-6, format!("total mass at t=1: {m:.9}")))
}

fn semigroup(o: &SelftestOptions) -> Result<(bool, String)> {
    let h2 = ModelSpace::half_plane();
    let k = ScaledKernel { factor: o.kernel_scale };
    let c = semigroup_check(&k, &h2, 1.0, 1.0, &[0.0, 1.0].into(), &[0.0, 1f64.exp()].into(), 100_000, RngSeed::new(o.master, 8))?;
    let gap = c.relative_gap();
    Ok((gap <= 0.02, format!("relative gap {gap:.4} (stderr {:.4})", c.lhs_stderr / c.rhs)))
}

fn gaussian_bound(_: &SelftestOptions) -> Result<(bool, String)> {
    let grid: Vec<f64> = (0..=40).map(|i| i as f64 * 0.5).collect();
    let b = gaussian_bound_check(&McKeanKernel, &ModelSpace::half_plane(), 1.0, &grid)?;
    Ok((b.holds && b.margin >= 0.0, format!("C = {:.4}, margin {:.3e} on d ≤ 20", b.c, b.margin)))
}

fn thread_determinism(o: &SelftestOptions) -> Result<(bool, String)> {
    let s = ModelSpace::from_id("h2xh2")?;
    let run = |threads: usize| -> Result<(Vec<Vec<f64>>, f64)> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| crate::Error::Contract(e.to_string()))?;
        pool.install(|| {
            let ps = sample_paths(&s, s.basepoint(), 2.0, Scheme::for_space(&s, 0.01), o.master, 128)?;
            let h = estimators::estimate_entropy(&McKeanKernel, &ps)?;
            Ok((ps.iter().map(|p| p.end().coords.clone()).collect(), h.limit.value))
        })
    };
    let (a, ha) = run(1)?;
    let (b, hb) = run(4)?;
    let same = a == b && ha.to_bits() == hb.to_bits();
    Ok((same, format!("1 vs 4 workers bit-identical: {same}")))
}

fn horospherical_functionals(o: &SelftestOptions) -> Result<(bool, String)> {
    let s = ModelSpace::half_plane();
    let ps = sample_paths(&s, s.basepoint(), 4.0, Scheme::for_space(&s, 0.01), o.master, 2000)?;
    let xi = Horofunction::parse(&s, "q:inf")?;
    let k = minimal_harmonic(&s, &xi)?;
    let r = estimators::estimate_lm_km(&McKeanKernel, &xi, &k, &ps)?;
    let d = estimators::estimate_drift(&ps)?;
    let identity = r.h_prime.raw.value == r.h.raw.value - r.km.raw.value
        && r.h_prime.limit.value == r.h.limit.value - r.km.limit.value;
    let lm_le_l = r.lm.raw.value <= d.raw.value + 3.0 * (r.lm.raw.stderr + d.raw.stderr);
    let ok = identity && lm_le_l && r.reverse_entropy_nonnegative() && r.lm.raw.agrees_with(1.0, 0.0);
    Ok((
        ok,
        format!(
            "ℓ(m) = {:.4} ± {:.4}, ĥ′ = {:.4}, identity exact: {identity}",
            r.lm.raw.value, r.lm.raw.stderr, r.h_prime.raw.value
        ),
    ))
}

fn lambda_bound(_: &SelftestOptions) -> Result<(bool, String)> {
    let l = estimators::estimate_lambda(&ModelSpace::half_plane(), 50.0, &estimators::default_s_grid())?;
    let b = l.bound.value;
    Ok(((0.25..=0.26).contains(&b), format!("λ bound {b:.6} vs exact 0.25")))
}

fn group_enumeration(_: &SelftestOptions) -> Result<(bool, String)> {
    let mut ok = true;
    for k in [2, 3] {
        for n in 1..=8 {
            ok &= group_walks::free_length_counts(k, n) == group_walks::brute_force_length_counts(k, n);
        }
    }
    Ok((ok, format!("radial chain equals enumeration for k ∈ {{2, 3}}, n ≤ 8: {ok}")))
}

fn group_sequences(_: &SelftestOptions) -> Result<(bool, String)> {
    let mut worst_mass: f64 = 0.0;
    let mut monotone = true;
    for (id, n_max) in [("z:1", 64), ("z:2", 64), ("free:2", 200)] {
        let grid: Vec<usize> = (1..=n_max).collect();
        let stats = group_walks::walk_statistics(&GroupSpec::from_id(id)?, &grid)?;
        worst_mass = stats.iter().fold(worst_mass, |m, s| m.max(s.mass_error));
        monotone &= stats.windows(2).all(|w| w[1].entropy <= w[0].entropy + 1e-12);
    }
    Ok((worst_mass <= 1e-12 && monotone, format!("mass error {worst_mass:.1e}, H/n non-increasing: {monotone}")))
}

fn verdict_table(_: &SelftestOptions) -> Result<(bool, String)> {
    let e = |v| Side::estimated(v, 0.1, 0.05);
    let cases = [(1.71, Verdict::Violated), (1.69, Verdict::EqualityWithinTolerance), (0.29, Verdict::Consistent)];
    let ok = cases
        .iter()
        .all(|(l, want)| judge(Inequality::EllLeV, e(*l), e(1.0)).verdict == *want);
    Ok((ok, format!("synthetic truth table: {ok}")))
}

fn store_round_trip(_: &SelftestOptions) -> Result<(bool, String)> {
    let r = ResultRecord {
        config: parse_config("space = h2\nquantity = drift")?.echo(),
        quantity: "drift".into(),
        value: 0.1 + 0.2,
        stderr: 1e-300,
        n: 7,
        method: "drift".into(),
        wall_ms: 1,
        ts: 2,
        version: super::VERSION.into(),
    };
    let ok = ResultRecord::from_line(&r.to_line()?)? == r;
    Ok((ok, format!("record round trip: {ok}")))
}

const CHECKS: [(&str, Check); 18] = [
    ("geometry.metric_axioms", metric_axioms),
    ("geometry.product_distance", product_distance),
    ("geometry.geodesic_speed", geodesic_speed),
    ("geometry.ball_volume", ball_volume),
    ("horofield.busemann_lipschitz", busemann_lipschitz),
    ("horofield.eigenvalue_identity", eigenvalue_identity),
    ("horofield.integrand_identities", integrand_identities),
    ("brownian.kernel_symmetry", kernel_symmetry),
    ("brownian.kernel_mass", kernel_mass),
    ("brownian.semigroup", semigroup),
    ("brownian.gaussian_bound", gaussian_bound),
    ("brownian.thread_determinism", thread_determinism),
    ("estimators.horospherical_functionals", horospherical_functionals),
    ("estimators.lambda_bound", lambda_bound),
    ("group_walks.enumeration", group_enumeration),
    ("group_walks.sequences", group_sequences),
    ("harness.verdict_table", verdict_table),
    ("harness.store_round_trip", store_round_trip),
];

/// Run every check; errors count as failures.
pub fn selftest(opts: &SelftestOptions) -> SelftestReport {
    let items = CHECKS
        .iter()
        .map(|(name, check)| {
            let (passed, detail) = match check(opts) {
                Ok(r) => r,
                Err(e) => (false, format!("error [{}]: {e}", e.code())),
            };
            SelftestItem {
                name: name.to_string(),
                passed,
                detail,
            }
        })
        .collect();
    SelftestReport { items }
}
