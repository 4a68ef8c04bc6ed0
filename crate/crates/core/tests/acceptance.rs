//! Acceptance criteria; one PASS/FAIL line each.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, SQRT_2};
use std::process::ExitCode;
use std::time::Instant;

use rand::Rng;

use horodrift::brownian::{
    gaussian_bound_check, semigroup_check, HeatKernel, McKeanKernel, Path, RngSeed,
};
use horodrift::estimators::{self, EstimateWithCI};
use horodrift::geometry::SpaceKind;
use horodrift::group_walks::{self, GroupSpec, DISCRETE_CAVEAT};
use horodrift::harness::selftest::integrand_values;
use horodrift::harness::{self, inequality_chain, Inequality, SelftestOptions, Verdict};
use horodrift::horofield::{self, minimal_harmonic, Horofunction, ScalarField};
use horodrift::{ModelSpace, Point, Result};

const PATHS: usize = 10_000;
const SEED: u64 = 20_240_601;
const MINUTES_5: f64 = 300.0;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { passed, detail })
}

fn within(e: &EstimateWithCI, target: f64, floor: f64) -> bool {
    (e.value - target).abs() <= (3.0 * e.stderr).max(floor)
}

fn random_point<R: Rng>(space: &ModelSpace, rng: &mut R) -> Point {
    let mut v = Vec::new();
    let mut push = |s: &ModelSpace, rng: &mut R| match s.kind() {
        SpaceKind::HyperbolicHalfPlane => {
            v.push(rng.random_range(-3.0..3.0));
            v.push(rng.random_range(-2.0f64..2.0).exp());
        }
        SpaceKind::Euclidean(n) => v.extend((0..*n).map(|_| rng.random_range(-3.0..3.0))),
        SpaceKind::Product(..) => unreachable!("factors are leaves"),
    };
    match space.factors() {
        Some((a, b)) => {
            push(a, rng);
            push(b, rng);
        }
        None => push(space, rng),
    }
    Point::new(v)
}

struct Ensembles {
    h2xh2: (Vec<Path>, f64),
    h2: (Vec<Path>, f64),
    e2: (Vec<Path>, f64),
}

fn timed_paths(id: &str, t: f64) -> Result<(Vec<Path>, f64)> {
    let start = Instant::now();
    let s = ModelSpace::from_id(id)?;
    let ps = harness::simulate(&s, t, 0.01, PATHS, SEED)?;
    Ok((ps, start.elapsed().as_secs_f64()))
}

fn criterion_1(ens: &Ensembles) -> Result<Outcome> {
    let start = Instant::now();
    let s = ModelSpace::from_id("h2xh2")?;
    let set = harness::invariants_from_paths(&s, &ens.h2xh2.0, SEED)?;
    let ell = estimators::estimate_drift(&ens.h2xh2.0)?.limit;
    let h = estimators::estimate_entropy(&McKeanKernel, &ens.h2xh2.0)?.limit;
    let verdict = inequality_chain(&set)
        .into_iter()
        .find(|v| v.name == Inequality::EllSqLeH)
        .expect("six verdicts");
    let secs = ens.h2xh2.1 + start.elapsed().as_secs_f64();
    let ok = within(&ell, SQRT_2, 0.05)
        && within(&h, 2.0, 0.1)
        && verdict.verdict == Verdict::EqualityWithinTolerance
        && secs <= MINUTES_5;
    outcome(
        ok,
        format!(
            "ℓ̂ = {:.4} ± {:.4}, ĥ = {:.4} ± {:.4}, ℓ² ≤ h: {}, {secs:.1} s",
            ell.value,
            ell.stderr,
            h.value,
            h.stderr,
            verdict.verdict.as_str()
        ),
    )
}

fn criterion_2(ens: &Ensembles) -> Result<Outcome> {
    let start = Instant::now();
    let s = ModelSpace::half_plane();
    let set = harness::invariants_from_paths(&s, &ens.h2.0, SEED)?;
    let unit = |value: f64, stderr: f64, bias: f64| (value - 1.0).abs() <= 3.0 * stderr + bias;
    let values_ok = unit(set.ell.value, set.ell.stderr, set.ell.bias_budget)
        && unit(set.h.value, set.h.stderr, set.h.bias_budget)
        && unit(set.v.value, set.v.stderr, set.v.bias_budget)
        && unit(4.0 * set.lambda.value, 4.0 * set.lambda.stderr, 4.0 * set.lambda.bias_budget);
    let verdicts = inequality_chain(&set);
    let all_eq = verdicts.iter().all(|v| v.verdict == Verdict::EqualityWithinTolerance);
    let secs = ens.h2.1 + start.elapsed().as_secs_f64();
    outcome(
        values_ok && all_eq && verdicts.len() == 6 && secs <= MINUTES_5,
        format!(
            "ℓ̂ = {:.4}, ĥ = {:.4}, v = {:.4}, 4λ̂ = {:.4}, equality verdicts {}/6, {secs:.1} s",
            set.ell.value,
            set.h.value,
            set.v.value,
            4.0 * set.lambda.value,
            verdicts.iter().filter(|v| v.verdict == Verdict::EqualityWithinTolerance).count()
        ),
    )
}

fn criterion_3(ens: &Ensembles) -> Result<Outcome> {
    let ell = estimators::estimate_drift(&ens.e2.0)?.limit;
    let h = estimators::estimate_entropy(&McKeanKernel, &ens.e2.0)?.limit;
    outcome(
        ell.value <= 0.05 && h.value <= 0.05,
        format!("ℓ̂ = {:.4} ± {:.4}, ĥ = {:.4} ± {:.4} at T = 100", ell.value, ell.stderr, h.value, h.stderr),
    )
}

fn criterion_4() -> Result<Outcome> {
    let s = ModelSpace::from_id("h2xh2")?;
    let mut rng = RngSeed::new(SEED, 4).rng();
    let mut worst: f64 = 0.0;
    let mut zero_only_at_diagonal = true;
    for theta in [0.0, PI / 8.0, FRAC_PI_4, 3.0 * PI / 8.0, FRAC_PI_2] {
        let xi = Horofunction::parse(&s, &format!("prod:q:inf,q:inf,theta={theta}"))?;
        let f = ScalarField::exp_horofunction(&xi, SQRT_2);
        let formula = 2.0 - SQRT_2 * (theta.cos() + theta.sin());
        for _ in 0..20 {
            let p = random_point(&s, &mut rng);
            let ratio = horofield::laplacian_fd(&f, &p)? / f.value(&p)?;
            worst = worst.max((ratio - formula).abs());
            let is_zero = ratio.abs() <= 1e-4;
            zero_only_at_diagonal &= is_zero == (theta == FRAC_PI_4);
        }
    }
    outcome(
        worst <= 1e-4 && zero_only_at_diagonal,
        format!("worst |FD ratio − formula| = {worst:.2e} over 5 angles × 20 points; zero only at π/4: {zero_only_at_diagonal}"),
    )
}

fn criterion_5() -> Result<Outcome> {
    let mut rng = RngSeed::new(SEED, 5).rng();
    let mut worst: f64 = 0.0;
    for (id, spec, ell) in [("h2", "q:inf", 1.0), ("h2xh2", "prod:q:inf,q:inf,theta=0.7853981633974483", SQRT_2)] {
        let s = ModelSpace::from_id(id)?;
        let xi = Horofunction::parse(&s, spec)?;
        for _ in 0..100 {
            let (sq, inner) = integrand_values(&s, &xi, &random_point(&s, &mut rng))?;
            worst = worst.max((sq - ell * ell).abs()).max((inner - ell).abs());
        }
    }
    outcome(worst <= 1e-5, format!("worst integrand error {worst:.2e} at 100 points on h2 and h2xh2"))
}

fn criterion_6(ens: &Ensembles) -> Result<Outcome> {
    let extra = harness::simulate(&ModelSpace::from_id("euclidean:1xh2")?, 50.0, 0.01, PATHS, SEED)?;
    let mut ok = true;
    let mut parts = Vec::new();
    for (id, paths) in [("euclidean:2", &ens.e2.0), ("h2", &ens.h2.0), ("h2xh2", &ens.h2xh2.0), ("euclidean:1xh2", &extra)] {
        let s = ModelSpace::from_id(id)?;
        let xi = Horofunction::parse(&s, &harness::run::default_horofunction_spec(&s))?;
        let k = minimal_harmonic(&s, &xi)?;
        let r = estimators::estimate_lm_km(&McKeanKernel, &xi, &k, paths)?;
        let d = estimators::estimate_drift(paths)?;
        let le = |a: &EstimateWithCI, b: &EstimateWithCI| a.value <= b.value + 3.0 * (a.stderr + b.stderr);
        let here = le(&r.lm.raw, &d.raw)
            && le(&r.lm.limit, &d.limit)
            && le(&r.km.raw, &r.h.raw)
            && le(&r.km.limit, &r.h.limit)
            && r.reverse_entropy_nonnegative()
            && r.h_prime.raw.value == r.h.raw.value - r.km.raw.value
            && r.h_prime.limit.value == r.h.limit.value - r.km.limit.value;
        ok &= here;
        parts.push(format!(
            "{id}: ℓ(m) {:.3}/ℓ {:.3}, k(m) {:.3}/h {:.3}, h′ {:.3}",
            r.lm.limit.value, d.limit.value, r.km.limit.value, r.h.limit.value, r.h_prime.limit.value
        ));
    }
    outcome(ok, parts.join("; "))
}

fn criterion_7() -> Result<Outcome> {
    let probes = estimators::probe_grid(1.0, 11);
    let r = estimators::cesaro_report(1e4, PATHS, &probes, 1.0, RngSeed::new(SEED, 7))?;
    outcome(
        r.median_sup_distance <= 0.01 && r.drift.agrees_with(0.0, 0.0),
        format!(
            "median sup-distance {:.5}, drift functional {:.4} ± {:.4}",
            r.median_sup_distance, r.drift.value, r.drift.stderr
        ),
    )
}

fn criterion_8() -> Result<Outcome> {
    let h2 = ModelSpace::half_plane();
    let c = semigroup_check(
        &McKeanKernel,
        &h2,
        1.0,
        1.0,
        &[0.0, 1.0].into(),
        &[0.0, 1f64.exp()].into(),
        100_000,
        RngSeed::new(SEED, 8),
    )?;
    let mut rng = RngSeed::new(SEED, 80).rng();
    let mut asym: f64 = 0.0;
    for id in ["euclidean:2", "h2", "h2xh2"] {
        let s = ModelSpace::from_id(id)?;
        for _ in 0..50 {
            let (p, q) = (random_point(&s, &mut rng), random_point(&s, &mut rng));
            let t = rng.random_range(0.1..5.0);
            let (a, b) = (McKeanKernel.ln_kernel(&s, t, &p, &q)?, McKeanKernel.ln_kernel(&s, t, &q, &p)?);
            asym = asym.max((a - b).abs() / a.abs().max(1.0));
        }
    }
    let grid: Vec<f64> = (0..=200).map(|i| i as f64 * 0.1).collect();
    let mut bound_ok = true;
    let mut cs = Vec::new();
    for id in ["h2", "h2xh2"] {
        let s = ModelSpace::from_id(id)?;
        for t in [0.5, 1.0, 2.0] {
            let b = gaussian_bound_check(&McKeanKernel, &s, t, &grid)?;
            bound_ok &= b.holds;
            cs.push(format!("{:.2}", b.c));
        }
    }
    outcome(
        c.relative_gap() <= 0.02 && asym <= 1e-12 && bound_ok,
        format!(
            "semigroup gap {:.4}, asymmetry {asym:.1e}, Gaussian bound on d ≤ 20 holds: {bound_ok} (C = {})",
            c.relative_gap(),
            cs.join(", ")
        ),
    )
}

fn criterion_9() -> Result<Outcome> {
    let f2 = GroupSpec::from_id("free:2")?;
    let grid: Vec<usize> = (1..=200).collect();
    let stats = group_walks::walk_statistics(&f2, &grid)?;
    let drift100 = stats[99].drift;
    let monotone = stats.windows(2).all(|w| w[1].entropy <= w[0].entropy + 1e-12);
    let limit = 2.0 * stats[199].entropy - stats[99].entropy;
    let target = 3f64.ln() / 2.0;
    let brute = (1..=8).all(|n| {
        group_walks::free_length_counts(2, n) == group_walks::brute_force_length_counts(2, n)
            && group_walks::free_length_counts(3, n) == group_walks::brute_force_length_counts(3, n)
    });
    let records = harness::run(&harness::parse_config("group = free:2\nquantity = group_report")?, None)?.records;
    let caveat = harness::report(&records, None)?.contains(DISCRETE_CAVEAT);
    outcome(
        (drift100 - 0.5).abs() <= 0.01 && monotone && (limit - target).abs() <= 0.02 && brute && caveat,
        format!(
            "drift(100) = {drift100:.5}, H/n non-increasing: {monotone}, limit {limit:.4} vs {target:.4}, enumeration n ≤ 8: {brute}, caveat printed: {caveat}"
        ),
    )
}

fn criterion_10() -> Result<Outcome> {
    let pool = |n: usize| rayon::ThreadPoolBuilder::new().num_threads(n).build().expect("thread pool");
    let start = Instant::now();
    let one = pool(1).install(|| harness::selftest(&SelftestOptions::default()));
    let secs = start.elapsed().as_secs_f64();
    let four = pool(4).install(|| harness::selftest(&SelftestOptions::default()));
    let cfg = harness::parse_config("space = h2xh2\nquantity = check\nT = 5\npaths = 500\nseed = 11")?;
    let m1 = pool(1).install(|| harness::measure(&cfg))?;
    let m4 = pool(4).install(|| harness::measure(&cfg))?;
    let same_measure = m1.len() == m4.len()
        && m1
            .iter()
            .zip(&m4)
            .all(|(a, b)| a.value.to_bits() == b.value.to_bits() && a.stderr.to_bits() == b.stderr.to_bits());
    let identical = one.render() == four.render() && same_measure;
    outcome(
        secs <= 60.0 && one.all_passed() && identical,
        format!(
            "selftest {secs:.1} s, {}/{} passed, byte-identical across 1 and 4 workers: {identical}",
            one.passed_names().len(),
            one.items.len()
        ),
    )
}

fn main() -> ExitCode {
    let start = Instant::now();
    let ensembles = match (|| -> Result<Ensembles> {
        Ok(Ensembles {
            h2xh2: timed_paths("h2xh2", 50.0)?,
            h2: timed_paths("h2", 50.0)?,
            e2: timed_paths("euclidean:2", 100.0)?,
        })
    })() {
        Ok(e) => e,
        Err(e) => {
            println!("FAIL ensembles: {e}");
            return ExitCode::FAILURE;
        }
    };
    let criteria: Vec<(&str, Box<dyn Fn() -> Result<Outcome>>)> = vec![
        ("1 h2xh2 equality case", Box::new(|| criterion_1(&ensembles))),
        ("2 h2 symmetric-space chain", Box::new(|| criterion_2(&ensembles))),
        ("3 flat case", Box::new(|| criterion_3(&ensembles))),
        ("4 eigenvalue sweep", Box::new(criterion_4)),
        ("5 integrand identities", Box::new(criterion_5)),
        ("6 functional inequalities", Box::new(|| criterion_6(&ensembles))),
        ("7 Cesàro demo", Box::new(criterion_7)),
        ("8 heat-kernel analytics", Box::new(criterion_8)),
        ("9 discrete analog", Box::new(criterion_9)),
        ("10 reproducibility", Box::new(criterion_10)),
    ];
    let mut failures = 0;
    for (name, run) in &criteria {
        let o = run().unwrap_or_else(|e| Outcome {
            passed: false,
            detail: format!("error [{}]: {e}", e.code()),
        });
        if !o.passed {
            failures += 1;
        }
        println!("{} criterion {name}: {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
    }
    println!(
        "acceptance: {}/{} criteria passed in {:.1} s",
        criteria.len() - failures,
        criteria.len(),
        start.elapsed().as_secs_f64()
    );
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
