use std::f64::consts::FRAC_PI_4;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use crate::brownian::{sample_paths, McKeanKernel, Path, RngSeed, Scheme};
use crate::error::{Error, Result};
use crate::estimators::{
    self, bias_budget, default_radius_grid, default_s_grid, Invariant, InvariantSet, InvariantValue,
};
use crate::geometry::{ModelSpace, SpaceKind};
use crate::group_walks;
use crate::horofield::{minimal_harmonic, Horofunction};

use super::config::{ExperimentConfig, Quantity, Target};
use super::store::{ResultRecord, Store};
use super::verdict::inequality_chain;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Truncation radius of the spectral bound.
pub const LAMBDA_TRUNCATION: f64 = 50.0;

/// Probe grid and increment time of the Cesàro diagnostics.
pub const CESARO_HALF_WIDTH: f64 = 1.0;
pub const CESARO_PROBES_PER_SIDE: usize = 11;
pub const CESARO_TAU: f64 = 1.0;

/// A record body before timing and config are attached.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub quantity: String,
    pub value: f64,
    pub stderr: f64,
    pub n: usize,
    pub method: String,
}

impl Measurement {
    fn new(quantity: impl Into<String>, value: f64, stderr: f64, n: usize, method: impl Into<String>) -> Self {
        Self {
            quantity: quantity.into(),
            value,
            stderr,
            n,
            method: method.into(),
        }
    }

    fn invariant(quantity: &str, v: &InvariantValue) -> Self {
        Self::new(quantity, v.value, v.stderr, v.n, v.method.clone())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub records: Vec<ResultRecord>,
    pub cached: bool,
}

/// Horofunction used when a config gives none: `b_∞` on `ℍ²`, the first
/// coordinate direction on `ℝⁿ`, and the diagonal `θ = π/4` on products.
pub fn default_horofunction_spec(space: &ModelSpace) -> String {
    match space.kind() {
        SpaceKind::Euclidean(n) => {
            let mut v = vec!["0".to_string(); *n];
            v[0] = "1".into();
            format!("dir:{}", v.join(","))
        }
        SpaceKind::HyperbolicHalfPlane => "q:inf".into(),
        SpaceKind::Product(a, b) => format!(
            "prod:{},{},theta={}",
            default_horofunction_spec(a),
            default_horofunction_spec(b),
            FRAC_PI_4
        ),
    }
}

pub fn simulate(space: &ModelSpace, t: f64, dt: f64, paths: usize, seed: u64) -> Result<Vec<Path>> {
    sample_paths(space, space.basepoint(), t, Scheme::for_space(space, dt), seed, paths)
}

/// `ℓ`, `h` from an ensemble; `v` and `λ` from their own estimators.
pub fn invariants_from_paths(space: &ModelSpace, paths: &[Path], seed: u64) -> Result<InvariantSet> {
    let drift = estimators::estimate_drift(paths)?;
    let entropy = estimators::estimate_entropy(&McKeanKernel, paths)?;
    let lambda = estimators::estimate_lambda(space, LAMBDA_TRUNCATION, &default_s_grid())?;
    Ok(InvariantSet {
        space: space.id(),
        ell: InvariantValue::estimated(&drift.limit, bias_budget(Invariant::Ell, space)),
        h: InvariantValue::estimated(&entropy.limit, bias_budget(Invariant::H, space)),
        v: estimators::estimate_volume_entropy(space, &default_radius_grid(), seed)?,
        lambda: InvariantValue::estimated(&lambda.bound, bias_budget(Invariant::Lambda, space)),
    })
}

/// Run the estimator behind `config` without touching a store.
pub fn measure(config: &ExperimentConfig) -> Result<Vec<Measurement>> {
    let (t, dt, n, seed) = (config.t, config.dt, config.paths, config.seed);
    if let Target::Group(g) = &config.target {
        if config.quantity != Quantity::GroupReport {
            return Err(Error::Contract(format!("{} needs a space, got group {}", config.quantity, g.id())));
        }
        let row = group_walks::drift_entropy_report(&[*g])?.remove(0);
        let method = format!("exact:n={}", row.n);
        return Ok(vec![
            Measurement::new("group_drift", row.drift, 0.0, row.n, &method),
            Measurement::new("group_entropy_upper", row.entropy_upper, 0.0, row.n, &method),
            Measurement::new("group_drift_extrapolated", row.drift_extrapolated, 0.0, row.n, "richardson"),
            Measurement::new("group_entropy_extrapolated", row.entropy_extrapolated, 0.0, row.n, "richardson"),
        ]);
    }
    let space = config.space()?;
    let lim = |q: &str, e: &estimators::EstimateWithCI| Measurement::new(q, e.value, e.stderr, e.n, e.method.clone());
    match config.quantity {
        Quantity::Drift => {
            let ps = simulate(space, t, dt, n, seed)?;
            Ok(vec![lim("drift", &estimators::estimate_drift(&ps)?.limit)])
        }
        Quantity::Entropy => {
            let ps = simulate(space, t, dt, n, seed)?;
            Ok(vec![lim("entropy", &estimators::estimate_entropy(&McKeanKernel, &ps)?.limit)])
        }
        Quantity::LmKm => {
            let xi = match &config.horofunction {
                Some(xi) => xi.clone(),
                None => Horofunction::parse(space, &default_horofunction_spec(space))?,
            };
            let k = minimal_harmonic(space, &xi)?;
            let ps = simulate(space, t, dt, n, seed)?;
            let r = estimators::estimate_lm_km(&McKeanKernel, &xi, &k, &ps)?;
            Ok(vec![
                lim("ell_m", &r.lm.limit),
                lim("k_m", &r.km.limit),
                lim("h_prime", &r.h_prime.limit),
            ])
        }
        Quantity::VolumeEntropy => {
            let v = estimators::estimate_volume_entropy(space, &default_radius_grid(), seed)?;
            Ok(vec![Measurement::invariant("volume_entropy", &v)])
        }
        Quantity::Lambda => {
            let l = estimators::estimate_lambda(space, LAMBDA_TRUNCATION, &default_s_grid())?;
            Ok(vec![lim("lambda", &l.bound)])
        }
        Quantity::Cesaro => {
            if space.kind() != &SpaceKind::Euclidean(2) {
                return Err(Error::UnsupportedSpace(format!(
                    "the Cesàro demo runs on euclidean:2 with the Z^2 deck group, got {}",
                    space.id()
                )));
            }
            let probes = estimators::probe_grid(CESARO_HALF_WIDTH, CESARO_PROBES_PER_SIDE);
            let r = estimators::cesaro_report(t, n, &probes, CESARO_TAU, RngSeed::new(seed, 0))?;
            Ok(vec![
                Measurement::new("median_sup_distance", r.median_sup_distance, 0.0, n, "linear_fit"),
                lim("cesaro_drift", &r.drift),
            ])
        }
        Quantity::GroupReport => Err(Error::Contract("group_report needs a group".into())),
        Quantity::Check => {
            let ps = simulate(space, t, dt, n, seed)?;
            let set = invariants_from_paths(space, &ps, seed)?;
            let mut out = vec![
                Measurement::invariant("ell", &set.ell),
                Measurement::invariant("h", &set.h),
                Measurement::invariant("v", &set.v),
                Measurement::invariant("lambda", &set.lambda),
            ];
            for v in inequality_chain(&set) {
                out.push(Measurement::new(
                    format!("verdict:{}", v.name.id()),
                    v.lhs.value - v.rhs.value,
                    v.lhs.stderr + v.rhs.stderr,
                    n,
                    v.verdict.as_str(),
                ));
            }
            Ok(out)
        }
    }
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// Measure, stamp and persist. An identical config already in the store is
/// answered from the store.
pub fn run(config: &ExperimentConfig, store: Option<&Store>) -> Result<RunOutcome> {
    let echo = config.echo();
    if let Some(store) = store {
        let hit = store.cached(&echo)?;
        if !hit.is_empty() {
            return Ok(RunOutcome {
                records: hit,
                cached: true,
            });
        }
    }
    let start = Instant::now();
    let measured = measure(config)?;
    let wall_ms = start.elapsed().as_millis() as u64;
    let ts = now_ms();
    let records: Vec<ResultRecord> = measured
        .into_iter()
        .map(|m| ResultRecord {
            config: echo.clone(),
            quantity: m.quantity,
            value: m.value,
            stderr: m.stderr,
            n: m.n,
            method: m.method,
            wall_ms,
            ts,
            version: VERSION.to_string(),
        })
        .collect();
    if let Some(store) = store {
        store.append(&records)?;
    }
    Ok(RunOutcome { records, cached: false })
}
