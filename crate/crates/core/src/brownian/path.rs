use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::RngSeed;
use crate::error::{Error, Result};
use crate::geometry::{ModelSpace, Point, SpaceKind};

/// Number of halvings below the horizon in the checkpoint grid.
pub const CHECKPOINT_LEVELS: u32 = 11;
pub const DEFAULT_DT: f64 = 0.01;
pub const MAX_DT: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Exact Gaussian increments; Euclidean spaces only.
    Exact,
    /// Fixed-step scheme with the given maximal step.
    Euler(f64),
}

impl Scheme {
    /// Exact where available, otherwise stepping with `dt`.
    pub fn for_space(space: &ModelSpace, dt: f64) -> Scheme {
        if space.has_hyperbolic_factor() {
            Scheme::Euler(dt)
        } else {
            Scheme::Exact
        }
    }

    pub fn tag(&self) -> String {
        match self {
            Scheme::Exact => "exact".into(),
            Scheme::Euler(dt) => format!("euler({dt})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub space: ModelSpace,
    pub start: Point,
    pub horizon: f64,
    /// `(t, X_t)` for `t = 0` and `t = T·2⁻ᵏ`, `k = 11, …, 0`.
    pub checkpoints: Vec<(f64, Point)>,
    pub scheme: Scheme,
    pub seed: RngSeed,
}

impl Path {
    pub fn end(&self) -> &Point {
        &self.checkpoints.last().expect("paths always have checkpoints").1
    }

    /// Snapshot at a checkpoint time (exact match on the grid).
    pub fn at(&self, t: f64) -> Option<&Point> {
        self.checkpoints.iter().find(|(s, _)| *s == t).map(|(_, p)| p)
    }
}

pub fn checkpoint_times(horizon: f64) -> Vec<f64> {
    let mut times = vec![0.0];
    times.extend((0..=CHECKPOINT_LEVELS).rev().map(|k| horizon / 2f64.powi(k as i32)));
    times
}

fn check_request(space: &ModelSpace, start: &Point, horizon: f64, scheme: Scheme) -> Result<()> {
    space.validate(start)?;
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::Contract(format!("horizon must be positive, got {horizon}")));
    }
    match scheme {
        Scheme::Exact if space.has_hyperbolic_factor() => Err(Error::Contract(format!(
            "no exact scheme on {}; use euler",
            space.id()
        ))),
        Scheme::Euler(dt) if dt > MAX_DT => Err(Error::StepTooLarge(dt)),
        Scheme::Euler(dt) if !(dt > 0.0) || dt > horizon => Err(Error::Contract(format!(
            "step {dt} must lie in (0, T = {horizon}]"
        ))),
        _ => Ok(()),
    }
}

/// One Brownian path. The result depends only on the arguments.
pub fn sample_path(space: &ModelSpace, start: &Point, horizon: f64, scheme: Scheme, seed: RngSeed) -> Result<Path> {
    check_request(space, start, horizon, scheme)?;
    Ok(simulate(space, start, horizon, scheme, seed))
}

/// `count` paths from `start`; path `i` uses stream `i` of `master`.
pub fn sample_paths(
    space: &ModelSpace,
    start: &Point,
    horizon: f64,
    scheme: Scheme,
    master: u64,
    count: usize,
) -> Result<Vec<Path>> {
    check_request(space, start, horizon, scheme)?;
    Ok((0..count as u64)
        .into_par_iter()
        .map(|i| simulate(space, start, horizon, scheme, RngSeed::new(master, i)))
        .collect())
}

fn simulate(space: &ModelSpace, start: &Point, horizon: f64, scheme: Scheme, seed: RngSeed) -> Path {
    let mut rng = seed.rng();
    let times = checkpoint_times(horizon);
    let mut state = start.coords.clone();
    let mut checkpoints = Vec::with_capacity(times.len());
    checkpoints.push((0.0, start.clone()));
    for w in times.windows(2) {
        let span = w[1] - w[0];
        match scheme {
            Scheme::Exact => advance(space, &mut state, span, &mut rng),
            Scheme::Euler(dt) => {
                let steps = (span / dt - 1e-9).ceil().max(1.0) as usize;
                let delta = span / steps as f64;
                for _ in 0..steps {
                    advance(space, &mut state, delta, &mut rng);
                }
            }
        }
        checkpoints.push((w[1], Point::new(state.clone())));
    }
    Path {
        space: space.clone(),
        start: start.clone(),
        horizon,
        checkpoints,
        scheme,
        seed,
    }
}

/// One step of length `delta` for `dX = √2 dB` in the chart's coordinates.
fn advance<R: Rng>(space: &ModelSpace, state: &mut [f64], delta: f64, rng: &mut R) {
    match space.kind() {
        SpaceKind::Euclidean(_) => {
            let sd = (2.0 * delta).sqrt();
            for c in state.iter_mut() {
                *c += sd * rng.sample::<f64, _>(StandardNormal);
            }
        }
        SpaceKind::HyperbolicHalfPlane => {
            // dY = √2·Y dB₂ solved exactly; dX = √2·Y dB₁ with trapezoidal variance.
            let g1: f64 = rng.sample(StandardNormal);
            let g2: f64 = rng.sample(StandardNormal);
            let y = state[1];
            let y_next = y * ((2.0 * delta).sqrt() * g2 - delta).exp();
            state[0] += (delta * (y * y + y_next * y_next)).sqrt() * g1;
            state[1] = y_next;
        }
        SpaceKind::Product(a, b) => {
            let (sa, sb) = state.split_at_mut(a.dim());
            advance(a, sa, delta, rng);
            advance(b, sb, delta, rng);
        }
    }
}
