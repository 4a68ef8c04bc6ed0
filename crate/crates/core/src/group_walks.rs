//! Simple random walks on `ℤᵈ` and on free groups: exact distributions of
//! `μ*ⁿ`, word-length drift and Avez entropy bounds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest dense lattice box, in sites.
pub const MAX_BOX_SITES: usize = 1 << 22;

/// Caveat printed under every group table.
pub const DISCRETE_CAVEAT: &str = "Caveat: for random walks on groups with the word metric, no sharp \
analogue of the continuous inequality l^2 <= h is established. The table records observations and \
asserts nothing.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GroupKind {
    Lattice(usize),
    FreeGroup(usize),
}

/// Group with its standard symmetric generators and uniform step law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GroupSpec {
    pub kind: GroupKind,
}

impl GroupSpec {
    pub fn lattice(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::UnknownId {
                kind: "group",
                id: "z:0".into(),
            });
        }
        Ok(Self {
            kind: GroupKind::Lattice(d),
        })
    }

    pub fn free(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::UnknownId {
                kind: "group",
                id: "free:0".into(),
            });
        }
        Ok(Self {
            kind: GroupKind::FreeGroup(k),
        })
    }

    /// Parse `z:<d>` or `free:<k>`.
    pub fn from_id(id: &str) -> Result<Self> {
        let unknown = || Error::UnknownId {
            kind: "group",
            id: id.to_string(),
        };
        let (name, n) = id.trim().split_once(':').ok_or_else(unknown)?;
        let n: usize = n.parse().map_err(|_| unknown())?;
        match name {
            "z" => Self::lattice(n),
            "free" => Self::free(n),
            _ => Err(unknown()),
        }
        .map_err(|_| unknown())
    }

    pub fn id(&self) -> String {
        match self.kind {
            GroupKind::Lattice(d) => format!("z:{d}"),
            GroupKind::FreeGroup(k) => format!("free:{k}"),
        }
    }

    /// Number of generators including inverses.
    pub fn degree(&self) -> usize {
        match self.kind {
            GroupKind::Lattice(d) => 2 * d,
            GroupKind::FreeGroup(k) => 2 * k,
        }
    }
}

/// Kahan–Neumaier compensated sum.
#[derive(Debug, Default, Clone, Copy)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

fn compensated<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut acc = Neumaier::default();
    for x in xs {
        acc.add(x);
    }
    acc.total()
}

/// Law of `X_n`.
#[derive(Debug, Clone, PartialEq)]
pub enum WordDistribution {
    /// Dense array over `{−n, …, n}ᵈ`, last coordinate fastest.
    Lattice { dim: usize, radius: usize, probs: Vec<f64> },
    /// `probs[ℓ]` = probability that the reduced word has length `ℓ`; all
    /// words of one length are equally likely.
    Radial { rank: usize, probs: Vec<f64> },
}

impl WordDistribution {
    pub fn total(&self) -> f64 {
        match self {
            WordDistribution::Lattice { probs, .. } | WordDistribution::Radial { probs, .. } => {
                compensated(probs.iter().copied())
            }
        }
    }

    /// `E|X_n|` in the word metric.
    pub fn expected_length(&self) -> f64 {
        match self {
            WordDistribution::Lattice { dim, radius, probs } => {
                let side = 2 * radius + 1;
                compensated(probs.iter().enumerate().filter(|(_, p)| **p > 0.0).map(|(i, p)| {
                    let mut idx = i;
                    let mut len = 0usize;
                    for _ in 0..*dim {
                        len += (idx % side).abs_diff(*radius);
                        idx /= side;
                    }
                    p * len as f64
                }))
            }
            WordDistribution::Radial { probs, .. } => {
                compensated(probs.iter().enumerate().map(|(l, p)| p * l as f64))
            }
        }
    }

    /// Shannon entropy of `μ*ⁿ` in nats.
    pub fn entropy(&self) -> f64 {
        match self {
            WordDistribution::Lattice { probs, .. } => {
                compensated(probs.iter().filter(|p| **p > 0.0).map(|p| -p * p.ln()))
            }
            WordDistribution::Radial { rank, probs } => {
                // H = H(length) + E[ln #words of that length].
                let deg = (2 * rank) as f64;
                compensated(probs.iter().enumerate().filter(|(_, p)| **p > 0.0).map(|(l, p)| {
                    let ln_sphere = if l == 0 {
                        0.0
                    } else {
                        deg.ln() + (l - 1) as f64 * (deg - 1.0).ln()
                    };
                    -p * p.ln() + p * ln_sphere
                }))
            }
        }
    }
}

/// Iterates `μ*ⁿ` for `n = 1, 2, …`, calling `visit` after each step.
fn walk<F: FnMut(usize, &WordDistribution)>(group: &GroupSpec, n_max: usize, mut visit: F) -> Result<()> {
    if n_max == 0 {
        return Err(Error::Contract("walk length must be >= 1".into()));
    }
    match group.kind {
        GroupKind::Lattice(d) => {
            let side = 2 * n_max + 1;
            let sites = (side as u128).checked_pow(d as u32).unwrap_or(u128::MAX);
            if sites > MAX_BOX_SITES as u128 {
                return Err(Error::BoxOverflow(sites.min(usize::MAX as u128) as usize));
            }
            let sites = sites as usize;
            let strides: Vec<usize> = (0..d).map(|i| side.pow((d - 1 - i) as u32)).collect();
            let center: usize = strides.iter().map(|s| s * n_max).sum();
            let mut cur = vec![0.0; sites];
            cur[center] = 1.0;
            let w = 1.0 / (2 * d) as f64;
            for n in 1..=n_max {
                let mut next = vec![0.0; sites];
                for (i, &p) in cur.iter().enumerate() {
                    if p == 0.0 {
                        continue;
                    }
                    for &s in &strides {
                        next[i + s] += w * p;
                        next[i - s] += w * p;
                    }
                }
                cur = next;
                // Present the distribution on the smaller box {−n, …, n}ᵈ.
                let dist = WordDistribution::Lattice {
                    dim: d,
                    radius: n,
                    probs: shrink(&cur, d, n_max, n),
                };
                visit(n, &dist);
            }
        }
        GroupKind::FreeGroup(k) => {
            let deg = (2 * k) as f64;
            let up = (deg - 1.0) / deg;
            let down = 1.0 / deg;
            let mut cur = vec![1.0];
            for n in 1..=n_max {
                let mut next = vec![0.0; n + 1];
                for (l, &p) in cur.iter().enumerate() {
                    if p == 0.0 {
                        continue;
                    }
                    if l == 0 {
                        next[1] += p;
                    } else {
                        next[l + 1] += up * p;
                        next[l - 1] += down * p;
                    }
                }
                cur = next;
                visit(
                    n,
                    &WordDistribution::Radial {
                        rank: k,
                        probs: cur.clone(),
                    },
                );
            }
        }
    }
    Ok(())
}

fn shrink(full: &[f64], d: usize, big: usize, small: usize) -> Vec<f64> {
    if big == small {
        return full.to_vec();
    }
    let bs = 2 * big + 1;
    let ss = 2 * small + 1;
    let off = big - small;
    let mut out = vec![0.0; ss.pow(d as u32)];
    for (j, slot) in out.iter_mut().enumerate() {
        let mut idx = j;
        let mut full_idx = 0;
        let mut mult = 1;
        for _ in 0..d {
            full_idx += (idx % ss + off) * mult;
            idx /= ss;
            mult *= bs;
        }
        *slot = full[full_idx];
    }
    out
}

/// Exact `μ*ⁿ`.
pub fn convolve_n(group: &GroupSpec, n: usize) -> Result<WordDistribution> {
    let mut out = None;
    walk(group, n, |m, d| {
        if m == n {
            out = Some(d.clone());
        }
    })?;
    Ok(out.expect("walk visits its final step"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkPoint {
    pub n: usize,
    /// `E|X_n|/n`.
    pub drift: f64,
    /// `H(μ*ⁿ)/n`.
    pub entropy: f64,
    /// `|1 − total mass|`.
    pub mass_error: f64,
}

/// Drift and entropy rates at each `n` of an increasing grid, from one pass.
pub fn walk_statistics(group: &GroupSpec, grid: &[usize]) -> Result<Vec<WalkPoint>> {
    if grid.is_empty() || grid[0] == 0 || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Contract("n grid must be increasing and start at >= 1".into()));
    }
    let mut out = Vec::with_capacity(grid.len());
    let mut next = 0;
    walk(group, *grid.last().unwrap(), |n, d| {
        if next < grid.len() && grid[next] == n {
            out.push(WalkPoint {
                n,
                drift: d.expected_length() / n as f64,
                entropy: d.entropy() / n as f64,
                mass_error: (1.0 - d.total()).abs(),
            });
            next += 1;
        }
    })?;
    Ok(out)
}

pub fn word_drift(group: &GroupSpec, grid: &[usize]) -> Result<Vec<(usize, f64)>> {
    Ok(walk_statistics(group, grid)?.into_iter().map(|w| (w.n, w.drift)).collect())
}

pub fn word_entropy(group: &GroupSpec, grid: &[usize]) -> Result<Vec<(usize, f64)>> {
    Ok(walk_statistics(group, grid)?.into_iter().map(|w| (w.n, w.entropy)).collect())
}

/// Number of the `(2k)ⁿ` step sequences whose reduced word has each length.
pub fn free_length_counts(k: usize, n: usize) -> Vec<u128> {
    let deg = 2 * k as u128;
    let mut cur = vec![1u128];
    for m in 1..=n {
        let mut next = vec![0u128; m + 1];
        for (l, &c) in cur.iter().enumerate() {
            if l == 0 {
                next[1] += c * deg;
            } else {
                next[l + 1] += c * (deg - 1);
                next[l - 1] += c;
            }
        }
        cur = next;
    }
    cur
}

/// The same counts by enumerating every step sequence and reducing it.
pub fn brute_force_length_counts(k: usize, n: usize) -> Vec<u128> {
    let deg = 2 * k;
    let mut counts = vec![0u128; n + 1];
    let mut digits = vec![0usize; n];
    let mut stack: Vec<usize> = Vec::with_capacity(n);
    loop {
        stack.clear();
        // Generator g has inverse g ^ 1.
        for &g in &digits {
            if stack.last() == Some(&(g ^ 1)) {
                stack.pop();
            } else {
                stack.push(g);
            }
        }
        counts[stack.len()] += 1;
        let mut i = 0;
        loop {
            if i == n {
                return counts;
            }
            digits[i] += 1;
            if digits[i] < deg {
                break;
            }
            digits[i] = 0;
            i += 1;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRow {
    pub group: String,
    pub n: usize,
    /// `E|X_n|/n` at the largest `n`.
    pub drift: f64,
    /// `H(μ*ⁿ)/n` at the largest `n`; an upper bound for the Avez entropy.
    pub entropy_upper: f64,
    pub drift_squared: f64,
    /// `2f(n) − f(n/2)` extrapolations.
    pub drift_extrapolated: f64,
    pub entropy_extrapolated: f64,
    /// `max n·|f(n) − f_∞|` over the grid, with `f_∞` the extrapolated drift.
    pub drift_rate_constant: f64,
    pub verdict: String,
}

/// Default grid: powers of two up to `n_max`, plus `n_max` itself.
pub fn default_grid(n_max: usize) -> Vec<usize> {
    let mut grid: Vec<usize> = std::iter::successors(Some(1usize), |n| Some(n * 2))
        .take_while(|n| *n < n_max)
        .collect();
    if n_max / 2 >= 1 && !grid.contains(&(n_max / 2)) {
        grid.push(n_max / 2);
    }
    grid.push(n_max);
    grid.sort_unstable();
    grid.dedup();
    grid
}

/// Default largest `n` per group: 64 for lattices, 200 for free groups.
pub fn default_n_max(group: &GroupSpec) -> usize {
    match group.kind {
        GroupKind::Lattice(d) if d <= 2 => 64,
        GroupKind::Lattice(_) => 16,
        GroupKind::FreeGroup(_) => 200,
    }
}

/// Observed drift and entropy per group; never asserts an inequality.
pub fn drift_entropy_report(groups: &[GroupSpec]) -> Result<Vec<GroupRow>> {
    groups
        .iter()
        .map(|g| {
            let n_max = default_n_max(g);
            let stats = walk_statistics(g, &default_grid(n_max))?;
            let last = stats.last().expect("grid is non-empty");
            let half = stats
                .iter()
                .find(|w| w.n == n_max / 2)
                .copied()
                .unwrap_or(*last);
            let drift_ext = (2.0 * last.drift - half.drift).max(0.0);
            let entropy_ext = (2.0 * last.entropy - half.entropy).max(0.0);
            let rate = stats
                .iter()
                .map(|w| w.n as f64 * (w.drift - drift_ext).abs())
                .fold(0.0, f64::max);
            let verdict = if last.entropy < drift_ext * drift_ext {
                "h upper bound below extrapolated l^2"
            } else {
                "consistent"
            };
            Ok(GroupRow {
                group: g.id(),
                n: n_max,
                drift: last.drift,
                entropy_upper: last.entropy,
                drift_squared: last.drift * last.drift,
                drift_extrapolated: drift_ext,
                entropy_extrapolated: entropy_ext,
                drift_rate_constant: rate,
                verdict: verdict.into(),
            })
        })
        .collect()
}
