use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::geometry::ModelSpace;
use crate::group_walks::GroupSpec;
use crate::horofield::Horofunction;

pub const DEFAULT_T: f64 = 50.0;
pub const DEFAULT_DT: f64 = 0.01;
pub const DEFAULT_PATHS: usize = 10_000;
pub const DEFAULT_SEED: u64 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Drift,
    Entropy,
    LmKm,
    VolumeEntropy,
    Lambda,
    Cesaro,
    GroupReport,
    Check,
}

impl Quantity {
    pub const ALL: [Quantity; 8] = [
        Quantity::Drift,
        Quantity::Entropy,
        Quantity::LmKm,
        Quantity::VolumeEntropy,
        Quantity::Lambda,
        Quantity::Cesaro,
        Quantity::GroupReport,
        Quantity::Check,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Quantity::Drift => "drift",
            Quantity::Entropy => "entropy",
            Quantity::LmKm => "lm_km",
            Quantity::VolumeEntropy => "volume_entropy",
            Quantity::Lambda => "lambda",
            Quantity::Cesaro => "cesaro",
            Quantity::GroupReport => "group_report",
            Quantity::Check => "check",
        }
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Quantity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Quantity::ALL
            .into_iter()
            .find(|q| q.as_str() == s.trim())
            .ok_or_else(|| Error::UnknownId {
                kind: "quantity",
                id: s.trim().to_string(),
            })
    }
}

/// What a run is about: a model space or a group.
#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    Space(ModelSpace),
    Group(GroupSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub target: Target,
    pub quantity: Quantity,
    pub t: f64,
    pub dt: f64,
    pub paths: usize,
    pub seed: u64,
    pub horofunction: Option<Horofunction>,
    /// Record store path; not part of the cache key.
    pub out: Option<String>,
}

/// One `key = value` assignment with the line it came from (0 for flags).
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub line: usize,
    pub key: String,
    pub value: String,
}

pub const KEYS: [&str; 9] = ["space", "group", "quantity", "T", "dt", "paths", "seed", "horofunction", "out"];

/// Split config text into assignments. Blank lines and `#` comments are skipped.
pub fn parse_assignments(text: &str) -> Result<Vec<Assignment>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split_once('#').map_or(raw, |(b, _)| b).trim();
        if body.is_empty() {
            continue;
        }
        let (key, value) = body.split_once('=').ok_or_else(|| Error::Parse {
            line,
            message: format!("expected `key = value`, got `{body}`"),
        })?;
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(Error::Parse {
                line,
                message: format!("unknown key `{key}`"),
            });
        }
        out.push(Assignment {
            line,
            key: key.to_string(),
            value: value.trim().to_string(),
        });
    }
    Ok(out)
}

fn number<T: FromStr>(a: &Assignment) -> Result<T> {
    a.value.parse().map_err(|_| Error::Parse {
        line: a.line,
        message: format!("`{}` is not a valid value for {}", a.value, a.key),
    })
}

impl ExperimentConfig {
    /// Build a config from assignments; later assignments override earlier ones.
    pub fn from_assignments(items: &[Assignment]) -> Result<Self> {
        let last = |k: &str| items.iter().rev().find(|a| a.key == k);
        let at = |a: &Assignment| {
            let line = a.line;
            move |e: Error| match e {
                Error::Parse { .. } => e,
                other => Error::Parse {
                    line,
                    message: other.to_string(),
                },
            }
        };
        let end = items.iter().map(|a| a.line).max().unwrap_or(0);
        let quantity: Quantity = match last("quantity") {
            Some(a) => a.value.parse().map_err(at(a))?,
            None => {
                return Err(Error::Parse {
                    line: end,
                    message: "missing key `quantity`".into(),
                })
            }
        };
        let target = if quantity == Quantity::GroupReport {
            match last("group") {
                Some(a) => Target::Group(GroupSpec::from_id(&a.value).map_err(at(a))?),
                None => {
                    return Err(Error::Parse {
                        line: end,
                        message: "group_report needs a `group` key".into(),
                    })
                }
            }
        } else {
            match last("space") {
                Some(a) => Target::Space(ModelSpace::from_id(&a.value).map_err(at(a))?),
                None => {
                    return Err(Error::Parse {
                        line: end,
                        message: format!("{quantity} needs a `space` key"),
                    })
                }
            }
        };
        let t = last("T").map(number::<f64>).transpose()?.unwrap_or(DEFAULT_T);
        let dt = last("dt").map(number::<f64>).transpose()?.unwrap_or(DEFAULT_DT);
        let paths = last("paths").map(number::<usize>).transpose()?.unwrap_or(DEFAULT_PATHS);
        let seed = last("seed").map(number::<u64>).transpose()?.unwrap_or(DEFAULT_SEED);
        for (key, ok) in [("T", t > 0.0 && t.is_finite()), ("dt", dt > 0.0 && dt.is_finite()), ("paths", paths >= 2)] {
            if !ok {
                let line = last(key).map_or(0, |a| a.line);
                return Err(Error::Parse {
                    line,
                    message: format!("{key} must be positive (paths >= 2)"),
                });
            }
        }
        let horofunction = match (last("horofunction"), &target) {
            (Some(a), Target::Space(s)) => Some(Horofunction::parse(s, &a.value).map_err(at(a))?),
            (Some(a), Target::Group(_)) => {
                return Err(Error::Parse {
                    line: a.line,
                    message: "horofunction does not apply to groups".into(),
                })
            }
            (None, _) => None,
        };
        Ok(Self {
            target,
            quantity,
            t,
            dt,
            paths,
            seed,
            horofunction,
            out: last("out").map(|a| a.value.clone()),
        })
    }

    pub fn space(&self) -> Result<&ModelSpace> {
        match &self.target {
            Target::Space(s) => Ok(s),
            Target::Group(g) => Err(Error::UnsupportedSpace(format!("{} is a group, not a space", g.id()))),
        }
    }

    pub fn target_id(&self) -> String {
        match &self.target {
            Target::Space(s) => s.id(),
            Target::Group(g) => g.id(),
        }
    }

    /// Canonical echo stored with every record; the cache key.
    pub fn echo(&self) -> Value {
        let mut m = Map::new();
        match &self.target {
            Target::Space(s) => m.insert("space".into(), json!(s.id())),
            Target::Group(g) => m.insert("group".into(), json!(g.id())),
        };
        m.insert("quantity".into(), json!(self.quantity.as_str()));
        m.insert("T".into(), json!(self.t));
        m.insert("dt".into(), json!(self.dt));
        m.insert("paths".into(), json!(self.paths));
        m.insert("seed".into(), json!(self.seed));
        if let Some(xi) = self.horofunction.as_ref().and_then(|x| x.boundary_params()) {
            m.insert("horofunction".into(), json!(xi.to_string()));
        }
        Value::Object(m)
    }

    /// Config text that parses back to the same config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        match &self.target {
            Target::Space(sp) => s += &format!("space = {}\n", sp.id()),
            Target::Group(g) => s += &format!("group = {}\n", g.id()),
        }
        s += &format!("quantity = {}\nT = {}\ndt = {}\npaths = {}\nseed = {}\n", self.quantity, self.t, self.dt, self.paths, self.seed);
        if let Some(xi) = self.horofunction.as_ref().and_then(|x| x.boundary_params()) {
            s += &format!("horofunction = {xi}\n");
        }
        if let Some(out) = &self.out {
            s += &format!("out = {out}\n");
        }
        s
    }
}

/// Parse the flat `key = value` grammar.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    ExperimentConfig::from_assignments(&parse_assignments(text)?)
}
