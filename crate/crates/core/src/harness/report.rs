use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::estimators::{bias_budget, Invariant, InvariantSet, InvariantValue};
use crate::geometry::ModelSpace;
use crate::group_walks::DISCRETE_CAVEAT;

use super::store::ResultRecord;
use super::verdict::{inequality_chain, Inequality, InequalityVerdict, Verdict};

fn invariant_of(quantity: &str) -> Option<Invariant> {
    match quantity {
        "ell" | "drift" => Some(Invariant::Ell),
        "h" | "entropy" => Some(Invariant::H),
        "v" | "volume_entropy" => Some(Invariant::V),
        "lambda" => Some(Invariant::Lambda),
        _ => None,
    }
}

fn invariant_value(r: &ResultRecord, q: Invariant, space: &ModelSpace) -> InvariantValue {
    if r.method.ends_with(":exact") {
        InvariantValue::exact(r.value, r.method.clone())
    } else {
        InvariantValue {
            value: r.value,
            stderr: r.stderr,
            bias_budget: bias_budget(q, space),
            exact: false,
            n: r.n,
            method: r.method.clone(),
        }
    }
}

#[derive(Default)]
struct SpaceEntry {
    ell: Option<InvariantValue>,
    h: Option<InvariantValue>,
    v: Option<InvariantValue>,
    lambda: Option<InvariantValue>,
}

#[derive(Default, Clone, Copy)]
struct GroupEntry {
    n: usize,
    drift: Option<f64>,
    entropy: Option<f64>,
    drift_ext: Option<f64>,
    entropy_ext: Option<f64>,
}

fn matches(filter: Option<&str>, id: &str) -> bool {
    filter.is_none_or(|f| f == id)
}

/// Equality-case notes for one set of verdicts.
pub fn annotations(verdicts: &[InequalityVerdict]) -> Vec<String> {
    let eq = |q: Inequality| {
        verdicts
            .iter()
            .any(|v| v.name == q && v.verdict == Verdict::EqualityWithinTolerance)
    };
    let mut out = Vec::new();
    let vanishing = verdicts
        .iter()
        .all(|v| v.lhs.value.abs() <= v.slack && v.rhs.value.abs() <= v.slack);
    if !verdicts.is_empty() && vanishing {
        out.push("Flat case: every side vanishes within tolerance, so the chain holds trivially.".to_string());
        return out;
    }
    if verdicts.len() == 6 && verdicts.iter().all(|v| v.verdict == Verdict::EqualityWithinTolerance) {
        out.push("Symmetric space equality chain: ℓ² = h = ℓv = v² = 4λ within tolerance.".to_string());
    } else if eq(Inequality::EllSqLeH) {
        out.push("Equality case ℓ² = h within tolerance.".to_string());
    }
    if eq(Inequality::FourLambdaLeVSq) {
        out.push("Equality case 4λ = v², which forces equality in ℓ² ≤ h.".to_string());
    }
    for v in verdicts.iter().filter(|v| v.verdict == Verdict::Violated) {
        out.push(format!(
            "VIOLATED: {} with lhs − rhs = {:.6} > slack {:.6}.",
            v.name.label(),
            v.lhs.value - v.rhs.value,
            v.slack
        ));
    }
    out
}

fn fmt_invariant(s: &mut String, name: &str, v: &Option<InvariantValue>) {
    match v {
        Some(v) if v.exact => {
            let _ = writeln!(s, "| {name} | {:.6} | exact | 0 | {} |", v.value, v.method);
        }
        Some(v) => {
            let _ = writeln!(
                s,
                "| {name} | {:.6} | {:.6} | {} | {} |",
                v.value, v.stderr, v.bias_budget, v.method
            );
        }
        None => {
            let _ = writeln!(s, "| {name} | missing | | | |");
        }
    }
}

/// Markdown report over the records whose space or group id matches `filter`.
pub fn report(records: &[ResultRecord], filter: Option<&str>) -> Result<String> {
    let mut spaces: BTreeMap<String, SpaceEntry> = BTreeMap::new();
    let mut groups: BTreeMap<String, GroupEntry> = BTreeMap::new();
    for r in records {
        if let Some(id) = r.space().filter(|id| matches(filter, id)) {
            let Some(q) = invariant_of(&r.quantity) else { continue };
            let Ok(space) = ModelSpace::from_id(id) else { continue };
            let e = spaces.entry(id.to_string()).or_default();
            let v = Some(invariant_value(r, q, &space));
            match q {
                Invariant::Ell => e.ell = v,
                Invariant::H => e.h = v,
                Invariant::V => e.v = v,
                Invariant::Lambda => e.lambda = v,
            }
        } else if let Some(id) = r.group().filter(|id| matches(filter, id)) {
            let e = groups.entry(id.to_string()).or_default();
            e.n = r.n;
            match r.quantity.as_str() {
                "group_drift" => e.drift = Some(r.value),
                "group_entropy_upper" => e.entropy = Some(r.value),
                "group_drift_extrapolated" => e.drift_ext = Some(r.value),
                "group_entropy_extrapolated" => e.entropy_ext = Some(r.value),
                _ => {}
            }
        }
    }
    if spaces.is_empty() && groups.is_empty() {
        return Err(Error::EmptyStore(filter.unwrap_or("*").to_string()));
    }

    let mut s = String::from("# horodrift report\n");
    for (id, e) in &spaces {
        let _ = writeln!(s, "\n## Space {id}\n");
        s += "| invariant | value | stderr | bias budget | method |\n|---|---|---|---|---|\n";
        fmt_invariant(&mut s, "ℓ", &e.ell);
        fmt_invariant(&mut s, "h", &e.h);
        fmt_invariant(&mut s, "v", &e.v);
        fmt_invariant(&mut s, "λ", &e.lambda);
        let (Some(ell), Some(h), Some(v), Some(lambda)) = (&e.ell, &e.h, &e.v, &e.lambda) else {
            s += "\nIncomplete invariant set; verdicts need ℓ, h, v and λ (run `check`).\n";
            continue;
        };
        let set = InvariantSet {
            space: id.clone(),
            ell: ell.clone(),
            h: h.clone(),
            v: v.clone(),
            lambda: lambda.clone(),
        };
        let verdicts = inequality_chain(&set);
        s += "\n| inequality | lhs | rhs | slack | verdict |\n|---|---|---|---|---|\n";
        for v in &verdicts {
            let _ = writeln!(
                s,
                "| {} | {:.6} | {:.6} | {:.6} | {} |",
                v.name.label(),
                v.lhs.value,
                v.rhs.value,
                v.slack,
                v.verdict.as_str()
            );
        }
        let notes = annotations(&verdicts);
        if !notes.is_empty() {
            s += "\n";
            for n in notes {
                let _ = writeln!(s, "- {n}");
            }
        }
    }
    if !groups.is_empty() {
        s += "\n## Random walks on groups\n\n";
        s += "| group | n | ℓ_w | h_w upper | ℓ_w² | ℓ_w extrapolated | h_w extrapolated | observation |\n";
        s += "|---|---|---|---|---|---|---|---|\n";
        let f = |x: Option<f64>| x.map_or("missing".to_string(), |x| format!("{x:.6}"));
        for (id, g) in &groups {
            let obs = match (g.entropy, g.drift_ext) {
                (Some(h), Some(l)) if h < l * l => "h upper bound below extrapolated ℓ²",
                (Some(_), Some(_)) => "consistent",
                _ => "incomplete",
            };
            let _ = writeln!(
                s,
                "| {id} | {} | {} | {} | {} | {} | {} | {obs} |",
                g.n,
                f(g.drift),
                f(g.entropy),
                f(g.drift.map(|d| d * d)),
                f(g.drift_ext),
                f(g.entropy_ext)
            );
        }
        let _ = writeln!(s, "\n{DISCRETE_CAVEAT}");
    }
    Ok(s)
}
