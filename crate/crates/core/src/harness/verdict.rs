//! CI-aware comparison of the six invariant inequalities.

use serde::{Deserialize, Serialize};

use crate::estimators::{InvariantSet, InvariantValue};

/// One side of an inequality with first-order error propagation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Side {
    pub value: f64,
    pub stderr: f64,
    pub bias: f64,
    pub exact: bool,
}

impl Side {
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            stderr: 0.0,
            bias: 0.0,
            exact: true,
        }
    }

    pub fn estimated(value: f64, stderr: f64, bias: f64) -> Self {
        Self {
            value,
            stderr,
            bias,
            exact: false,
        }
    }

    pub fn scale(self, c: f64) -> Self {
        Self {
            value: c * self.value,
            stderr: c.abs() * self.stderr,
            bias: c.abs() * self.bias,
            exact: self.exact,
        }
    }

    pub fn times(self, o: Side) -> Self {
        Self {
            value: self.value * o.value,
            stderr: o.value.abs() * self.stderr + self.value.abs() * o.stderr,
            bias: o.value.abs() * self.bias + self.value.abs() * o.bias + self.bias * o.bias,
            exact: self.exact && o.exact,
        }
    }

    pub fn square(self) -> Self {
        self.times(self)
    }
}

impl From<&InvariantValue> for Side {
    fn from(v: &InvariantValue) -> Self {
        if v.exact {
            Side::exact(v.value)
        } else {
            Side::estimated(v.value, v.stderr, v.bias_budget)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Inequality {
    #[serde(rename = "l^2<=h")]
    EllSqLeH,
    #[serde(rename = "h<=l*v")]
    HLeEllV,
    #[serde(rename = "l<=v")]
    EllLeV,
    #[serde(rename = "4lambda<=h")]
    FourLambdaLeH,
    #[serde(rename = "h<=v^2")]
    HLeVSq,
    #[serde(rename = "4lambda<=v^2")]
    FourLambdaLeVSq,
}

impl Inequality {
    pub const ALL: [Inequality; 6] = [
        Inequality::EllSqLeH,
        Inequality::HLeEllV,
        Inequality::EllLeV,
        Inequality::FourLambdaLeH,
        Inequality::HLeVSq,
        Inequality::FourLambdaLeVSq,
    ];

    /// ASCII identifier used in records.
    pub fn id(&self) -> &'static str {
        match self {
            Inequality::EllSqLeH => "l^2<=h",
            Inequality::HLeEllV => "h<=l*v",
            Inequality::EllLeV => "l<=v",
            Inequality::FourLambdaLeH => "4lambda<=h",
            Inequality::HLeVSq => "h<=v^2",
            Inequality::FourLambdaLeVSq => "4lambda<=v^2",
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Inequality::EllSqLeH => "ℓ² ≤ h",
            Inequality::HLeEllV => "h ≤ ℓv",
            Inequality::EllLeV => "ℓ ≤ v",
            Inequality::FourLambdaLeH => "4λ ≤ h",
            Inequality::HLeVSq => "h ≤ v²",
            Inequality::FourLambdaLeVSq => "4λ ≤ v²",
        }
    }

    pub fn sides(&self, ell: Side, h: Side, v: Side, lambda: Side) -> (Side, Side) {
        match self {
            Inequality::EllSqLeH => (ell.square(), h),
            Inequality::HLeEllV => (h, ell.times(v)),
            Inequality::EllLeV => (ell, v),
            Inequality::FourLambdaLeH => (lambda.scale(4.0), h),
            Inequality::HLeVSq => (h, v.square()),
            Inequality::FourLambdaLeVSq => (lambda.scale(4.0), v.square()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "consistent")]
    Consistent,
    #[serde(rename = "equality-within-tolerance")]
    EqualityWithinTolerance,
    #[serde(rename = "violated")]
    Violated,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Consistent => "consistent",
            Verdict::EqualityWithinTolerance => "equality-within-tolerance",
            Verdict::Violated => "violated",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Verdict::Consistent, Verdict::EqualityWithinTolerance, Verdict::Violated]
            .into_iter()
            .find(|v| v.as_str() == s)
    }

    /// Not violated.
    pub fn holds(&self) -> bool {
        *self != Verdict::Violated
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityVerdict {
    pub name: Inequality,
    pub lhs: Side,
    pub rhs: Side,
    /// `3·(σ_lhs + σ_rhs) + bias_lhs + bias_rhs`.
    pub slack: f64,
    pub verdict: Verdict,
}

pub fn judge(name: Inequality, lhs: Side, rhs: Side) -> InequalityVerdict {
    let slack = 3.0 * (lhs.stderr + rhs.stderr) + lhs.bias + rhs.bias;
    let gap = lhs.value - rhs.value;
    let verdict = if gap > slack {
        Verdict::Violated
    } else if gap.abs() <= slack {
        Verdict::EqualityWithinTolerance
    } else {
        Verdict::Consistent
    };
    InequalityVerdict {
        name,
        lhs,
        rhs,
        slack,
        verdict,
    }
}

/// The six verdicts for one invariant set.
pub fn inequality_chain(set: &InvariantSet) -> Vec<InequalityVerdict> {
    let (ell, h, v, lambda) = (
        Side::from(&set.ell),
        Side::from(&set.h),
        Side::from(&set.v),
        Side::from(&set.lambda),
    );
    Inequality::ALL
        .iter()
        .map(|q| {
            let (l, r) = q.sides(ell, h, v, lambda);
            judge(*q, l, r)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn truth_table() {
        let est = |v: f64, s: f64, b: f64| Side::estimated(v, s, b);
        // slack = 3·(0.1 + 0.1) + 0.05 + 0.05 = 0.7
        let cases = [
            (2.0, 1.0, Verdict::Violated),
            (1.71, 1.0, Verdict::Violated),
            (1.69, 1.0, Verdict::EqualityWithinTolerance),
            (1.0, 1.0, Verdict::EqualityWithinTolerance),
            (0.31, 1.0, Verdict::EqualityWithinTolerance),
            (0.29, 1.0, Verdict::Consistent),
            (-5.0, 1.0, Verdict::Consistent),
        ];
        for (l, r, want) in cases {
            let got = judge(Inequality::EllLeV, est(l, 0.1, 0.05), est(r, 0.1, 0.05));
            assert!((got.slack - 0.7).abs() < 1e-15);
            assert_eq!(got.verdict, want, "{l} vs {r}");
        }
        let exact = judge(Inequality::EllLeV, Side::exact(1.0), Side::exact(1.0));
        assert_eq!((exact.slack, exact.verdict), (0.0, Verdict::EqualityWithinTolerance));
        assert_eq!(judge(Inequality::EllLeV, Side::exact(1.0 + 1e-12), Side::exact(1.0)).verdict, Verdict::Violated);
        assert_eq!(judge(Inequality::EllLeV, Side::exact(0.0), Side::exact(1.0)).verdict, Verdict::Consistent);
    }

    #[test]
    fn propagation() {
        let a = Side::estimated(2.0, 0.1, 0.05);
        let sq = a.square();
        assert_eq!(sq.value, 4.0);
        assert!((sq.stderr - 0.4).abs() < 1e-15);
        assert!((sq.bias - (0.2 + 0.0025)).abs() < 1e-15);
        assert!(!sq.exact);
        let b = Side::exact(3.0);
        let p = a.times(b);
        assert_eq!((p.value, p.stderr, p.bias), (6.0, 0.1 * 3.0, 0.05 * 3.0));
        assert_eq!(a.scale(4.0).stderr, 0.4);
        assert!(b.square().exact);
    }

    #[test]
    fn verdict_strings() {
        for v in [Verdict::Consistent, Verdict::EqualityWithinTolerance, Verdict::Violated] {
            assert_eq!(Verdict::parse(v.as_str()), Some(v));
            assert_eq!(serde_json::to_value(v).unwrap(), v.as_str());
        }
        for q in Inequality::ALL {
            assert_eq!(serde_json::to_value(q).unwrap(), q.id());
        }
    }

    proptest! {
        #[test]
        fn violated_iff_slack_formula(l in -3.0..3.0f64, r in -3.0..3.0f64, sl in 0.0..0.5f64, sr in 0.0..0.5f64,
                                      bl in 0.0..0.2f64, br in 0.0..0.2f64) {
            let v = judge(Inequality::HLeVSq, Side::estimated(l, sl, bl), Side::estimated(r, sr, br));
            let slack = 3.0 * (sl + sr) + bl + br;
            prop_assert_eq!(v.verdict == Verdict::Violated, l - r > slack);
            prop_assert_eq!(v.verdict == Verdict::EqualityWithinTolerance, (l - r).abs() <= slack);
        }
    }
}
