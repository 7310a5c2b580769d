//! Cross-route comparison reports.

use serde::Serialize;

use crate::bbm::fmt_x;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Skipped,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Pass => "pass",
            Self::Fail => "fail",
            Self::Skipped => "skipped",
        }
    }
}

/// How a row is judged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    /// `|a - b| <= z * sqrt(se_a^2 + se_b^2)`
    Z,
    /// `|a - b| <= max(z * combined se, rel_tol * |b|)`
    ZOrRelative,
    /// `|a - b| <= tol`
    Absolute(f64),
    /// KS distance below the threshold.
    KsDistance(f64),
    /// p-value above the significance level.
    PValue,
    /// A composite check; `score` and `threshold` are described in the note.
    Custom,
}

impl Rule {
    fn name(&self) -> &'static str {
        match self {
            Self::Z => "z",
            Self::ZOrRelative => "z_or_rel",
            Self::Absolute(_) => "abs",
            Self::KsDistance(_) => "ks_distance",
            Self::PValue => "p_value",
            Self::Custom => "custom",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Thresholds {
    pub z: f64,
    pub rel_tol: f64,
    pub significance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub route_a: String,
    pub route_b: String,
    pub statistic: String,
    pub x: f64,
    pub order: u32,
    pub value_a: f64,
    pub stderr_a: f64,
    pub value_b: f64,
    pub stderr_b: f64,
    pub rule: Rule,
    /// z-score, KS distance, p-value or absolute error, depending on the rule.
    pub score: f64,
    pub threshold: f64,
    pub verdict: Verdict,
    pub note: String,
}

/// One side of a comparison: a value, its standard error and where it came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Side<'a> {
    pub route: &'a str,
    pub value: f64,
    pub stderr: f64,
}

impl<'a> Side<'a> {
    pub fn exact(route: &'a str, value: f64) -> Self {
        Self { route, value, stderr: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub schema_version: u32,
    pub thresholds: Thresholds,
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonReport {
    pub fn new(thresholds: Thresholds) -> Self {
        Self { schema_version: SCHEMA_VERSION, thresholds, rows: Vec::new() }
    }

    /// Adds a value comparison judged by `rule`.
    pub fn compare(&mut self, statistic: &str, x: f64, order: u32, a: Side, b: Side, rule: Rule) -> &mut ComparisonRow {
        let diff = (a.value - b.value).abs();
        let se = a.stderr.hypot(b.stderr);
        let th = self.thresholds;
        let (score, threshold, ok) = match rule {
            Rule::Z => {
                let z = if diff == 0.0 { 0.0 } else { diff / se };
                (z, th.z, z <= th.z)
            }
            Rule::ZOrRelative => {
                let z = if diff == 0.0 { 0.0 } else { diff / se };
                (z, th.z, diff <= (th.z * se).max(th.rel_tol * b.value.abs()))
            }
            Rule::Absolute(tol) => (diff, tol, diff <= tol),
            Rule::KsDistance(_) | Rule::PValue | Rule::Custom => unreachable!("use distribution() or custom()"),
        };
        self.rows.push(ComparisonRow {
            route_a: a.route.into(),
            route_b: b.route.into(),
            statistic: statistic.into(),
            x,
            order,
            value_a: a.value,
            stderr_a: a.stderr,
            value_b: b.value,
            stderr_b: b.stderr,
            rule,
            score,
            threshold,
            verdict: if ok { Verdict::Pass } else { Verdict::Fail },
            note: String::new(),
        });
        self.rows.last_mut().unwrap()
    }

    /// Adds a distributional test (KS distance or p-value).
    pub fn distribution(&mut self, route_a: &str, route_b: &str, statistic: &str, x: f64, value: f64, rule: Rule) -> &mut ComparisonRow {
        let (threshold, ok) = match rule {
            Rule::KsDistance(d) => (d, value < d),
            Rule::PValue => (self.thresholds.significance, value > self.thresholds.significance),
            _ => unreachable!("use compare()"),
        };
        self.rows.push(ComparisonRow {
            route_a: route_a.into(),
            route_b: route_b.into(),
            statistic: statistic.into(),
            x,
            order: 0,
            value_a: value,
            stderr_a: 0.0,
            value_b: threshold,
            stderr_b: 0.0,
            rule,
            score: value,
            threshold,
            verdict: if ok { Verdict::Pass } else { Verdict::Fail },
            note: String::new(),
        });
        self.rows.last_mut().unwrap()
    }

    /// Adds a composite check decided by the caller.
    pub fn custom(&mut self, route_a: &str, route_b: &str, statistic: &str, score: f64, threshold: f64, pass: bool, note: &str) {
        self.rows.push(ComparisonRow {
            route_a: route_a.into(),
            route_b: route_b.into(),
            statistic: statistic.into(),
            x: f64::NAN,
            order: 0,
            value_a: score,
            stderr_a: 0.0,
            value_b: threshold,
            stderr_b: 0.0,
            rule: Rule::Custom,
            score,
            threshold,
            verdict: if pass { Verdict::Pass } else { Verdict::Fail },
            note: note.into(),
        });
    }

    pub fn skip(&mut self, route_a: &str, route_b: &str, statistic: &str, x: f64, order: u32, why: &str) {
        self.rows.push(ComparisonRow {
            route_a: route_a.into(),
            route_b: route_b.into(),
            statistic: statistic.into(),
            x,
            order,
            value_a: f64::NAN,
            stderr_a: f64::NAN,
            value_b: f64::NAN,
            stderr_b: f64::NAN,
            rule: Rule::Z,
            score: f64::NAN,
            threshold: f64::NAN,
            verdict: Verdict::Skipped,
            note: why.into(),
        });
    }

    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.verdict == Verdict::Fail).count()
    }

    pub fn passed(&self) -> bool {
        self.failures() == 0
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "route_a,route_b,statistic,x,order,value_a,stderr_a,value_b,stderr_b,rule,score,threshold,verdict,note\n",
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                r.route_a,
                r.route_b,
                r.statistic,
                fmt_x(r.x),
                r.order,
                r.value_a,
                r.stderr_a,
                r.value_b,
                r.stderr_b,
                r.rule.name(),
                r.score,
                r.threshold,
                r.verdict.as_str(),
                r.note.replace(',', ";")
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn th() -> Thresholds {
        Thresholds { z: 4.0, rel_tol: 0.03, significance: 1e-3 }
    }

    #[test]
    fn rules() {
        let mut r = ComparisonReport::new(th());
        let a = Side { route: "a", value: 1.0, stderr: 0.01 };
        assert_eq!(r.compare("m", 0.0, 1, a, Side::exact("b", 1.03), Rule::Z).verdict, Verdict::Pass);
        assert_eq!(r.compare("m", 0.0, 1, a, Side::exact("b", 1.05), Rule::Z).verdict, Verdict::Fail);
        assert_eq!(r.compare("m", 0.0, 1, a, Side::exact("b", 1.05), Rule::ZOrRelative).verdict, Verdict::Fail);
        let tight = Side { stderr: 0.0001, ..a };
        assert_eq!(r.compare("m", 0.0, 1, tight, Side::exact("b", 1.02), Rule::ZOrRelative).verdict, Verdict::Pass);
        assert_eq!(r.compare("m", 0.0, 1, Side::exact("a", 0.0), Side::exact("b", 0.0), Rule::Z).verdict, Verdict::Pass);
        assert_eq!(r.distribution("a", "b", "ks", 0.0, 0.01, Rule::KsDistance(0.02)).verdict, Verdict::Pass);
        assert_eq!(r.distribution("a", "b", "chi2", 0.0, 1e-4, Rule::PValue).verdict, Verdict::Fail);
        r.skip("a", "b", "m", 0.0, 1, "no exact cdf, uniform");
        assert_eq!(r.failures(), 3);
        let csv = r.to_csv();
        assert_eq!(csv.lines().count(), r.rows.len() + 1);
        assert!(csv.contains("skipped,no exact cdf; uniform"));
    }
}
