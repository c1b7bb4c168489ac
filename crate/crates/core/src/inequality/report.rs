use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Default relative tolerance of inequality verdicts.
pub const INEQ_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// The inequality's hypotheses do not hold, so no verdict is given.
    HypothesisViolated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IneqReport {
    pub id: String,
    pub instance: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub rel_slack: f64,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub aux: BTreeMap<String, f64>,
}

impl IneqReport {
    /// `lhs ≤ rhs`, passing when `rhs − lhs ≥ −tol·max(|lhs|, |rhs|, 1)`.
    pub fn new(id: &str, instance: impl Into<String>, lhs: f64, rhs: f64, tol: f64) -> Self {
        let scale = lhs.abs().max(rhs.abs()).max(1.0);
        let slack = rhs - lhs;
        let verdict = if slack >= -tol * scale {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        // An overflowed side gives inf/inf; keep the sign of the slack.
        let rel_slack = match slack / scale {
            r if r.is_nan() => slack.signum(),
            r => r,
        };
        Self {
            id: id.to_string(),
            instance: instance.into(),
            lhs,
            rhs,
            slack,
            rel_slack,
            verdict,
            aux: BTreeMap::new(),
        }
    }

    pub fn with_aux(mut self, key: &str, value: f64) -> Self {
        self.aux.insert(key.to_string(), value);
        self
    }

    pub fn hypothesis_violated(mut self) -> Self {
        self.verdict = Verdict::HypothesisViolated;
        self
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn csv_header() -> &'static str {
        "id,instance,lhs,rhs,slack,pass"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.id,
            self.instance.replace(',', ";"),
            self.lhs,
            self.rhs,
            self.slack,
            self.passed()
        )
    }
}

/// Most violating report: smallest relative slack, ties broken by instance id.
pub fn worst<'a>(reports: impl IntoIterator<Item = &'a IneqReport>) -> Option<&'a IneqReport> {
    reports.into_iter().min_by(|a, b| {
        a.rel_slack
            .total_cmp(&b.rel_slack)
            .then_with(|| a.instance.cmp(&b.instance))
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BatterySummary {
    pub id: String,
    pub instances: usize,
    pub failures: usize,
    pub hypothesis_violations: usize,
    pub worst: Option<IneqReport>,
}

pub fn summarize(id: &str, reports: &[IneqReport]) -> BatterySummary {
    BatterySummary {
        id: id.to_string(),
        instances: reports.len(),
        failures: reports.iter().filter(|r| r.verdict == Verdict::Fail).count(),
        hypothesis_violations: reports
            .iter()
            .filter(|r| r.verdict == Verdict::HypothesisViolated)
            .count(),
        worst: worst(reports).cloned(),
    }
}
