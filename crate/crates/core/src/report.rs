use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Outcome of evaluating one inequality `lhs <= rhs`.
///
/// `slack` is `rhs - lhs`; for log-space checks both sides are logarithms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(default)]
    pub context: BTreeMap<String, serde_json::Value>,
}

impl InequalityReport {
    pub fn new(lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let slack = rhs - lhs;
        Self { lhs, rhs, slack, tolerance, pass: slack >= -tolerance, context: BTreeMap::new() }
    }

    /// Report built from a precomputed slack (e.g. the minimum over many samples).
    pub fn from_slack(lhs: f64, rhs: f64, slack: f64, tolerance: f64) -> Self {
        Self { lhs, rhs, slack, tolerance, pass: slack.is_finite() && slack >= -tolerance, context: BTreeMap::new() }
    }

    pub fn with(mut self, key: &str, value: impl Serialize) -> Self {
        self.context.insert(key.to_string(), serde_json::to_value(value).unwrap_or(serde_json::Value::Null));
        self
    }
}

/// Keeps the worst (minimum-slack) sample of a family of checks.
#[derive(Debug, Clone)]
pub struct WorstCase {
    best: Option<(f64, f64, f64)>,
    pub samples: usize,
    pub violations: usize,
    tolerance: f64,
}

impl WorstCase {
    pub fn new(tolerance: f64) -> Self {
        Self { best: None, samples: 0, violations: 0, tolerance }
    }

    pub fn push(&mut self, lhs: f64, rhs: f64, slack: f64) {
        self.samples += 1;
        if !(slack >= -self.tolerance) {
            self.violations += 1;
        }
        match self.best {
            Some((_, _, s)) if !(slack < s) && slack.is_finite() => {}
            _ => self.best = Some((lhs, rhs, slack)),
        }
    }

    pub fn finish(self) -> InequalityReport {
        let (lhs, rhs, slack) = self.best.unwrap_or((0.0, 0.0, 0.0));
        let mut r = InequalityReport::from_slack(lhs, rhs, slack, self.tolerance);
        r.pass = r.pass && self.violations == 0;
        r.with("samples", self.samples).with("violations", self.violations)
    }
}
