use serde::{Deserialize, Serialize};

/// How an estimate is compared with its target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    /// `|estimate - target| <= tolerance`
    Within,
    /// `estimate <= target + tolerance`
    AtMost,
    /// `estimate >= target - tolerance`
    AtLeast,
}

impl Rule {
    pub fn name(&self) -> &'static str {
        match self {
            Rule::Within => "within",
            Rule::AtMost => "at-most",
            Rule::AtLeast => "at-least",
        }
    }

    pub fn accepts(&self, estimate: f64, target: f64, tolerance: f64) -> bool {
        match self {
            Rule::Within => (estimate - target).abs() <= tolerance,
            Rule::AtMost => estimate <= target + tolerance,
            Rule::AtLeast => estimate >= target - tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub metric: String,
    /// Free-form `key=value;...` description of the evaluated point.
    pub params: String,
    pub estimate: f64,
    pub stderr: f64,
    pub target: f64,
    pub tolerance: f64,
    pub rule: Rule,
    pub pass: bool,
}

impl StatsReport {
    pub fn new(
        metric: impl Into<String>,
        params: impl Into<String>,
        estimate: f64,
        stderr: f64,
        target: f64,
        tolerance: f64,
        rule: Rule,
    ) -> Self {
        Self {
            metric: metric.into(),
            params: params.into(),
            estimate,
            stderr,
            target,
            tolerance,
            rule,
            pass: rule.accepts(estimate, target, tolerance),
        }
    }

    /// A pass/fail condition encoded as estimate 1 (true) or 0 (false) against target 1.
    pub fn condition(metric: impl Into<String>, params: impl Into<String>, holds: bool) -> Self {
        Self::new(metric, params, if holds { 1.0 } else { 0.0 }, 0.0, 1.0, 0.0, Rule::AtLeast)
    }
}
