//! Check records, per-scenario reports and their aggregate.

use serde::{Deserialize, Serialize};

/// Where an expected value comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    /// Stated outright in the source analysis.
    Paper,
    /// Follows from definitions or arithmetic.
    Trivial,
    /// Obtained from an independent oracle or closed form.
    Derived,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckVerdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub expected: f64,
    pub actual: f64,
    pub tolerance: f64,
    pub verdict: CheckVerdict,
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub inconclusive_allowed: bool,
    /// Set for checks against a time budget; their values vary between runs.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub timing: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Check {
    /// `|actual − expected| ≤ tolerance`.
    pub fn close(name: &str, expected: f64, actual: f64, tolerance: f64, provenance: Provenance) -> Self {
        let ok = (actual - expected).abs() <= tolerance;
        Self::make(name, expected, actual, tolerance, ok, provenance)
    }

    /// `|actual/expected − 1| ≤ tolerance`.
    pub fn relative(name: &str, expected: f64, actual: f64, tolerance: f64, provenance: Provenance) -> Self {
        let ok = (actual / expected - 1.0).abs() <= tolerance;
        Self::make(name, expected, actual, tolerance, ok, provenance)
    }

    /// `actual ≤ expected + tolerance`.
    pub fn at_most(name: &str, limit: f64, actual: f64, tolerance: f64, provenance: Provenance) -> Self {
        let ok = actual <= limit + tolerance;
        Self::make(name, limit, actual, tolerance, ok, provenance)
    }

    /// `actual ≥ expected − tolerance`.
    pub fn at_least(name: &str, limit: f64, actual: f64, tolerance: f64, provenance: Provenance) -> Self {
        let ok = actual >= limit - tolerance;
        Self::make(name, limit, actual, tolerance, ok, provenance)
    }

    /// A yes/no property, recorded as expected 1 and actual 1 or 0.
    pub fn holds(name: &str, ok: bool, provenance: Provenance) -> Self {
        Self::make(name, 1.0, if ok { 1.0 } else { 0.0 }, 0.0, ok, provenance)
    }

    pub fn budget(name: &str, seconds: f64, limit: f64) -> Self {
        let mut c = Self::at_most(name, limit, seconds, 0.0, Provenance::Trivial);
        c.timing = true;
        c
    }

    /// An operation that should have produced a value failed.
    pub fn failed(name: &str, expected: f64, provenance: Provenance, err: impl std::fmt::Display) -> Self {
        let mut c = Self::make(name, expected, f64::NAN, 0.0, false, provenance);
        c.note = Some(err.to_string());
        c
    }

    fn make(name: &str, expected: f64, actual: f64, tolerance: f64, ok: bool, provenance: Provenance) -> Self {
        Self {
            name: name.to_string(),
            expected,
            actual,
            tolerance,
            verdict: if ok { CheckVerdict::Pass } else { CheckVerdict::Fail },
            provenance,
            inconclusive_allowed: false,
            timing: false,
            note: None,
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    /// Marks the check inconclusive; the scenario may still pass.
    pub fn inconclusive(mut self) -> Self {
        self.verdict = CheckVerdict::Inconclusive;
        self.inconclusive_allowed = true;
        self
    }

    pub fn passes(&self) -> bool {
        match self.verdict {
            CheckVerdict::Pass => true,
            CheckVerdict::Inconclusive => self.inconclusive_allowed,
            CheckVerdict::Fail => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub scenario: String,
    pub description: String,
    pub tags: Vec<String>,
    pub checks: Vec<Check>,
    pub pass: bool,
    pub wall_time_s: f64,
    pub version: String,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter: Option<String>,
    pub reports: Vec<Report>,
    pub passed: usize,
    pub failed: usize,
    pub pass: bool,
    pub wall_time_s: f64,
    pub version: String,
    pub config_hash: String,
}

impl Aggregate {
    pub fn exit_code(&self) -> i32 {
        if self.pass {
            0
        } else {
            1
        }
    }
}

/// JSON value with every run-dependent field removed: wall times and checks
/// against time budgets.
pub fn strip_timing(v: &serde_json::Value) -> serde_json::Value {
    use serde_json::Value;
    match v {
        Value::Object(map) => {
            let mut out = serde_json::Map::new();
            for (k, x) in map {
                if k == "wall_time_s" {
                    continue;
                }
                if k == "checks" {
                    if let Value::Array(items) = x {
                        let kept = items
                            .iter()
                            .filter(|c| c.get("timing") != Some(&Value::Bool(true)))
                            .map(strip_timing)
                            .collect();
                        out.insert(k.clone(), Value::Array(kept));
                        continue;
                    }
                }
                out.insert(k.clone(), strip_timing(x));
            }
            Value::Object(out)
        }
        Value::Array(items) => Value::Array(items.iter().map(strip_timing).collect()),
        other => other.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn check_kinds() {
        assert!(Check::close("a", 1.0, 1.0 + 1e-9, 1e-8, Provenance::Trivial).passes());
        assert!(!Check::close("a", 1.0, 1.1, 1e-8, Provenance::Trivial).passes());
        assert!(Check::relative("r", 100.0, 101.0, 0.02, Provenance::Derived).passes());
        assert!(!Check::failed("x", 1.0, Provenance::Paper, "boom").passes());
        assert!(Check::holds("h", false, Provenance::Trivial).inconclusive().passes());
        let nan = Check::close("n", 1.0, f64::NAN, 1.0, Provenance::Trivial);
        assert!(!nan.passes());
    }

    #[test]
    fn timing_is_stripped() {
        let r = Report {
            scenario: "s".into(),
            description: String::new(),
            tags: vec![],
            checks: vec![Check::budget("t", 0.5, 1.0), Check::holds("h", true, Provenance::Trivial)],
            pass: true,
            wall_time_s: 0.3,
            version: "v".into(),
            config_hash: "c".into(),
        };
        let v = strip_timing(&serde_json::to_value(&r).unwrap());
        assert!(v.get("wall_time_s").is_none());
        assert_eq!(v["checks"].as_array().unwrap().len(), 1);
    }
}
