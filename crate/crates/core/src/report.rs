//! Named pass/fail checks and the report that collects them.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Skip,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub id: String,
    pub deviation: Option<f64>,
    pub tolerance: Option<f64>,
    pub verdict: Verdict,
    pub method: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Check {
    /// Passes iff `deviation ≤ tolerance` (a NaN deviation fails).
    pub fn within(id: impl Into<String>, deviation: f64, tolerance: f64, method: impl Into<String>) -> Self {
        let verdict = if deviation <= tolerance { Verdict::Pass } else { Verdict::Fail };
        Self {
            id: id.into(),
            deviation: Some(deviation),
            tolerance: Some(tolerance),
            verdict,
            method: method.into(),
            note: None,
        }
    }

    /// Integer equality; the deviation is `|lhs − rhs|` with tolerance zero.
    pub fn equal(id: impl Into<String>, lhs: usize, rhs: usize, method: impl Into<String>) -> Self {
        Self::within(id, lhs.abs_diff(rhs) as f64, 0.0, method).with_note(format!("{lhs} vs {rhs}"))
    }

    /// A boolean property.
    pub fn holds(id: impl Into<String>, ok: bool, method: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            deviation: None,
            tolerance: None,
            verdict: if ok { Verdict::Pass } else { Verdict::Fail },
            method: method.into(),
            note: None,
        }
    }

    pub fn skip(id: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            deviation: None,
            tolerance: None,
            verdict: Verdict::Skip,
            method: "not-applicable".into(),
            note: Some(reason.into()),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn passed(&self) -> bool {
        self.verdict != Verdict::Fail
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub checks: Vec<Check>,
    pub env: BTreeMap<String, serde_json::Value>,
}

impl VerificationReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, check: Check) {
        self.checks.push(check);
    }

    /// Appends the checks of `other`, prefixing their ids.
    pub fn absorb(&mut self, prefix: &str, other: VerificationReport) {
        for mut c in other.checks {
            if !prefix.is_empty() {
                c.id = format!("{prefix}.{}", c.id);
            }
            self.checks.push(c);
        }
        for (k, v) in other.env {
            let key = if prefix.is_empty() { k } else { format!("{prefix}.{k}") };
            self.env.insert(key, v);
        }
    }

    pub fn set_env(&mut self, key: &str, value: impl Serialize) {
        self.env.insert(key.to_string(), serde_json::to_value(value).expect("env value serializes"));
    }

    /// True when no check failed.
    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed())
    }

    pub fn get(&self, id: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.id == id)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_follows_deviation() {
        assert_eq!(Check::within("a", 1e-13, 1e-12, "m").verdict, Verdict::Pass);
        assert_eq!(Check::within("a", 2e-12, 1e-12, "m").verdict, Verdict::Fail);
        assert_eq!(Check::within("a", f64::NAN, 1.0, "m").verdict, Verdict::Fail);
        assert_eq!(Check::equal("k", 52, 52, "dense").verdict, Verdict::Pass);
        assert_eq!(Check::equal("k", 52, 50, "dense").deviation, Some(2.0));
    }

    #[test]
    fn skips_do_not_fail_a_report() {
        let mut r = VerificationReport::new();
        r.push(Check::skip("x", "m = 0"));
        r.push(Check::holds("y", true, "exact"));
        assert!(r.passed());
        r.push(Check::holds("z", false, "exact"));
        assert!(!r.passed());
        assert_eq!(r.failures().count(), 1);
    }

    #[test]
    fn absorb_prefixes_ids() {
        let mut inner = VerificationReport::new();
        inner.push(Check::holds("gap", true, "dense"));
        inner.set_env("m", 1.0);
        let mut outer = VerificationReport::new();
        outer.absorb("trial7", inner);
        assert!(outer.get("trial7.gap").is_some());
        assert!(outer.env.contains_key("trial7.m"));
    }

    #[test]
    fn json_round_trip() {
        let mut r = VerificationReport::new();
        r.push(Check::within("a", 0.5, 1.0, "m").with_note("n"));
        r.set_env("h", 0.125);
        let back: VerificationReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
    }
}
