//! Check reports and their text/JSON renderings.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::diffpoly::DiffPoly;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    /// Passed on an explicitly stated, truncated range.
    CertifiedRange,
    /// Outcome of a probe that is recorded but not adjudicated.
    Recorded,
    /// The check could not run (bad parameters, unknown name, exhausted budget).
    Error,
}

impl Status {
    pub fn is_success(self) -> bool {
        matches!(self, Status::Pass | Status::CertifiedRange | Status::Recorded)
    }

    pub fn label(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::CertifiedRange => "CERTIFIED",
            Status::Recorded => "RECORDED",
            Status::Error => "ERROR",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub check: String,
    pub params: BTreeMap<String, serde_json::Value>,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certified_range: Option<BTreeMap<String, i64>>,
    pub elapsed_ms: u64,
    pub details: Vec<String>,
}

impl Report {
    pub fn new(check: impl Into<String>, status: Status) -> Self {
        Report {
            check: check.into(),
            params: BTreeMap::new(),
            status,
            certified_range: None,
            elapsed_ms: 0,
            details: Vec::new(),
        }
    }

    pub fn error(check: impl Into<String>, err: impl std::fmt::Display) -> Self {
        Self::new(check, Status::Error).with_detail(err.to_string())
    }

    pub fn with_param(mut self, key: &str, value: impl Into<serde_json::Value>) -> Self {
        self.params.insert(key.to_string(), value.into());
        self
    }

    pub fn with_detail(mut self, d: impl Into<String>) -> Self {
        self.details.push(d.into());
        self
    }

    pub fn push_detail(&mut self, d: impl Into<String>) {
        self.details.push(d.into());
    }

    pub fn with_range(mut self, range: impl IntoIterator<Item = (&'static str, i64)>) -> Self {
        self.certified_range = Some(range.into_iter().map(|(k, v)| (k.to_string(), v)).collect());
        self
    }

    /// Fold another report's outcome into this one: any failure fails the whole.
    pub fn absorb(&mut self, other: &Report, prefix: &str) {
        if other.status == Status::Error {
            self.status = Status::Error;
        } else if other.status == Status::Fail && self.status != Status::Error {
            self.status = Status::Fail;
        }
        for d in &other.details {
            self.details.push(format!("{prefix}{d}"));
        }
    }

    pub fn passed(&self) -> bool {
        self.status.is_success()
    }
}

/// Render nonzero residuals, one detail line per degree.
pub fn residual_details(label: &str, residuals: &[(i32, DiffPoly)]) -> Vec<String> {
    residuals.iter().map(|(d, p)| format!("{label} residual at D^{d}: {p}")).collect()
}

pub fn to_json(reports: &[Report]) -> String {
    serde_json::to_string_pretty(reports).expect("reports serialize")
}

pub fn from_json(s: &str) -> serde_json::Result<Vec<Report>> {
    serde_json::from_str(s)
}

pub fn to_text(reports: &[Report]) -> String {
    let mut out = String::new();
    let width = reports.iter().map(|r| r.check.len()).max().unwrap_or(5).max(5);
    let _ = writeln!(out, "{:<width$}  {:<9}  {:>10}  params", "check", "status", "elapsed_ms");
    for r in reports {
        let params = r
            .params
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(" ");
        let _ = writeln!(out, "{:<width$}  {:<9}  {:>10}  {}", r.check, r.status.label(), r.elapsed_ms, params);
        if let Some(range) = &r.certified_range {
            let range = range.iter().map(|(k, v)| format!("{k}<={v}")).collect::<Vec<_>>().join(", ");
            let _ = writeln!(out, "    certified range: {range}");
        }
        for d in &r.details {
            let _ = writeln!(out, "    {d}");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<Report> {
        vec![
            Report::new("kp.canonical", Status::Pass).with_param("O", 8).with_detail("window [-6, 3]"),
            Report::new("kp.thm33", Status::CertifiedRange)
                .with_param("indices", "1,0,0,1")
                .with_range([("m_degree", 2), ("eps_degree", 2)]),
        ]
    }

    #[test]
    fn json_round_trip() {
        let reports = sample();
        let s = to_json(&reports);
        assert_eq!(from_json(&s).unwrap(), reports);
        assert_eq!(to_json(&[]), "[]");
        assert!(s.contains("\"certified-range\""));
        assert!(!to_json(&reports[..1]).contains("certified_range"));
    }

    #[test]
    fn text_is_stable() {
        let a = to_text(&sample());
        assert_eq!(a, to_text(&sample()));
        assert!(a.lines().nth(1).unwrap().contains("PASS"));
    }

    #[test]
    fn success_statuses() {
        assert!(Status::Recorded.is_success());
        assert!(!Status::Fail.is_success());
        assert!(!Status::Error.is_success());
    }
}
