//! The JSON report every subcommand writes. Reading one back goes through
//! typed deserialization plus [`Report::validate`], which together act as
//! its schema.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::polar::PolarPoint;
use super::AppError;
use crate::compose::{AgReport, CheckResult};
use crate::contracts::Property;
use crate::guard::StreamStats;
use crate::network::Network;
use crate::regions::{Metric, Region};
use crate::verifier::{FullVerification, SafetySummary, Status, UnknownReason};

pub const TOOL: &str = "safecomp";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetReport {
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<UnknownReason>,
    pub nodes: u64,
    pub max_depth: u32,
    pub elapsed_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionReport {
    pub id: String,
    pub expected_label: String,
    pub metric: Metric,
    pub radius: f64,
    pub member_count: usize,
    /// `fully_safe`, `targeted_safe`, `not_safe` or `inconclusive`; absent
    /// before verification.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<String>,
    /// Keyed by target label name.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub targets: BTreeMap<String, TargetReport>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContractSummary {
    pub regions: usize,
    pub fully_safe: usize,
    pub targeted_safe: usize,
    #[serde(rename = "unsafe")]
    pub not_safe: usize,
    pub inconclusive: usize,
}

impl ContractSummary {
    pub fn add(&mut self, s: &SafetySummary) {
        self.regions += 1;
        match s {
            SafetySummary::FullySafe => self.fully_safe += 1,
            SafetySummary::TargetedSafe { .. } => self.targeted_safe += 1,
            SafetySummary::NotSafe => self.not_safe += 1,
            SafetySummary::Inconclusive { .. } => self.inconclusive += 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CounterexampleReport {
    pub region: String,
    pub target: String,
    /// Normalized input.
    pub point: Vec<f64>,
    /// The same input in raw units.
    pub raw: Vec<f64>,
    pub scores: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polar: Option<PolarPoint>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropertyCheck {
    pub property: Property,
    pub result: CheckResult,
}

/// Run facts that legitimately differ between otherwise identical runs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Execution {
    pub workers: usize,
    pub elapsed_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: BTreeMap<String, Value>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub regions: Vec<RegionReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<ContractSummary>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub counterexamples: Vec<CounterexampleReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub checks: Vec<PropertyCheck>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proof: Option<AgReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guard: Option<StreamStats>,
    /// Files written by the run, by role.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub outputs: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    pub execution: Execution,
}

impl Report {
    pub fn new(command: impl Into<String>) -> Self {
        Report {
            tool: TOOL.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config: BTreeMap::new(),
            regions: Vec::new(),
            summary: None,
            counterexamples: Vec::new(),
            checks: Vec::new(),
            proof: None,
            guard: None,
            outputs: BTreeMap::new(),
            notes: Vec::new(),
            execution: Execution::default(),
        }
    }

    pub fn echo(&mut self, key: &str, value: impl Serialize) {
        self.config.insert(
            key.to_string(),
            serde_json::to_value(value).unwrap_or(Value::Null),
        );
    }

    /// Region list without verdicts, as after discovery.
    pub fn add_regions(&mut self, regions: &[Region], label_names: &[String]) {
        let mut sorted: Vec<&Region> = regions.iter().collect();
        sorted.sort_by(|a, b| a.id.cmp(&b.id));
        for r in sorted {
            self.regions.push(RegionReport {
                id: r.id.clone(),
                expected_label: label_name(label_names, r.expected_label),
                metric: r.metric,
                radius: r.radius,
                member_count: r.member_count,
                summary: None,
                targets: BTreeMap::new(),
            });
        }
    }

    /// Per-region verdicts, the summary counts and every counterexample.
    /// `results` must already be sorted by region id.
    pub fn add_verification(
        &mut self,
        net: &Network,
        results: &[(Region, FullVerification)],
        polar_dims: Option<(usize, usize)>,
    ) -> Result<(), AppError> {
        let mut summary = ContractSummary::default();
        for (r, fv) in results {
            summary.add(&fv.summary);
            let mut targets = BTreeMap::new();
            for (t, v) in &fv.verdicts {
                let target = label_name(&net.labels, *t);
                targets.insert(
                    target.clone(),
                    TargetReport {
                        status: v.status,
                        reason: v.reason,
                        nodes: v.stats.nodes,
                        max_depth: v.stats.max_depth,
                        elapsed_secs: v.stats.elapsed_secs,
                    },
                );
                if let Some(cx) = &v.counterexample {
                    let raw = net.denormalize(&cx.point)?;
                    let polar =
                        polar_dims.map(|(rho, theta)| PolarPoint::from_raw(&raw, rho, theta));
                    self.counterexamples.push(CounterexampleReport {
                        region: r.id.clone(),
                        target,
                        point: cx.point.clone(),
                        raw,
                        scores: cx.scores.clone(),
                        polar,
                    });
                }
            }
            self.regions.push(RegionReport {
                id: r.id.clone(),
                expected_label: label_name(&net.labels, r.expected_label),
                metric: r.metric,
                radius: r.radius,
                member_count: r.member_count,
                summary: Some(fv.summary.name().to_string()),
                targets,
            });
        }
        self.summary = Some(summary);
        Ok(())
    }

    /// Zeroes every field that depends on timing or the worker count.
    pub fn mask_timing(&mut self) {
        self.execution = Execution::default();
        for r in &mut self.regions {
            for t in r.targets.values_mut() {
                t.elapsed_secs = 0.0;
            }
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.tool != TOOL {
            return Err(format!("tool must be `{TOOL}`"));
        }
        if self.version.is_empty() || self.command.is_empty() {
            return Err("version and command must be non-empty".into());
        }
        for w in self.regions.windows(2) {
            if w[0].id >= w[1].id {
                return Err(format!("region ids not unique and sorted at `{}`", w[1].id));
            }
        }
        const KINDS: [&str; 4] = ["fully_safe", "targeted_safe", "not_safe", "inconclusive"];
        for r in &self.regions {
            if !(r.radius.is_finite() && r.radius >= 0.0) {
                return Err(format!("region {}: bad radius", r.id));
            }
            if let Some(s) = &r.summary {
                if !KINDS.contains(&s.as_str()) {
                    return Err(format!("region {}: unknown summary `{s}`", r.id));
                }
            }
            if r.targets.contains_key(&r.expected_label) {
                return Err(format!("region {}: verdict against its own label", r.id));
            }
        }
        if let Some(s) = &self.summary {
            if s.fully_safe + s.targeted_safe + s.not_safe + s.inconclusive != s.regions {
                return Err("summary counts do not add up".into());
            }
            let verified = self.regions.iter().filter(|r| r.summary.is_some()).count();
            if verified != s.regions {
                return Err(format!(
                    "summary counts {} regions, report lists {verified}",
                    s.regions
                ));
            }
        }
        let ids: BTreeSet<&str> = self.regions.iter().map(|r| r.id.as_str()).collect();
        for c in &self.counterexamples {
            if !ids.contains(c.region.as_str()) {
                return Err(format!("counterexample for unlisted region `{}`", c.region));
            }
            if c.point.len() != c.raw.len() || c.point.iter().chain(&c.raw).any(|v| !v.is_finite())
            {
                return Err(format!("counterexample for `{}` is malformed", c.region));
            }
        }
        if let Some(p) = &self.proof {
            if p.conclusion != p.premises.iter().all(|x| x.holds) {
                return Err("proof conclusion disagrees with its premises".into());
            }
        }
        if !(self.execution.elapsed_secs.is_finite() && self.execution.elapsed_secs >= 0.0) {
            return Err("bad elapsed time".into());
        }
        Ok(())
    }
}

fn label_name(labels: &[String], i: usize) -> String {
    labels.get(i).cloned().unwrap_or_else(|| i.to_string())
}

pub fn render_report(r: &Report) -> String {
    let mut s = serde_json::to_string_pretty(r).expect("report serializes");
    s.push('\n');
    s
}

pub fn parse_report(text: &str) -> Result<Report, AppError> {
    let r: Report = serde_json::from_str(text)?;
    r.validate().map_err(AppError::Input)?;
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_round_trip() {
        let mut r = Report::new("grid");
        r.echo("rows", 4);
        r.execution.elapsed_secs = 0.25;
        let back = parse_report(&render_report(&r)).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn rejects_unknown_fields_and_bad_order() {
        let r = Report::new("x");
        let mut v: Value = serde_json::from_str(&render_report(&r)).unwrap();
        v["extra"] = Value::Bool(true);
        assert!(parse_report(&v.to_string()).is_err());

        let mut r = Report::new("x");
        for id in ["r0002", "r0001"] {
            r.regions.push(RegionReport {
                id: id.into(),
                expected_label: "a".into(),
                metric: Metric::L1,
                radius: 0.1,
                member_count: 3,
                summary: None,
                targets: BTreeMap::new(),
            });
        }
        assert!(r.validate().is_err());
        r.regions.reverse();
        assert!(r.validate().is_ok());
        r.summary = Some(ContractSummary {
            regions: 2,
            fully_safe: 2,
            ..Default::default()
        });
        assert!(r.validate().is_err());
    }
}
