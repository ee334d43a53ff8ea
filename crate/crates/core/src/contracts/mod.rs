//! Region contracts for classifiers and assume-guarantee contracts for
//! components, with their JSON and text forms.

pub mod property;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::Network;
use crate::regions::{dist, Metric, Region};
use crate::verifier::{FullVerification, SafetySummary, Status, UnknownReason};

pub use property::{
    parse_property, render_property, Conj, Consequent, Literal, Property, PropertyError,
};

#[derive(Debug, Error)]
pub enum ContractError {
    #[error("duplicate region id `{0}`")]
    DuplicateRegion(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid contract: {0}")]
    Invalid(String),
    #[error(transparent)]
    Property(#[from] PropertyError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// What a region contract promises about every input inside its region.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Guarantee {
    LabelIs(String),
    LabelNotIn(BTreeSet<String>),
}

impl Guarantee {
    /// Whether `label` is allowed by the guarantee.
    pub fn allows(&self, label: &str) -> bool {
        match self {
            Guarantee::LabelIs(l) => l == label,
            Guarantee::LabelNotIn(ex) => !ex.contains(label),
        }
    }
}

/// Where a contract entry came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub network: String,
    /// Summary kind of the full verification: `fully_safe`, `targeted_safe`, ...
    pub summary: String,
    pub expected_label: String,
    pub member_count: usize,
    /// Target labels the verifier proved unreachable inside the region.
    pub proved_safe: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionContract {
    pub id: String,
    pub metric: Metric,
    pub centroid: Vec<f64>,
    pub radius: f64,
    pub guarantee: Guarantee,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uncertainty_max: Option<f64>,
    pub provenance: Provenance,
}

impl RegionContract {
    /// Closed-ball membership, same rule as [`crate::regions::region_membership`].
    pub fn contains(&self, x: &[f64]) -> Result<bool, ContractError> {
        if x.len() != self.centroid.len() {
            return Err(ContractError::Dimension {
                expected: self.centroid.len(),
                got: x.len(),
            });
        }
        Ok(dist(self.metric, x, &self.centroid).is_ok_and(|d| d <= self.radius))
    }

    pub fn validate(&self) -> Result<(), ContractError> {
        let bad = |m: String| Err(ContractError::Invalid(format!("region {}: {m}", self.id)));
        if self.centroid.is_empty() || self.centroid.iter().any(|c| !c.is_finite()) {
            return bad("centroid must be a non-empty finite vector".into());
        }
        if !(self.radius.is_finite() && self.radius >= 0.0) {
            return bad(format!(
                "radius {} must be finite and non-negative",
                self.radius
            ));
        }
        if let Some(u) = self.uncertainty_max {
            if !(u > 0.0 && u <= 1.0) {
                return bad(format!("uncertainty_max {u} must lie in (0, 1]"));
            }
        }
        match &self.guarantee {
            Guarantee::LabelIs(l) if *l != self.provenance.expected_label => bad(format!(
                "label_is({l}) differs from expected label {}",
                self.provenance.expected_label
            )),
            Guarantee::LabelNotIn(ex) if ex.is_empty() => {
                bad("label_not_in with an empty set".into())
            }
            Guarantee::LabelNotIn(ex) if ex.contains(&self.provenance.expected_label) => {
                bad("label_not_in excludes the expected label".into())
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnexCounterexample {
    pub target: String,
    pub point: Vec<f64>,
    pub scores: Vec<f64>,
}

/// A region that did not make it into the contract, kept as evidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnexEntry {
    pub id: String,
    pub metric: Metric,
    pub centroid: Vec<f64>,
    pub radius: f64,
    pub provenance: Provenance,
    #[serde(default)]
    pub counterexamples: Vec<AnnexCounterexample>,
    /// Targets that stayed undecided, with the reason.
    #[serde(default)]
    pub unknown: BTreeMap<String, UnknownReason>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DnnContract {
    pub network: String,
    pub regions: Vec<RegionContract>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub annex: Vec<AnnexEntry>,
}

impl DnnContract {
    pub fn empty(network: impl Into<String>) -> Self {
        DnnContract {
            network: network.into(),
            regions: Vec::new(),
            annex: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), ContractError> {
        let mut seen = BTreeSet::new();
        let ids = self
            .regions
            .iter()
            .map(|r| &r.id)
            .chain(self.annex.iter().map(|a| &a.id));
        for id in ids {
            if !seen.insert(id) {
                return Err(ContractError::DuplicateRegion(id.clone()));
            }
        }
        let dim = self.regions.first().map(|r| r.centroid.len());
        for r in &self.regions {
            r.validate()?;
            if Some(r.centroid.len()) != dim {
                return Err(ContractError::Invalid(format!(
                    "region {} has a different dimension",
                    r.id
                )));
            }
            if r.provenance.network != self.network {
                return Err(ContractError::Invalid(format!(
                    "region {} comes from another network",
                    r.id
                )));
            }
        }
        Ok(())
    }

    /// Regions in id order.
    pub fn sorted_regions(&self) -> Vec<&RegionContract> {
        let mut v: Vec<&RegionContract> = self.regions.iter().collect();
        v.sort_by(|a, b| a.id.cmp(&b.id));
        v
    }

    /// Every label named by any guarantee.
    pub fn labels(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        for r in &self.regions {
            match &r.guarantee {
                Guarantee::LabelIs(l) => {
                    out.insert(l.as_str());
                }
                Guarantee::LabelNotIn(ex) => out.extend(ex.iter().map(String::as_str)),
            }
            out.insert(r.provenance.expected_label.as_str());
        }
        out
    }
}

/// Answer of a contract for one input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Determination {
    Determined {
        region: String,
        guarantee: Guarantee,
    },
    Undetermined,
}

/// The lowest-id region containing `x` determines the answer.
pub fn check_point_against_contract(
    c: &DnnContract,
    x: &[f64],
) -> Result<Determination, ContractError> {
    for r in c.sorted_regions() {
        if r.contains(x)? {
            return Ok(Determination::Determined {
                region: r.id.clone(),
                guarantee: r.guarantee.clone(),
            });
        }
    }
    Ok(Determination::Undetermined)
}

/// Builds the contract from per-region verification results of `net`.
///
/// Fully safe regions guarantee their expected label, targeted-safe ones
/// exclude exactly the targets proved safe. Everything else goes to the
/// annex together with its counterexamples.
pub fn emit_dnn_contract(
    net: &Network,
    results: &[(Region, FullVerification)],
) -> Result<DnnContract, ContractError> {
    let name = |i: usize| net.labels.get(i).cloned().unwrap_or_else(|| i.to_string());
    let mut contract = DnnContract::empty(net.name.clone());
    let mut seen = BTreeSet::new();
    for (region, full) in results {
        if !seen.insert(region.id.clone()) {
            return Err(ContractError::DuplicateRegion(region.id.clone()));
        }
        let proved: Vec<String> = full
            .verdicts
            .iter()
            .filter(|(_, v)| v.status == Status::Safe)
            .map(|(t, _)| name(*t))
            .collect();
        let provenance = Provenance {
            network: net.name.clone(),
            summary: full.summary.name().to_string(),
            expected_label: name(region.expected_label),
            member_count: region.member_count,
            proved_safe: proved,
        };
        let guarantee = match &full.summary {
            SafetySummary::FullySafe => Some(Guarantee::LabelIs(name(region.expected_label))),
            SafetySummary::TargetedSafe { safe } => Some(Guarantee::LabelNotIn(
                safe.iter().map(|&t| name(t)).collect(),
            )),
            SafetySummary::NotSafe | SafetySummary::Inconclusive { .. } => None,
        };
        match guarantee {
            Some(guarantee) => contract.regions.push(RegionContract {
                id: region.id.clone(),
                metric: region.metric,
                centroid: region.centroid.clone(),
                radius: region.radius,
                guarantee,
                uncertainty_max: None,
                provenance,
            }),
            None => contract.annex.push(AnnexEntry {
                id: region.id.clone(),
                metric: region.metric,
                centroid: region.centroid.clone(),
                radius: region.radius,
                provenance,
                counterexamples: full
                    .verdicts
                    .iter()
                    .filter_map(|(t, v)| {
                        v.counterexample.as_ref().map(|c| AnnexCounterexample {
                            target: name(*t),
                            point: c.point.clone(),
                            scores: c.scores.clone(),
                        })
                    })
                    .collect(),
                unknown: full
                    .verdicts
                    .iter()
                    .filter(|(_, v)| v.status == Status::Unknown)
                    .map(|(t, v)| (name(*t), v.reason.unwrap_or(UnknownReason::Budget)))
                    .collect(),
            }),
        }
    }
    contract.regions.sort_by(|a, b| a.id.cmp(&b.id));
    contract.annex.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(contract)
}

pub fn render_dnn_contract(c: &DnnContract) -> String {
    serde_json::to_string_pretty(c).expect("contract serializes")
}

pub fn parse_dnn_contract(text: &str) -> Result<DnnContract, ContractError> {
    let c: DnnContract = serde_json::from_str(text)?;
    c.validate()?;
    Ok(c)
}

/// `true` or a property; the text form of each is its JSON form.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Assumption {
    True,
    Holds(Property),
}

impl Assumption {
    pub fn property(&self) -> Option<&Property> {
        match self {
            Assumption::True => None,
            Assumption::Holds(p) => Some(p),
        }
    }
}

impl fmt::Display for Assumption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Assumption::True => f.write_str("true"),
            Assumption::Holds(p) => p.fmt(f),
        }
    }
}

impl FromStr for Assumption {
    type Err = PropertyError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.trim() == "true" {
            Ok(Assumption::True)
        } else {
            parse_property(s).map(Assumption::Holds)
        }
    }
}

impl TryFrom<String> for Assumption {
    type Error = PropertyError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Assumption> for String {
    fn from(a: Assumption) -> String {
        a.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentContract {
    pub name: String,
    pub assume: Assumption,
    pub guarantee: Property,
}

impl ComponentContract {
    pub fn new(name: impl Into<String>, assume: Assumption, guarantee: Property) -> Self {
        ComponentContract {
            name: name.into(),
            assume,
            guarantee,
        }
    }

    pub fn ports(&self) -> BTreeSet<&str> {
        let mut p = self.guarantee.ports();
        if let Some(a) = self.assume.property() {
            p.extend(a.ports());
        }
        p
    }
}

pub fn render_component_contract(c: &ComponentContract) -> String {
    serde_json::to_string_pretty(c).expect("contract serializes")
}

pub fn parse_component_contract(text: &str) -> Result<ComponentContract, ContractError> {
    Ok(serde_json::from_str(text)?)
}

/// Anything with a canonical text form.
pub enum Renderable<'a> {
    Dnn(&'a DnnContract),
    Component(&'a ComponentContract),
    Property(&'a Property),
}

pub fn render_contract(c: Renderable<'_>) -> String {
    match c {
        Renderable::Dnn(c) => render_dnn_contract(c),
        Renderable::Component(c) => render_component_contract(c),
        Renderable::Property(p) => render_property(p),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verifier::{Counterexample, Verdict, VerifyStats};

    fn provenance(expected: &str, summary: &str) -> Provenance {
        Provenance {
            network: "acas".into(),
            summary: summary.into(),
            expected_label: expected.into(),
            member_count: 12,
            proved_safe: vec![],
        }
    }

    fn coc_contract() -> DnnContract {
        DnnContract {
            network: "acas".into(),
            regions: vec![RegionContract {
                id: "r0000".into(),
                metric: Metric::L1,
                centroid: vec![0.19, 0.31, 0.28, 0.33, 0.33],
                radius: 0.28,
                guarantee: Guarantee::LabelIs("COC".into()),
                uncertainty_max: None,
                provenance: provenance("COC", "fully_safe"),
            }],
            annex: vec![],
        }
    }

    #[test]
    fn coc_contract_round_trip_and_lookup() {
        let c = coc_contract();
        let text = render_dnn_contract(&c);
        assert!(text.contains("\"label_is\": \"COC\""));
        assert!(text.contains("\"metric\": \"L1\""));
        assert!(text.contains("0.28"));
        assert_eq!(parse_dnn_contract(&text).unwrap(), c);
        let d = check_point_against_contract(&c, &[0.19, 0.31, 0.28, 0.33, 0.33]).unwrap();
        assert_eq!(
            d,
            Determination::Determined {
                region: "r0000".into(),
                guarantee: Guarantee::LabelIs("COC".into())
            }
        );
    }

    #[test]
    fn empty_contract_json() {
        let c = DnnContract::empty("net");
        assert_eq!(
            serde_json::to_string(&c).unwrap(),
            r#"{"network":"net","regions":[]}"#
        );
    }

    #[test]
    fn outside_and_overlap() {
        let mut c = coc_contract();
        assert_eq!(
            check_point_against_contract(&c, &[0.9; 5]).unwrap(),
            Determination::Undetermined
        );
        let mut other = c.regions[0].clone();
        other.id = "a0".into();
        other.guarantee = Guarantee::LabelNotIn(["SR".to_string()].into());
        c.regions.push(other);
        match check_point_against_contract(&c, &[0.19, 0.31, 0.28, 0.33, 0.33]).unwrap() {
            Determination::Determined { region, .. } => assert_eq!(region, "a0"),
            d => panic!("{d:?}"),
        }
        assert!(matches!(
            check_point_against_contract(&c, &[0.1]),
            Err(ContractError::Dimension {
                expected: 5,
                got: 1
            })
        ));
    }

    #[test]
    fn validation_rules() {
        let mut c = coc_contract();
        c.regions.push(c.regions[0].clone());
        assert!(matches!(
            c.validate(),
            Err(ContractError::DuplicateRegion(_))
        ));

        let mut c = coc_contract();
        c.regions[0].guarantee = Guarantee::LabelNotIn(["COC".to_string()].into());
        assert!(c.validate().is_err());

        let mut c = coc_contract();
        c.regions[0].uncertainty_max = Some(0.0);
        assert!(c.validate().is_err());
        c.regions[0].uncertainty_max = Some(1.0);
        assert!(c.validate().is_ok());

        let text =
            render_dnn_contract(&coc_contract()).replace("\"radius\"", "\"extra\": 1, \"radius\"");
        assert!(parse_dnn_contract(&text).is_err());
    }

    fn verdict(status: Status, cex: Option<Vec<f64>>) -> Verdict {
        Verdict {
            status,
            counterexample: cex.map(|p| Counterexample {
                scores: vec![0.0; 3],
                point: p,
            }),
            reason: (status == Status::Unknown).then_some(UnknownReason::Budget),
            stats: VerifyStats {
                nodes: 1,
                max_depth: 0,
                elapsed_secs: 0.0,
            },
        }
    }

    fn region(id: &str, expected: usize) -> Region {
        Region {
            id: id.into(),
            centroid: vec![0.5, 0.5],
            radius: 0.1,
            metric: Metric::Linf,
            expected_label: expected,
            member_count: 4,
            member_indices: vec![0, 1, 2, 3],
        }
    }

    fn full(verdicts: Vec<(usize, Verdict)>) -> FullVerification {
        let verdicts: BTreeMap<usize, Verdict> = verdicts.into_iter().collect();
        let summary = SafetySummary::from_verdicts(&verdicts);
        FullVerification { verdicts, summary }
    }

    #[test]
    fn emission_rules() {
        let net = crate::network::random::random_network(1, 2, &[3], 3);
        let net = Network {
            name: "acas".into(),
            labels: vec!["COC".into(), "WL".into(), "StrongRight".into()],
            ..net
        };
        let results = vec![
            (
                region("r2", 0),
                full(vec![
                    (1, verdict(Status::Safe, None)),
                    (2, verdict(Status::Safe, None)),
                ]),
            ),
            (
                region("r1", 0),
                full(vec![
                    (1, verdict(Status::Unsafe, Some(vec![0.5, 0.55]))),
                    (2, verdict(Status::Safe, None)),
                ]),
            ),
            (
                region("r3", 1),
                full(vec![
                    (0, verdict(Status::Unsafe, Some(vec![0.41, 0.5]))),
                    (2, verdict(Status::Unknown, None)),
                ]),
            ),
            (
                region("r4", 1),
                full(vec![
                    (0, verdict(Status::Safe, None)),
                    (2, verdict(Status::Unknown, None)),
                ]),
            ),
        ];
        let c = emit_dnn_contract(&net, &results).unwrap();
        c.validate().unwrap();
        assert_eq!(c.regions.len(), 2);
        assert_eq!(c.regions[0].id, "r1");
        assert_eq!(
            c.regions[0].guarantee,
            Guarantee::LabelNotIn(["StrongRight".to_string()].into())
        );
        assert_eq!(c.regions[1].guarantee, Guarantee::LabelIs("COC".into()));
        // every contract entry traces to safe verdicts
        for r in &c.regions {
            assert!(matches!(
                r.provenance.summary.as_str(),
                "fully_safe" | "targeted_safe"
            ));
            assert!(!r.provenance.proved_safe.is_empty());
        }
        assert_eq!(
            c.annex.iter().map(|a| a.id.as_str()).collect::<Vec<_>>(),
            vec!["r3", "r4"]
        );
        assert_eq!(c.annex[0].counterexamples[0].target, "COC");
        assert_eq!(
            c.annex[0].unknown.keys().collect::<Vec<_>>(),
            vec!["StrongRight"]
        );
        assert_eq!(parse_dnn_contract(&render_dnn_contract(&c)).unwrap(), c);

        assert_eq!(emit_dnn_contract(&net, &[]).unwrap().regions, vec![]);
        let dup = vec![results[0].clone(), results[0].clone()];
        assert!(matches!(
            emit_dnn_contract(&net, &dup),
            Err(ContractError::DuplicateRegion(_))
        ));
    }

    #[test]
    fn component_contract_json() {
        let c = ComponentContract::new(
            "M1",
            Assumption::True,
            parse_property("G (Class=red => F<=3 (velocity=0))").unwrap(),
        );
        let text = render_component_contract(&c);
        assert!(text.contains("\"assume\": \"true\""));
        assert!(text.contains("\"guarantee\": \"G (Class=red => F<=3 (velocity=0))\""));
        assert_eq!(parse_component_contract(&text).unwrap(), c);
        assert_eq!(c.ports(), ["Class", "velocity"].into_iter().collect());
        assert!(parse_component_contract(
            r#"{"name":"x","assume":"G (","guarantee":"G (a=1 => b=1)"}"#
        )
        .is_err());
    }
}
