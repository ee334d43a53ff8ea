//! The assume-guarantee rule for a two-part system, and the finite
//! abstraction of a classifier through its region contract.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::check::{check_property, CheckResult};
use super::model::{ComponentBuilder, ComponentModel, Port};
use super::monitor::most_general_environment;
use super::system::System;
use super::ComposeError;
use crate::contracts::{Assumption, ComponentContract, DnnContract, Guarantee, Property};

/// Port names and label set of the classifier abstraction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbstractionConfig {
    pub name: String,
    /// Input: which contract region the current input falls in, or `outside`.
    pub token_port: String,
    /// Output: the true class of the scene.
    pub scene_port: String,
    /// Output: the classifier's answer.
    pub class_port: String,
    pub labels: Vec<String>,
    /// Answer forced by a runtime guard for inputs outside every region.
    pub fail_safe: Option<String>,
}

pub const OUTSIDE: &str = "outside";

impl AbstractionConfig {
    pub fn new(labels: &[&str]) -> Self {
        AbstractionConfig {
            name: "NN".into(),
            token_port: "img".into(),
            scene_port: "x".into(),
            class_port: "Class".into(),
            labels: labels.iter().map(|s| s.to_string()).collect(),
            fail_safe: None,
        }
    }

    pub fn guarded(mut self, fail_safe: &str) -> Self {
        self.fail_safe = Some(fail_safe.to_string());
        self
    }
}

/// Finite abstraction of a classifier. Each tick the environment picks a
/// token (a contract region or `outside`); next tick the component shows a
/// scene class and an answer consistent with that token: the guaranteed
/// label for `label_is`, any allowed label for `label_not_in`, anything
/// (or the fail-safe answer) for `outside`. The scene class of a region is
/// its expected label.
pub fn abstract_dnn_component(
    c: &DnnContract,
    cfg: &AbstractionConfig,
) -> Result<ComponentModel, ComposeError> {
    let labels = &cfg.labels;
    if labels.is_empty() {
        return Err(ComposeError::Invalid(
            "abstraction needs at least one label".into(),
        ));
    }
    let known = |l: &str| -> Result<(), ComposeError> {
        if labels.iter().any(|x| x == l) {
            Ok(())
        } else {
            Err(ComposeError::UnknownValue {
                port: cfg.class_port.clone(),
                value: l.to_string(),
            })
        }
    };
    if let Some(f) = &cfg.fail_safe {
        known(f)?;
    }
    let mut tokens: Vec<(String, Vec<(String, String)>)> = Vec::new();
    for r in c.sorted_regions() {
        let scene = &r.provenance.expected_label;
        known(scene)?;
        let pairs = match &r.guarantee {
            Guarantee::LabelIs(l) => {
                known(l)?;
                vec![(scene.clone(), l.clone())]
            }
            Guarantee::LabelNotIn(ex) => {
                for l in ex {
                    known(l)?;
                }
                labels
                    .iter()
                    .filter(|l| !ex.contains(*l))
                    .map(|l| (scene.clone(), l.clone()))
                    .collect()
            }
        };
        tokens.push((r.id.clone(), pairs));
    }
    let outside: Vec<(String, String)> = labels
        .iter()
        .flat_map(|s| match &cfg.fail_safe {
            Some(f) => vec![(s.clone(), f.clone())],
            None => labels.iter().map(|l| (s.clone(), l.clone())).collect(),
        })
        .collect();
    if tokens.iter().any(|(t, _)| t == OUTSIDE) {
        return Err(ComposeError::Invalid(format!(
            "a region may not be called `{OUTSIDE}`"
        )));
    }
    tokens.push((OUTSIDE.to_string(), outside));

    let rank = |l: &str| labels.iter().position(|x| x == l).unwrap_or(usize::MAX);
    let mut pairs: Vec<(String, String)> =
        tokens.iter().flat_map(|(_, p)| p.iter().cloned()).collect();
    pairs.sort_by_key(|(s, l)| (rank(s), rank(l)));
    pairs.dedup();
    let name =
        |(s, l): &(String, String)| format!("{}={},{}={}", cfg.scene_port, s, cfg.class_port, l);

    let mut b = ComponentBuilder::new(cfg.name.clone())
        .input(
            cfg.token_port.clone(),
            tokens.iter().map(|(t, _)| t.clone()),
        )
        .output(cfg.scene_port.clone(), labels.iter().cloned())
        .output(cfg.class_port.clone(), labels.iter().cloned());
    for p in &pairs {
        b = b.state(
            name(p),
            [
                (cfg.scene_port.clone(), p.0.clone()),
                (cfg.class_port.clone(), p.1.clone()),
            ],
        );
        b = b.init(name(p));
    }
    let by_token: BTreeMap<&str, Vec<String>> = tokens
        .iter()
        .map(|(t, p)| (t.as_str(), p.iter().map(name).collect()))
        .collect();
    b.build(|_, input| by_token[input[&cfg.token_port].as_str()].clone())
}

/// The other half of the system.
pub enum Peer<'a> {
    /// A classifier known only through its region contract.
    Dnn {
        contract: &'a DnnContract,
        abstraction: &'a AbstractionConfig,
    },
    Component {
        system: &'a System,
        contract: &'a ComponentContract,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PremiseReport {
    pub premise: u8,
    pub statement: String,
    pub holds: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub findings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub check: Option<CheckResult>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgReport {
    pub property: Property,
    pub premises: Vec<PremiseReport>,
    /// True only when every premise holds.
    pub conclusion: bool,
    pub statement: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl AgReport {
    pub fn failing(&self) -> Option<&PremiseReport> {
        self.premises.iter().find(|p| !p.holds)
    }
}

fn merge_domains(
    into: &mut BTreeMap<String, Vec<String>>,
    from: impl IntoIterator<Item = (String, Vec<String>)>,
) {
    for (k, v) in from {
        into.entry(k).or_insert(v);
    }
}

/// `M || MGE(A) |= G`, run on `system` extended by the assumption's
/// generator.
fn check_component(system: &System, c: &ComponentContract) -> Result<CheckResult, ComposeError> {
    let domains = system.signal_domains()?;
    for port in c.ports() {
        if !domains.contains_key(port) {
            return Err(ComposeError::UnknownPort(format!(
                "{port} (contract {} vs its component)",
                c.name
            )));
        }
    }
    let mut extended = system.clone();
    if let Assumption::Holds(a) = &c.assume {
        let env = most_general_environment(
            &ComponentContract::new(format!("{}_assume", c.name), Assumption::True, a.clone()),
            &domains,
        )?;
        extended.components.push(env);
    }
    check_property(&extended, &c.guarantee)
}

/// Every entry of a region contract must be backed by verifier results
/// that justify exactly its guarantee.
fn audit_dnn_contract(c: &DnnContract, labels: &[String]) -> Vec<String> {
    let mut findings = Vec::new();
    if let Err(e) = c.validate() {
        findings.push(e.to_string());
    }
    for r in &c.regions {
        let p = &r.provenance;
        let proved: BTreeSet<&str> = p.proved_safe.iter().map(String::as_str).collect();
        match (p.summary.as_str(), &r.guarantee) {
            ("fully_safe", Guarantee::LabelIs(l)) => {
                let others: BTreeSet<&str> = labels
                    .iter()
                    .map(String::as_str)
                    .filter(|x| x != l)
                    .collect();
                if proved != others {
                    findings.push(format!(
                        "{}: label_is({l}) without safety against every other label",
                        r.id
                    ));
                }
            }
            ("targeted_safe", Guarantee::LabelNotIn(ex)) => {
                if ex.iter().map(String::as_str).collect::<BTreeSet<_>>() != proved {
                    findings.push(format!(
                        "{}: excluded labels differ from the labels proved unreachable",
                        r.id
                    ));
                }
            }
            (s, _) => findings.push(format!(
                "{}: verdict `{s}` does not support its guarantee",
                r.id
            )),
        }
    }
    findings
}

/// Checks the three premises of the rule
/// `M1 |= C1, M2 |= C2, C1 ∧ C2 ⇒ P  ⊢  M1 || M2 |= P`:
///
/// 1. `M1` composed with the most general environment of `C1`'s assumption
///    satisfies `C1`'s guarantee;
/// 2. `M2 |= C2`: for a classifier, an audit of the verifier provenance in
///    its contract; for a component, the same check as premise 1;
/// 3. the most general environments of `C1` and `C2` (for a classifier, its
///    abstraction) together satisfy `P`. Ports of `P` outside both
///    contracts are left free.
pub fn check_assume_guarantee(
    m1: &System,
    c1: &ComponentContract,
    m2: Peer<'_>,
    p: &Property,
) -> Result<AgReport, ComposeError> {
    let mut notes = Vec::new();
    let mut premises = Vec::new();

    let r1 = check_component(m1, c1)?;
    premises.push(PremiseReport {
        premise: 1,
        statement: format!("M1 || env({}) |= {}", c1.assume, c1.guarantee),
        holds: r1.holds,
        findings: Vec::new(),
        check: Some(r1),
    });

    let mut domains = m1.signal_domains()?;
    let second = match &m2 {
        Peer::Dnn {
            contract,
            abstraction,
        } => {
            let findings = audit_dnn_contract(contract, &abstraction.labels);
            premises.push(PremiseReport {
                premise: 2,
                statement: format!(
                    "NN |= contract of {} ({} regions)",
                    contract.network,
                    contract.regions.len()
                ),
                holds: findings.is_empty(),
                findings,
                check: None,
            });
            if contract.regions.is_empty() {
                notes.push(
                    "empty classifier contract: the abstraction answers nondeterministically"
                        .into(),
                );
            }
            let model = abstract_dnn_component(contract, abstraction)?;
            merge_domains(
                &mut domains,
                model
                    .outputs
                    .iter()
                    .chain(&model.inputs)
                    .map(|p| (p.name.clone(), p.domain.clone())),
            );
            model
        }
        Peer::Component { system, contract } => {
            let r2 = check_component(system, contract)?;
            premises.push(PremiseReport {
                premise: 2,
                statement: format!("M2 || env({}) |= {}", contract.assume, contract.guarantee),
                holds: r2.holds,
                findings: Vec::new(),
                check: Some(r2),
            });
            merge_domains(&mut domains, system.signal_domains()?);
            most_general_environment(contract, &domains)?
        }
    };
    let first = most_general_environment(c1, &domains)?;
    let covered: BTreeSet<&str> = first
        .outputs
        .iter()
        .chain(&second.outputs)
        .map(|p| p.name.as_str())
        .collect();
    let mut free = Vec::new();
    for port in p.ports() {
        if !covered.contains(port) {
            let domain = domains
                .get(port)
                .ok_or_else(|| ComposeError::UnknownPort(port.to_string()))?;
            free.push(Port {
                name: port.to_string(),
                domain: domain.clone(),
            });
        }
    }
    let mut parts = vec![first, second];
    if !free.is_empty() {
        notes.push(format!(
            "ports left free in premise 3: {}",
            free.iter()
                .map(|p| p.name.as_str())
                .collect::<Vec<_>>()
                .join(", ")
        ));
        parts.push(ComponentModel::sink("free", &free));
    }
    let r3 = check_property(&System::new(parts), p)?;
    premises.push(PremiseReport {
        premise: 3,
        statement: format!("env(C1) || env(C2) |= {p}"),
        holds: r3.holds,
        findings: Vec::new(),
        check: Some(r3),
    });

    let conclusion = premises.iter().all(|x| x.holds);
    Ok(AgReport {
        property: p.clone(),
        statement: if conclusion {
            format!("M1 || M2 |= {p}")
        } else {
            "no conclusion: a premise failed".into()
        },
        premises,
        conclusion,
        notes,
    })
}
