//! Observers for properties and contracts, and the most general
//! environment of a contract.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::model::{ComponentModel, Port, Valuation};
use super::ComposeError;
use crate::contracts::{Assumption, ComponentContract, Property};

/// Earliest pending deadline of a bounded-response property: ticks left
/// after the current one, or nothing pending.
pub type Obligation = Option<u32>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Violation;

/// One tick of the bounded-response monitor with deadline `k` (0 for a
/// same-tick consequent). A response discharges every pending obligation;
/// overlapping triggers keep only the earliest deadline.
pub fn response_step(
    k: u32,
    pending: Obligation,
    trigger: bool,
    response: bool,
) -> Result<Obligation, Violation> {
    if response {
        return Ok(None);
    }
    let mut next = match pending {
        Some(r) if r <= 1 => return Err(Violation),
        Some(r) => Some(r - 1),
        None => None,
    };
    if trigger {
        if k == 0 {
            return Err(Violation);
        }
        next = Some(next.map_or(k, |r| r.min(k)));
    }
    Ok(next)
}

/// Steps a property's monitor on a named valuation.
pub fn property_step(
    p: &Property,
    pending: Obligation,
    v: &Valuation,
) -> Result<Obligation, Violation> {
    let (resp, k) = p.response();
    response_step(k, pending, p.antecedent.holds(v), resp.holds(v))
}

/// Ok flag after each tick of `trace`; false from the first violation on.
pub fn monitor_trace(p: &Property, trace: &[Valuation]) -> Vec<bool> {
    let mut st = Some(None);
    trace
        .iter()
        .map(|v| {
            st = st.and_then(|s| property_step(p, s, v).ok());
            st.is_some()
        })
        .collect()
}

/// Deterministic observer of a contract. Once the assumption is violated,
/// or can no longer be kept, the guarantee is no longer owed.
#[derive(Debug, Clone)]
pub struct ContractMonitor {
    assume: Option<Property>,
    guarantee: Property,
    doomed: BTreeSet<Obligation>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ContractState {
    Active {
        assume: Obligation,
        guarantee: Obligation,
    },
    Excused,
}

impl ContractMonitor {
    /// `domains` must cover every port the assumption mentions.
    pub fn new(
        c: &ComponentContract,
        domains: &BTreeMap<String, Vec<String>>,
    ) -> Result<Self, ComposeError> {
        let assume = c.assume.property().cloned();
        let doomed = match &assume {
            Some(a) => doomed_states(a, domains)?,
            None => BTreeSet::new(),
        };
        Ok(ContractMonitor {
            assume,
            guarantee: c.guarantee.clone(),
            doomed,
        })
    }

    pub fn init(&self) -> ContractState {
        ContractState::Active {
            assume: None,
            guarantee: None,
        }
    }

    pub fn step(&self, s: ContractState, v: &Valuation) -> Result<ContractState, Violation> {
        let ContractState::Active { assume, guarantee } = s else {
            return Ok(ContractState::Excused);
        };
        let assume = match &self.assume {
            None => None,
            Some(a) => match property_step(a, assume, v) {
                Ok(next) if !self.doomed.contains(&next) => next,
                _ => return Ok(ContractState::Excused),
            },
        };
        let guarantee = property_step(&self.guarantee, guarantee, v)?;
        Ok(ContractState::Active { assume, guarantee })
    }
}

fn check_domains(
    p: &Property,
    domains: &BTreeMap<String, Vec<String>>,
) -> Result<(), ComposeError> {
    for l in p.literals() {
        let d = domains
            .get(&l.port)
            .ok_or_else(|| ComposeError::UnknownPort(l.port.clone()))?;
        if !d.contains(&l.value) {
            return Err(ComposeError::UnknownValue {
                port: l.port.clone(),
                value: l.value.clone(),
            });
        }
    }
    Ok(())
}

/// Every valuation over `ports`, in lexicographic domain order.
pub fn valuations(ports: &[Port]) -> Vec<Valuation> {
    let mut out = vec![Valuation::new()];
    for p in ports {
        out = out
            .into_iter()
            .flat_map(|v| {
                p.domain.iter().map(move |x| {
                    let mut v = v.clone();
                    v.insert(p.name.clone(), x.clone());
                    v
                })
            })
            .collect();
    }
    out
}

fn ports_of<'a>(
    names: impl IntoIterator<Item = &'a str>,
    domains: &BTreeMap<String, Vec<String>>,
) -> Result<Vec<Port>, ComposeError> {
    names
        .into_iter()
        .map(|n| {
            Ok(Port {
                name: n.to_string(),
                domain: domains
                    .get(n)
                    .ok_or_else(|| ComposeError::UnknownPort(n.to_string()))?
                    .clone(),
            })
        })
        .collect()
}

/// Monitor states of `p` from which every continuation ends in a violation.
fn doomed_states(
    p: &Property,
    domains: &BTreeMap<String, Vec<String>>,
) -> Result<BTreeSet<Obligation>, ComposeError> {
    check_domains(p, domains)?;
    let (_, k) = p.response();
    let vals = valuations(&ports_of(p.ports(), domains)?);
    let all: Vec<Obligation> = std::iter::once(None).chain((1..=k).map(Some)).collect();
    let mut safe: BTreeSet<Obligation> = all.iter().copied().collect();
    loop {
        let keep: BTreeSet<Obligation> = safe
            .iter()
            .copied()
            .filter(|&s| {
                vals.iter()
                    .any(|v| property_step(p, s, v).is_ok_and(|n| safe.contains(&n)))
            })
            .collect();
        if keep == safe {
            break;
        }
        safe = keep;
    }
    Ok(all.into_iter().filter(|s| !safe.contains(s)).collect())
}

/// Reachable monitor states of `c` over every valuation of its ports,
/// paired with the states that can still avoid a violation forever.
struct ContractGraph {
    ports: Vec<Port>,
    vals: Vec<Valuation>,
    states: Vec<ContractState>,
    /// `[state][valuation]` -> successor index, `None` on violation.
    next: Vec<Vec<Option<usize>>>,
    safe: Vec<bool>,
}

impl ContractGraph {
    fn build(
        c: &ComponentContract,
        domains: &BTreeMap<String, Vec<String>>,
    ) -> Result<Self, ComposeError> {
        check_domains(&c.guarantee, domains)?;
        if let Some(a) = c.assume.property() {
            check_domains(a, domains)?;
        }
        let mon = ContractMonitor::new(c, domains)?;
        let ports = ports_of(c.ports(), domains)?;
        let vals = valuations(&ports);
        let mut states = vec![mon.init()];
        let mut index: BTreeMap<ContractState, usize> = [(mon.init(), 0)].into();
        let mut next = Vec::new();
        let mut i = 0;
        while i < states.len() {
            let mut row: Vec<Option<usize>> = Vec::with_capacity(vals.len());
            for v in &vals {
                let t = match mon.step(states[i], v) {
                    Ok(t) => t,
                    Err(_) => {
                        row.push(None);
                        continue;
                    }
                };
                let j = match index.get(&t) {
                    Some(&j) => j,
                    None => {
                        states.push(t);
                        index.insert(t, states.len() - 1);
                        states.len() - 1
                    }
                };
                row.push(Some(j));
            }
            next.push(row);
            i += 1;
        }
        let mut safe = vec![true; states.len()];
        loop {
            let keep: Vec<bool> = (0..states.len())
                .map(|s| safe[s] && next[s].iter().any(|t| t.is_some_and(|t| safe[t])))
                .collect();
            if keep == safe {
                break;
            }
            safe = keep;
        }
        Ok(ContractGraph {
            ports,
            vals,
            states,
            next,
            safe,
        })
    }
}

fn state_label(s: &ContractState) -> String {
    let ob = |o: &Obligation| o.map_or("-".to_string(), |r| r.to_string());
    match s {
        ContractState::Active { assume, guarantee } => format!("a{}g{}", ob(assume), ob(guarantee)),
        ContractState::Excused => "excused".into(),
    }
}

/// Observer component for a contract: inputs are the contract's ports,
/// output `ok` is `true` while the contract is unviolated on the ticks seen
/// so far (Moore, so it reports with one tick of latency). With assumption
/// `true` and guarantee `G (true => true)` it is the constant-ok observer.
pub fn contract_monitor(
    c: &ComponentContract,
    domains: &BTreeMap<String, Vec<String>>,
) -> Result<ComponentModel, ComposeError> {
    let g = ContractGraph::build(c, domains)?;
    let bad = g.states.len();
    let mut states: Vec<String> = g.states.iter().map(state_label).collect();
    states.push("violated".into());
    let mut output_map = vec![vec![0]; g.states.len()];
    output_map.push(vec![1]);
    let mut transitions: Vec<Vec<Vec<usize>>> = g
        .next
        .iter()
        .map(|row| row.iter().map(|t| vec![t.unwrap_or(bad)]).collect())
        .collect();
    transitions.push(vec![vec![bad]; g.vals.len()]);
    let model = ComponentModel {
        name: format!("{}_monitor", c.name),
        inputs: g.ports,
        outputs: vec![Port {
            name: "ok".into(),
            domain: vec!["true".into(), "false".into()],
        }],
        states,
        init: vec![0],
        output_map,
        transitions,
    };
    model.validate()?;
    Ok(model)
}

pub fn property_monitor(
    name: &str,
    p: &Property,
    domains: &BTreeMap<String, Vec<String>>,
) -> Result<ComponentModel, ComposeError> {
    contract_monitor(
        &ComponentContract::new(name, Assumption::True, p.clone()),
        domains,
    )
}

/// Closed nondeterministic generator over the contract's ports whose traces
/// are exactly the valuation sequences that never violate the contract and
/// can still be extended without violating it.
pub fn most_general_environment(
    c: &ComponentContract,
    domains: &BTreeMap<String, Vec<String>>,
) -> Result<ComponentModel, ComposeError> {
    let g = ContractGraph::build(c, domains)?;
    // generator state = (monitor state after emitting v, v)
    let mut keys: Vec<(usize, usize)> = Vec::new();
    let mut index: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut queue = VecDeque::new();
    let mut visit =
        |key: (usize, usize), keys: &mut Vec<(usize, usize)>, queue: &mut VecDeque<usize>| {
            *index.entry(key).or_insert_with(|| {
                keys.push(key);
                queue.push_back(keys.len() - 1);
                keys.len() - 1
            })
        };
    let allowed = |s: usize| -> Vec<(usize, usize)> {
        if !g.safe[s] {
            return Vec::new();
        }
        g.next[s]
            .iter()
            .enumerate()
            .filter_map(|(v, t)| t.filter(|&t| g.safe[t]).map(|t| (t, v)))
            .collect()
    };
    let init: Vec<usize> = allowed(0)
        .into_iter()
        .map(|k| visit(k, &mut keys, &mut queue))
        .collect();
    let mut transitions: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    while let Some(i) = queue.pop_front() {
        let (s, _) = keys[i];
        let mut succ: Vec<usize> = allowed(s)
            .into_iter()
            .map(|k| visit(k, &mut keys, &mut queue))
            .collect();
        succ.sort_unstable();
        transitions.insert(i, succ);
    }
    let states: Vec<String> = keys
        .iter()
        .map(|&(s, v)| {
            let vals: Vec<String> = g
                .ports
                .iter()
                .map(|p| format!("{}={}", p.name, g.vals[v][&p.name]))
                .collect();
            format!("{}[{}]", state_label(&g.states[s]), vals.join(","))
        })
        .collect();
    let output_map = keys
        .iter()
        .map(|&(_, v)| {
            g.ports
                .iter()
                .map(|p| p.value_index(&g.vals[v][&p.name]).expect("value in domain"))
                .collect()
        })
        .collect();
    if keys.is_empty() {
        // the contract admits no trace at all; keep one unreachable state
        return Ok(ComponentModel {
            name: format!("{}_env", c.name),
            inputs: Vec::new(),
            outputs: g.ports.clone(),
            states: vec!["empty".into()],
            init: Vec::new(),
            output_map: vec![vec![0; g.ports.len()]],
            transitions: vec![vec![Vec::new()]],
        });
    }
    let model = ComponentModel {
        name: format!("{}_env", c.name),
        inputs: Vec::new(),
        outputs: g.ports,
        states,
        init,
        output_map,
        transitions: (0..keys.len())
            .map(|i| vec![transitions[&i].clone()])
            .collect(),
    };
    model.validate()?;
    Ok(model)
}
