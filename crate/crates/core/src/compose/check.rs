//! Explicit-state checking of properties over a system's product.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::model::Valuation;
use super::monitor::{response_step, Obligation};
use super::system::{Product, ProductState, System};
use super::ComposeError;
use crate::contracts::Property;

/// One tick of a trace: the local state of every component and the value
/// of every signal during that tick.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceStep {
    pub tick: usize,
    pub states: BTreeMap<String, String>,
    pub valuation: Valuation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckResult {
    pub holds: bool,
    /// Shortest violating trace; its last tick is the violation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<Vec<TraceStep>>,
    pub states_explored: usize,
}

impl CheckResult {
    pub fn violation_tick(&self) -> Option<usize> {
        self.counterexample
            .as_ref()
            .and_then(|t| t.last())
            .map(|s| s.tick)
    }
}

type Bound = (Vec<(usize, usize)>, Vec<(usize, usize)>, u32);

fn bind(product: &Product<'_>, p: &Property) -> Result<Bound, ComposeError> {
    let (resp, k) = p.response();
    Ok((
        product.bind_conj(&p.antecedent)?,
        product.bind_conj(resp)?,
        k,
    ))
}

fn holds(lits: &[(usize, usize)], val: &[usize]) -> bool {
    lits.iter().all(|&(s, v)| val[s] == v)
}

/// Breadth-first search over product states paired with the property's
/// monitor state. The first violation found lies on a shortest trace.
pub fn check_property(sys: &System, p: &Property) -> Result<CheckResult, ComposeError> {
    let product = Product::new(sys)?;
    let (ante, resp, k) = bind(&product, p)?;

    struct Node {
        state: ProductState,
        obligation: Obligation,
        parent: Option<(usize, Vec<usize>)>,
        depth: usize,
    }
    let mut nodes: Vec<Node> = Vec::new();
    let mut index: HashMap<(ProductState, Obligation), usize> = HashMap::new();
    for s in product.initial_states() {
        index.entry((s.clone(), None)).or_insert_with(|| {
            nodes.push(Node {
                state: s,
                obligation: None,
                parent: None,
                depth: 0,
            });
            nodes.len() - 1
        });
    }
    let mut head = 0;
    while head < nodes.len() {
        let current = head;
        head += 1;
        for step in product.steps(&nodes[current].state) {
            let val = &step.valuation;
            let next = match response_step(
                k,
                nodes[current].obligation,
                holds(&ante, val),
                holds(&resp, val),
            ) {
                Ok(o) => o,
                Err(_) => {
                    let mut trace = vec![TraceStep {
                        tick: nodes[current].depth,
                        states: product.state_names(&nodes[current].state),
                        valuation: product.valuation_map(val),
                    }];
                    let mut at = current;
                    while let Some((parent, pval)) = &nodes[at].parent {
                        trace.push(TraceStep {
                            tick: nodes[*parent].depth,
                            states: product.state_names(&nodes[*parent].state),
                            valuation: product.valuation_map(pval),
                        });
                        at = *parent;
                    }
                    trace.reverse();
                    return Ok(CheckResult {
                        holds: false,
                        counterexample: Some(trace),
                        states_explored: nodes.len(),
                    });
                }
            };
            for succ in step.successors {
                let key = (succ, next);
                if !index.contains_key(&key) {
                    index.insert(key.clone(), nodes.len());
                    nodes.push(Node {
                        state: key.0,
                        obligation: next,
                        parent: Some((current, val.clone())),
                        depth: nodes[current].depth + 1,
                    });
                }
            }
        }
    }
    Ok(CheckResult {
        holds: true,
        counterexample: None,
        states_explored: nodes.len(),
    })
}

/// Re-executes `trace` against the system semantics: the first tick must
/// start in initial states, driven signals must match the component
/// outputs, and each next tick must be a legal successor. Returns the tick
/// at which the property is violated, if any.
pub fn replay(
    sys: &System,
    p: &Property,
    trace: &[TraceStep],
) -> Result<Option<usize>, ComposeError> {
    let product = Product::new(sys)?;
    let (ante, resp, k) = bind(&product, p)?;
    let mut obligation: Obligation = None;
    let mut prev: Option<(ProductState, Vec<usize>)> = None;
    for (i, step) in trace.iter().enumerate() {
        if step.tick != i {
            return Err(ComposeError::Replay(format!(
                "tick {} found at position {i}",
                step.tick
            )));
        }
        let state = product.state_indices(&step.states)?;
        let val = product.valuation_indices(&step.valuation)?;
        match &prev {
            None if !product.initial_states().contains(&state) => {
                return Err(ComposeError::Replay(
                    "trace does not start in an initial state".into(),
                ));
            }
            Some((ps, pv))
                if !product
                    .successors(ps, pv)
                    .unwrap_or_default()
                    .contains(&state) =>
            {
                return Err(ComposeError::Replay(format!(
                    "tick {i} is not a successor of tick {}",
                    i - 1
                )));
            }
            _ => {}
        }
        let driven = product
            .driven_values(&state)
            .ok_or_else(|| ComposeError::Replay(format!("drivers disagree at tick {i}")))?;
        if driven
            .iter()
            .zip(&val)
            .any(|(d, v)| d.is_some_and(|d| d != *v))
        {
            return Err(ComposeError::Replay(format!(
                "tick {i} contradicts component outputs"
            )));
        }
        match response_step(k, obligation, holds(&ante, &val), holds(&resp, &val)) {
            Ok(o) => obligation = o,
            Err(_) => return Ok(Some(i)),
        }
        prev = Some((state, val));
    }
    Ok(None)
}
