//! Systems of wired components and their synchronous product.
//!
//! Every port name is a signal. Output ports drive the signal of their own
//! name; an input port reads the signal of its own name unless an explicit
//! wire names another producer. A signal read by some input but driven by no
//! output is a free environment input. A signal with several drivers only
//! takes a value when all of them agree.

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::model::{ComponentModel, ComponentSpec, Port, Valuation};
use super::ComposeError;
use crate::contracts::{Conj, Property};

/// `component.port`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PortRef {
    pub component: String,
    pub port: String,
}

impl fmt::Display for PortRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.component, self.port)
    }
}

impl FromStr for PortRef {
    type Err = ComposeError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once('.') {
            Some((c, p)) if !c.is_empty() && !p.is_empty() => Ok(PortRef {
                component: c.to_string(),
                port: p.to_string(),
            }),
            _ => Err(ComposeError::Wiring(format!(
                "`{s}` is not of the form component.port"
            ))),
        }
    }
}

impl TryFrom<String> for PortRef {
    type Error = ComposeError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<PortRef> for String {
    fn from(p: PortRef) -> String {
        p.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Wire {
    pub from: PortRef,
    pub to: PortRef,
}

#[derive(Debug, Clone, PartialEq)]
pub struct System {
    pub components: Vec<ComponentModel>,
    pub wiring: Vec<Wire>,
    pub ticks_per_second: f64,
}

impl System {
    pub fn new(components: Vec<ComponentModel>) -> Self {
        System {
            components,
            wiring: Vec::new(),
            ticks_per_second: 1.0,
        }
    }

    pub fn with_wire(mut self, from: &str, to: &str) -> Result<Self, ComposeError> {
        self.wiring.push(Wire {
            from: from.parse()?,
            to: to.parse()?,
        });
        Ok(self)
    }

    pub fn component(&self, name: &str) -> Option<&ComponentModel> {
        self.components.iter().find(|c| c.name == name)
    }

    /// Names and domains of every signal.
    pub fn signal_domains(&self) -> Result<BTreeMap<String, Vec<String>>, ComposeError> {
        Ok(Product::new(self)?
            .signals
            .into_iter()
            .map(|s| (s.name, s.domain))
            .collect())
    }
}

fn default_tick_rate() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemSpec {
    #[serde(default)]
    description: Option<String>,
    #[serde(default = "default_tick_rate")]
    ticks_per_second: f64,
    components: Vec<ComponentSpec>,
    #[serde(default)]
    wiring: Vec<Wire>,
    #[serde(default)]
    properties: Vec<Property>,
}

/// A system read from JSON together with the properties listed in it.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemFile {
    pub description: Option<String>,
    pub system: System,
    pub properties: Vec<Property>,
}

pub fn parse_system(text: &str) -> Result<SystemFile, ComposeError> {
    let spec: SystemSpec =
        serde_json::from_str(text).map_err(|e| ComposeError::Invalid(e.to_string()))?;
    if !(spec.ticks_per_second.is_finite() && spec.ticks_per_second > 0.0) {
        return Err(ComposeError::Invalid(
            "ticks_per_second must be positive".into(),
        ));
    }
    let components = spec
        .components
        .iter()
        .map(ComponentSpec::to_model)
        .collect::<Result<Vec<_>, _>>()?;
    let system = System {
        components,
        wiring: spec.wiring,
        ticks_per_second: spec.ticks_per_second,
    };
    Product::new(&system)?;
    Ok(SystemFile {
        description: spec.description,
        system,
        properties: spec.properties,
    })
}

/// JSON text that [`parse_system`] reads back to an equivalent system.
pub fn render_system(file: &SystemFile) -> Result<String, ComposeError> {
    let components = file
        .system
        .components
        .iter()
        .map(ComponentModel::to_json)
        .collect::<Result<Vec<_>, _>>()?;
    let mut v = serde_json::json!({
        "ticks_per_second": file.system.ticks_per_second,
        "components": components,
        "wiring": file.system.wiring,
        "properties": file.properties,
    });
    if let Some(d) = &file.description {
        v["description"] = serde_json::Value::String(d.clone());
    }
    let mut s =
        serde_json::to_string_pretty(&v).map_err(|e| ComposeError::Invalid(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Signal {
    pub name: String,
    pub domain: Vec<String>,
    /// `(component, output)` pairs driving the signal.
    pub drivers: Vec<(usize, usize)>,
}

impl Signal {
    pub fn is_free(&self) -> bool {
        self.drivers.is_empty()
    }
}

/// A joint state: one local state per component.
pub type ProductState = Vec<usize>;

/// One tick out of a product state: the full signal valuation (value index
/// per signal) and the successor product states.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    pub valuation: Vec<usize>,
    pub successors: Vec<ProductState>,
}

/// Synchronous product of a system, explored on demand.
#[derive(Debug, Clone)]
pub struct Product<'a> {
    pub system: &'a System,
    pub signals: Vec<Signal>,
    free: Vec<usize>,
    /// `[component][output]` -> (signal, output value -> signal value).
    drives: Vec<Vec<(usize, Vec<usize>)>>,
    /// `[component][input]` -> (signal, signal value -> input value).
    reads: Vec<Vec<(usize, Vec<Option<usize>>)>>,
}

fn positions(from: &[String], into: &[String]) -> Vec<Option<usize>> {
    from.iter()
        .map(|v| into.iter().position(|d| d == v))
        .collect()
}

impl<'a> Product<'a> {
    pub fn new(system: &'a System) -> Result<Self, ComposeError> {
        let comps = &system.components;
        let mut names = BTreeSet::new();
        for c in comps {
            c.validate()?;
            if !names.insert(c.name.as_str()) {
                return Err(ComposeError::Wiring(format!(
                    "component name `{}` used twice",
                    c.name
                )));
            }
        }
        let find = |r: &PortRef, output: bool| -> Result<(usize, usize), ComposeError> {
            let ci = comps
                .iter()
                .position(|c| c.name == r.component)
                .ok_or_else(|| ComposeError::Wiring(format!("unknown component in `{r}`")))?;
            let ports = if output {
                &comps[ci].outputs
            } else {
                &comps[ci].inputs
            };
            let pi = ports.iter().position(|p| p.name == r.port).ok_or_else(|| {
                let kind = if output { "output" } else { "input" };
                ComposeError::Wiring(format!("`{r}` is not an {kind} port"))
            })?;
            Ok((ci, pi))
        };
        let mut explicit: BTreeMap<(usize, usize), String> = BTreeMap::new();
        for w in &system.wiring {
            find(&w.from, true)?;
            let to = find(&w.to, false)?;
            if explicit.insert(to, w.from.port.clone()).is_some() {
                return Err(ComposeError::Wiring(format!(
                    "input `{}` wired more than once",
                    w.to
                )));
            }
        }

        let mut domains: BTreeMap<String, Vec<String>> = BTreeMap::new();
        let mut drivers: BTreeMap<String, Vec<(usize, usize)>> = BTreeMap::new();
        for (ci, c) in comps.iter().enumerate() {
            for (oi, p) in c.outputs.iter().enumerate() {
                drivers.entry(p.name.clone()).or_default().push((ci, oi));
                let d = domains.entry(p.name.clone()).or_default();
                for v in &p.domain {
                    if !d.contains(v) {
                        d.push(v.clone());
                    }
                }
            }
        }
        let read_signal = |ci: usize, ii: usize| -> String {
            explicit
                .get(&(ci, ii))
                .cloned()
                .unwrap_or_else(|| comps[ci].inputs[ii].name.clone())
        };
        for (ci, c) in comps.iter().enumerate() {
            for (ii, p) in c.inputs.iter().enumerate() {
                let sig = read_signal(ci, ii);
                match drivers.get(&sig) {
                    Some(ds) => {
                        for &(dc, doi) in ds {
                            let out = &comps[dc].outputs[doi];
                            if let Some(v) = out.domain.iter().find(|v| !p.domain.contains(v)) {
                                return Err(ComposeError::Wiring(format!(
                                    "{}.{} can emit `{v}`, which {}.{} does not accept",
                                    comps[dc].name, out.name, c.name, p.name
                                )));
                            }
                        }
                    }
                    None => match domains.get(&sig) {
                        Some(d) => {
                            let a: BTreeSet<&String> = d.iter().collect();
                            let b: BTreeSet<&String> = p.domain.iter().collect();
                            if a != b {
                                return Err(ComposeError::Wiring(format!(
                                    "free signal `{sig}` is read with different domains"
                                )));
                            }
                        }
                        None => {
                            domains.insert(sig, p.domain.clone());
                        }
                    },
                }
            }
        }

        let signals: Vec<Signal> = domains
            .into_iter()
            .map(|(name, domain)| Signal {
                drivers: drivers.get(&name).cloned().unwrap_or_default(),
                name,
                domain,
            })
            .collect();
        let index = |name: &str| {
            signals
                .iter()
                .position(|s| s.name == name)
                .expect("signal exists")
        };
        let drives = comps
            .iter()
            .map(|c| {
                c.outputs
                    .iter()
                    .map(|p| {
                        let s = index(&p.name);
                        let map = positions(&p.domain, &signals[s].domain)
                            .into_iter()
                            .map(|v| v.expect("subset"))
                            .collect();
                        (s, map)
                    })
                    .collect()
            })
            .collect();
        let reads = comps
            .iter()
            .enumerate()
            .map(|(ci, c)| {
                c.inputs
                    .iter()
                    .enumerate()
                    .map(|(ii, p)| {
                        let s = index(&read_signal(ci, ii));
                        (s, positions(&signals[s].domain, &p.domain))
                    })
                    .collect()
            })
            .collect();
        let free = (0..signals.len())
            .filter(|&s| signals[s].is_free())
            .collect();
        Ok(Product {
            system,
            signals,
            free,
            drives,
            reads,
        })
    }

    pub fn signal_index(&self, name: &str) -> Option<usize> {
        self.signals.iter().position(|s| s.name == name)
    }

    pub fn free_signals(&self) -> impl Iterator<Item = &Signal> {
        self.free.iter().map(|&s| &self.signals[s])
    }

    pub fn initial_states(&self) -> Vec<ProductState> {
        cartesian(
            self.system
                .components
                .iter()
                .map(|c| c.init.clone())
                .collect(),
        )
    }

    /// Values of driven signals in `state`, or `None` if drivers disagree.
    pub fn driven_values(&self, state: &[usize]) -> Option<Vec<Option<usize>>> {
        let mut vals = vec![None; self.signals.len()];
        for (ci, c) in self.system.components.iter().enumerate() {
            for (oi, &v) in c.output_map[state[ci]].iter().enumerate() {
                let (s, map) = &self.drives[ci][oi];
                let v = map[v];
                match vals[*s] {
                    Some(w) if w != v => return None,
                    _ => vals[*s] = Some(v),
                }
            }
        }
        Some(vals)
    }

    /// All ticks possible from `state`, in canonical order: free signals
    /// enumerated lexicographically by name and domain order, successors
    /// sorted.
    pub fn steps(&self, state: &[usize]) -> Vec<Step> {
        let Some(driven) = self.driven_values(state) else {
            return Vec::new();
        };
        let free_sizes: Vec<usize> = self
            .free
            .iter()
            .map(|&s| self.signals[s].domain.len())
            .collect();
        let total: usize = free_sizes.iter().product();
        let mut out = Vec::with_capacity(total);
        for mut idx in 0..total {
            let mut val: Vec<usize> = driven.iter().map(|v| v.unwrap_or(0)).collect();
            for (k, &s) in self.free.iter().enumerate().rev() {
                val[s] = idx % free_sizes[k];
                idx /= free_sizes[k];
            }
            if let Some(successors) = self.successors(state, &val) {
                out.push(Step {
                    valuation: val,
                    successors,
                });
            }
        }
        out
    }

    /// Successor product states under a full valuation. `None` when some
    /// input reads a value outside its domain.
    pub fn successors(&self, state: &[usize], val: &[usize]) -> Option<Vec<ProductState>> {
        let mut choices = Vec::with_capacity(state.len());
        for (ci, c) in self.system.components.iter().enumerate() {
            let mut inputs = Vec::with_capacity(c.inputs.len());
            for (s, map) in &self.reads[ci] {
                inputs.push(map[val[*s]]?);
            }
            choices.push(c.successors(state[ci], c.combo_index(&inputs)).to_vec());
        }
        Some(cartesian(choices))
    }

    pub fn valuation_map(&self, val: &[usize]) -> Valuation {
        self.signals
            .iter()
            .zip(val)
            .map(|(s, &v)| (s.name.clone(), s.domain[v].clone()))
            .collect()
    }

    /// Converts a named valuation back to indices; every signal must be set.
    pub fn valuation_indices(&self, val: &Valuation) -> Result<Vec<usize>, ComposeError> {
        self.signals
            .iter()
            .map(|s| {
                let v = val.get(&s.name).ok_or_else(|| {
                    ComposeError::Replay(format!("signal `{}` missing from trace", s.name))
                })?;
                s.domain.iter().position(|d| d == v).ok_or_else(|| {
                    ComposeError::Replay(format!("`{v}` is not a value of `{}`", s.name))
                })
            })
            .collect()
    }

    pub fn state_names(&self, state: &[usize]) -> BTreeMap<String, String> {
        self.system
            .components
            .iter()
            .zip(state)
            .map(|(c, &s)| (c.name.clone(), c.states[s].clone()))
            .collect()
    }

    pub fn state_indices(
        &self,
        names: &BTreeMap<String, String>,
    ) -> Result<ProductState, ComposeError> {
        self.system
            .components
            .iter()
            .map(|c| {
                let s = names.get(&c.name).ok_or_else(|| {
                    ComposeError::Replay(format!("no state for component `{}`", c.name))
                })?;
                c.state_index(s).ok_or_else(|| {
                    ComposeError::Replay(format!("`{s}` is not a state of `{}`", c.name))
                })
            })
            .collect()
    }

    /// Resolves literals to `(signal, value)` indices.
    pub fn bind_conj(&self, c: &Conj) -> Result<Vec<(usize, usize)>, ComposeError> {
        c.0.iter()
            .map(|l| {
                let s = self
                    .signal_index(&l.port)
                    .ok_or_else(|| ComposeError::UnknownPort(l.port.clone()))?;
                let v = self.signals[s]
                    .domain
                    .iter()
                    .position(|d| *d == l.value)
                    .ok_or_else(|| ComposeError::UnknownValue {
                        port: l.port.clone(),
                        value: l.value.clone(),
                    })?;
                Ok((s, v))
            })
            .collect()
    }

    /// Number of product states reachable from the initial ones.
    pub fn reachable_count(&self) -> usize {
        let mut seen: HashSet<ProductState> = HashSet::new();
        let mut queue: VecDeque<ProductState> = VecDeque::new();
        for s in self.initial_states() {
            if seen.insert(s.clone()) {
                queue.push_back(s);
            }
        }
        while let Some(s) = queue.pop_front() {
            for step in self.steps(&s) {
                for t in step.successors {
                    if seen.insert(t.clone()) {
                        queue.push_back(t);
                    }
                }
            }
        }
        seen.len()
    }
}

fn cartesian(choices: Vec<Vec<usize>>) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = vec![Vec::new()];
    for c in choices {
        let mut next = Vec::with_capacity(out.len() * c.len());
        for prefix in &out {
            for &x in &c {
                let mut p = prefix.clone();
                p.push(x);
                next.push(p);
            }
        }
        out = next;
    }
    out
}

/// Builds the synchronous product of `system` (an explicit-state view).
pub fn compose(system: &System) -> Result<Product<'_>, ComposeError> {
    Product::new(system)
}

/// Collapses a whole system into one component. Inputs are the free
/// signals, outputs the driven ones, states every joint state whose drivers
/// agree. Explicit wires stay internal.
pub fn flatten(system: &System, name: impl Into<String>) -> Result<ComponentModel, ComposeError> {
    let product = Product::new(system)?;
    let all = cartesian(
        system
            .components
            .iter()
            .map(|c| (0..c.states.len()).collect())
            .collect(),
    );
    let consistent: Vec<(ProductState, Vec<Option<usize>>)> = all
        .into_iter()
        .filter_map(|s| product.driven_values(&s).map(|d| (s, d)))
        .collect();
    let index: BTreeMap<&ProductState, usize> = consistent
        .iter()
        .enumerate()
        .map(|(i, (s, _))| (s, i))
        .collect();
    let outputs: Vec<usize> = (0..product.signals.len())
        .filter(|&s| !product.signals[s].is_free())
        .collect();
    let inputs: Vec<Port> = product
        .free_signals()
        .map(|s| Port {
            name: s.name.clone(),
            domain: s.domain.clone(),
        })
        .collect();
    let mut model = ComponentModel {
        name: name.into(),
        inputs,
        outputs: outputs
            .iter()
            .map(|&s| Port {
                name: product.signals[s].name.clone(),
                domain: product.signals[s].domain.clone(),
            })
            .collect(),
        states: consistent
            .iter()
            .map(|(s, _)| {
                system
                    .components
                    .iter()
                    .zip(s)
                    .map(|(c, &x)| c.states[x].as_str())
                    .collect::<Vec<_>>()
                    .join("|")
            })
            .collect(),
        init: product
            .initial_states()
            .iter()
            .filter_map(|s| index.get(s).copied())
            .collect(),
        output_map: consistent
            .iter()
            .map(|(_, d)| outputs.iter().map(|&s| d[s].expect("driven")).collect())
            .collect(),
        transitions: Vec::new(),
    };
    let combos = model.input_combinations();
    for (s, driven) in &consistent {
        let mut row = Vec::with_capacity(combos);
        for c in 0..combos {
            let free_vals = model.combo_values(c);
            let mut val: Vec<usize> = driven.iter().map(|v| v.unwrap_or(0)).collect();
            for (k, &f) in product.free.iter().enumerate() {
                val[f] = free_vals[k];
            }
            let mut next: Vec<usize> = product
                .successors(s, &val)
                .unwrap_or_default()
                .iter()
                .filter_map(|t| index.get(t).copied())
                .collect();
            next.sort_unstable();
            next.dedup();
            row.push(next);
        }
        model.transitions.push(row);
    }
    model.validate()?;
    Ok(model)
}
