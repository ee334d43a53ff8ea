//! Finite Moore components with named, finite-domain ports.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::ComposeError;

/// Port name to value.
pub type Valuation = BTreeMap<String, String>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Port {
    pub name: String,
    pub domain: Vec<String>,
}

impl Port {
    pub fn value_index(&self, v: &str) -> Option<usize> {
        self.domain.iter().position(|d| d == v)
    }
}

/// A Moore machine: outputs are a function of the current state, the next
/// state is chosen nondeterministically from a set determined by the current
/// state and the input valuation.
///
/// Input valuations are indexed in mixed radix over `inputs`, first port
/// most significant. An empty successor set is a deadlock; components read
/// from JSON are always total, derived ones (products, generators) may not be.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentModel {
    pub name: String,
    pub inputs: Vec<Port>,
    pub outputs: Vec<Port>,
    pub states: Vec<String>,
    pub init: Vec<usize>,
    /// `[state][output]` -> index into that output's domain.
    pub output_map: Vec<Vec<usize>>,
    /// `[state][input combination]` -> successor states.
    pub transitions: Vec<Vec<Vec<usize>>>,
}

impl ComponentModel {
    pub fn input_combinations(&self) -> usize {
        self.inputs.iter().map(|p| p.domain.len()).product()
    }

    pub fn combo_index(&self, values: &[usize]) -> usize {
        self.inputs
            .iter()
            .zip(values)
            .fold(0, |acc, (p, &v)| acc * p.domain.len() + v)
    }

    pub fn combo_values(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.inputs.len()];
        for (i, p) in self.inputs.iter().enumerate().rev() {
            out[i] = idx % p.domain.len();
            idx /= p.domain.len();
        }
        out
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s == name)
    }

    pub fn output_valuation(&self, state: usize) -> Valuation {
        self.outputs
            .iter()
            .zip(&self.output_map[state])
            .map(|(p, &v)| (p.name.clone(), p.domain[v].clone()))
            .collect()
    }

    pub fn successors(&self, state: usize, combo: usize) -> &[usize] {
        &self.transitions[state][combo]
    }

    /// True when every state has a successor for every input combination.
    pub fn is_total(&self) -> bool {
        self.transitions
            .iter()
            .all(|row| row.iter().all(|s| !s.is_empty()))
    }

    pub fn validate(&self) -> Result<(), ComposeError> {
        let bad = |m: String| {
            Err(ComposeError::Invalid(format!(
                "component {}: {m}",
                self.name
            )))
        };
        let mut names = BTreeSet::new();
        for p in self.inputs.iter().chain(&self.outputs) {
            if !names.insert(p.name.as_str()) {
                return bad(format!("port `{}` declared twice", p.name));
            }
            if p.domain.is_empty() {
                return bad(format!("port `{}` has an empty domain", p.name));
            }
            if p.domain.iter().collect::<BTreeSet<_>>().len() != p.domain.len() {
                return bad(format!("port `{}` repeats a value", p.name));
            }
        }
        if self.states.is_empty() {
            return bad("no states".into());
        }
        if self.states.iter().collect::<BTreeSet<_>>().len() != self.states.len() {
            return bad("state names repeat".into());
        }
        let n = self.states.len();
        if self.init.iter().any(|&s| s >= n) {
            return bad("initial state out of range".into());
        }
        if self.output_map.len() != n || self.transitions.len() != n {
            return bad("output map or transitions do not cover every state".into());
        }
        for (s, row) in self.output_map.iter().enumerate() {
            if row.len() != self.outputs.len()
                || row
                    .iter()
                    .zip(&self.outputs)
                    .any(|(&v, p)| v >= p.domain.len())
            {
                return bad(format!("bad output row for state {}", self.states[s]));
            }
        }
        let combos = self.input_combinations();
        for row in &self.transitions {
            if row.len() != combos || row.iter().flatten().any(|&t| t >= n) {
                return bad("transition table has the wrong shape".into());
            }
        }
        Ok(())
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// JSON form accepted by [`ComponentSpec`], one transition row per
    /// state and input valuation. Fails on a deadlocking component.
    pub fn to_json(&self) -> Result<serde_json::Value, ComposeError> {
        use serde_json::{json, Map, Value};
        if !self.is_total() {
            return Err(ComposeError::Invalid(format!(
                "component {} has deadlocks",
                self.name
            )));
        }
        let ports = |ps: &[Port]| -> Map<String, Value> {
            ps.iter()
                .map(|p| (p.name.clone(), json!(p.domain)))
                .collect()
        };
        let outputs_map: Map<String, Value> = self
            .states
            .iter()
            .enumerate()
            .map(|(s, name)| {
                (
                    name.clone(),
                    Value::Object(
                        self.output_valuation(s)
                            .into_iter()
                            .map(|(k, v)| (k, Value::String(v)))
                            .collect(),
                    ),
                )
            })
            .collect();
        let mut rows = Vec::new();
        for (s, name) in self.states.iter().enumerate() {
            for c in 0..self.input_combinations() {
                let when: Map<String, Value> = self
                    .inputs
                    .iter()
                    .zip(self.combo_values(c))
                    .map(|(p, v)| (p.name.clone(), Value::String(p.domain[v].clone())))
                    .collect();
                let to: Vec<&str> = self
                    .successors(s, c)
                    .iter()
                    .map(|&t| self.states[t].as_str())
                    .collect();
                rows.push(json!({"from": name, "when": when, "to": to}));
            }
        }
        let init: Vec<&str> = self.init.iter().map(|&s| self.states[s].as_str()).collect();
        Ok(json!({
            "name": self.name,
            "states": self.states,
            "init": init,
            "inputs": ports(&self.inputs),
            "outputs": ports(&self.outputs),
            "outputs_map": outputs_map,
            "transitions": rows,
        }))
    }

    /// One state, no inputs, fixed outputs.
    pub fn constant(name: impl Into<String>, outputs: &[(&str, &[&str], &str)]) -> Self {
        let mut b = ComponentBuilder::new(name);
        for (port, domain, _) in outputs {
            b = b.output(*port, domain.iter().copied());
        }
        b.state("s", outputs.iter().map(|(p, _, v)| (*p, *v)))
            .init("s")
            .build(|_, _| vec!["s".to_string()])
            .expect("constant component is well formed")
    }

    /// One state, only inputs: makes its ports free environment signals.
    pub fn sink(name: impl Into<String>, inputs: &[Port]) -> Self {
        let mut b = ComponentBuilder::new(name);
        for p in inputs {
            b = b.input(p.name.clone(), p.domain.iter().cloned());
        }
        b.state("s", std::iter::empty::<(String, String)>())
            .init("s")
            .build(|_, _| vec!["s".to_string()])
            .expect("sink component is well formed")
    }
}

/// Assembles a [`ComponentModel`] from names and a step function.
#[derive(Debug, Clone)]
pub struct ComponentBuilder {
    name: String,
    inputs: Vec<Port>,
    outputs: Vec<Port>,
    states: Vec<(String, Valuation)>,
    init: Vec<String>,
}

impl ComponentBuilder {
    pub fn new(name: impl Into<String>) -> Self {
        ComponentBuilder {
            name: name.into(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            states: Vec::new(),
            init: Vec::new(),
        }
    }

    pub fn input<S: Into<String>>(
        mut self,
        port: impl Into<String>,
        domain: impl IntoIterator<Item = S>,
    ) -> Self {
        self.inputs.push(Port {
            name: port.into(),
            domain: domain.into_iter().map(Into::into).collect(),
        });
        self
    }

    pub fn output<S: Into<String>>(
        mut self,
        port: impl Into<String>,
        domain: impl IntoIterator<Item = S>,
    ) -> Self {
        self.outputs.push(Port {
            name: port.into(),
            domain: domain.into_iter().map(Into::into).collect(),
        });
        self
    }

    pub fn state<K: Into<String>, V: Into<String>>(
        mut self,
        name: impl Into<String>,
        outputs: impl IntoIterator<Item = (K, V)>,
    ) -> Self {
        self.states.push((
            name.into(),
            outputs
                .into_iter()
                .map(|(k, v)| (k.into(), v.into()))
                .collect(),
        ));
        self
    }

    pub fn init(mut self, state: impl Into<String>) -> Self {
        self.init.push(state.into());
        self
    }

    /// `step(state, inputs)` lists the successor state names.
    pub fn build(
        self,
        step: impl Fn(&str, &Valuation) -> Vec<String>,
    ) -> Result<ComponentModel, ComposeError> {
        let name = self.name;
        let err = |m: String| ComposeError::Invalid(format!("component {name}: {m}"));
        let states: Vec<String> = self.states.iter().map(|(s, _)| s.clone()).collect();
        let lookup = |s: &str| {
            states
                .iter()
                .position(|x| x == s)
                .ok_or_else(|| err(format!("unknown state `{s}`")))
        };
        let mut output_map = Vec::with_capacity(states.len());
        for (s, vals) in &self.states {
            let mut row = Vec::with_capacity(self.outputs.len());
            for p in &self.outputs {
                let v = vals.get(&p.name).ok_or_else(|| {
                    err(format!(
                        "state `{s}` gives no value for output `{}`",
                        p.name
                    ))
                })?;
                row.push(
                    p.value_index(v).ok_or_else(|| {
                        err(format!("`{v}` is not in the domain of `{}`", p.name))
                    })?,
                );
            }
            if let Some(extra) = vals
                .keys()
                .find(|k| !self.outputs.iter().any(|p| &p.name == *k))
            {
                return Err(err(format!("state `{s}` sets unknown output `{extra}`")));
            }
            output_map.push(row);
        }
        let init = self
            .init
            .iter()
            .map(|s| lookup(s))
            .collect::<Result<Vec<_>, _>>()?;
        let mut model = ComponentModel {
            name: name.clone(),
            inputs: self.inputs,
            outputs: self.outputs,
            states: states.clone(),
            init,
            output_map,
            transitions: Vec::new(),
        };
        let combos = model.input_combinations();
        for s in &states {
            let mut row = Vec::with_capacity(combos);
            for c in 0..combos {
                let vals = model.combo_values(c);
                let input: Valuation = model
                    .inputs
                    .iter()
                    .zip(&vals)
                    .map(|(p, &v)| (p.name.clone(), p.domain[v].clone()))
                    .collect();
                let mut next = step(s, &input)
                    .iter()
                    .map(|t| lookup(t))
                    .collect::<Result<Vec<_>, _>>()?;
                next.sort_unstable();
                next.dedup();
                row.push(next);
            }
            model.transitions.push(row);
        }
        model.validate()?;
        Ok(model)
    }
}

/// A JSON port value: strings, numbers and booleans all read as text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
enum Scalar {
    Str(String),
    Num(serde_json::Number),
    Bool(bool),
}

impl Scalar {
    fn text(&self) -> String {
        match self {
            Scalar::Str(s) => s.clone(),
            Scalar::Num(n) => n.to_string(),
            Scalar::Bool(b) => b.to_string(),
        }
    }
}

fn texts<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Vec<String>, D::Error> {
    Ok(Vec::<Scalar>::deserialize(d)?
        .iter()
        .map(Scalar::text)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(String),
    Many(Vec<String>),
}

impl OneOrMany {
    fn list(&self) -> Vec<String> {
        match self {
            OneOrMany::One(s) => vec![s.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
struct PortDomain(#[serde(deserialize_with = "texts")] Vec<String>);

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransitionRow {
    from: String,
    /// Missing ports and `"*"` match any value.
    #[serde(default)]
    when: BTreeMap<String, Scalar>,
    to: OneOrMany,
}

/// JSON form of a component.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSpec {
    name: String,
    states: Vec<String>,
    init: OneOrMany,
    #[serde(default)]
    inputs: BTreeMap<String, PortDomain>,
    #[serde(default)]
    outputs: BTreeMap<String, PortDomain>,
    #[serde(default)]
    outputs_map: BTreeMap<String, BTreeMap<String, Scalar>>,
    transitions: Vec<TransitionRow>,
}

impl ComponentSpec {
    /// Expands wildcard rows; rejects overlapping rows and missing cases.
    pub fn to_model(&self) -> Result<ComponentModel, ComposeError> {
        let err = |m: String| ComposeError::Invalid(format!("component {}: {m}", self.name));
        let mut b = ComponentBuilder::new(self.name.clone());
        for (p, d) in &self.inputs {
            b = b.input(p.clone(), d.0.iter().cloned());
        }
        for (p, d) in &self.outputs {
            b = b.output(p.clone(), d.0.iter().cloned());
        }
        for s in &self.states {
            let vals = self.outputs_map.get(s).cloned().unwrap_or_default();
            b = b.state(s.clone(), vals.into_iter().map(|(k, v)| (k, v.text())));
        }
        for s in self.init.list() {
            b = b.init(s);
        }
        if let Some(s) = self.outputs_map.keys().find(|s| !self.states.contains(s)) {
            return Err(err(format!("outputs_map names unknown state `{s}`")));
        }
        for (i, row) in self.transitions.iter().enumerate() {
            if row.from != "*" && !self.states.contains(&row.from) {
                return Err(err(format!(
                    "transition {i} leaves unknown state `{}`",
                    row.from
                )));
            }
            for (p, v) in &row.when {
                let dom = self
                    .inputs
                    .get(p)
                    .ok_or_else(|| err(format!("transition {i} reads unknown input `{p}`")))?;
                let v = v.text();
                if v != "*" && !dom.0.contains(&v) {
                    return Err(err(format!(
                        "transition {i}: `{v}` is not in the domain of `{p}`"
                    )));
                }
            }
        }
        let matches = |row: &TransitionRow, state: &str, input: &Valuation| {
            (row.from == "*" || row.from == state)
                && row.when.iter().all(|(p, v)| {
                    let v = v.text();
                    v == "*" || input.get(p) == Some(&v)
                })
        };
        let failure = std::cell::RefCell::new(None);
        let model = b.build(|state, input| {
            let hits: Vec<usize> = (0..self.transitions.len())
                .filter(|&i| matches(&self.transitions[i], state, input))
                .collect();
            match hits.as_slice() {
                [i] => self.transitions[*i].to.list(),
                [] => {
                    failure.borrow_mut().get_or_insert_with(|| {
                        format!("no transition from `{state}` on {input:?}")
                    });
                    Vec::new()
                }
                [a, b, ..] => {
                    failure.borrow_mut().get_or_insert_with(|| {
                        format!("transitions {a} and {b} overlap at `{state}` on {input:?}")
                    });
                    Vec::new()
                }
            }
        });
        if let Some(m) = failure.into_inner() {
            return Err(err(m));
        }
        model
    }
}
