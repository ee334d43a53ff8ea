#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::seq::SliceRandom;
use rand::Rng;
use safecomp::compose::{ComponentModel, Port, System, Valuation};
use safecomp::contracts::{Conj, Literal, Property};

pub fn binary(name: &str) -> Port {
    Port {
        name: name.into(),
        domain: vec!["0".into(), "1".into()],
    }
}

/// Total Moore machine with one binary output and up to `max_states`
/// states; every (state, input) pair gets a nonempty successor set.
pub fn random_component(
    rng: &mut impl Rng,
    name: &str,
    inputs: &[&str],
    output: &str,
    max_states: usize,
) -> ComponentModel {
    let n = rng.gen_range(1..=max_states);
    let inputs: Vec<Port> = inputs.iter().map(|p| binary(p)).collect();
    let combos = 1usize << inputs.len();
    let transitions = (0..n)
        .map(|_| {
            (0..combos)
                .map(|_| {
                    let k = if rng.gen_bool(0.7) {
                        1
                    } else {
                        rng.gen_range(1..=n)
                    };
                    let mut all: Vec<usize> = (0..n).collect();
                    all.shuffle(rng);
                    let mut s = all[..k].to_vec();
                    s.sort();
                    s
                })
                .collect()
        })
        .collect();
    let mut init: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.3)).collect();
    if init.is_empty() {
        init.push(0);
    }
    let m = ComponentModel {
        name: name.into(),
        inputs,
        outputs: vec![binary(output)],
        states: (0..n).map(|i| format!("s{i}")).collect(),
        init,
        output_map: (0..n).map(|_| vec![rng.gen_range(0..2)]).collect(),
        transitions,
    };
    m.validate().unwrap();
    m
}

pub fn random_conj(rng: &mut impl Rng, ports: &[&str], max: usize) -> Conj {
    let n = rng.gen_range(0..=max);
    let mut lits: Vec<Literal> = (0..n)
        .map(|_| {
            Literal::new(
                *ports.choose(rng).unwrap(),
                if rng.gen_bool(0.5) { "1" } else { "0" },
            )
        })
        .collect();
    lits.sort();
    lits.dedup();
    Conj(lits)
}

/// Random property over binary ports: a non-trivial antecedent, a response
/// of one or two literals, deadline 0 (same tick) to `max_k`.
pub fn random_property(rng: &mut impl Rng, ports: &[&str], max_k: u32) -> Property {
    let mut ante = random_conj(rng, ports, 2);
    if ante.is_true() && rng.gen_bool(0.7) {
        ante = random_conj(rng, ports, 1);
    }
    let mut resp = random_conj(rng, ports, 2);
    if resp.is_true() {
        resp = Conj(vec![Literal::new(*ports.choose(rng).unwrap(), "1")]);
    }
    match rng.gen_range(0..=max_k) {
        0 => Property::always(ante, resp),
        k => Property::bounded_response(ante, k, resp),
    }
}

/// Index of the first tick at which `trace` violates `p`, straight from the
/// definition: a trigger at `i` with no response in `i..=i+k`, observed at
/// `i + k`.
pub fn first_violation(p: &Property, trace: &[Valuation]) -> Option<usize> {
    let (resp, k) = p.response();
    let k = k as usize;
    (0..trace.len())
        .filter(|&i| p.antecedent.holds(&trace[i]) && i + k < trace.len())
        .filter(|&i| (i..=i + k).all(|m| !resp.holds(&trace[m])))
        .map(|i| i + k)
        .min()
}

/// Every valuation of the given ports.
pub fn all_valuations(ports: &[Port]) -> Vec<Valuation> {
    let mut out = vec![Valuation::new()];
    for p in ports {
        out = out
            .into_iter()
            .flat_map(|v| {
                p.domain.iter().map(move |d| {
                    let mut w = v.clone();
                    w.insert(p.name.clone(), d.clone());
                    w
                })
            })
            .collect();
    }
    out
}

/// Reachable product states, computed from the component tables alone.
pub fn reachable_bfs(sys: &System) -> usize {
    let comps = &sys.components;
    let driven: BTreeSet<&str> = comps
        .iter()
        .flat_map(|c| c.outputs.iter().map(|p| p.name.as_str()))
        .collect();
    let mut free: BTreeMap<String, Port> = BTreeMap::new();
    for c in comps {
        for p in &c.inputs {
            if !driven.contains(p.name.as_str()) {
                free.entry(p.name.clone()).or_insert_with(|| p.clone());
            }
        }
    }
    let free: Vec<Port> = free.into_values().collect();
    let free_vals = all_valuations(&free);

    let mut init: Vec<Vec<usize>> = vec![vec![]];
    for c in comps {
        init = init
            .into_iter()
            .flat_map(|t| c.init.iter().map(move |&s| [t.clone(), vec![s]].concat()))
            .collect();
    }
    let mut seen: BTreeSet<Vec<usize>> = init.iter().cloned().collect();
    let mut queue: VecDeque<Vec<usize>> = init.into();
    while let Some(state) = queue.pop_front() {
        let mut outs = Valuation::new();
        for (c, &s) in comps.iter().zip(&state) {
            outs.extend(c.output_valuation(s));
        }
        for fv in &free_vals {
            let mut val = outs.clone();
            val.extend(fv.clone());
            let mut next: Vec<Vec<usize>> = vec![vec![]];
            for (c, &s) in comps.iter().zip(&state) {
                let idx: Vec<usize> = c
                    .inputs
                    .iter()
                    .map(|p| p.value_index(&val[&p.name]).unwrap())
                    .collect();
                let succ = c.successors(s, c.combo_index(&idx)).to_vec();
                next = next
                    .into_iter()
                    .flat_map(|t| succ.iter().map(move |&n| [t.clone(), vec![n]].concat()))
                    .collect();
            }
            for n in next {
                if seen.insert(n.clone()) {
                    queue.push_back(n);
                }
            }
        }
    }
    seen.len()
}
