mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::{
    all_valuations, binary, first_violation, random_component, random_property, reachable_bfs,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use safecomp::app::ebs::{build_ebs_demo, EbsParams};
use safecomp::compose::{
    check_assume_guarantee, check_property, compose, flatten, monitor_trace,
    most_general_environment, replay, Peer, System, Valuation,
};
use safecomp::contracts::{Assumption, ComponentContract, DnnContract};

#[test]
fn monitor_agrees_with_trace_semantics() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let ports = [binary("p"), binary("q")];
    let vals = all_valuations(&ports);
    for _ in 0..60 {
        let p = random_property(&mut rng, &["p", "q"], 3);
        // every trace up to length 5
        let mut traces: Vec<Vec<Valuation>> = vec![vec![]];
        for _ in 0..5 {
            traces = traces
                .into_iter()
                .flat_map(|t| {
                    vals.iter()
                        .map(move |v| [t.clone(), vec![v.clone()]].concat())
                })
                .collect();
            for t in &traces {
                let ok = monitor_trace(&p, t);
                for i in 0..t.len() {
                    assert_eq!(
                        ok[i],
                        first_violation(&p, &t[..=i]).is_none(),
                        "{p} on {t:?} at {i}"
                    );
                }
            }
        }
    }
}

/// Prefixes of length `n` that satisfy `p` and survive `look` more ticks.
fn oracle_language(
    p: &safecomp::contracts::Property,
    vals: &[Valuation],
    n: usize,
    look: usize,
) -> BTreeSet<Vec<Valuation>> {
    fn extend(
        p: &safecomp::contracts::Property,
        vals: &[Valuation],
        t: &mut Vec<Valuation>,
        left: usize,
    ) -> bool {
        if first_violation(p, t).is_some() {
            return false;
        }
        if left == 0 {
            return true;
        }
        for v in vals {
            t.push(v.clone());
            let ok = extend(p, vals, t, left - 1);
            t.pop();
            if ok {
                return true;
            }
        }
        false
    }
    let mut out = BTreeSet::new();
    let mut frontier: Vec<Vec<Valuation>> = vec![vec![]];
    for _ in 0..n {
        frontier = frontier
            .into_iter()
            .flat_map(|t| {
                vals.iter()
                    .map(move |v| [t.clone(), vec![v.clone()]].concat())
            })
            .filter(|t| first_violation(p, t).is_none())
            .collect();
    }
    for mut t in frontier {
        if extend(p, vals, &mut t, look) {
            out.insert(t);
        }
    }
    out
}

#[test]
fn most_general_environment_language_up_to_depth_six() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let ports = [binary("p"), binary("q")];
    let domains: BTreeMap<String, Vec<String>> = ports
        .iter()
        .map(|p| (p.name.clone(), p.domain.clone()))
        .collect();
    for _ in 0..25 {
        let p = random_property(&mut rng, &["p", "q"], 2);
        // the generator drives exactly the ports its contract mentions
        let used: Vec<_> = ports
            .iter()
            .filter(|x| p.ports().contains(x.name.as_str()))
            .cloned()
            .collect();
        let vals = all_valuations(&used);
        let mge = most_general_environment(
            &ComponentContract::new("E", Assumption::True, p.clone()),
            &domains,
        )
        .unwrap();
        assert!(mge.inputs.is_empty());
        let look = p.response().1 as usize + 1;
        let mut frontier: BTreeSet<(usize, Vec<Valuation>)> = mge
            .init
            .iter()
            .map(|&s| (s, vec![mge.output_valuation(s)]))
            .collect();
        for depth in 1..=6 {
            let lang: BTreeSet<Vec<Valuation>> = frontier.iter().map(|(_, t)| t.clone()).collect();
            assert_eq!(
                lang,
                oracle_language(&p, &vals, depth, look),
                "{p} at depth {depth}"
            );
            frontier = frontier
                .into_iter()
                .flat_map(|(s, t)| {
                    mge.successors(s, 0)
                        .iter()
                        .map(|&n| (n, [t.clone(), vec![mge.output_valuation(n)]].concat()))
                        .collect::<Vec<_>>()
                })
                .collect();
        }
    }
}

#[test]
fn ebs_reachable_states_match_independent_search() {
    for (b, vmax) in [(1, 2), (2, 2), (3, 2), (4, 3)] {
        let d = build_ebs_demo(&EbsParams {
            braking_ticks: b,
            max_velocity: vmax,
            ..EbsParams::default()
        })
        .unwrap();
        assert_eq!(
            compose(&d.m1).unwrap().reachable_count(),
            reachable_bfs(&d.m1)
        );
        let closed = d.closed_system(&d.stub).unwrap();
        assert_eq!(
            compose(&closed).unwrap().reachable_count(),
            reachable_bfs(&closed)
        );
    }
}

#[test]
fn grouping_and_order_do_not_change_the_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..40 {
        let a = random_component(&mut rng, "A", &["c"], "a", 3);
        let b = random_component(&mut rng, "B", &["a"], "b", 3);
        let c = random_component(&mut rng, "C", &["b"], "c", 3);
        let p = random_property(&mut rng, &["a", "b", "c"], 2);
        let flat = System::new(vec![a.clone(), b.clone(), c.clone()]);
        let left = System::new(vec![
            flatten(&System::new(vec![a.clone(), b.clone()]), "AB").unwrap(),
            c.clone(),
        ]);
        let right = System::new(vec![
            a.clone(),
            flatten(&System::new(vec![b.clone(), c.clone()]), "BC").unwrap(),
        ]);
        let shuffled = System::new(vec![c, a, b]);
        let n = reachable_bfs(&flat);
        let holds = check_property(&flat, &p).unwrap().holds;
        for s in [&left, &right, &shuffled] {
            assert_eq!(compose(s).unwrap().reachable_count(), n);
            assert_eq!(check_property(s, &p).unwrap().holds, holds, "{p}");
        }
    }
}

#[test]
fn counterexamples_replay_to_their_last_tick() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut seen = 0;
    for _ in 0..60 {
        let a = random_component(&mut rng, "A", &["b"], "a", 4);
        let b = random_component(&mut rng, "B", &["a"], "b", 4);
        let sys = System::new(vec![a, b]);
        let p = random_property(&mut rng, &["a", "b"], 3);
        let r = check_property(&sys, &p).unwrap();
        if let Some(trace) = &r.counterexample {
            seen += 1;
            assert_eq!(replay(&sys, &p, trace).unwrap(), r.violation_tick());
            let vals: Vec<Valuation> = trace.iter().map(|s| s.valuation.clone()).collect();
            assert_eq!(first_violation(&p, &vals), Some(vals.len() - 1));
        }
    }
    assert!(seen > 5);
}

#[test]
fn weak_component_guarantee_fails_the_third_premise() {
    let d = build_ebs_demo(&EbsParams::default()).unwrap();
    let weak = ComponentContract::new(
        "C1",
        Assumption::True,
        "G (Class=red => F<=5 (velocity=0))".parse().unwrap(),
    );
    let r = check_assume_guarantee(
        &d.m1,
        &weak,
        Peer::Dnn {
            contract: &d.stub,
            abstraction: &d.abstraction,
        },
        &d.property,
    )
    .unwrap();
    assert!(r.premises[0].holds);
    let f = r.failing().unwrap();
    assert_eq!(f.premise, 3);
    assert!(f.check.as_ref().unwrap().counterexample.is_some());
}

#[test]
fn empty_classifier_contract_leaves_class_unconstrained() {
    let mut d = build_ebs_demo(&EbsParams {
        fail_safe: None,
        ..EbsParams::default()
    })
    .unwrap();
    let empty = DnnContract::empty("stub");
    let r = d.check(&empty).unwrap();
    assert!(!r.conclusion);
    assert_eq!(r.failing().unwrap().premise, 3);
    // with the guard, every outside input maps to red and P holds again
    d.abstraction = d.abstraction.clone().guarded("red");
    assert!(d.check(&empty).unwrap().conclusion);
}
