use std::collections::BTreeSet;

use proptest::prelude::*;
use safecomp::contracts::{
    check_point_against_contract, parse_component_contract, parse_dnn_contract, parse_property,
    render_component_contract, render_dnn_contract, render_property, Assumption, ComponentContract,
    Conj, Determination, DnnContract, Guarantee, Literal, Property, Provenance, RegionContract,
};
use safecomp::regions::{dist, Metric};

const NAMES: [&str; 6] = ["x", "Class", "velocity", "brake", "G_sig", "F2"];
const VALUES: [&str; 6] = ["0", "1", "red", "green", "-3", "yellow_2"];

fn conj() -> impl Strategy<Value = Conj> {
    prop::collection::vec((0..NAMES.len(), 0..VALUES.len()), 0..3).prop_map(|v| {
        Conj(
            v.into_iter()
                .map(|(p, x)| Literal::new(NAMES[p], VALUES[x]))
                .collect(),
        )
    })
}

fn property() -> impl Strategy<Value = Property> {
    (conj(), conj(), prop::option::of(1u32..8)).prop_map(|(a, c, k)| match k {
        None => Property::always(a, c),
        Some(k) => Property::bounded_response(a, k, c),
    })
}

fn metric() -> impl Strategy<Value = Metric> {
    prop_oneof![Just(Metric::L1), Just(Metric::L2), Just(Metric::Linf)]
}

const LABELS: [&str; 4] = ["COC", "WL", "WR", "SL"];

fn region_contract(dim: usize) -> impl Strategy<Value = RegionContract> {
    (
        prop::collection::vec(-1.0f64..1.0, dim),
        0.0f64..0.6,
        metric(),
        0..LABELS.len(),
        prop::option::of(prop::collection::btree_set(0..LABELS.len(), 1..3)),
        prop::option::of(0.01f64..1.0),
        1usize..500,
    )
        .prop_map(
            |(centroid, radius, metric, label, excluded, uncertainty_max, members)| {
                let expected = LABELS[label].to_string();
                let others = || {
                    LABELS
                        .iter()
                        .filter(|l| **l != expected)
                        .map(|l| l.to_string())
                };
                let (guarantee, summary, proved) = match excluded {
                    Some(ex) => {
                        let ex: BTreeSet<String> = ex
                            .into_iter()
                            .filter(|&i| i != label)
                            .map(|i| LABELS[i].to_string())
                            .collect();
                        if ex.is_empty() {
                            (
                                Guarantee::LabelIs(expected.clone()),
                                "fully_safe",
                                others().collect(),
                            )
                        } else {
                            (
                                Guarantee::LabelNotIn(ex.clone()),
                                "targeted_safe",
                                ex.into_iter().collect(),
                            )
                        }
                    }
                    None => (
                        Guarantee::LabelIs(expected.clone()),
                        "fully_safe",
                        others().collect(),
                    ),
                };
                RegionContract {
                    id: String::new(),
                    metric,
                    centroid,
                    radius,
                    guarantee,
                    uncertainty_max,
                    provenance: Provenance {
                        network: "net".into(),
                        summary: summary.into(),
                        expected_label: expected,
                        member_count: members,
                        proved_safe: proved,
                    },
                }
            },
        )
}

fn dnn_contract() -> impl Strategy<Value = DnnContract> {
    (1usize..6).prop_flat_map(|dim| {
        prop::collection::vec(region_contract(dim), 0..6).prop_map(|mut rs| {
            for (i, r) in rs.iter_mut().enumerate() {
                r.id = format!("r{i:04}");
            }
            DnnContract {
                network: "net".into(),
                regions: rs,
                annex: vec![],
            }
        })
    })
}

#[test]
fn cockpit_region_contract() {
    let c = DnnContract {
        network: "acas".into(),
        regions: vec![RegionContract {
            id: "r0000".into(),
            metric: Metric::L1,
            centroid: vec![0.19, 0.31, 0.28, 0.33, 0.33],
            radius: 0.28,
            guarantee: Guarantee::LabelIs("COC".into()),
            uncertainty_max: None,
            provenance: Provenance {
                network: "acas".into(),
                summary: "fully_safe".into(),
                expected_label: "COC".into(),
                member_count: 12,
                proved_safe: vec!["SL".into(), "SR".into(), "WL".into(), "WR".into()],
            },
        }],
        annex: vec![],
    };
    let text = render_dnn_contract(&c);
    assert!(
        text.contains("\"label_is\": \"COC\"") && text.contains("0.28") && text.contains("\"L1\"")
    );
    assert_eq!(parse_dnn_contract(&text).unwrap(), c);
    match check_point_against_contract(&c, &[0.19, 0.31, 0.28, 0.33, 0.33]).unwrap() {
        Determination::Determined { region, guarantee } => {
            assert_eq!(region, "r0000");
            assert_eq!(guarantee, Guarantee::LabelIs("COC".into()));
        }
        d => panic!("{d:?}"),
    }
    assert_eq!(
        check_point_against_contract(&c, &[0.9, 0.9, 0.9, 0.9, 0.9]).unwrap(),
        Determination::Undetermined
    );
}

#[test]
fn ebs_properties_parse() {
    let p = parse_property("G (x=red => F<=3 (velocity=0))").unwrap();
    assert_eq!(
        p,
        Property::bounded_response(Conj::of(&[("x", "red")]), 3, Conj::of(&[("velocity", "0")]))
    );
    let c1 = parse_property("G (Class=red => F<=3 (velocity=0))").unwrap();
    assert_eq!(c1.antecedent, Conj::of(&[("Class", "red")]));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn property_text_round_trips(p in property()) {
        let text = render_property(&p);
        prop_assert_eq!(parse_property(&text).unwrap(), p.clone());
        prop_assert_eq!(text, p.to_string());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn dnn_contracts_round_trip(c in dnn_contract()) {
        let text = render_dnn_contract(&c);
        let back = parse_dnn_contract(&text).unwrap();
        prop_assert_eq!(&back, &c);
        prop_assert_eq!(render_dnn_contract(&back), text);
    }

    #[test]
    fn component_contracts_round_trip(name in "[A-Za-z][A-Za-z0-9_]{0,8}", a in prop::option::of(property()), g in property()) {
        let c = ComponentContract::new(name, a.map_or(Assumption::True, Assumption::Holds), g);
        prop_assert_eq!(parse_component_contract(&render_component_contract(&c)).unwrap(), c);
    }

    #[test]
    fn point_lookup_is_lowest_id_membership(c in dnn_contract(), pts in prop::collection::vec(prop::collection::vec(-1.5f64..1.5, 5), 100)) {
        let dim = c.regions.first().map_or(0, |r| r.centroid.len());
        if dim == 0 {
            return Ok(());
        }
        for p in pts {
            let x = &p[..dim];
            let want = c.regions.iter().find(|r| dist(r.metric, x, &r.centroid).unwrap() <= r.radius);
            let got = check_point_against_contract(&c, x).unwrap();
            match (want, got) {
                (None, Determination::Undetermined) => {}
                (Some(r), Determination::Determined { region, guarantee }) => {
                    prop_assert_eq!(&region, &r.id);
                    prop_assert_eq!(&guarantee, &r.guarantee);
                }
                (w, g) => prop_assert!(false, "expected {:?}, got {:?}", w.map(|r| &r.id), g),
            }
        }
    }
}
