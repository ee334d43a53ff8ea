//! Emergency braking: a braking controller and a vehicle (M1) next to a
//! traffic-light classifier (M2) known only through its region contract.
//!
//! The state machines are illustrative fixtures; only the property and the
//! braking contract are fixed by the scenario.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::semaphore::{run_semaphore_pipeline, Pipeline, PipelineConfig, LABELS, PROTOTYPES};
use super::AppError;
use crate::compose::{
    abstract_dnn_component, check_assume_guarantee, check_property, AbstractionConfig, AgReport,
    CheckResult, ComponentBuilder, ComponentModel, ComposeError, Peer, System,
};
use crate::contracts::{
    Assumption, ComponentContract, DnnContract, Guarantee, Property, Provenance, RegionContract,
};
use crate::regions::Metric;

pub const PROPERTY: &str = "G (x=red => F<=3 (velocity=0))";
pub const GUARANTEE: &str = "G (Class=red => F<=3 (velocity=0))";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EbsParams {
    /// Ticks from the vehicle first seeing the brake command to standstill.
    pub braking_ticks: u32,
    /// Velocities range over `0..=max_velocity`.
    pub max_velocity: u32,
    /// Label the runtime guard forces for inputs outside every region.
    pub fail_safe: Option<String>,
}

impl Default for EbsParams {
    fn default() -> Self {
        EbsParams {
            braking_ticks: 2,
            max_velocity: 2,
            fail_safe: Some("red".into()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EbsDemo {
    /// `BrakingSystem || Vehicle`.
    pub m1: System,
    pub c1: ComponentContract,
    /// Placeholder classifier contract: one `label_is` region per class.
    pub stub: DnnContract,
    pub abstraction: AbstractionConfig,
    pub property: Property,
}

fn velocity_domain(p: &EbsParams) -> Vec<String> {
    (0..=p.max_velocity).map(|v| v.to_string()).collect()
}

/// Brakes once the classifier reports red and keeps braking until the
/// vehicle stands still.
pub fn braking_system(p: &EbsParams) -> Result<ComponentModel, ComposeError> {
    ComponentBuilder::new("BrakingSystem")
        .input("Class", LABELS)
        .input("velocity", velocity_domain(p))
        .output("brake", ["0", "1"])
        .state("idle", [("brake", "0")])
        .state("braking", [("brake", "1")])
        .init("idle")
        .build(|s, inp| {
            let on = inp["Class"] == "red" || (s == "braking" && inp["velocity"] != "0");
            vec![if on { "braking" } else { "idle" }.to_string()]
        })
}

fn vehicle_state(v: u32, c: u32) -> String {
    if c == 0 {
        format!("v{v}")
    } else {
        format!("v{v}_b{c}")
    }
}

/// One braking tick with `c` ticks left: speed drops in proportion and is
/// zero when the countdown ends.
fn decelerate(v: u32, c: u32) -> (u32, u32) {
    let nv = if c <= 1 { 0 } else { (v * (c - 1)).div_ceil(c) };
    (nv, if nv == 0 { 0 } else { c - 1 })
}

/// Cruises at a nondeterministically drifting speed; a brake command starts
/// a braking manoeuvre that ignores further input until standstill.
pub fn vehicle(p: &EbsParams) -> Result<ComponentModel, ComposeError> {
    if p.braking_ticks == 0 {
        return Err(ComposeError::Invalid(
            "braking_ticks must be at least 1".into(),
        ));
    }
    let mut b = ComponentBuilder::new("Vehicle")
        .input("brake", ["0", "1"])
        .output("velocity", velocity_domain(p));
    let mut states = Vec::new();
    for v in 0..=p.max_velocity {
        for c in 0..p.braking_ticks {
            if c == 0 || v > 0 {
                states.push((v, c));
            }
        }
    }
    for &(v, c) in &states {
        b = b.state(
            vehicle_state(v, c),
            [("velocity".to_string(), v.to_string())],
        );
    }
    for v in 0..=p.max_velocity {
        b = b.init(vehicle_state(v, 0));
    }
    let (bt, vmax) = (p.braking_ticks, p.max_velocity);
    b.build(|s, inp| {
        let &(v, c) = states
            .iter()
            .find(|&&(v, c)| vehicle_state(v, c) == s)
            .expect("known state");
        let next = if c > 0 {
            vec![decelerate(v, c)]
        } else if inp["brake"] == "1" {
            vec![decelerate(v, bt)]
        } else {
            (v.saturating_sub(1)..=(v + 1).min(vmax))
                .map(|w| (w, 0))
                .collect()
        };
        next.into_iter().map(|(v, c)| vehicle_state(v, c)).collect()
    })
}

/// A contract with one exact `label_is` region per class prototype, used
/// before a real classifier contract is available.
pub fn stub_contract() -> DnnContract {
    let mut c = DnnContract::empty("stub");
    for (j, proto) in PROTOTYPES.iter().enumerate() {
        let label = LABELS[j].to_string();
        c.regions.push(RegionContract {
            id: format!("stub_{label}"),
            metric: Metric::Linf,
            centroid: proto.to_vec(),
            radius: 0.0,
            guarantee: Guarantee::LabelIs(label.clone()),
            uncertainty_max: None,
            provenance: Provenance {
                network: "stub".into(),
                summary: "fully_safe".into(),
                expected_label: label.clone(),
                member_count: 1,
                proved_safe: LABELS
                    .iter()
                    .filter(|l| **l != label)
                    .map(|l| l.to_string())
                    .collect(),
            },
        });
    }
    c
}

pub fn build_ebs_demo(p: &EbsParams) -> Result<EbsDemo, AppError> {
    let m1 = System::new(vec![braking_system(p)?, vehicle(p)?]);
    let property: Property = PROPERTY.parse()?;
    let c1 = ComponentContract::new("C1", Assumption::True, GUARANTEE.parse()?);
    let mut abstraction = AbstractionConfig::new(&LABELS);
    if let Some(f) = &p.fail_safe {
        abstraction = abstraction.guarded(f);
    }
    Ok(EbsDemo {
        m1,
        c1,
        stub: stub_contract(),
        abstraction,
        property,
    })
}

impl EbsDemo {
    /// M1 next to the abstraction of `contract`, for a monolithic check.
    pub fn closed_system(&self, contract: &DnnContract) -> Result<System, AppError> {
        let mut sys = self.m1.clone();
        sys.components
            .push(abstract_dnn_component(contract, &self.abstraction)?);
        Ok(sys)
    }

    pub fn check(&self, contract: &DnnContract) -> Result<AgReport, AppError> {
        let mut report = check_assume_guarantee(
            &self.m1,
            &self.c1,
            Peer::Dnn {
                contract,
                abstraction: &self.abstraction,
            },
            &self.property,
        )?;
        report
            .notes
            .push("BrakingSystem and Vehicle are illustrative state machines".into());
        Ok(report)
    }
}

#[derive(Debug, Clone)]
pub struct EbsOutcome {
    pub demo: EbsDemo,
    pub pipeline: Pipeline,
    pub proof: AgReport,
    /// `M1 || abstraction |= P`, checked directly.
    pub monolithic: CheckResult,
}

/// Classifier pipeline, contract, abstraction and the assume-guarantee
/// check, end to end.
pub fn run_ebs_demo(p: &EbsParams, cfg: &PipelineConfig) -> Result<EbsOutcome, AppError> {
    let demo = build_ebs_demo(p)?;
    let pipeline = run_semaphore_pipeline(cfg)?;
    let proof = demo.check(&pipeline.contract)?;
    let monolithic = check_property(&demo.closed_system(&pipeline.contract)?, &demo.property)?;
    Ok(EbsOutcome {
        demo,
        pipeline,
        proof,
        monolithic,
    })
}

/// Labels a region contract guarantees somewhere.
pub fn guaranteed_labels(c: &DnnContract) -> BTreeSet<String> {
    c.regions
        .iter()
        .filter_map(|r| match &r.guarantee {
            Guarantee::LabelIs(l) => Some(l.clone()),
            Guarantee::LabelNotIn(_) => None,
        })
        .collect()
}
