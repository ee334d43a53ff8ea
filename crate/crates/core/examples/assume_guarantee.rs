//! The assume-guarantee rule on two finite components, compared with a
//! monolithic check of their composition.

use safecomp::compose::{check_assume_guarantee, check_property, ComponentBuilder, Peer, System};
use safecomp::contracts::{Assumption, ComponentContract};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Sensor raises `alarm` the tick after `hazard`; Actuator raises `stop`
    // the tick after `alarm`.
    let sensor = ComponentBuilder::new("Sensor")
        .input("hazard", ["0", "1"])
        .output("alarm", ["0", "1"])
        .state("calm", [("alarm", "0")])
        .state("alert", [("alarm", "1")])
        .init("calm")
        .build(|_, i| vec![if i["hazard"] == "1" { "alert" } else { "calm" }.to_string()])?;
    let actuator = ComponentBuilder::new("Actuator")
        .input("alarm", ["0", "1"])
        .output("stop", ["0", "1"])
        .state("run", [("stop", "0")])
        .state("halt", [("stop", "1")])
        .init("run")
        .build(|_, i| vec![if i["alarm"] == "1" { "halt" } else { "run" }.to_string()])?;

    let c1 = ComponentContract::new(
        "C1",
        Assumption::True,
        "G (hazard=1 => F<=1 (alarm=1))".parse()?,
    );
    let c2 = ComponentContract::new(
        "C2",
        Assumption::True,
        "G (alarm=1 => F<=1 (stop=1))".parse()?,
    );
    let m1 = System::new(vec![sensor.clone()]);
    let m2 = System::new(vec![actuator.clone()]);
    for p in [
        "G (hazard=1 => F<=2 (stop=1))",
        "G (hazard=1 => F<=1 (stop=1))",
    ] {
        let p = p.parse()?;
        let proof = check_assume_guarantee(
            &m1,
            &c1,
            Peer::Component {
                system: &m2,
                contract: &c2,
            },
            &p,
        )?;
        for premise in &proof.premises {
            println!(
                "  premise {}: {} ({})",
                premise.premise, premise.holds, premise.statement
            );
        }
        let whole = check_property(&System::new(vec![sensor.clone(), actuator.clone()]), &p)?;
        println!(
            "{p}: rule concludes {}, monolithic check says {}",
            proof.conclusion, whole.holds
        );
    }
    Ok(())
}
