//! A two-component system from JSON, a bounded-response check, and replay
//! of the counterexample.

use safecomp::compose::{check_property, compose, parse_system, replay};

const SYSTEM: &str = r#"{
  "description": "a request latch that forgets every other tick",
  "components": [
    {"name": "Client", "states": ["quiet", "asking"], "init": "quiet",
     "outputs": {"req": [0, 1]},
     "outputs_map": {"quiet": {"req": 0}, "asking": {"req": 1}},
     "transitions": [{"from": "*", "to": ["quiet", "asking"]}]},
    {"name": "Server", "states": ["idle", "busy", "done"], "init": "idle",
     "inputs": {"req": [0, 1]}, "outputs": {"ack": [0, 1]},
     "outputs_map": {"idle": {"ack": 0}, "busy": {"ack": 0}, "done": {"ack": 1}},
     "transitions": [
       {"from": "idle", "when": {"req": 1}, "to": "busy"},
       {"from": "idle", "when": {"req": 0}, "to": "idle"},
       {"from": "busy", "to": "done"},
       {"from": "done", "to": "idle"}]}
  ],
  "properties": ["G (req=1 => F<=2 (ack=1))", "G (req=1 => F<=1 (ack=1))"]
}"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let file = parse_system(SYSTEM)?;
    println!(
        "{} reachable states",
        compose(&file.system)?.reachable_count()
    );
    for p in &file.properties {
        let r = check_property(&file.system, p)?;
        println!(
            "{p}: holds={} ({} states explored)",
            r.holds, r.states_explored
        );
        if let Some(trace) = &r.counterexample {
            for step in trace {
                println!(
                    "  tick {} {:?} {:?}",
                    step.tick, step.states, step.valuation
                );
            }
            println!(
                "  replay reports violation at tick {:?}",
                replay(&file.system, p, trace)?
            );
        }
    }
    Ok(())
}
