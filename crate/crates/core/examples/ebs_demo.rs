//! The emergency braking scenario end to end, for several braking
//! latencies.

use safecomp::app::ebs::{run_ebs_demo, EbsParams};
use safecomp::app::semaphore::PipelineConfig;
use safecomp::compose::replay;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for braking_ticks in [1, 2, 3, 4] {
        let params = EbsParams {
            braking_ticks,
            ..EbsParams::default()
        };
        let out = run_ebs_demo(&params, &PipelineConfig::default())?;
        println!(
            "braking_ticks={braking_ticks}: conclusion {} (monolithic {})",
            out.proof.conclusion, out.monolithic.holds
        );
        for p in &out.proof.premises {
            println!("  premise {} holds={} {}", p.premise, p.holds, p.statement);
        }
        if let Some(failing) = out.proof.failing() {
            if let Some(trace) = failing
                .check
                .as_ref()
                .and_then(|c| c.counterexample.as_ref())
            {
                for s in trace {
                    println!("    tick {}: {:?}", s.tick, s.valuation);
                }
                let tick = replay(&out.demo.m1, &out.demo.c1.guarantee, trace)?;
                println!("    replayed violation tick: {tick:?}");
            }
        }
    }
    Ok(())
}
