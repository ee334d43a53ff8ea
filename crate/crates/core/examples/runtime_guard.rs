//! Guarding a classifier at runtime with its region contract.

use std::io::Cursor;

use safecomp::app::semaphore::{run_semaphore_pipeline, PipelineConfig};
use safecomp::guard::{build_guard, guard_eval, guard_stream, GuardConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let run = run_semaphore_pipeline(&PipelineConfig::default())?;
    let net = &run.semaphore.network;
    let guard = build_guard(
        &run.contract,
        &GuardConfig {
            fail_safe_action: "brake".into(),
            uncertainty_threshold: Some(0.6),
        },
    )?;
    let d = guard_eval(&guard, net, &run.semaphore.dataset.points[0])?;
    println!("first training point: {d:?}");

    let csv = "f1,f2,f3,f4,f5,f6,f7,f8\n\
               0.9,0.1,0.1,0.8,0.2,0.2,0.7,0.3\n\
               0.5,0.5,0.5,0.5,0.5,0.5,0.5,0.5\n\
               0.1,0.9,0.2,0.2,0.8,0.3,0.3,0.7\n";
    let mut out = Vec::new();
    let stats = guard_stream(&guard, net, Cursor::new(csv), &mut out, false)?;
    print!("{}", String::from_utf8(out)?);
    println!("{stats:?}");
    Ok(())
}
