//! From verdicts to a region contract, and point lookups against it.

use safecomp::app::semaphore::{run_semaphore_pipeline, PipelineConfig, PROTOTYPES};
use safecomp::contracts::{
    check_point_against_contract, parse_dnn_contract, render_dnn_contract, Determination,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let run = run_semaphore_pipeline(&PipelineConfig::default())?;
    let text = render_dnn_contract(&run.contract);
    println!("{text}");
    let back = parse_dnn_contract(&text)?;
    assert_eq!(back, run.contract);
    for p in PROTOTYPES.iter().map(|p| p.to_vec()).chain([vec![0.0; 8]]) {
        match check_point_against_contract(&back, &p)? {
            Determination::Determined { region, guarantee } => {
                println!("{p:?}: {region} guarantees {guarantee:?}")
            }
            Determination::Undetermined => println!("{p:?}: no region"),
        }
    }
    Ok(())
}
