//! Discover, verify and emit on the synthetic traffic-light classifier.

use safecomp::app::semaphore::{run_semaphore_pipeline, PipelineConfig};
use safecomp::regions::Metric;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for metric in [Metric::L2, Metric::L1, Metric::Linf] {
        let cfg = PipelineConfig {
            metric,
            ..PipelineConfig::default()
        };
        let run = run_semaphore_pipeline(&cfg)?;
        println!("{metric}: {} regions", run.results.len());
        for (r, f) in &run.results {
            println!(
                "  {} {:<6} radius {:.3} -> {}",
                r.id,
                run.semaphore.label_names[r.expected_label],
                r.radius,
                f.summary.name()
            );
        }
        println!(
            "  contract: {} regions, {} in the annex",
            run.contract.regions.len(),
            run.contract.annex.len()
        );
    }
    Ok(())
}
