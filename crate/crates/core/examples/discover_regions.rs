//! Label-guided clustering of the semaphore dataset into pure regions.

use safecomp::app::semaphore::build_semaphore_classifier;
use safecomp::regions::{discover_regions, DiscoveryConfig, Metric, RadiusStrategy};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sem = build_semaphore_classifier(42);
    for radius in [RadiusStrategy::Tight, RadiusStrategy::Separating] {
        let cfg = DiscoveryConfig {
            seed: 42,
            radius,
            ..DiscoveryConfig::default()
        };
        let found = discover_regions(&sem.dataset, Metric::L2, &cfg)?;
        println!(
            "{radius:?}: {} regions, {} dropped clusters",
            found.regions.len(),
            found.dropped.len()
        );
        for r in &found.regions {
            let foreign = sem
                .dataset
                .points
                .iter()
                .zip(&sem.dataset.labels)
                .filter(|(p, &l)| l != r.expected_label && r.contains(p).unwrap_or(false))
                .count();
            println!(
                "  {} {:<6} radius {:.3} members {:>3} foreign points inside {}",
                r.id, sem.label_names[r.expected_label], r.radius, r.member_count, foreign
            );
        }
    }
    Ok(())
}
