//! Verifying many regions on several workers gives the same answers as on
//! one.

use std::time::Instant;

use safecomp::app::runner::run_parallel_verification;
use safecomp::network::random::random_network;
use safecomp::regions::{Metric, Region};
use safecomp::verifier::VerifyConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let net = random_network(3, 2, &[8, 8], 3);
    let regions: Vec<Region> = (0..20)
        .map(|i| {
            let c = vec![0.05 + 0.045 * i as f64, 0.5 + 0.02 * (i % 5) as f64];
            Region {
                id: format!("r{i:04}"),
                expected_label: net.classify(&c).unwrap(),
                centroid: c,
                radius: 0.03,
                metric: if i % 2 == 0 { Metric::L1 } else { Metric::Linf },
                member_count: 1,
                member_indices: vec![],
            }
        })
        .collect();
    let mut baseline = None;
    for workers in [1, 2, 4, 8] {
        let t = Instant::now();
        let out = run_parallel_verification(&net, &regions, &VerifyConfig::default(), workers, 42)?;
        let summary: Vec<&str> = out.iter().map(|(_, f)| f.summary.name()).collect();
        println!(
            "{workers} workers: {:?} in {:.3}s",
            &summary[..5],
            t.elapsed().as_secs_f64()
        );
        match &baseline {
            None => baseline = Some(summary.join(",")),
            Some(b) => assert_eq!(*b, summary.join(",")),
        }
    }
    Ok(())
}
