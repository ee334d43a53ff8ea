//! Targeted verification of hand-made regions: one provably safe, one with
//! a counterexample.

use safecomp::network::random::random_network;
use safecomp::regions::{Metric, Region};
use safecomp::verifier::{verify_full, verify_targeted, Mode, VerificationTask, VerifyConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let net = random_network(11, 2, &[8, 8], 3);
    let center = vec![0.5, 0.5];
    let expected = net.classify(&center)?;
    for radius in [0.01, 0.3] {
        let region = Region {
            id: format!("r{radius}"),
            centroid: center.clone(),
            radius,
            metric: Metric::L1,
            expected_label: expected,
            member_count: 1,
            member_indices: vec![0],
        };
        let full = verify_full(&net, &region, &VerifyConfig::default(), 7)?;
        println!("radius {radius}: {}", full.summary.name());
        for (t, v) in &full.verdicts {
            print!(
                "  vs {}: {:?} after {} nodes",
                net.labels[*t], v.status, v.stats.nodes
            );
            if let Some(c) = &v.counterexample {
                print!(
                    " at {:?} (classified {})",
                    c.point,
                    net.labels[net.classify(&c.point)?]
                );
            }
            println!();
        }
        let target = (expected + 1) % 3;
        let one = verify_targeted(&VerificationTask {
            network: &net,
            region: &region,
            mode: Mode::Targeted(target),
            config: VerifyConfig::default(),
            seed: 1,
        })?;
        println!("  single task vs {}: {:?}", net.labels[target], one.status);
    }
    Ok(())
}
