//! Parallel verification of many regions with scheduling-independent
//! results.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::network::Network;
use crate::regions::Region;
use crate::verifier::{verify_full, FullVerification, VerifyConfig, VerifyError};

/// Seed of one region's task, derived from the run seed and the region id
/// only, so the worker count cannot influence it.
pub fn region_seed(seed: u64, id: &str) -> u64 {
    // FNV-1a over the id, then a splitmix finalizer with the run seed
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in id.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    let mut z = h ^ seed.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Default worker count: `SAFECOMP_WORKERS` if set, else 1.
pub fn default_workers() -> usize {
    std::env::var("SAFECOMP_WORKERS")
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&w: &usize| w >= 1)
        .unwrap_or(1)
}

/// Verifies every region against every other label on `workers` threads.
/// Output is sorted by region id.
pub fn run_parallel_verification(
    net: &Network,
    regions: &[Region],
    config: &VerifyConfig,
    workers: usize,
    seed: u64,
) -> Result<Vec<(Region, FullVerification)>, VerifyError> {
    let workers = workers.max(1).min(regions.len().max(1));
    let mut order: Vec<usize> = (0..regions.len()).collect();
    order.sort_by(|&a, &b| regions[a].id.cmp(&regions[b].id));
    let slots: Mutex<Vec<Option<Result<FullVerification, VerifyError>>>> =
        Mutex::new((0..regions.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&task) = order.get(i) else {
                    break;
                };
                let r = &regions[task];
                let out = verify_full(net, r, config, region_seed(seed, &r.id));
                slots.lock().expect("no worker panicked")[i] = Some(out);
            });
        }
    });
    let slots = slots.into_inner().expect("no worker panicked");
    order
        .into_iter()
        .zip(slots)
        .map(|(task, slot)| Ok((regions[task].clone(), slot.expect("every task ran")?)))
        .collect()
}
