//! A constructive traffic-light classifier over 8 synthetic image
//! features, with a seeded dataset and the discover → verify → emit
//! pipeline on top of it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::runner::run_parallel_verification;
use super::AppError;
use crate::contracts::{emit_dnn_contract, DnnContract};
use crate::network::{Activation, Layer, Network, ScoreOrder};
use crate::regions::{
    discover_regions, Discovery, DiscoveryConfig, LabeledDataset, Metric, RadiusStrategy, Region,
};
use crate::verifier::{FullVerification, VerifyConfig};

pub const LABELS: [&str; 3] = ["red", "green", "yellow"];

pub const PROTOTYPES: [[f64; 8]; 3] = [
    [0.9, 0.1, 0.1, 0.8, 0.2, 0.2, 0.7, 0.3],
    [0.1, 0.9, 0.2, 0.2, 0.8, 0.3, 0.3, 0.7],
    [0.7, 0.7, 0.1, 0.5, 0.5, 0.8, 0.5, 0.5],
];

pub const POINTS_PER_CLASS: usize = 100;
pub const NOISE_SIGMA: f64 = 0.12;

#[derive(Debug, Clone, PartialEq)]
pub struct Semaphore {
    pub network: Network,
    /// Normalized and raw coincide: the input domain is `[0, 1]^8`.
    pub dataset: LabeledDataset,
    pub label_names: Vec<String>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest prototype in Euclidean distance, lowest index on
/// ties.
pub fn nearest_prototype(x: &[f64]) -> usize {
    let mut best = 0;
    for (j, p) in PROTOTYPES.iter().enumerate().skip(1) {
        if sq_dist(x, p) < sq_dist(x, &PROTOTYPES[best]) {
            best = j;
        }
    }
    best
}

/// Knots of the piecewise-linear stand-in for `t^2` on `[0, 1]`.
pub const KNOTS: usize = 6;

/// `-|x - p|^2 = 2 p.x - |p|^2 - |x|^2`, with `|x|^2` replaced by the
/// interpolant `s(x) = sum_i phi(x_i)` of `t^2` at `k / KNOTS`. Hidden units
/// are `relu(x_i)` and `relu(x_i - k / KNOTS)`; since `s` is common to all
/// classes the decision is exactly nearest-prototype.
pub fn semaphore_network() -> Network {
    let dim = PROTOTYPES[0].len();
    let h = 1.0 / KNOTS as f64;
    let mut w1 = Vec::new();
    let mut b1 = Vec::new();
    for i in 0..dim {
        let mut row = vec![0.0; dim];
        row[i] = 1.0;
        w1.push(row);
        b1.push(0.0);
    }
    for i in 0..dim {
        for k in 1..KNOTS {
            let mut row = vec![0.0; dim];
            row[i] = 1.0;
            w1.push(row);
            b1.push(-(k as f64) * h);
        }
    }
    // phi(t) = h t + 2h sum_k relu(t - k h)
    let mut w2 = Vec::new();
    let mut b2 = Vec::new();
    for p in &PROTOTYPES {
        let mut row: Vec<f64> = p.iter().map(|&pi| 2.0 * pi - h).collect();
        row.extend(std::iter::repeat_n(-2.0 * h, dim * (KNOTS - 1)));
        w2.push(row);
        b2.push(-p.iter().map(|v| v * v).sum::<f64>());
    }
    Network {
        name: "semaphore".into(),
        labels: LABELS.iter().map(|s| s.to_string()).collect(),
        score_order: ScoreOrder::MaxBest,
        input_dim: dim,
        layers: vec![
            Layer::new(w1, b1, Activation::Relu),
            Layer::new(w2, b2, Activation::Identity),
        ],
        input_min: vec![0.0; dim],
        input_max: vec![1.0; dim],
        input_mean: vec![0.0; dim],
        input_range: vec![1.0; dim],
        metadata: Default::default(),
    }
}

/// Gaussian points around each prototype, clipped to the unit cube and
/// labeled by their nearest prototype.
pub fn build_semaphore_classifier(seed: u64) -> Semaphore {
    let network = semaphore_network();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, NOISE_SIGMA).expect("positive sigma");
    let mut points = Vec::with_capacity(PROTOTYPES.len() * POINTS_PER_CLASS);
    let mut labels = Vec::with_capacity(points.capacity());
    for p in &PROTOTYPES {
        for _ in 0..POINTS_PER_CLASS {
            let x: Vec<f64> = p
                .iter()
                .map(|&c| (c + noise.sample(&mut rng)).clamp(0.0, 1.0))
                .collect();
            labels.push(nearest_prototype(&x));
            points.push(x);
        }
    }
    let attributes = (1..=network.input_dim).map(|i| format!("f{i}")).collect();
    Semaphore {
        dataset: LabeledDataset::new(attributes, points, labels).expect("consistent dataset"),
        label_names: network.labels.clone(),
        network,
    }
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub seed: u64,
    pub metric: Metric,
    pub radius: RadiusStrategy,
    pub min_members: usize,
    pub verify: VerifyConfig,
    pub workers: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 42,
            metric: Metric::L2,
            radius: RadiusStrategy::Separating,
            min_members: 3,
            verify: VerifyConfig::default(),
            workers: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Pipeline {
    pub semaphore: Semaphore,
    pub discovery: Discovery,
    /// Sorted by region id.
    pub results: Vec<(Region, FullVerification)>,
    pub contract: DnnContract,
}

/// Builds the classifier for `cfg.seed`, then discovers regions, verifies
/// them and emits the contract.
pub fn run_semaphore_pipeline(cfg: &PipelineConfig) -> Result<Pipeline, AppError> {
    let semaphore = build_semaphore_classifier(cfg.seed);
    let discovery = discover_regions(
        &semaphore.dataset,
        cfg.metric,
        &DiscoveryConfig {
            seed: cfg.seed,
            min_members: cfg.min_members,
            radius: cfg.radius,
            ..DiscoveryConfig::default()
        },
    )?;
    let results = run_parallel_verification(
        &semaphore.network,
        &discovery.regions,
        &cfg.verify,
        cfg.workers,
        cfg.seed,
    )?;
    let contract = emit_dnn_contract(&semaphore.network, &results)?;
    Ok(Pipeline {
        semaphore,
        discovery,
        results,
        contract,
    })
}
