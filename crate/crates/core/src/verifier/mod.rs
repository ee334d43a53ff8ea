//! Targeted safety of a ReLU classifier over a region.
//!
//! The engine splits the input box, bounds the margin of every other label
//! over the target on each piece with [`propagate_bounds`] (one label
//! beating the target throughout clears the piece), and probes candidate
//! points for concrete counterexamples. `Safe` is sound, `Unsafe` always
//! carries a point that re-validates by forward evaluation, and anything
//! else is `Unknown`.

mod bounds;
mod search;

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bounds::{
    margin_lower_fn, propagate_bounds, score_gap_bound, AffineFn, InputBox, LinearBounds,
    OutputInputs,
};
pub use search::{find_counterexample, validate_counterexample};

use crate::network::Network;
use crate::regions::{Metric, Region};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerifyError {
    #[error("invalid task: {0}")]
    InvalidTask(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    /// Maximum number of branch-and-bound nodes.
    pub node_budget: u64,
    /// Wall-clock ceiling in seconds; `None` disables it.
    pub time_budget_secs: Option<f64>,
    pub min_box_width: f64,
    /// A box is accepted as safe only when its certified margin exceeds this.
    pub epsilon: f64,
    /// Random samples for the up-front counterexample search.
    pub search_effort: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            node_budget: 50_000,
            time_budget_secs: Some(60.0),
            min_box_width: 1e-4,
            epsilon: 1e-6,
            search_effort: 64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Targeted(usize),
    Full,
}

#[derive(Debug, Clone)]
pub struct VerificationTask<'a> {
    pub network: &'a Network,
    pub region: &'a Region,
    pub mode: Mode,
    pub config: VerifyConfig,
    pub seed: u64,
}

impl VerificationTask<'_> {
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), VerifyError> {
        let bad = |m: String| Err(VerifyError::InvalidTask(m));
        let net = self.network;
        if self.region.centroid.len() != net.input_dim {
            return bad(format!(
                "region dimension {} does not match network input {}",
                self.region.centroid.len(),
                net.input_dim
            ));
        }
        if !(self.region.radius > 0.0) || !self.region.radius.is_finite() {
            return bad("region radius must be positive".into());
        }
        if self.region.expected_label >= net.num_labels() {
            return bad("expected label out of range".into());
        }
        if self.config.node_budget == 0 {
            return bad("node budget must be positive".into());
        }
        if self.config.time_budget_secs.is_some_and(|t| !(t > 0.0)) {
            return bad("time budget must be positive".into());
        }
        if !(self.config.epsilon >= 0.0) || !(self.config.min_box_width > 0.0) {
            return bad("epsilon must be >= 0 and min_box_width > 0".into());
        }
        if let Mode::Targeted(t) = self.mode {
            if t >= net.num_labels() {
                return bad(format!("target label {t} out of range"));
            }
            if t == self.region.expected_label {
                return bad("target label equals the expected label".into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Safe,
    Unsafe,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnknownReason {
    /// Node or wall-clock budget exhausted.
    Budget,
    /// Some box could not be decided before reaching the minimum width.
    MinBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    /// Normalized input.
    pub point: Vec<f64>,
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyStats {
    pub nodes: u64,
    pub max_depth: u32,
    pub elapsed_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<Counterexample>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<UnknownReason>,
    pub stats: VerifyStats,
}

impl Verdict {
    pub fn is_safe(&self) -> bool {
        self.status == Status::Safe
    }
}

/// Sound over-approximating box of the region: exact for `Linf`, the
/// circumscribed box for `L1`/`L2`, clipped to the network's input domain.
pub fn enclosing_box(region: &Region, net: &Network) -> InputBox {
    let r = region.radius;
    let raw = InputBox::new(
        region.centroid.iter().map(|c| c - r).collect(),
        region.centroid.iter().map(|c| c + r).collect(),
    );
    raw.intersect(&InputBox::from_intervals(&net.normalized_domain()))
}

/// Picks the split dimension with the largest influence on the margin.
fn split_dim(gap: &AffineFn, b: &InputBox) -> usize {
    let mut best = 0;
    let mut best_score = -1.0;
    for i in 0..b.dim() {
        let s = gap.coeffs[i].abs() * b.width(i);
        if s > best_score {
            best = i;
            best_score = s;
        }
    }
    if best_score <= 0.0 {
        (0..b.dim())
            .max_by(|&i, &j| b.width(i).total_cmp(&b.width(j)).then(j.cmp(&i)))
            .unwrap_or(0)
    } else {
        best
    }
}

#[cfg(debug_assertions)]
fn spot_check_bounds(net: &Network, b: &InputBox, lb: &LinearBounds) {
    for x in [b.center(), b.lo.clone(), b.hi.clone()] {
        let s = net.forward(&x);
        debug_assert!(lb.holds_at(&x, &s, 1e-9), "unsound bounds at {x:?}");
    }
}

/// Decides whether any point of the region is classified as the target.
pub fn verify_targeted(task: &VerificationTask<'_>) -> Result<Verdict, VerifyError> {
    task.validate()?;
    let Mode::Targeted(target) = task.mode else {
        return Err(VerifyError::InvalidTask(
            "verify_targeted needs a targeted task".into(),
        ));
    };
    Ok(run_targeted(
        task.network,
        task.region,
        target,
        &task.config,
        task.seed,
    ))
}

fn run_targeted(
    net: &Network,
    region: &Region,
    target: usize,
    cfg: &VerifyConfig,
    seed: u64,
) -> Verdict {
    let started = Instant::now();
    let domain = InputBox::from_intervals(&net.normalized_domain());
    let truth = region.expected_label;
    let root = enclosing_box(region, net);
    let mut stats = VerifyStats {
        nodes: 0,
        max_depth: 0,
        elapsed_secs: 0.0,
    };
    let finish = |status, cex: Option<Vec<f64>>, reason, mut stats: VerifyStats| {
        stats.elapsed_secs = started.elapsed().as_secs_f64();
        Verdict {
            status,
            counterexample: cex.map(|p| Counterexample {
                scores: net.forward(&p),
                point: p,
            }),
            reason,
            stats,
        }
    };
    if root.is_empty() || root.distance_to(region.metric, &region.centroid) > region.radius {
        return finish(Status::Safe, None, None, stats);
    }
    if let Some(p) = find_counterexample(net, region, &root, target, cfg.search_effort, seed) {
        return finish(Status::Unsafe, Some(p), None, stats);
    }

    let mut stack = vec![(root, 0u32)];
    let mut undecided = false;
    while let Some((b, depth)) = stack.pop() {
        if stats.nodes >= cfg.node_budget
            || cfg
                .time_budget_secs
                .is_some_and(|t| started.elapsed().as_secs_f64() > t)
        {
            return finish(Status::Unknown, None, Some(UnknownReason::Budget), stats);
        }
        stats.nodes += 1;
        stats.max_depth = stats.max_depth.max(depth);
        if b.distance_to(region.metric, &region.centroid) > region.radius {
            continue;
        }
        let lb = propagate_bounds(net, &b);
        #[cfg(debug_assertions)]
        if stats.nodes % 100 == 1 {
            spot_check_bounds(net, &b, &lb);
        }
        // the target loses on the box if any other label beats it throughout
        let mut best: Option<(f64, AffineFn, Option<Vec<f64>>)> = None;
        for rival in (0..net.num_labels()).filter(|&j| j != target) {
            let gap = margin_lower_fn(&lb, rival, target, net.score_order);
            let mut bound = gap.min_over(&b).max(bounds::interval_margin(
                &lb,
                &b,
                rival,
                target,
                net.score_order,
            ));
            let mut ball_arg = None;
            if region.metric != Metric::Linf {
                let (ball_min, arg) =
                    gap.min_over_ball(region.metric, &region.centroid, region.radius);
                bound = bound.max(ball_min);
                ball_arg = Some(arg);
            }
            let better = match &best {
                None => true,
                Some((b0, ..)) => bound > *b0 || (bound == *b0 && rival == truth),
            };
            if better {
                best = Some((bound, gap, ball_arg));
            }
        }
        let (bound, gap, ball_arg) = best.expect("at least two labels");
        let mut candidates = vec![gap.argmin_corner(&b)];
        candidates.extend(ball_arg);
        if bound > cfg.epsilon {
            continue;
        }
        candidates.push(b.center());
        for c in candidates {
            let mut x = c;
            b.clamp(&mut x);
            if let Some(x) = search::pull_into_region(region, &domain, x) {
                if validate_counterexample(net, region, &domain, target, &x) {
                    return finish(Status::Unsafe, Some(x), None, stats);
                }
            }
        }
        if b.max_width() < cfg.min_box_width {
            undecided = true;
            continue;
        }
        let (left, right) = b.bisect(split_dim(&gap, &b));
        stack.push((right, depth + 1));
        stack.push((left, depth + 1));
    }
    if undecided {
        finish(Status::Unknown, None, Some(UnknownReason::MinBox), stats)
    } else {
        finish(Status::Safe, None, None, stats)
    }
}

/// Aggregate over all targets of one region.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SafetySummary {
    /// Safe against every other label.
    FullySafe,
    /// Safe against the listed targets only; the rest are unsafe.
    TargetedSafe { safe: BTreeSet<usize> },
    /// Some target unsafe, none safe.
    NotSafe,
    /// No target unsafe but some undecided.
    Inconclusive { safe: BTreeSet<usize> },
}

impl SafetySummary {
    pub fn from_verdicts(verdicts: &BTreeMap<usize, Verdict>) -> Self {
        let safe: BTreeSet<usize> = verdicts
            .iter()
            .filter(|(_, v)| v.status == Status::Safe)
            .map(|(t, _)| *t)
            .collect();
        let any_unsafe = verdicts.values().any(|v| v.status == Status::Unsafe);
        if safe.len() == verdicts.len() {
            SafetySummary::FullySafe
        } else if !any_unsafe {
            SafetySummary::Inconclusive { safe }
        } else if !safe.is_empty() {
            SafetySummary::TargetedSafe { safe }
        } else {
            SafetySummary::NotSafe
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SafetySummary::FullySafe => "fully_safe",
            SafetySummary::TargetedSafe { .. } => "targeted_safe",
            SafetySummary::NotSafe => "not_safe",
            SafetySummary::Inconclusive { .. } => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullVerification {
    pub verdicts: BTreeMap<usize, Verdict>,
    pub summary: SafetySummary,
}

/// Seed for one target of a task, independent of scheduling.
pub fn target_seed(seed: u64, target: usize) -> u64 {
    let mut z = seed.wrapping_add((target as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Runs the targeted check against every label other than the expected one.
pub fn verify_full(
    net: &Network,
    region: &Region,
    config: &VerifyConfig,
    seed: u64,
) -> Result<FullVerification, VerifyError> {
    let mut verdicts = BTreeMap::new();
    for target in (0..net.num_labels()).filter(|&t| t != region.expected_label) {
        let task = VerificationTask {
            network: net,
            region,
            mode: Mode::Targeted(target),
            config: config.clone(),
            seed: target_seed(seed, target),
        };
        verdicts.insert(target, verify_targeted(&task)?);
    }
    let summary = SafetySummary::from_verdicts(&verdicts);
    Ok(FullVerification { verdicts, summary })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Activation, Layer, ScoreOrder};

    fn identity_net(labels: usize) -> Network {
        let weights = (0..labels)
            .map(|i| {
                (0..labels)
                    .map(|j| if i == j { 1.0 } else { 0.0 })
                    .collect()
            })
            .collect();
        Network {
            name: "id".into(),
            labels: (0..labels).map(|i| format!("l{i}")).collect(),
            score_order: ScoreOrder::MaxBest,
            input_dim: labels,
            layers: vec![Layer::new(weights, vec![0.0; labels], Activation::Identity)],
            input_min: vec![0.0; labels],
            input_max: vec![1.0; labels],
            input_mean: vec![0.0; labels],
            input_range: vec![1.0; labels],
            metadata: BTreeMap::new(),
        }
    }

    fn region(c: Vec<f64>, r: f64, metric: Metric, label: usize) -> Region {
        Region {
            id: "r0000".into(),
            centroid: c,
            radius: r,
            metric,
            expected_label: label,
            member_count: 1,
            member_indices: vec![0],
        }
    }

    fn task<'a>(
        net: &'a Network,
        region: &'a Region,
        target: usize,
        cfg: VerifyConfig,
    ) -> VerificationTask<'a> {
        VerificationTask {
            network: net,
            region,
            mode: Mode::Targeted(target),
            config: cfg,
            seed: 1,
        }
    }

    #[test]
    fn enclosing_boxes() {
        let net = Network {
            input_min: vec![-5.0; 2],
            input_max: vec![5.0; 2],
            ..identity_net(2)
        };
        let b = enclosing_box(&region(vec![0.0, 0.0], 0.5, Metric::Linf, 0), &net);
        assert_eq!(b, InputBox::new(vec![-0.5, -0.5], vec![0.5, 0.5]));
        let b = enclosing_box(&region(vec![0.0, 0.0], 1.0, Metric::L1, 0), &net);
        assert_eq!(b, InputBox::new(vec![-1.0, -1.0], vec![1.0, 1.0]));
        // the corner (1, 1) is in the box but not in the L1 ball
        assert!(b.contains(&[1.0, 1.0]));
        assert!(!region(vec![0.0, 0.0], 1.0, Metric::L1, 0)
            .contains(&[1.0, 1.0])
            .unwrap());
    }

    #[test]
    fn enclosing_box_of_the_cockpit_region_is_clipped() {
        let mut net = identity_net(5);
        net.input_min = vec![0.0, -0.5, -0.5, 0.0, 0.0];
        net.input_max = vec![0.5; 5];
        let c = vec![0.19, 0.31, 0.28, 0.33, 0.33];
        let b = enclosing_box(&region(c.clone(), 0.28, Metric::L1, 0), &net);
        for (i, ci) in c.iter().enumerate() {
            assert_eq!(b.lo[i], (ci - 0.28).max(net.input_min[i]));
            assert_eq!(b.hi[i], (ci + 0.28).min(0.5));
        }
    }

    #[test]
    fn clean_cell_is_safe() {
        let net = identity_net(2);
        let r = region(vec![0.7, 0.2], 0.1, Metric::Linf, 0);
        let v = verify_targeted(&task(&net, &r, 1, VerifyConfig::default())).unwrap();
        assert_eq!(v.status, Status::Safe);
        assert!(v.counterexample.is_none());
    }

    #[test]
    fn straddling_region_is_unsafe() {
        let net = identity_net(2);
        let r = region(vec![0.5, 0.45], 0.1, Metric::L2, 0);
        let v = verify_targeted(&task(&net, &r, 1, VerifyConfig::default())).unwrap();
        assert_eq!(v.status, Status::Unsafe);
        let p = &v.counterexample.as_ref().unwrap().point;
        assert!(r.contains(p).unwrap());
        assert_eq!(net.classify(p).unwrap(), 1);
    }

    #[test]
    fn third_label_can_shield_the_target() {
        // s = (x0, x1, x1 + 0.1): b loses to c everywhere, even where it beats a
        let mut net = identity_net(2);
        net.labels.push("l2".into());
        net.layers = vec![Layer::new(
            vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 1.0]],
            vec![0.0, 0.0, 0.1],
            Activation::Identity,
        )];
        net.validate().unwrap();
        let r = region(vec![0.6, 0.5], 0.2, Metric::Linf, 0);
        assert_eq!(net.classify(&r.centroid).unwrap(), 0);
        let v = verify_targeted(&task(&net, &r, 1, VerifyConfig::default())).unwrap();
        assert_eq!(v.status, Status::Safe);
        assert!(v.stats.nodes < 10);
        let v = verify_targeted(&task(&net, &r, 2, VerifyConfig::default())).unwrap();
        assert_eq!(v.status, Status::Unsafe);
    }

    /// Label 1 wins only on the sliver |x - 0.5| < 0.005.
    fn sliver_net() -> Network {
        Network {
            name: "sliver".into(),
            labels: vec!["a".into(), "b".into()],
            score_order: ScoreOrder::MaxBest,
            input_dim: 1,
            layers: vec![
                Layer::new(
                    vec![vec![1.0], vec![-1.0]],
                    vec![-0.5, 0.5],
                    Activation::Relu,
                ),
                Layer::new(
                    vec![vec![0.0, 0.0], vec![-10.0, -10.0]],
                    vec![0.1, 0.15],
                    Activation::Identity,
                ),
            ],
            input_min: vec![0.0],
            input_max: vec![1.0],
            input_mean: vec![0.0],
            input_range: vec![1.0],
            metadata: BTreeMap::new(),
        }
    }

    #[test]
    fn node_budget_one_on_straddling_region_is_unknown() {
        let net = sliver_net();
        let r = region(vec![0.3], 0.25, Metric::Linf, 0);
        assert_eq!(net.classify(&[0.3]).unwrap(), 0);
        assert_eq!(net.classify(&[0.5]).unwrap(), 1);
        let cfg = VerifyConfig {
            node_budget: 1,
            search_effort: 0,
            ..Default::default()
        };
        let v = verify_targeted(&task(&net, &r, 1, cfg)).unwrap();
        assert_eq!(
            (v.status, v.reason),
            (Status::Unknown, Some(UnknownReason::Budget))
        );
        let v = verify_targeted(&task(&net, &r, 1, VerifyConfig::default())).unwrap();
        assert_eq!(v.status, Status::Unsafe);
        let p = v.counterexample.unwrap().point;
        assert!((p[0] - 0.5).abs() < 0.005);
    }

    #[test]
    fn invalid_tasks() {
        let net = identity_net(2);
        let r = region(vec![0.7, 0.2], 0.1, Metric::Linf, 0);
        assert!(verify_targeted(&task(&net, &r, 0, VerifyConfig::default())).is_err());
        assert!(verify_targeted(&task(&net, &r, 5, VerifyConfig::default())).is_err());
        let cfg = VerifyConfig {
            node_budget: 0,
            ..Default::default()
        };
        assert!(verify_targeted(&task(&net, &r, 1, cfg)).is_err());
    }

    #[test]
    fn dominant_coordinate_region_is_fully_safe() {
        let net = identity_net(3);
        let r = region(vec![0.8, 0.3, 0.2], 0.15, Metric::L1, 0);
        let full = verify_full(&net, &r, &VerifyConfig::default(), 4).unwrap();
        assert_eq!(full.summary, SafetySummary::FullySafe);
        // grid oracle over the region
        let steps = 60;
        for i in 0..=steps {
            for j in 0..=steps {
                for k in 0..=steps / 4 {
                    let x = [
                        0.65 + 0.3 * i as f64 / steps as f64,
                        0.15 + 0.3 * j as f64 / steps as f64,
                        0.05 + 0.3 * k as f64 / (steps / 4) as f64,
                    ];
                    if r.contains(&x).unwrap() {
                        assert_eq!(net.classify(&x).unwrap(), 0);
                    }
                }
            }
        }
    }

    fn verdict(status: Status) -> Verdict {
        Verdict {
            status,
            counterexample: None,
            reason: None,
            stats: VerifyStats {
                nodes: 0,
                max_depth: 0,
                elapsed_secs: 0.0,
            },
        }
    }

    #[test]
    fn summary_rules() {
        use Status::*;
        let mk = |v: &[(usize, Status)]| {
            v.iter()
                .map(|(t, s)| (*t, verdict(*s)))
                .collect::<BTreeMap<_, _>>()
        };
        assert_eq!(
            SafetySummary::from_verdicts(&mk(&[(1, Safe), (2, Safe)])),
            SafetySummary::FullySafe
        );
        assert_eq!(
            SafetySummary::from_verdicts(&mk(&[(1, Safe), (2, Unknown)])),
            SafetySummary::Inconclusive { safe: [1].into() }
        );
        assert_eq!(
            SafetySummary::from_verdicts(&mk(&[(1, Safe), (2, Unsafe)])),
            SafetySummary::TargetedSafe { safe: [1].into() }
        );
        assert_eq!(
            SafetySummary::from_verdicts(&mk(&[(1, Unsafe), (2, Unknown)])),
            SafetySummary::NotSafe
        );
    }

    #[test]
    fn verdicts_are_deterministic() {
        let net = crate::network::random::random_network(3, 2, &[8, 8], 3);
        let r = region(
            vec![0.5, 0.5],
            0.2,
            Metric::L1,
            net.classify(&[0.5, 0.5]).unwrap(),
        );
        let cfg = VerifyConfig {
            time_budget_secs: None,
            ..Default::default()
        };
        let mut a = verify_full(&net, &r, &cfg, 11).unwrap();
        let mut b = verify_full(&net, &r, &cfg, 11).unwrap();
        for v in a.verdicts.values_mut().chain(b.verdicts.values_mut()) {
            v.stats.elapsed_secs = 0.0;
        }
        assert_eq!(a, b);
    }
}
