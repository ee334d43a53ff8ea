//! Concrete counterexample search: seeded sampling followed by
//! coordinate descent on the target's advantage.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::bounds::InputBox;
use crate::network::{Network, ScoreOrder};
use crate::regions::{dist, Region};

/// How far `target` is from winning: `<= 0` means it is (jointly) best.
pub(crate) fn target_deficit(order: ScoreOrder, scores: &[f64], target: usize) -> f64 {
    let others = scores
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != target)
        .map(|(_, &s)| s);
    match order {
        ScoreOrder::MinBest => scores[target] - others.fold(f64::INFINITY, f64::min),
        ScoreOrder::MaxBest => others.fold(f64::NEG_INFINITY, f64::max) - scores[target],
    }
}

/// Moves `x` radially toward the centroid until it lies in the region, then
/// clamps it to `domain`. Returns `None` if the result is still outside.
pub(crate) fn pull_into_region(
    region: &Region,
    domain: &InputBox,
    mut x: Vec<f64>,
) -> Option<Vec<f64>> {
    let d = dist(region.metric, &x, &region.centroid).ok()?;
    if d > region.radius {
        let s = region.radius / d * (1.0 - 1e-12);
        for (v, c) in x.iter_mut().zip(&region.centroid) {
            *v = c + (*v - c) * s;
        }
    }
    domain.clamp(&mut x);
    let inside = dist(region.metric, &x, &region.centroid).ok()? <= region.radius;
    inside.then_some(x)
}

/// A point is a counterexample only if it lies in the region under the
/// region's own metric, inside the input domain, and is classified `target`.
pub fn validate_counterexample(
    net: &Network,
    region: &Region,
    domain: &InputBox,
    target: usize,
    x: &[f64],
) -> bool {
    x.len() == net.input_dim
        && domain.contains(x)
        && dist(region.metric, x, &region.centroid).is_ok_and(|d| d <= region.radius)
        && net.classify(x).is_ok_and(|l| l == target)
}

/// Looks for an input in `region ∩ b` that the network maps to `target`.
/// `effort` is the number of random samples; zero disables the search.
/// A `None` result proves nothing.
pub fn find_counterexample(
    net: &Network,
    region: &Region,
    b: &InputBox,
    target: usize,
    effort: usize,
    seed: u64,
) -> Option<Vec<f64>> {
    if effort == 0 || b.is_empty() {
        return None;
    }
    let domain = InputBox::from_intervals(&net.normalized_domain()).intersect(b);
    if domain.is_empty() {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let objective = |x: &[f64]| target_deficit(net.score_order, &net.forward(x), target);

    let mut pool: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut starts = vec![domain.center()];
    starts.extend((1..effort).map(|_| {
        (0..domain.dim())
            .map(|i| {
                if domain.lo[i] < domain.hi[i] {
                    rng.gen_range(domain.lo[i]..=domain.hi[i])
                } else {
                    domain.lo[i]
                }
            })
            .collect()
    }));
    for s in starts {
        let Some(x) = pull_into_region(region, &domain, s) else {
            continue;
        };
        if validate_counterexample(net, region, &domain, target, &x) {
            return Some(x);
        }
        pool.push((objective(&x), x));
    }
    pool.sort_by(|a, b| a.0.total_cmp(&b.0));
    pool.truncate(4);

    for (mut best, mut x) in pool {
        let mut step = 0.25 * domain.max_width();
        let mut rounds = 0;
        while step > 1e-9 && rounds < 4 * effort {
            rounds += 1;
            let mut improved = false;
            for i in 0..x.len() {
                for dir in [1.0, -1.0] {
                    let mut y = x.clone();
                    y[i] += dir * step;
                    let Some(y) = pull_into_region(region, &domain, y) else {
                        continue;
                    };
                    let v = objective(&y);
                    if v < best {
                        best = v;
                        x = y;
                        improved = true;
                        if validate_counterexample(net, region, &domain, target, &x) {
                            return Some(x);
                        }
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Activation, Layer};
    use crate::regions::Metric;
    use std::collections::BTreeMap;

    fn identity_net() -> Network {
        Network {
            name: "id".into(),
            labels: vec!["a".into(), "b".into()],
            score_order: ScoreOrder::MaxBest,
            input_dim: 2,
            layers: vec![Layer::new(
                vec![vec![1.0, 0.0], vec![0.0, 1.0]],
                vec![0.0, 0.0],
                Activation::Identity,
            )],
            input_min: vec![0.0; 2],
            input_max: vec![1.0; 2],
            input_mean: vec![0.0; 2],
            input_range: vec![1.0; 2],
            metadata: BTreeMap::new(),
        }
    }

    fn region(c: Vec<f64>, r: f64, metric: Metric) -> Region {
        Region {
            id: "r0000".into(),
            centroid: c,
            radius: r,
            metric,
            expected_label: 0,
            member_count: 1,
            member_indices: vec![0],
        }
    }

    fn box_of(r: &Region) -> InputBox {
        InputBox::new(
            r.centroid.iter().map(|c| c - r.radius).collect(),
            r.centroid.iter().map(|c| c + r.radius).collect(),
        )
    }

    #[test]
    fn none_inside_a_clean_cell() {
        let net = identity_net();
        let r = region(vec![0.7, 0.2], 0.1, Metric::Linf);
        for effort in [1, 10, 500] {
            assert_eq!(
                find_counterexample(&net, &r, &box_of(&r), 1, effort, 3),
                None
            );
        }
    }

    #[test]
    fn straddling_region_yields_validated_point() {
        let net = identity_net();
        // centroid slightly on label a's side; x2 > x1 part maps to b
        let r = region(vec![0.52, 0.48], 0.1, Metric::L1);
        let x = find_counterexample(&net, &r, &box_of(&r), 1, 50, 9).expect("counterexample");
        assert!(dist(Metric::L1, &x, &r.centroid).unwrap() <= 0.1);
        assert_eq!(net.classify(&x).unwrap(), 1);
    }

    #[test]
    fn zero_effort_finds_nothing() {
        let net = identity_net();
        let r = region(vec![0.5, 0.5], 0.2, Metric::Linf);
        assert_eq!(find_counterexample(&net, &r, &box_of(&r), 1, 0, 1), None);
    }
}
