//! Seeded Lloyd iteration with k-means++ initialization.
//!
//! Distances here are always squared Euclidean, whatever metric the
//! resulting regions use.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::RegionError;

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    /// Cluster index per input point.
    pub assignment: Vec<usize>,
    /// Mean of the members of each cluster.
    pub centroids: Vec<Vec<f64>>,
    pub iterations: usize,
}

impl Clustering {
    pub fn members(&self, cluster: usize) -> Vec<usize> {
        self.assignment
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == cluster)
            .map(|(i, _)| i)
            .collect()
    }

    /// Within-cluster sum of squared distances.
    pub fn wcss(&self, points: &[Vec<f64>]) -> f64 {
        points
            .iter()
            .zip(&self.assignment)
            .map(|(p, &c)| sq_dist(p, &self.centroids[c]))
            .sum()
    }
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn mean_of<'a>(points: impl IntoIterator<Item = &'a Vec<f64>>, dim: usize) -> Vec<f64> {
    let mut acc = vec![0.0; dim];
    let mut n = 0usize;
    for p in points {
        for (a, v) in acc.iter_mut().zip(p) {
            *a += v;
        }
        n += 1;
    }
    if n > 0 {
        for a in &mut acc {
            *a /= n as f64;
        }
    }
    acc
}

fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(p, c);
        if d < best_d {
            best_d = d;
            best = j;
        }
    }
    best
}

fn init_plus_plus(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centroids = vec![points[rng.gen_range(0..points.len())].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let idx = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = points.len() - 1;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 && target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            // guard against landing on an already-covered point through rounding
            if d2[chosen] == 0.0 {
                d2.iter()
                    .enumerate()
                    .max_by(|a, b| a.1.total_cmp(b.1))
                    .map(|(i, _)| i)
                    .unwrap()
            } else {
                chosen
            }
        } else {
            rng.gen_range(0..points.len())
        };
        centroids.push(points[idx].clone());
        for (w, p) in d2.iter_mut().zip(points) {
            *w = w.min(sq_dist(p, &centroids[centroids.len() - 1]));
        }
    }
    centroids
}

/// Clusters `points` into `k` groups. Deterministic for a given seed.
///
/// Empty clusters are re-seeded with the point farthest from its own
/// centroid (taken from a cluster with more than one member).
pub fn kmeans(
    points: &[Vec<f64>],
    k: usize,
    seed: u64,
    max_iter: usize,
) -> Result<Clustering, RegionError> {
    if k == 0 {
        return Err(RegionError::InvalidK { k, n: points.len() });
    }
    if k > points.len() {
        return Err(RegionError::InvalidK { k, n: points.len() });
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(RegionError::Dimension);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = init_plus_plus(points, k, &mut rng);
    let mut assignment: Vec<usize> = points.iter().map(|p| nearest(p, &centroids)).collect();
    let mut iterations = 0;
    loop {
        iterations += 1;
        reseed_empty(points, &mut assignment, &mut centroids, k);
        centroids = (0..k)
            .map(|c| {
                mean_of(
                    points
                        .iter()
                        .zip(&assignment)
                        .filter(|(_, &a)| a == c)
                        .map(|(p, _)| p),
                    dim,
                )
            })
            .collect();
        if iterations >= max_iter.max(1) {
            break;
        }
        let next: Vec<usize> = points.iter().map(|p| nearest(p, &centroids)).collect();
        if next == assignment {
            break;
        }
        assignment = next;
    }
    Ok(Clustering {
        assignment,
        centroids,
        iterations,
    })
}

fn reseed_empty(
    points: &[Vec<f64>],
    assignment: &mut [usize],
    centroids: &mut [Vec<f64>],
    k: usize,
) {
    loop {
        let mut counts = vec![0usize; k];
        for &a in assignment.iter() {
            counts[a] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return;
        };
        let far = points
            .iter()
            .enumerate()
            .filter(|(i, _)| counts[assignment[*i]] > 1)
            .map(|(i, p)| (i, sq_dist(p, &centroids[assignment[i]])))
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
        let Some((i, _)) = far else {
            return;
        };
        assignment[i] = empty;
        centroids[empty] = points[i].clone();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn k_one_is_the_mean() {
        let pts = vec![vec![0.0, 1.0], vec![2.0, 3.0], vec![4.0, -1.0]];
        let c = kmeans(&pts, 1, 7, 50).unwrap();
        assert_eq!(c.assignment, vec![0, 0, 0]);
        assert_eq!(c.centroids[0], vec![2.0, 1.0]);
    }

    #[test]
    fn k_equals_n_gives_singletons() {
        let pts = vec![vec![0.0], vec![1.0], vec![5.0], vec![9.0]];
        let c = kmeans(&pts, 4, 3, 50).unwrap();
        let mut cents: Vec<f64> = c.centroids.iter().map(|v| v[0]).collect();
        cents.sort_by(f64::total_cmp);
        assert_eq!(cents, vec![0.0, 1.0, 5.0, 9.0]);
        for (i, p) in pts.iter().enumerate() {
            assert_eq!(&c.centroids[c.assignment[i]], p);
        }
    }

    #[test]
    fn rejects_k_above_n() {
        assert!(matches!(
            kmeans(&[vec![0.0]], 2, 0, 10),
            Err(RegionError::InvalidK { k: 2, n: 1 })
        ));
    }

    #[test]
    fn separated_blobs_split_cleanly() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut pts = Vec::new();
        let mut truth = Vec::new();
        let noise = Normal::new(0.0, 0.03).unwrap();
        for (label, (cx, cy)) in [(0.2, 0.2), (0.8, 0.7)].into_iter().enumerate() {
            for _ in 0..40 {
                pts.push(vec![
                    cx + noise.sample(&mut rng),
                    cy + noise.sample(&mut rng),
                ]);
                truth.push(label);
            }
        }
        let c = kmeans(&pts, 2, 99, 100).unwrap();
        // each blob maps onto one cluster
        let first = c.assignment[0];
        for (i, &t) in truth.iter().enumerate() {
            assert_eq!(c.assignment[i] == first, t == 0);
        }
        // WCSS of the label split, computed independently
        let mut split_wcss = 0.0;
        for label in 0..2 {
            let members: Vec<&Vec<f64>> = pts
                .iter()
                .zip(&truth)
                .filter(|(_, &t)| t == label)
                .map(|(p, _)| p)
                .collect();
            let n = members.len() as f64;
            let mx = members.iter().map(|p| p[0]).sum::<f64>() / n;
            let my = members.iter().map(|p| p[1]).sum::<f64>() / n;
            split_wcss += members
                .iter()
                .map(|p| (p[0] - mx).powi(2) + (p[1] - my).powi(2))
                .sum::<f64>();
        }
        assert!(c.wcss(&pts) <= split_wcss + 1e-12);
    }

    #[test]
    fn centroids_are_member_means_even_at_iteration_cap() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<Vec<f64>> = (0..60)
            .map(|_| vec![rng.gen(), rng.gen(), rng.gen()])
            .collect();
        for max_iter in [1, 2, 50] {
            let c = kmeans(&pts, 5, 1, max_iter).unwrap();
            for j in 0..5 {
                let m = c.members(j);
                assert!(!m.is_empty());
                let mean = mean_of(m.iter().map(|&i| &pts[i]), 3);
                for (a, b) in mean.iter().zip(&c.centroids[j]) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn duplicates_do_not_leave_clusters_empty() {
        let pts = vec![vec![1.0], vec![1.0], vec![1.0], vec![2.0]];
        let c = kmeans(&pts, 3, 0, 20).unwrap();
        for j in 0..3 {
            assert!(!c.members(j).is_empty());
        }
    }
}
