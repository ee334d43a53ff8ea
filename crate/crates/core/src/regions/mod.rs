//! Candidate safe regions: label-guided iterative clustering of labeled
//! inputs into centroid/radius balls.
//!
//! Discovery starts with one k-means run using as many clusters as there are
//! distinct labels, then keeps splitting label-impure clusters in two until
//! every cluster is pure or a singleton. Pure clusters that are large enough
//! become [`Region`]s.

mod kmeans;

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use kmeans::{kmeans, Clustering};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegionError {
    #[error("k must satisfy 1 <= k <= {n}, got {k}")]
    InvalidK { k: usize, n: usize },
    #[error("vector dimensions do not match")]
    Dimension,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Metric {
    L1,
    L2,
    Linf,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::L1 => "L1",
            Metric::L2 => "L2",
            Metric::Linf => "Linf",
        }
    }

    /// Norm of a vector of per-coordinate differences.
    pub fn norm(self, diffs: impl Iterator<Item = f64>) -> f64 {
        match self {
            Metric::L1 => diffs.map(f64::abs).sum(),
            Metric::L2 => diffs.map(|d| d * d).sum::<f64>().sqrt(),
            Metric::Linf => diffs.map(f64::abs).fold(0.0, f64::max),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(Metric::L1),
            "l2" => Ok(Metric::L2),
            "linf" => Ok(Metric::Linf),
            _ => Err(format!("unknown metric `{s}` (expected l1, l2 or linf)")),
        }
    }
}

pub fn dist(metric: Metric, a: &[f64], b: &[f64]) -> Result<f64, RegionError> {
    if a.len() != b.len() {
        return Err(RegionError::Dimension);
    }
    Ok(metric.norm(a.iter().zip(b).map(|(x, y)| x - y)))
}

/// Points in normalized input space with their true labels.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledDataset {
    pub attributes: Vec<String>,
    pub points: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl LabeledDataset {
    pub fn new(
        attributes: Vec<String>,
        points: Vec<Vec<f64>>,
        labels: Vec<usize>,
    ) -> Result<Self, RegionError> {
        let ds = LabeledDataset {
            attributes,
            points,
            labels,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<(), RegionError> {
        if self.points.len() != self.labels.len() {
            return Err(RegionError::InvalidDataset(format!(
                "{} points but {} labels",
                self.points.len(),
                self.labels.len()
            )));
        }
        if let Some(first) = self.points.first() {
            if self.points.iter().any(|p| p.len() != first.len()) {
                return Err(RegionError::Dimension);
            }
            if !self.attributes.is_empty() && self.attributes.len() != first.len() {
                return Err(RegionError::InvalidDataset(
                    "attribute count does not match point dimension".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(self.attributes.len(), Vec::len)
    }

    pub fn distinct_labels(&self) -> BTreeSet<usize> {
        self.labels.iter().copied().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub id: String,
    pub centroid: Vec<f64>,
    pub radius: f64,
    pub metric: Metric,
    pub expected_label: usize,
    pub member_count: usize,
    pub member_indices: Vec<usize>,
}

impl Region {
    /// Closed-ball membership: `dist(x, c) <= r`.
    pub fn contains(&self, x: &[f64]) -> Result<bool, RegionError> {
        region_membership(self, x)
    }
}

pub fn region_membership(region: &Region, x: &[f64]) -> Result<bool, RegionError> {
    Ok(dist(region.metric, x, &region.centroid)? <= region.radius)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadiusStrategy {
    /// Largest member distance to the centroid.
    Tight,
    /// Tight radius capped at half the distance to the nearest point of
    /// another label, so no foreign point falls inside.
    Separating,
}

impl FromStr for RadiusStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tight" => Ok(RadiusStrategy::Tight),
            "separating" => Ok(RadiusStrategy::Separating),
            _ => Err(format!("unknown radius strategy `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscoveryConfig {
    pub seed: u64,
    pub min_members: usize,
    pub max_iter: usize,
    pub radius: RadiusStrategy,
}

impl Default for DiscoveryConfig {
    fn default() -> Self {
        DiscoveryConfig {
            seed: 0,
            min_members: 3,
            max_iter: 100,
            radius: RadiusStrategy::Separating,
        }
    }
}

/// Radius for a cluster under the given strategy. May return 0, in which
/// case the caller drops the region.
pub fn compute_radius(
    members: &[&[f64]],
    centroid: &[f64],
    metric: Metric,
    data: &LabeledDataset,
    label: usize,
    strategy: RadiusStrategy,
) -> Result<f64, RegionError> {
    let mut tight: f64 = 0.0;
    for m in members {
        tight = tight.max(dist(metric, m, centroid)?);
    }
    match strategy {
        RadiusStrategy::Tight => Ok(tight),
        RadiusStrategy::Separating => {
            let mut nearest_foreign = f64::INFINITY;
            for (p, &l) in data.points.iter().zip(&data.labels) {
                if l != label {
                    nearest_foreign = nearest_foreign.min(dist(metric, p, centroid)?);
                }
            }
            Ok(tight.min(0.5 * nearest_foreign))
        }
    }
}

/// Why a cluster did not become a region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    Singleton,
    TooFewMembers,
    ZeroRadius,
    /// Coincident points carrying different labels; cannot be split.
    Conflicting,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedCluster {
    pub reason: DropReason,
    pub member_indices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Discovery {
    pub regions: Vec<Region>,
    pub dropped: Vec<DroppedCluster>,
}

impl Discovery {
    pub fn singleton_count(&self) -> usize {
        self.dropped
            .iter()
            .filter(|d| d.reason == DropReason::Singleton)
            .count()
    }
}

/// Derives a child seed so every split gets its own deterministic stream.
fn child_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn discover_regions(
    data: &LabeledDataset,
    metric: Metric,
    cfg: &DiscoveryConfig,
) -> Result<Discovery, RegionError> {
    data.validate()?;
    if data.is_empty() {
        return Err(RegionError::EmptyDataset);
    }
    let dim = data.dim();
    let mut pure: Vec<Vec<usize>> = Vec::new();
    let mut dropped = Vec::new();

    let mut queue: VecDeque<(Vec<usize>, usize)> = VecDeque::new();
    let all: Vec<usize> = (0..data.len()).collect();
    let k0 = data.distinct_labels().len().min(data.len());
    queue.extend(
        split(data, &all, k0, child_seed(cfg.seed, 0), cfg.max_iter)?
            .into_iter()
            .map(|c| (c, 1)),
    );
    let mut splits = 1u64;

    while let Some((members, depth)) = queue.pop_front() {
        let labels: BTreeSet<usize> = members.iter().map(|&i| data.labels[i]).collect();
        if labels.len() == 1 {
            if members.len() == 1 {
                dropped.push(DroppedCluster {
                    reason: DropReason::Singleton,
                    member_indices: members,
                });
            } else {
                pure.push(members);
            }
            continue;
        }
        if distinct_points(data, &members) < 2 {
            dropped.push(DroppedCluster {
                reason: DropReason::Conflicting,
                member_indices: members,
            });
            continue;
        }
        splits += 1;
        for part in split(
            data,
            &members,
            2,
            child_seed(cfg.seed, splits),
            cfg.max_iter,
        )? {
            queue.push_back((part, depth + 1));
        }
    }

    // canonical order: by smallest member index
    for m in &mut pure {
        m.sort_unstable();
    }
    pure.sort_by_key(|m| m[0]);

    let mut regions = Vec::new();
    for members in pure {
        let label = data.labels[members[0]];
        let centroid = kmeans::mean_of(members.iter().map(|&i| &data.points[i]), dim);
        let refs: Vec<&[f64]> = members.iter().map(|&i| data.points[i].as_slice()).collect();
        let radius = compute_radius(&refs, &centroid, metric, data, label, cfg.radius)?;
        if radius <= 0.0 {
            dropped.push(DroppedCluster {
                reason: DropReason::ZeroRadius,
                member_indices: members,
            });
            continue;
        }
        let (inside, outside): (Vec<usize>, Vec<usize>) = members
            .into_iter()
            .partition(|&i| dist(metric, &data.points[i], &centroid).is_ok_and(|d| d <= radius));
        if inside.len() < cfg.min_members.max(1) {
            let mut all = inside;
            all.extend(outside);
            all.sort_unstable();
            dropped.push(DroppedCluster {
                reason: DropReason::TooFewMembers,
                member_indices: all,
            });
            continue;
        }
        if !outside.is_empty() {
            dropped.push(DroppedCluster {
                reason: DropReason::TooFewMembers,
                member_indices: outside,
            });
        }
        regions.push(Region {
            id: format!("r{:04}", regions.len()),
            centroid,
            radius,
            metric,
            expected_label: label,
            member_count: inside.len(),
            member_indices: inside,
        });
    }
    Ok(Discovery { regions, dropped })
}

fn distinct_points(data: &LabeledDataset, members: &[usize]) -> usize {
    let mut seen: Vec<&Vec<f64>> = Vec::new();
    for &i in members {
        let p = &data.points[i];
        if !seen.contains(&p) {
            seen.push(p);
            if seen.len() > 2 {
                break;
            }
        }
    }
    seen.len()
}

/// Splits `members` into `k` non-empty parts with k-means.
fn split(
    data: &LabeledDataset,
    members: &[usize],
    k: usize,
    seed: u64,
    max_iter: usize,
) -> Result<Vec<Vec<usize>>, RegionError> {
    let pts: Vec<Vec<f64>> = members.iter().map(|&i| data.points[i].clone()).collect();
    let k = k.min(pts.len());
    let c = kmeans(&pts, k, seed, max_iter)?;
    let mut parts: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (local, &cl) in c.assignment.iter().enumerate() {
        parts[cl].push(members[local]);
    }
    parts.retain(|p| !p.is_empty());
    if k >= 2 && parts.len() == 1 && members.len() > 1 {
        // k-means could not separate (all coincident); peel off one point so
        // the recursion still shrinks.
        let last = parts[0].pop().unwrap();
        parts.push(vec![last]);
    }
    Ok(parts)
}
