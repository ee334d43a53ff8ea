//! Runtime guards built from region contracts: inputs inside a proved
//! region pass with the region's guarantee, everything else is routed to a
//! fail-safe action.

use std::io::{BufWriter, Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contracts::{ContractError, DnnContract, Guarantee, RegionContract};
use crate::network::{Network, NetworkError, ScoreOrder};

#[derive(Debug, Error)]
pub enum GuardError {
    #[error(transparent)]
    Contract(#[from] ContractError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("uncertainty threshold {0} must lie in (0, 1]")]
    Threshold(f64),
    #[error("contract was built for network `{contract}`, not `{network}`")]
    NetworkMismatch { contract: String, network: String },
    #[error("row {row}: {msg}")]
    Row { row: usize, msg: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuardConfig {
    /// Label name or symbolic action reported on fail-safe.
    pub fail_safe_action: String,
    /// Inputs with higher uncertainty fail safe even inside a region. A
    /// region's own `uncertainty_max` takes precedence.
    pub uncertainty_threshold: Option<f64>,
}

impl Default for GuardConfig {
    fn default() -> Self {
        GuardConfig {
            fail_safe_action: "fail_safe".into(),
            uncertainty_threshold: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Guard {
    pub network: String,
    pub fail_safe_action: String,
    pub uncertainty_threshold: Option<f64>,
    /// Sorted by id so the first hit is the lowest-id region.
    regions: Vec<RegionContract>,
}

impl Guard {
    pub fn regions(&self) -> &[RegionContract] {
        &self.regions
    }
}

pub fn build_guard(contract: &DnnContract, cfg: &GuardConfig) -> Result<Guard, GuardError> {
    contract.validate()?;
    if let Some(u) = cfg.uncertainty_threshold {
        if !(u > 0.0 && u <= 1.0) {
            return Err(GuardError::Threshold(u));
        }
    }
    let mut regions = contract.regions.clone();
    regions.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(Guard {
        network: contract.network.clone(),
        fail_safe_action: cfg.fail_safe_action.clone(),
        uncertainty_threshold: cfg.uncertainty_threshold,
        regions,
    })
}

/// `1 - max softmax(goodness)`, where goodness is the score for
/// `max_best` networks and its negation for `min_best` ones. Lies in
/// `[0, 1 - 1/k]` for `k` labels.
pub fn uncertainty(net: &Network, x: &[f64]) -> Result<f64, NetworkError> {
    Ok(uncertainty_of_scores(net.score_order, &net.evaluate(x)?))
}

pub fn uncertainty_of_scores(order: ScoreOrder, scores: &[f64]) -> f64 {
    let good: Vec<f64> = match order {
        ScoreOrder::MaxBest => scores.to_vec(),
        ScoreOrder::MinBest => scores.iter().map(|s| -s).collect(),
    };
    let top = good.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = good.iter().map(|g| (g - top).exp()).sum();
    // the top entry contributes exp(0) = 1
    (1.0 - 1.0 / total).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionKind {
    Covered,
    FailSafe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailSafeReason {
    OutsideRegions,
    Uncertain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GuardDecision {
    pub kind: DecisionKind,
    /// Lowest-id region containing the input, when covered.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guarantee: Option<Guarantee>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<FailSafeReason>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<String>,
    /// Label the network actually computed.
    pub label: String,
    pub uncertainty: f64,
}

/// Decides one normalized input.
pub fn guard_eval(guard: &Guard, net: &Network, x: &[f64]) -> Result<GuardDecision, GuardError> {
    if guard.network != net.name {
        return Err(GuardError::NetworkMismatch {
            contract: guard.network.clone(),
            network: net.name.clone(),
        });
    }
    let scores = net.evaluate(x)?;
    let label = net.labels[net.best_label(&scores)].clone();
    let u = uncertainty_of_scores(net.score_order, &scores);
    let mut hit = None;
    for r in &guard.regions {
        if r.contains(x)? {
            hit = Some(r);
            break;
        }
    }
    let fail = |reason| GuardDecision {
        kind: DecisionKind::FailSafe,
        region: None,
        guarantee: None,
        reason: Some(reason),
        action: Some(guard.fail_safe_action.clone()),
        label: label.clone(),
        uncertainty: u,
    };
    let Some(r) = hit else {
        return Ok(fail(FailSafeReason::OutsideRegions));
    };
    if r.uncertainty_max
        .or(guard.uncertainty_threshold)
        .is_some_and(|t| u > t)
    {
        let mut d = fail(FailSafeReason::Uncertain);
        d.region = Some(r.id.clone());
        return Ok(d);
    }
    Ok(GuardDecision {
        kind: DecisionKind::Covered,
        region: Some(r.id.clone()),
        guarantee: Some(r.guarantee.clone()),
        reason: None,
        action: None,
        label,
        uncertainty: u,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamStats {
    pub rows: usize,
    pub covered: usize,
    pub outside: usize,
    pub uncertain: usize,
}

/// Reads CSV rows of raw inputs (with a header line) and writes one JSON
/// decision per line. Values are normalized through the network unless
/// `normalized` is set. A trailing `label` column, as in dataset files, is
/// ignored.
pub fn guard_stream(
    guard: &Guard,
    net: &Network,
    input: impl Read,
    output: impl Write,
    normalized: bool,
) -> Result<StreamStats, GuardError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let header = reader.headers()?;
    let width = if header.len() == net.input_dim + 1 && header.get(net.input_dim) == Some("label") {
        net.input_dim
    } else {
        usize::MAX
    };
    let mut out = BufWriter::new(output);
    let mut stats = StreamStats::default();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let values: Vec<f64> = rec
            .iter()
            .take(width)
            .map(|f| f.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| GuardError::Row {
                row,
                msg: e.to_string(),
            })?;
        if values.len() != net.input_dim {
            return Err(GuardError::Row {
                row,
                msg: format!("expected {} values, got {}", net.input_dim, values.len()),
            });
        }
        let x = if normalized {
            values
        } else {
            net.normalize(&values)?
        };
        let d = guard_eval(guard, net, &x)?;
        stats.rows += 1;
        match (d.kind, d.reason) {
            (DecisionKind::Covered, _) => stats.covered += 1,
            (_, Some(FailSafeReason::Uncertain)) => stats.uncertain += 1,
            _ => stats.outside += 1,
        }
        serde_json::to_writer(&mut out, &d)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(stats)
}
