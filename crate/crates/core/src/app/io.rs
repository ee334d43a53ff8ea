//! Dataset CSV and region list files.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::AppError;
use crate::network::Network;
use crate::regions::{LabeledDataset, Metric, Region};

/// A dataset with its label names, in normalized input space.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedDataset {
    pub data: LabeledDataset,
    pub label_names: Vec<String>,
}

/// Reads `x1,...,xn,label` rows. With a network, label names resolve
/// against its label list and raw values are normalized through it;
/// without one, values are taken as normalized and labels are numbered in
/// sorted name order.
pub fn read_dataset_csv(text: &str, net: Option<&Network>) -> Result<NamedDataset, AppError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader.headers()?.clone();
    if header.len() < 2 {
        return Err(AppError::Input(
            "dataset needs at least one attribute and a label column".into(),
        ));
    }
    let attributes: Vec<String> = header
        .iter()
        .take(header.len() - 1)
        .map(str::to_string)
        .collect();
    let mut rows: Vec<(Vec<f64>, String)> = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let mut values = Vec::with_capacity(attributes.len());
        for f in rec.iter().take(attributes.len()) {
            values.push(
                f.parse::<f64>()
                    .map_err(|e| AppError::Input(format!("dataset row {}: `{f}`: {e}", i + 1)))?,
            );
        }
        rows.push((
            values,
            rec.get(attributes.len()).unwrap_or_default().to_string(),
        ));
    }
    let label_names: Vec<String> = match net {
        Some(n) => n.labels.clone(),
        None => {
            let mut names: Vec<String> = rows.iter().map(|(_, l)| l.clone()).collect();
            names.sort();
            names.dedup();
            names
        }
    };
    let mut points = Vec::with_capacity(rows.len());
    let mut labels = Vec::with_capacity(rows.len());
    for (i, (values, l)) in rows.into_iter().enumerate() {
        let idx = label_names.iter().position(|n| *n == l).ok_or_else(|| {
            AppError::Input(format!("dataset row {}: unknown label `{l}`", i + 1))
        })?;
        points.push(match net {
            Some(n) => n.normalize(&values)?,
            None => values,
        });
        labels.push(idx);
    }
    let data = LabeledDataset::new(attributes, points, labels)?;
    Ok(NamedDataset { data, label_names })
}

/// Writes rows in the format [`read_dataset_csv`] reads.
pub fn write_dataset_csv(
    out: impl Write,
    attributes: &[String],
    points: &[Vec<f64>],
    labels: &[String],
) -> Result<(), AppError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = attributes.iter().map(String::as_str).collect();
    header.push("label");
    w.write_record(&header)?;
    for (p, l) in points.iter().zip(labels) {
        let mut rec: Vec<String> = p.iter().map(|v| v.to_string()).collect();
        rec.push(l.clone());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionRecord {
    pub id: String,
    pub metric: Metric,
    pub centroid: Vec<f64>,
    pub radius: f64,
    pub expected_label: String,
    pub member_count: usize,
    #[serde(default)]
    pub member_indices: Vec<usize>,
}

/// Discovered regions in normalized space, labels by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionsFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub network: Option<String>,
    pub regions: Vec<RegionRecord>,
}

impl RegionsFile {
    pub fn from_regions(
        network: Option<String>,
        regions: &[Region],
        label_names: &[String],
    ) -> Self {
        RegionsFile {
            network,
            regions: regions
                .iter()
                .map(|r| RegionRecord {
                    id: r.id.clone(),
                    metric: r.metric,
                    centroid: r.centroid.clone(),
                    radius: r.radius,
                    expected_label: label_names
                        .get(r.expected_label)
                        .cloned()
                        .unwrap_or_else(|| r.expected_label.to_string()),
                    member_count: r.member_count,
                    member_indices: r.member_indices.clone(),
                })
                .collect(),
        }
    }

    /// Resolves label names against `labels`; ids must be unique.
    pub fn to_regions(&self, labels: &[String]) -> Result<Vec<Region>, AppError> {
        let mut seen = BTreeMap::new();
        self.regions
            .iter()
            .map(|r| {
                if seen.insert(r.id.clone(), ()).is_some() {
                    return Err(AppError::Input(format!("duplicate region id `{}`", r.id)));
                }
                let expected_label = labels
                    .iter()
                    .position(|l| *l == r.expected_label)
                    .ok_or_else(|| {
                        AppError::Input(format!(
                            "region {}: unknown label `{}`",
                            r.id, r.expected_label
                        ))
                    })?;
                Ok(Region {
                    id: r.id.clone(),
                    centroid: r.centroid.clone(),
                    radius: r.radius,
                    metric: r.metric,
                    expected_label,
                    member_count: r.member_count,
                    member_indices: r.member_indices.clone(),
                })
            })
            .collect()
    }
}
