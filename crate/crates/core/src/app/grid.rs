//! Cartesian products of per-dimension cut points, streamed row by row.

use std::io::Write;

use super::AppError;
use crate::network::Network;

/// Lazy iterator over the product in lexicographic order (last dimension
/// varies fastest).
#[derive(Debug, Clone)]
pub struct Grid {
    pub names: Vec<String>,
    cutpoints: Vec<Vec<f64>>,
    cursor: Option<Vec<usize>>,
}

impl Grid {
    /// Number of rows, saturating at `u128::MAX`.
    pub fn size(&self) -> u128 {
        self.cutpoints
            .iter()
            .fold(1u128, |acc, c| acc.saturating_mul(c.len() as u128))
    }

    pub fn dims(&self) -> usize {
        self.cutpoints.len()
    }
}

impl Iterator for Grid {
    type Item = Vec<f64>;

    fn next(&mut self) -> Option<Vec<f64>> {
        let cur = self.cursor.as_mut()?;
        let row = cur
            .iter()
            .zip(&self.cutpoints)
            .map(|(&i, c)| c[i])
            .collect();
        let mut d = cur.len();
        loop {
            if d == 0 {
                self.cursor = None;
                break;
            }
            d -= 1;
            cur[d] += 1;
            if cur[d] < self.cutpoints[d].len() {
                break;
            }
            cur[d] = 0;
        }
        Some(row)
    }
}

pub fn generate_grid(cutpoints: Vec<Vec<f64>>, names: Vec<String>) -> Result<Grid, AppError> {
    if cutpoints.is_empty() {
        return Err(AppError::Input("grid needs at least one dimension".into()));
    }
    if names.len() != cutpoints.len() {
        return Err(AppError::Input(format!(
            "{} names for {} dimensions",
            names.len(),
            cutpoints.len()
        )));
    }
    if let Some(i) = cutpoints.iter().position(Vec::is_empty) {
        return Err(AppError::Input(format!(
            "dimension `{}` has no cut points",
            names[i]
        )));
    }
    if cutpoints.iter().flatten().any(|v| !v.is_finite()) {
        return Err(AppError::Input("cut points must be finite".into()));
    }
    let cursor = Some(vec![0; cutpoints.len()]);
    Ok(Grid {
        names,
        cutpoints,
        cursor,
    })
}

/// Writes the grid as CSV in raw units. With a network, a `label` column
/// holds its classification of each point. Returns the row count.
pub fn write_grid_csv(
    grid: Grid,
    out: impl Write,
    label_with: Option<&Network>,
) -> Result<u64, AppError> {
    if let Some(net) = label_with {
        if net.input_dim != grid.dims() {
            return Err(AppError::Input(format!(
                "network `{}` takes {} inputs, grid has {} dimensions",
                net.name,
                net.input_dim,
                grid.dims()
            )));
        }
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header = grid.names.clone();
    if label_with.is_some() {
        header.push("label".into());
    }
    w.write_record(&header)?;
    let mut rows = 0u64;
    for p in grid {
        let mut rec: Vec<String> = p.iter().map(|v| v.to_string()).collect();
        if let Some(net) = label_with {
            let l = net.classify(&net.normalize(&p)?)?;
            rec.push(net.labels[l].clone());
        }
        w.write_record(&rec)?;
        rows += 1;
    }
    w.flush()?;
    Ok(rows)
}

/// Parses `name=v1,v2,...`.
pub fn parse_dim(spec: &str) -> Result<(String, Vec<f64>), AppError> {
    let (name, values) = spec
        .split_once('=')
        .ok_or_else(|| AppError::Input(format!("expected name=v1,v2,... in `{spec}`")))?;
    let values = values
        .split(',')
        .filter(|v| !v.trim().is_empty())
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|e| AppError::Input(format!("`{v}` in `{spec}`: {e}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((name.trim().to_string(), values))
}
