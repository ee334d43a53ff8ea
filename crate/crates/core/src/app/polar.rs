//! Downrange/crossrange projection of counterexamples given in polar
//! coordinates, written as CSV and a static SVG scatter plot.

use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::AppError;
use crate::network::Network;

/// `(rho·cos θ, rho·sin θ)`.
pub fn project_polar(rho: f64, theta: f64) -> (f64, f64) {
    (rho * theta.cos(), rho * theta.sin())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolarPoint {
    pub downrange: f64,
    pub crossrange: f64,
}

impl PolarPoint {
    /// Projects raw input `x` using the `rho` and `theta` coordinates.
    pub fn from_raw(x: &[f64], rho: usize, theta: usize) -> Self {
        let (downrange, crossrange) = project_polar(x[rho], x[theta]);
        PolarPoint {
            downrange,
            crossrange,
        }
    }
}

/// Reads the network's `polar_dims` metadata (`"rho_index,theta_index"`).
pub fn polar_dims(net: &Network) -> Result<Option<(usize, usize)>, AppError> {
    let Some(v) = net.metadata.get("polar_dims") else {
        return Ok(None);
    };
    let bad = || AppError::Input(format!("network `{}`: bad polar_dims `{v}`", net.name));
    let (a, b) = v.split_once(',').ok_or_else(bad)?;
    let a: usize = a.trim().parse().map_err(|_| bad())?;
    let b: usize = b.trim().parse().map_err(|_| bad())?;
    if a >= net.input_dim || b >= net.input_dim || a == b {
        return Err(bad());
    }
    Ok(Some((a, b)))
}

/// Projects raw points through the network's `polar_dims`.
pub fn polar_points(net: &Network, raw: &[Vec<f64>]) -> Result<Vec<PolarPoint>, AppError> {
    let (rho, theta) = polar_dims(net)?.ok_or_else(|| {
        AppError::Input(format!("network `{}` has no polar_dims metadata", net.name))
    })?;
    Ok(raw
        .iter()
        .map(|x| PolarPoint::from_raw(x, rho, theta))
        .collect())
}

pub fn write_polar_csv(out: impl Write, points: &[(String, PolarPoint)]) -> Result<(), AppError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["label", "downrange", "crossrange"])?;
    for (l, p) in points {
        w.write_record([l.clone(), p.downrange.to_string(), p.crossrange.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

const PALETTE: [&str; 6] = [
    "#d62728", "#2ca02c", "#1f77b4", "#ff7f0e", "#9467bd", "#8c564b",
];

/// Scatter plot with one colour per label and a legend.
pub fn render_polar_svg(points: &[(String, PolarPoint)]) -> String {
    let (w, h, pad) = (480.0, 480.0, 40.0);
    let mut labels: Vec<&str> = points.iter().map(|(l, _)| l.as_str()).collect();
    labels.sort();
    labels.dedup();
    let (mut x0, mut x1, mut y0, mut y1) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for (_, p) in points {
        x0 = x0.min(p.crossrange);
        x1 = x1.max(p.crossrange);
        y0 = y0.min(p.downrange);
        y1 = y1.max(p.downrange);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (-1.0, 1.0, -1.0, 1.0);
    }
    let sx = if x1 > x0 {
        (w - 2.0 * pad) / (x1 - x0)
    } else {
        1.0
    };
    let sy = if y1 > y0 {
        (h - 2.0 * pad) / (y1 - y0)
    } else {
        1.0
    };
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">crossrange</text>"#,
        w / 2.0,
        h - 8.0
    );
    let _ = writeln!(
        s,
        r#"<text x="12" y="{}" font-size="12" text-anchor="middle" transform="rotate(-90 12 {})">downrange</text>"#,
        h / 2.0,
        h / 2.0
    );
    for (l, p) in points {
        let i = labels.iter().position(|x| x == l).unwrap_or(0);
        let cx = pad + (p.crossrange - x0) * sx;
        let cy = h - pad - (p.downrange - y0) * sy;
        let _ = writeln!(
            s,
            r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="3" fill="{}"/>"#,
            PALETTE[i % PALETTE.len()]
        );
    }
    for (i, l) in labels.iter().enumerate() {
        let y = pad + 14.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<circle cx="{}" cy="{y}" r="4" fill="{}"/><text x="{}" y="{}" font-size="11">{}</text>"#,
            w - 110.0,
            PALETTE[i % PALETTE.len()],
            w - 100.0,
            y + 4.0,
            escape(l)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
