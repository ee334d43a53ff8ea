//! Feedforward ReLU classifiers: the line-oriented `RELUNET 1` text format,
//! input normalization, forward evaluation and label selection.
//!
//! A network file looks like this:
//!
//! ```text
//! RELUNET 1
//! name tiny
//! labels left,right
//! score_order max_best
//! inputs 2
//! input_min 0,0
//! input_max 1,1
//! input_mean 0,0
//! input_range 1,1
//! meta tau 0
//! layer 2x2 identity
//! 1,0
//! 0,1
//! 0,0
//! ```
//!
//! Everything after a `#` on a line is ignored, as are blank lines.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid network: {0}")]
    Invalid(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

/// Whether the chosen label is the one with the lowest or the highest score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreOrder {
    MinBest,
    MaxBest,
}

impl ScoreOrder {
    pub fn as_str(self) -> &'static str {
        match self {
            ScoreOrder::MinBest => "min_best",
            ScoreOrder::MaxBest => "max_best",
        }
    }
}

impl FromStr for ScoreOrder {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "min_best" => Ok(ScoreOrder::MinBest),
            "max_best" => Ok(ScoreOrder::MaxBest),
            other => Err(format!("unknown score order `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    pub fn as_str(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Identity => "identity",
        }
    }

    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
        }
    }
}

/// One dense layer. `weights[i]` is the row feeding output neuron `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn new(weights: Vec<Vec<f64>>, bias: Vec<f64>, activation: Activation) -> Self {
        Layer {
            weights,
            bias,
            activation,
        }
    }

    pub fn out_dim(&self) -> usize {
        self.bias.len()
    }

    pub fn in_dim(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    /// `W·x + b`, before the activation.
    pub fn pre_activation(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub name: String,
    pub labels: Vec<String>,
    pub score_order: ScoreOrder,
    pub input_dim: usize,
    pub layers: Vec<Layer>,
    pub input_min: Vec<f64>,
    pub input_max: Vec<f64>,
    pub input_mean: Vec<f64>,
    pub input_range: Vec<f64>,
    pub metadata: BTreeMap<String, String>,
}

impl Network {
    /// Checks every structural invariant: chained layer widths, an identity
    /// output layer producing one score per label, sane normalization.
    pub fn validate(&self) -> Result<(), NetworkError> {
        let bad = |m: String| Err(NetworkError::Invalid(m));
        if self.input_dim == 0 {
            return bad("input dimension must be positive".into());
        }
        if self.labels.len() < 2 {
            return bad("at least two labels are required".into());
        }
        let mut seen = std::collections::BTreeSet::new();
        for l in &self.labels {
            if l.is_empty() || !seen.insert(l.as_str()) {
                return bad(format!("empty or duplicate label `{l}`"));
            }
        }
        for (what, v) in [
            ("input_min", &self.input_min),
            ("input_max", &self.input_max),
            ("input_mean", &self.input_mean),
            ("input_range", &self.input_range),
        ] {
            if v.len() != self.input_dim {
                return bad(format!(
                    "{what} has {} entries, expected {}",
                    v.len(),
                    self.input_dim
                ));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return bad(format!("{what} contains a non-finite value"));
            }
        }
        for i in 0..self.input_dim {
            if self.input_range[i] <= 0.0 {
                return bad(format!("input_range[{i}] must be positive"));
            }
            if self.input_min[i] > self.input_max[i] {
                return bad(format!("input_min[{i}] exceeds input_max[{i}]"));
            }
        }
        let Some(last) = self.layers.last() else {
            return bad("network has no layers".into());
        };
        let mut width = self.input_dim;
        for (k, layer) in self.layers.iter().enumerate() {
            if layer.bias.is_empty() || layer.weights.len() != layer.bias.len() {
                return bad(format!(
                    "layer {}: weight rows do not match bias length",
                    k + 1
                ));
            }
            for row in &layer.weights {
                if row.len() != width {
                    return bad(format!(
                        "layer {}: input width {} does not match previous width {width}",
                        k + 1,
                        row.len()
                    ));
                }
                if row.iter().any(|w| !w.is_finite()) {
                    return bad(format!("layer {}: non-finite weight", k + 1));
                }
            }
            if layer.bias.iter().any(|b| !b.is_finite()) {
                return bad(format!("layer {}: non-finite bias", k + 1));
            }
            width = layer.out_dim();
        }
        if last.activation != Activation::Identity {
            return bad("the output layer must use identity activation".into());
        }
        if width != self.labels.len() {
            return bad(format!(
                "output width {width} does not match {} labels",
                self.labels.len()
            ));
        }
        Ok(())
    }

    pub fn num_labels(&self) -> usize {
        self.labels.len()
    }

    pub fn label_index(&self, name: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == name)
    }

    /// Total number of ReLU neurons.
    pub fn relu_count(&self) -> usize {
        self.layers
            .iter()
            .filter(|l| l.activation == Activation::Relu)
            .map(Layer::out_dim)
            .sum()
    }

    fn check_dim(&self, got: usize) -> Result<(), NetworkError> {
        if got != self.input_dim {
            return Err(NetworkError::Dimension {
                expected: self.input_dim,
                got,
            });
        }
        Ok(())
    }

    /// `(raw - mean) / range`, per dimension.
    pub fn normalize(&self, raw: &[f64]) -> Result<Vec<f64>, NetworkError> {
        self.check_dim(raw.len())?;
        Ok(raw
            .iter()
            .zip(self.input_mean.iter().zip(&self.input_range))
            .map(|(x, (m, r))| (x - m) / r)
            .collect())
    }

    pub fn denormalize(&self, x: &[f64]) -> Result<Vec<f64>, NetworkError> {
        self.check_dim(x.len())?;
        Ok(x.iter()
            .zip(self.input_mean.iter().zip(&self.input_range))
            .map(|(v, (m, r))| v * r + m)
            .collect())
    }

    /// The raw input bounds mapped into normalized space.
    pub fn normalized_domain(&self) -> Vec<(f64, f64)> {
        (0..self.input_dim)
            .map(|i| {
                let lo = (self.input_min[i] - self.input_mean[i]) / self.input_range[i];
                let hi = (self.input_max[i] - self.input_mean[i]) / self.input_range[i];
                (lo, hi)
            })
            .collect()
    }

    /// Forward pass over a normalized input; returns the raw output scores.
    pub fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>, NetworkError> {
        self.check_dim(x.len())?;
        Ok(self.forward(x))
    }

    pub(crate) fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut a = x.to_vec();
        for layer in &self.layers {
            a = layer
                .pre_activation(&a)
                .into_iter()
                .map(|z| layer.activation.apply(z))
                .collect();
        }
        a
    }

    /// Index of the best label for the given scores under this network's
    /// score order. Ties go to the lowest index.
    pub fn best_label(&self, scores: &[f64]) -> usize {
        best_label(self.score_order, scores)
    }

    pub fn classify(&self, x: &[f64]) -> Result<usize, NetworkError> {
        let scores = self.evaluate(x)?;
        Ok(self.best_label(&scores))
    }
}

pub fn best_label(order: ScoreOrder, scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        let better = match order {
            ScoreOrder::MinBest => s < scores[best],
            ScoreOrder::MaxBest => s > scores[best],
        };
        if better {
            best = i;
        }
    }
    best
}

fn join_reals(v: &[f64]) -> String {
    let mut out = String::new();
    for (i, x) in v.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        // `Display` for f64 emits the shortest string that parses back exactly.
        write!(out, "{x}").unwrap();
    }
    out
}

/// Serializes a network into the `RELUNET 1` format.
pub fn render_network(net: &Network) -> String {
    let mut s = String::new();
    s.push_str("RELUNET 1\n");
    writeln!(s, "name {}", net.name).unwrap();
    writeln!(s, "labels {}", net.labels.join(",")).unwrap();
    writeln!(s, "score_order {}", net.score_order.as_str()).unwrap();
    writeln!(s, "inputs {}", net.input_dim).unwrap();
    writeln!(s, "input_min {}", join_reals(&net.input_min)).unwrap();
    writeln!(s, "input_max {}", join_reals(&net.input_max)).unwrap();
    writeln!(s, "input_mean {}", join_reals(&net.input_mean)).unwrap();
    writeln!(s, "input_range {}", join_reals(&net.input_range)).unwrap();
    for (k, v) in &net.metadata {
        writeln!(s, "meta {k} {v}").unwrap();
    }
    for layer in &net.layers {
        writeln!(
            s,
            "layer {}x{} {}",
            layer.out_dim(),
            layer.in_dim(),
            layer.activation.as_str()
        )
        .unwrap();
        for row in &layer.weights {
            s.push_str(&join_reals(row));
            s.push('\n');
        }
        s.push_str(&join_reals(&layer.bias));
        s.push('\n');
    }
    s
}

impl fmt::Display for Network {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_network(self))
    }
}

struct Lines<'a> {
    inner: std::iter::Peekable<Box<dyn Iterator<Item = (usize, &'a str)> + 'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        let it: Box<dyn Iterator<Item = (usize, &'a str)> + 'a> = Box::new(
            text.lines()
                .enumerate()
                .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
                .filter(|(_, l)| !l.is_empty()),
        );
        Lines {
            inner: it.peekable(),
            last: 0,
        }
    }

    fn next(&mut self) -> Option<(usize, &'a str)> {
        let n = self.inner.next();
        if let Some((no, _)) = n {
            self.last = no;
        }
        n
    }

    fn expect(&mut self, what: &str) -> Result<(usize, &'a str), NetworkError> {
        self.next().ok_or_else(|| NetworkError::Parse {
            line: self.last + 1,
            msg: format!("unexpected end of file, expected {what}"),
        })
    }

    fn keyed(&mut self, key: &str) -> Result<(usize, &'a str), NetworkError> {
        let (no, line) = self.expect(key)?;
        match line.split_once(char::is_whitespace) {
            Some((k, rest)) if k == key => Ok((no, rest.trim())),
            _ if line == key => Err(perr(no, format!("`{key}` requires a value"))),
            _ => Err(perr(
                no,
                format!("expected `{key}` declaration, found `{line}`"),
            )),
        }
    }
}

fn perr(line: usize, msg: impl Into<String>) -> NetworkError {
    NetworkError::Parse {
        line,
        msg: msg.into(),
    }
}

fn parse_reals(line: usize, s: &str) -> Result<Vec<f64>, NetworkError> {
    s.split(',')
        .map(|tok| {
            let tok = tok.trim();
            let v: f64 = tok
                .parse()
                .map_err(|_| perr(line, format!("invalid number `{tok}`")))?;
            if !v.is_finite() {
                return Err(perr(line, format!("non-finite number `{tok}`")));
            }
            Ok(v)
        })
        .collect()
}

fn parse_reals_n(line: usize, s: &str, n: usize) -> Result<Vec<f64>, NetworkError> {
    let v = parse_reals(line, s)?;
    if v.len() != n {
        return Err(perr(
            line,
            format!("dimension mismatch: expected {n} values, found {}", v.len()),
        ));
    }
    Ok(v)
}

/// Parses the `RELUNET 1` format. Errors carry the 1-based line number.
pub fn parse_network(text: &str) -> Result<Network, NetworkError> {
    let mut lines = Lines::new(text);
    let (no, header) = lines.expect("header")?;
    if header.split_whitespace().collect::<Vec<_>>() != ["RELUNET", "1"] {
        return Err(perr(
            no,
            format!("malformed header `{header}`, expected `RELUNET 1`"),
        ));
    }
    let (_, name) = lines.keyed("name")?;
    let (no, labels) = lines.keyed("labels")?;
    let labels: Vec<String> = labels.split(',').map(|l| l.trim().to_string()).collect();
    if labels.len() < 2 || labels.iter().any(String::is_empty) {
        return Err(perr(no, "need at least two non-empty labels"));
    }
    let (no, order) = lines.keyed("score_order")?;
    let score_order = order.parse().map_err(|e: String| perr(no, e))?;
    let (no, inputs) = lines.keyed("inputs")?;
    let input_dim: usize = inputs
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| perr(no, format!("invalid input count `{inputs}`")))?;
    let mut vecs = Vec::with_capacity(4);
    for key in ["input_min", "input_max", "input_mean", "input_range"] {
        let (no, rest) = lines.keyed(key)?;
        vecs.push(parse_reals_n(no, rest, input_dim)?);
    }
    let input_range = vecs.pop().unwrap();
    let input_mean = vecs.pop().unwrap();
    let input_max = vecs.pop().unwrap();
    let input_min = vecs.pop().unwrap();

    let mut metadata = BTreeMap::new();
    let mut layers = Vec::new();
    let mut width = input_dim;
    while let Some((no, line)) = lines.next() {
        let (key, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        match key {
            "meta" if layers.is_empty() => {
                let (k, v) = rest
                    .trim()
                    .split_once(char::is_whitespace)
                    .ok_or_else(|| perr(no, "meta requires a key and a value"))?;
                metadata.insert(k.to_string(), v.trim().to_string());
            }
            "layer" => {
                let mut parts = rest.split_whitespace();
                let shape = parts
                    .next()
                    .ok_or_else(|| perr(no, "layer requires a shape"))?;
                let act = parts
                    .next()
                    .ok_or_else(|| perr(no, "layer requires an activation"))?;
                if parts.next().is_some() {
                    return Err(perr(no, "trailing tokens after layer declaration"));
                }
                let (out, inp) = shape
                    .split_once('x')
                    .and_then(|(o, i)| Some((o.parse::<usize>().ok()?, i.parse::<usize>().ok()?)))
                    .filter(|&(o, i)| o > 0 && i > 0)
                    .ok_or_else(|| perr(no, format!("malformed layer shape `{shape}`")))?;
                let activation = match act {
                    "relu" => Activation::Relu,
                    "identity" => Activation::Identity,
                    other => return Err(perr(no, format!("unknown activation `{other}`"))),
                };
                if inp != width {
                    return Err(perr(
                        no,
                        format!("dimension mismatch: layer input width {inp} but previous width is {width}"),
                    ));
                }
                let mut weights = Vec::with_capacity(out);
                for _ in 0..out {
                    let (no, row) = lines.expect("weight row")?;
                    weights.push(parse_reals_n(no, row, inp)?);
                }
                let (no, bias) = lines.expect("bias row")?;
                let bias = parse_reals_n(no, bias, out)?;
                layers.push(Layer::new(weights, bias, activation));
                width = out;
            }
            other => return Err(perr(no, format!("unexpected declaration `{other}`"))),
        }
    }
    let end = lines.last;
    match layers.last() {
        None => return Err(perr(end, "network declares no layers")),
        Some(l) if l.activation != Activation::Identity => {
            return Err(perr(end, "the output layer must use identity activation"))
        }
        _ => {}
    }
    if width != labels.len() {
        return Err(perr(
            end,
            format!(
                "dimension mismatch: output width {width} but {} labels",
                labels.len()
            ),
        ));
    }
    let net = Network {
        name: name.to_string(),
        labels,
        score_order,
        input_dim,
        layers,
        input_min,
        input_max,
        input_mean,
        input_range,
        metadata,
    };
    net.validate().map_err(|e| perr(end, e.to_string()))?;
    Ok(net)
}

impl FromStr for Network {
    type Err = NetworkError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_network(s)
    }
}

/// Seeded random networks, used by tests, examples and the capacity check.
pub mod random {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// A network on `[0,1]^inputs` (identity normalization) with the given
    /// hidden ReLU widths and Gaussian-ish weights.
    pub fn random_network(seed: u64, inputs: usize, hidden: &[usize], labels: usize) -> Network {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::new();
        let mut width = inputs;
        let widths: Vec<usize> = hidden
            .iter()
            .copied()
            .chain(std::iter::once(labels))
            .collect();
        for (k, &out) in widths.iter().enumerate() {
            let scale = (2.0 / width as f64).sqrt();
            let weights = (0..out)
                .map(|_| {
                    (0..width)
                        .map(|_| rng.gen_range(-1.0..1.0) * scale * 1.5)
                        .collect()
                })
                .collect();
            let bias = (0..out).map(|_| rng.gen_range(-0.5..0.5)).collect();
            let act = if k + 1 == widths.len() {
                Activation::Identity
            } else {
                Activation::Relu
            };
            layers.push(Layer::new(weights, bias, act));
            width = out;
        }
        Network {
            name: format!("random-{seed}"),
            labels: (0..labels).map(|i| format!("L{i}")).collect(),
            score_order: if rng.gen_bool(0.5) {
                ScoreOrder::MinBest
            } else {
                ScoreOrder::MaxBest
            },
            input_dim: inputs,
            layers,
            input_min: vec![0.0; inputs],
            input_max: vec![1.0; inputs],
            input_mean: vec![0.0; inputs],
            input_range: vec![1.0; inputs],
            metadata: BTreeMap::new(),
        }
    }
}
