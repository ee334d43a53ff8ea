//! Symbolic affine bound propagation through ReLU networks over input boxes.

use serde::{Deserialize, Serialize};

use crate::network::{Activation, Network, ScoreOrder};
use crate::regions::Metric;

/// Axis-aligned box in normalized input space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl InputBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        debug_assert_eq!(lo.len(), hi.len());
        InputBox { lo, hi }
    }

    pub fn from_intervals(iv: &[(f64, f64)]) -> Self {
        InputBox {
            lo: iv.iter().map(|p| p.0).collect(),
            hi: iv.iter().map(|p| p.1).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lo.iter().zip(&self.hi).any(|(l, h)| l > h)
    }

    pub fn width(&self, i: usize) -> f64 {
        self.hi[i] - self.lo[i]
    }

    pub fn max_width(&self) -> f64 {
        (0..self.dim()).map(|i| self.width(i)).fold(0.0, f64::max)
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| 0.5 * (l + h))
            .collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (l, h))| *l <= *v && *v <= *h)
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for (v, (l, h)) in x.iter_mut().zip(self.lo.iter().zip(&self.hi)) {
            *v = v.clamp(*l, *h);
        }
    }

    pub fn intersect(&self, other: &InputBox) -> InputBox {
        InputBox {
            lo: self
                .lo
                .iter()
                .zip(&other.lo)
                .map(|(a, b)| a.max(*b))
                .collect(),
            hi: self
                .hi
                .iter()
                .zip(&other.hi)
                .map(|(a, b)| a.min(*b))
                .collect(),
        }
    }

    /// Halves the box along `dim`.
    pub fn bisect(&self, dim: usize) -> (InputBox, InputBox) {
        let mid = 0.5 * (self.lo[dim] + self.hi[dim]);
        let mut left = self.clone();
        let mut right = self.clone();
        left.hi[dim] = mid;
        right.lo[dim] = mid;
        (left, right)
    }

    /// Smallest `metric` distance from `c` to any point of the box.
    pub fn distance_to(&self, metric: Metric, c: &[f64]) -> f64 {
        metric.norm(
            c.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .map(|(v, (l, h))| (l - v).max(0.0).max(v - h)),
        )
    }
}

/// `coeffs · x + offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineFn {
    pub coeffs: Vec<f64>,
    pub offset: f64,
}

impl AffineFn {
    pub fn constant(dim: usize, c: f64) -> Self {
        AffineFn {
            coeffs: vec![0.0; dim],
            offset: c,
        }
    }

    pub fn coordinate(dim: usize, i: usize) -> Self {
        let mut coeffs = vec![0.0; dim];
        coeffs[i] = 1.0;
        AffineFn {
            coeffs,
            offset: 0.0,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + self.offset
    }

    pub fn scale(&self, s: f64) -> AffineFn {
        AffineFn {
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
            offset: self.offset * s,
        }
    }

    pub fn sub(&self, other: &AffineFn) -> AffineFn {
        AffineFn {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a - b)
                .collect(),
            offset: self.offset - other.offset,
        }
    }

    fn add_scaled(&mut self, other: &AffineFn, s: f64) {
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += s * b;
        }
        self.offset += s * other.offset;
    }

    /// Minimum over the box, attained at the corner picked per dimension by
    /// the coefficient sign.
    pub fn min_over(&self, b: &InputBox) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, &a)| if a >= 0.0 { a * b.lo[i] } else { a * b.hi[i] })
            .sum::<f64>()
            + self.offset
    }

    pub fn max_over(&self, b: &InputBox) -> f64 {
        -self.scale(-1.0).min_over(b)
    }

    pub fn argmin_corner(&self, b: &InputBox) -> Vec<f64> {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, &a)| if a >= 0.0 { b.lo[i] } else { b.hi[i] })
            .collect()
    }

    /// Minimum over the closed ball `{x : |x - c| <= r}` (L1 or L2) together
    /// with a minimizer. Uses the dual norm of the coefficient vector.
    pub fn min_over_ball(&self, metric: Metric, c: &[f64], r: f64) -> (f64, Vec<f64>) {
        let at_c = self.eval(c);
        let mut x = c.to_vec();
        match metric {
            Metric::L1 => {
                let (i, a) = self
                    .coeffs
                    .iter()
                    .enumerate()
                    .fold((0, 0.0f64), |acc, (i, &a)| {
                        if a.abs() > acc.1.abs() {
                            (i, a)
                        } else {
                            acc
                        }
                    });
                if a != 0.0 {
                    x[i] -= r * a.signum();
                }
                (at_c - r * a.abs(), x)
            }
            Metric::L2 => {
                let n = self.coeffs.iter().map(|a| a * a).sum::<f64>().sqrt();
                if n > 0.0 {
                    for (v, a) in x.iter_mut().zip(&self.coeffs) {
                        *v -= r * a / n;
                    }
                }
                (at_c - r * n, x)
            }
            Metric::Linf => {
                let l1: f64 = self.coeffs.iter().map(|a| a.abs()).sum();
                for (v, a) in x.iter_mut().zip(&self.coeffs) {
                    if *a != 0.0 {
                        *v -= r * a.signum();
                    }
                }
                (at_c - r * l1, x)
            }
        }
    }
}

/// Affine lower and upper bounding functions for every output score,
/// valid over the box they were computed for.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearBounds {
    pub lower: Vec<AffineFn>,
    pub upper: Vec<AffineFn>,
    /// Interval enclosure of each output, tracked alongside the affine
    /// functions and never looser than their concretization.
    pub concrete: Vec<(f64, f64)>,
    /// Bounds on the inputs of an affine output layer, kept so a margin can
    /// be bounded through the difference of two weight rows.
    pub output_inputs: Option<OutputInputs>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputInputs {
    pub lower: Vec<AffineFn>,
    pub upper: Vec<AffineFn>,
    pub concrete: Vec<(f64, f64)>,
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl OutputInputs {
    /// Affine lower bound and interval lower bound of `score[a] - score[b]`.
    fn difference_lower(&self, a: usize, b: usize, n: usize) -> (AffineFn, f64) {
        let offset = self.bias[a] - self.bias[b];
        let mut f = AffineFn::constant(n, offset);
        let mut lo = offset;
        for (j, (wa, wb)) in self.weights[a].iter().zip(&self.weights[b]).enumerate() {
            let c = wa - wb;
            if c > 0.0 {
                f.add_scaled(&self.lower[j], c);
                lo += c * self.concrete[j].0;
            } else if c < 0.0 {
                f.add_scaled(&self.upper[j], c);
                lo += c * self.concrete[j].1;
            }
        }
        (f, lo)
    }
}

impl LinearBounds {
    /// Concrete `[lo, hi]` per output over the box.
    pub fn intervals(&self, b: &InputBox) -> Vec<(f64, f64)> {
        self.lower
            .iter()
            .zip(&self.upper)
            .zip(&self.concrete)
            .map(|((l, u), c)| (l.min_over(b).max(c.0), u.max_over(b).min(c.1)))
            .collect()
    }

    pub fn holds_at(&self, x: &[f64], scores: &[f64], tol: f64) -> bool {
        scores.iter().enumerate().all(|(i, &s)| {
            let scale = 1.0 + s.abs();
            self.lower[i].eval(x) <= s + tol * scale && s <= self.upper[i].eval(x) + tol * scale
        })
    }
}

/// Pushes affine bounds through the network layer by layer. Affine layers
/// compose exactly. An unstable ReLU with pre-activation range `[l, u]` is
/// bounded above by the chord `u (z - l) / (u - l)` and below by `α z`,
/// where `α = 1` if `u >= -l` and `0` otherwise.
pub fn propagate_bounds(net: &Network, b: &InputBox) -> LinearBounds {
    let n = b.dim();
    let mut lower: Vec<AffineFn> = (0..n).map(|i| AffineFn::coordinate(n, i)).collect();
    let mut upper = lower.clone();
    let mut concrete: Vec<(f64, f64)> = b.lo.iter().copied().zip(b.hi.iter().copied()).collect();
    let mut output_inputs = None;
    for (k, layer) in net.layers.iter().enumerate() {
        if k + 1 == net.layers.len() && layer.activation == Activation::Identity {
            output_inputs = Some(OutputInputs {
                lower: lower.clone(),
                upper: upper.clone(),
                concrete: concrete.clone(),
                weights: layer.weights.clone(),
                bias: layer.bias.clone(),
            });
        }
        let mut next_lo = Vec::with_capacity(layer.out_dim());
        let mut next_up = Vec::with_capacity(layer.out_dim());
        let mut next_iv = Vec::with_capacity(layer.out_dim());
        for (row, &bias) in layer.weights.iter().zip(&layer.bias) {
            let mut lo = AffineFn::constant(n, bias);
            let mut up = AffineFn::constant(n, bias);
            let (mut il, mut iu) = (bias, bias);
            for (j, &w) in row.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                let (cl, cu) = concrete[j];
                if w > 0.0 {
                    lo.add_scaled(&lower[j], w);
                    up.add_scaled(&upper[j], w);
                    il += w * cl;
                    iu += w * cu;
                } else {
                    lo.add_scaled(&upper[j], w);
                    up.add_scaled(&lower[j], w);
                    il += w * cu;
                    iu += w * cl;
                }
            }
            let l = lo.min_over(b).max(il);
            let u = up.max_over(b).min(iu);
            let mut iv = (l, u);
            if layer.activation == Activation::Relu {
                if u <= 0.0 {
                    lo = AffineFn::constant(n, 0.0);
                    up = AffineFn::constant(n, 0.0);
                    iv = (0.0, 0.0);
                } else if l < 0.0 {
                    let slope = u / (u - l);
                    let mut chord = up.scale(slope);
                    chord.offset -= slope * l;
                    up = chord;
                    if u < -l {
                        lo = AffineFn::constant(n, 0.0);
                    }
                    iv = (0.0, u);
                }
            }
            next_lo.push(lo);
            next_up.push(up);
            next_iv.push(iv);
        }
        lower = next_lo;
        upper = next_up;
        concrete = next_iv;
    }
    LinearBounds {
        lower,
        upper,
        concrete,
        output_inputs,
    }
}

/// Affine lower bound of the safety margin of `true_label` over `target`:
/// `s_target - s_true` for `MinBest`, `s_true - s_target` for `MaxBest`.
/// Positive everywhere means the target never wins against the true label.
pub fn margin_lower_fn(
    bounds: &LinearBounds,
    true_label: usize,
    target: usize,
    order: ScoreOrder,
) -> AffineFn {
    let (hi, lo) = match order {
        ScoreOrder::MinBest => (target, true_label),
        ScoreOrder::MaxBest => (true_label, target),
    };
    match &bounds.output_inputs {
        Some(o) => o.difference_lower(hi, lo, bounds.lower[hi].coeffs.len()).0,
        None => bounds.lower[hi].sub(&bounds.upper[lo]),
    }
}

/// Certified lower bound of the margin over the box.
pub fn score_gap_bound(
    bounds: &LinearBounds,
    b: &InputBox,
    true_label: usize,
    target: usize,
    order: ScoreOrder,
) -> f64 {
    let affine = margin_lower_fn(bounds, true_label, target, order).min_over(b);
    affine.max(interval_margin(bounds, b, true_label, target, order))
}

/// Margin lower bound from the output intervals alone.
pub fn interval_margin(
    bounds: &LinearBounds,
    b: &InputBox,
    true_label: usize,
    target: usize,
    order: ScoreOrder,
) -> f64 {
    let iv = bounds.intervals(b);
    let (hi, lo) = match order {
        ScoreOrder::MinBest => (target, true_label),
        ScoreOrder::MaxBest => (true_label, target),
    };
    let separate = iv[hi].0 - iv[lo].1;
    match &bounds.output_inputs {
        Some(o) => separate.max(o.difference_lower(hi, lo, b.dim()).1),
        None => separate,
    }
}
