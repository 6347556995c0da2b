//! Feed-forward ReLU networks and axis-aligned boxes.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// Axis-aligned box `[lo_1, hi_1] × … × [lo_d, hi_d]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Hyperbox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Hyperbox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::InvalidDomain(format!(
                "{} lower bounds but {} upper bounds",
                lo.len(),
                hi.len()
            )));
        }
        if let Some(i) = (0..lo.len()).find(|&i| !(lo[i] <= hi[i]) || !lo[i].is_finite() || !hi[i].is_finite()) {
            return Err(Error::InvalidDomain(format!(
                "dimension {i}: [{}, {}] is not a finite nonempty interval",
                lo[i], hi[i]
            )));
        }
        Ok(Hyperbox { lo, hi })
    }

    /// `[lo, hi]^dim`. Panics if `lo > hi`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Self {
        Hyperbox::new(vec![lo; dim], vec![hi; dim]).expect("cube bounds must be ordered")
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    /// `max_i max(|lo_i|, |hi_i|)`: the radius of the smallest centred cube
    /// containing the box.
    pub fn radius(&self) -> f64 {
        self.lo.iter().chain(&self.hi).fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Euclidean length of the diagonal.
    pub fn diameter(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| (h - l) * (h - l))
            .sum::<f64>()
            .sqrt()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| 0.5 * (l + h)).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().enumerate().all(|(i, v)| self.lo[i] <= *v && *v <= self.hi[i])
    }

    pub fn check_contains(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "domain point",
                expected: self.dim(),
                found: x.len(),
            });
        }
        for (index, &value) in x.iter().enumerate() {
            if !(self.lo[index] <= value && value <= self.hi[index]) {
                return Err(Error::DomainViolation {
                    index,
                    value,
                    lo: self.lo[index],
                    hi: self.hi[index],
                });
            }
        }
        Ok(())
    }

    /// Same box translated by `offset` in every coordinate.
    pub fn shifted(&self, offset: f64) -> Hyperbox {
        Hyperbox {
            lo: self.lo.iter().map(|v| v + offset).collect(),
            hi: self.hi.iter().map(|v| v + offset).collect(),
        }
    }

    /// Box scaled about its centre by `factor`.
    pub fn scaled(&self, factor: f64) -> Hyperbox {
        let c = self.center();
        Hyperbox {
            lo: self.lo.iter().zip(&c).map(|(l, c)| c + factor * (l - c)).collect(),
            hi: self.hi.iter().zip(&c).map(|(h, c)| c + factor * (h - c)).collect(),
        }
    }

    /// Regular grid with `n` points per axis including both endpoints
    /// (the centre when `n == 1`), in row-major order.
    pub fn grid(&self, n: usize) -> Vec<Vec<f64>> {
        let axes: Vec<Vec<f64>> = (0..self.dim())
            .map(|i| {
                if n <= 1 {
                    vec![0.5 * (self.lo[i] + self.hi[i])]
                } else {
                    (0..n)
                        .map(|k| self.lo[i] + (self.hi[i] - self.lo[i]) * k as f64 / (n - 1) as f64)
                        .collect()
                }
            })
            .collect();
        let mut points = vec![Vec::with_capacity(self.dim())];
        for axis in &axes {
            points = points
                .into_iter()
                .flat_map(|p| {
                    axis.iter().map(move |&v| {
                        let mut q = p.clone();
                        q.push(v);
                        q
                    })
                })
                .collect();
        }
        points
    }
}

/// Affine layer `x ↦ A x + b` with `A` stored `fan_out × fan_in`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineLayer {
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
}

impl AffineLayer {
    pub fn new(weights: Array2<f64>, biases: Array1<f64>) -> Result<Self> {
        if weights.nrows() != biases.len() {
            return Err(Error::DimensionMismatch {
                context: "affine layer bias",
                expected: weights.nrows(),
                found: biases.len(),
            });
        }
        if weights.iter().chain(biases.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("affine parameters must be finite".into()));
        }
        Ok(AffineLayer { weights, biases })
    }

    pub fn fan_in(&self) -> usize {
        self.weights.ncols()
    }

    pub fn fan_out(&self) -> usize {
        self.weights.nrows()
    }

    pub fn apply(&self, x: &Array1<f64>) -> Array1<f64> {
        self.weights.dot(x) + &self.biases
    }

    /// Largest absolute weight.
    pub fn weight_bound(&self) -> f64 {
        self.weights.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Largest absolute bias.
    pub fn bias_bound(&self) -> f64 {
        self.biases.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// ReLU network: every layer but the last is followed by `max(0, ·)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReluNetwork {
    layers: Vec<AffineLayer>,
}

impl ReluNetwork {
    pub fn new(layers: Vec<AffineLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidParameter(
                "a ReLU network needs at least one layer".into(),
            ));
        }
        for pair in layers.windows(2) {
            if pair[1].fan_in() != pair[0].fan_out() {
                return Err(Error::DimensionMismatch {
                    context: "ReLU layer chaining",
                    expected: pair[0].fan_out(),
                    found: pair[1].fan_in(),
                });
            }
        }
        Ok(ReluNetwork { layers })
    }

    pub fn layers(&self) -> &[AffineLayer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].fan_out()
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// Input, hidden and output units.
    pub fn neuron_count(&self) -> usize {
        self.input_dim() + self.layers.iter().map(AffineLayer::fan_out).sum::<usize>()
    }

    /// `Some(d)` when the input and every hidden layer have width `d`.
    pub fn fixed_width(&self) -> Option<usize> {
        let d = self.input_dim();
        self.layers[..self.layers.len() - 1]
            .iter()
            .all(|l| l.fan_out() == d)
            .then_some(d)
    }
}

pub fn ann_forward(net: &ReluNetwork, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != net.input_dim() {
        return Err(Error::DimensionMismatch {
            context: "ReLU network input",
            expected: net.input_dim(),
            found: x.len(),
        });
    }
    let mut y = Array1::from(x.to_vec());
    let last = net.depth() - 1;
    for (l, layer) in net.layers().iter().enumerate() {
        y = layer.apply(&y);
        if l < last {
            y.mapv_inplace(|v| v.max(0.0));
        }
    }
    Ok(y.to_vec())
}

/// Conservative symmetric bound on `A x + b` over `domain`.
///
/// Row `i` is bounded by `±(n · max_j |A_ij| · r + |b_i|)` where `n` is the
/// fan-in and `r` the domain radius. A ReLU applied afterwards maps the
/// interval to `[0, hi]`; clipping is left to the caller.
pub fn layer_range_bound(weights: &Array2<f64>, biases: &Array1<f64>, domain: &Hyperbox) -> Hyperbox {
    let fan_in = weights.ncols() as f64;
    let r = domain.radius();
    let hi: Vec<f64> = weights
        .rows()
        .into_iter()
        .zip(biases.iter())
        .map(|(row, b)| {
            let row_max = row.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            fan_in * row_max * r + b.abs()
        })
        .collect();
    let lo = hi.iter().map(|v| -v).collect();
    Hyperbox { lo, hi }
}
