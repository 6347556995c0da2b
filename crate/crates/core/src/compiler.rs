//! Lowering of ReLU networks to spiking networks that emulate them exactly.
//!
//! Every hidden ANN layer becomes a depth-3 stage: one affine neuron per row
//! followed by a two-layer ReLU gadget. The final ANN layer becomes a single
//! affine layer. Stages are chained with [`concatenate`], the output
//! reference time of one stage serving as the input reference of the next.
//! All synaptic delays are zero.

use ndarray::{array, Array1, Array2};

use crate::ann::{AffineLayer, Hyperbox, ReluNetwork};
use crate::calculus::{concatenate, parallelize_all, RangeCheck, TypedSnn};
use crate::error::{Error, Result};
use crate::snn::{EncodingSpec, Layer, SpikingNetwork};

/// Sizes and timings of a compiled network.
#[derive(Clone, Debug, PartialEq)]
pub struct CompileReport {
    pub neuron_count: usize,
    pub layer_count: usize,
    /// Closed-form counts; only available for fixed-width, scalar-output sources.
    pub predicted_neurons: Option<usize>,
    pub predicted_layers: Option<usize>,
    /// `(t_in_ref, t_out_ref)` of the stage compiled from each ANN layer.
    pub per_stage_refs: Vec<(f64, f64)>,
    /// Input domain assumed by each stage.
    pub per_layer_domains: Vec<Hyperbox>,
}

/// Parameters an affine gadget's threshold is sized from.
#[derive(Clone, Copy, Debug)]
struct Sizing {
    fan_in: usize,
    /// Bound on the absolute weights.
    weight_bound: f64,
    /// Bound on the absolute bias.
    bias_bound: f64,
    /// Bound on the absolute input values.
    radius: f64,
}

impl Sizing {
    fn new(fan_in: usize, weight_bound: f64, bias_bound: f64, domain: &Hyperbox) -> Self {
        // A degenerate domain still needs a positive threshold.
        let radius = domain.radius();
        let radius = if radius > 0.0 { radius } else { 1.0 };
        Sizing {
            fan_in,
            weight_bound,
            bias_bound,
            radius,
        }
    }

    /// Delay between the input reference and the affine output reference.
    fn latency(&self) -> f64 {
        (1.0 + self.fan_in as f64 * self.weight_bound) * self.radius + self.bias_bound
    }

    /// Bound on `|c·x + s|` over the domain.
    fn output_bound(&self) -> f64 {
        self.fan_in as f64 * self.weight_bound * self.radius + self.bias_bound
    }
}

fn single_layer_net(input_dim: usize, t_in_ref: f64, layer: Layer) -> Result<SpikingNetwork> {
    SpikingNetwork::new(input_dim, vec![t_in_ref], vec![layer])
}

/// Two-layer network realizing `max(0, x)` on `[lo, hi]` with `lo < 0 < hi`.
///
/// Inputs are the payload and an auxiliary neuron firing at `t_in_ref`. The
/// threshold is `hi + 1`, the output reference `t_in_ref + 2 (hi + 1)`.
pub fn build_relu_gadget(lo: f64, hi: f64, t_in_ref: f64) -> Result<TypedSnn> {
    if !(lo < 0.0 && 0.0 < hi) {
        return Err(Error::InvalidDomain(format!(
            "ReLU gadget needs lo < 0 < hi, got [{lo}, {hi}]"
        )));
    }
    let theta = hi + 1.0;
    let first = Layer::without_delays(array![[-0.5, 0.0], [1.0, 1.0]], array![theta, theta])?;
    let second = Layer::without_delays(array![[-0.5], [1.0]], array![theta])?;
    let net = SpikingNetwork::new(1, vec![t_in_ref], vec![first, second])?;
    let domain = Hyperbox::new(vec![lo], vec![hi])?;
    TypedSnn::new(net, EncodingSpec::new(t_in_ref, t_in_ref + 2.0 * theta, domain)?)
}

fn affine_layer_sized(c: &[f64], s: f64, sizing: &Sizing) -> Result<Layer> {
    let d = c.len();
    let mut weights = Array2::zeros((d + 1, 1));
    for (i, &ci) in c.iter().enumerate() {
        weights[[i, 0]] = ci;
    }
    weights[[d, 0]] = 1.0 - c.iter().sum::<f64>();
    let theta = (1.0 + d as f64 * sizing.weight_bound) * sizing.radius + s + sizing.bias_bound;
    Layer::without_delays(weights, array![theta])
}

fn affine_gadget_sized(c: &[f64], s: f64, domain: &Hyperbox, t_in_ref: f64, sizing: &Sizing) -> Result<TypedSnn> {
    if c.len() != domain.dim() {
        return Err(Error::DimensionMismatch {
            context: "affine gadget coefficients",
            expected: domain.dim(),
            found: c.len(),
        });
    }
    let net = single_layer_net(c.len(), t_in_ref, affine_layer_sized(c, s, sizing)?)?;
    let enc = EncodingSpec::new(t_in_ref, t_in_ref + sizing.latency(), domain.clone())?;
    TypedSnn::new(net, enc)
}

fn vector_bound(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// One spiking neuron realizing `c·x + s` on `domain`.
///
/// The auxiliary input fires at `t_in_ref` and carries weight `1 - Σc`, so
/// the weights sum to one; the threshold is large enough that every input
/// has arrived before the neuron fires.
pub fn build_affine_gadget(c: &[f64], s: f64, domain: &Hyperbox, t_in_ref: f64) -> Result<TypedSnn> {
    let sizing = Sizing::new(c.len(), vector_bound(c), s.abs(), domain);
    affine_gadget_sized(c, s, domain, t_in_ref, &sizing)
}

fn neuron_gadget_sized(c: &[f64], s: f64, domain: &Hyperbox, t_in_ref: f64, sizing: &Sizing) -> Result<TypedSnn> {
    let mut affine = affine_gadget_sized(c, s, domain, t_in_ref, sizing)?;
    let d = c.len();
    let latency = sizing.latency();
    let layer = &mut affine.net.layers_mut()[0];
    layer.push_neuron(&[(d, 1.0, 0.0)], latency)?;
    affine.net.set_aux_outputs(1)?;

    let bound = sizing.output_bound();
    let bound = if bound > 0.0 { bound } else { 1.0 };
    let relu = build_relu_gadget(-bound, bound, affine.t_out_ref())?;
    concatenate(&relu, &affine, RangeCheck::Skip)
}

/// Three-layer network realizing `max(0, c·x + s)` with `d + 6` neurons.
pub fn build_neuron_gadget(c: &[f64], s: f64, domain: &Hyperbox, t_in_ref: f64) -> Result<TypedSnn> {
    let sizing = Sizing::new(c.len(), vector_bound(c), s.abs(), domain);
    neuron_gadget_sized(c, s, domain, t_in_ref, &sizing)
}

/// Folds the outgoing synapses of neuron `remove` into neuron `keep` (same
/// layer) and deletes `remove`. Only sound when both fire at the same time.
fn merge_duplicate(net: &mut SpikingNetwork, layer: usize, keep: usize, remove: usize) {
    let layers = net.layers_mut();
    let next = &mut layers[layer + 1];
    for v in 0..next.fan_out() {
        let w = next.weights()[[remove, v]];
        if w != 0.0 {
            let kept = next.weights()[[keep, v]];
            debug_assert!(kept == 0.0 || next.delays()[[keep, v]] == next.delays()[[remove, v]]);
            let delay = next.delays()[[remove, v]];
            next.set_synapse(keep, v, kept + w, delay);
        }
    }
    next.remove_input(remove);
    layers[layer].remove_neuron(remove);
}

fn layer_gadget(
    a: &Array2<f64>,
    b: &Array1<f64>,
    domain: &Hyperbox,
    t_in_ref: f64,
    dedup: bool,
) -> Result<(TypedSnn, f64)> {
    if a.nrows() != b.len() || a.ncols() != domain.dim() {
        return Err(Error::DimensionMismatch {
            context: "layer gadget shape",
            expected: domain.dim(),
            found: a.ncols(),
        });
    }
    let weight_bound = a.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let sizing = Sizing::new(a.ncols(), weight_bound, vector_bound(&b.to_vec()), domain);
    let gadgets = a
        .rows()
        .into_iter()
        .zip(b.iter())
        .map(|(row, &s)| neuron_gadget_sized(&row.to_vec(), s, domain, t_in_ref, &sizing))
        .collect::<Result<Vec<_>>>()?;
    let mut stage = parallelize_all(&gadgets)?;
    if dedup {
        // Copies 2.. repeat copy 1's auxiliary neurons in layers 1 and 2,
        // which sit at odd positions.
        for i in (1..a.nrows()).rev() {
            merge_duplicate(&mut stage.net, 0, 1, 2 * i + 1);
            merge_duplicate(&mut stage.net, 1, 1, 2 * i + 1);
        }
    }
    let bound = sizing.output_bound();
    Ok((stage, if bound > 0.0 { bound } else { 1.0 }))
}

/// Depth-3 network realizing `max(0, A x + b)` row-wise; `4d + 3` neurons for
/// square `A` of size `d`.
///
/// Row gadgets share their sizing and hence their reference times, so the
/// auxiliary neurons of all rows fire together and only one copy is kept.
pub fn build_layer_gadget(a: &Array2<f64>, b: &Array1<f64>, domain: &Hyperbox, t_in_ref: f64) -> Result<TypedSnn> {
    Ok(layer_gadget(a, b, domain, t_in_ref, true)?.0)
}

fn final_stage(layer: &AffineLayer, domain: &Hyperbox, t_in_ref: f64) -> Result<TypedSnn> {
    let sizing = Sizing::new(layer.fan_in(), layer.weight_bound(), layer.bias_bound(), domain);
    let rows = layer
        .weights
        .rows()
        .into_iter()
        .zip(layer.biases.iter())
        .map(|(row, &s)| affine_gadget_sized(&row.to_vec(), s, domain, t_in_ref, &sizing))
        .collect::<Result<Vec<_>>>()?;
    parallelize_all(&rows)
}

/// Depth-3 stage for a hidden ANN layer: the layer gadget plus an auxiliary
/// output neuron firing at the stage's output reference time, which drives
/// the auxiliary input of whatever stage follows. Returns the stage and the
/// bound `B` with `max(0, A x + b) ∈ [0, B]` on `domain`.
pub fn build_hidden_stage(layer: &AffineLayer, domain: &Hyperbox, t_in_ref: f64) -> Result<(TypedSnn, f64)> {
    let (mut stage, bound) = layer_gadget(&layer.weights, &layer.biases, domain, t_in_ref, true)?;
    let relu_theta = bound + 1.0;
    // Neuron 1 of the second layer is the shared auxiliary that fires at the
    // ReLU gadgets' input reference plus one threshold.
    stage.net.layers_mut()[2].push_neuron(&[(1, 1.0, 0.0)], relu_theta)?;
    stage.net.set_aux_outputs(1)?;
    Ok((stage, bound))
}

/// Compiles `ann` into a spiking network realizing it on `domain`, with
/// inputs referenced to `t_in_ref`.
///
/// Fails with [`Error::ComplexityMismatch`] if a fixed-width, scalar-output
/// network does not come out at `3L(d+1) - (2d+1)` neurons in `3L - 2` layers.
pub fn compile_ann(ann: &ReluNetwork, domain: &Hyperbox, t_in_ref: f64) -> Result<(TypedSnn, CompileReport)> {
    if domain.dim() != ann.input_dim() {
        return Err(Error::DimensionMismatch {
            context: "compile domain",
            expected: ann.input_dim(),
            found: domain.dim(),
        });
    }
    let depth = ann.depth();
    let mut stage_domain = domain.clone();
    let mut t_in = t_in_ref;
    let mut compiled: Option<TypedSnn> = None;
    let mut per_stage_refs = Vec::with_capacity(depth);
    let mut per_layer_domains = Vec::with_capacity(depth);

    for (l, layer) in ann.layers().iter().enumerate() {
        let (stage, next_domain) = if l + 1 < depth {
            let (stage, bound) = build_hidden_stage(layer, &stage_domain, t_in)?;
            (stage, Some(Hyperbox::cube(layer.fan_out(), 0.0, bound)))
        } else {
            (final_stage(layer, &stage_domain, t_in)?, None)
        };
        per_stage_refs.push((stage.t_in_ref(), stage.t_out_ref()));
        per_layer_domains.push(stage_domain.clone());
        t_in = stage.t_out_ref();
        compiled = Some(match compiled {
            None => stage,
            Some(inner) => concatenate(&stage, &inner, RangeCheck::Skip)?,
        });
        if let Some(next) = next_domain {
            stage_domain = next;
        }
    }
    let compiled = compiled.expect("ReLU networks have at least one layer");

    let (predicted_neurons, predicted_layers) = match (ann.fixed_width(), ann.output_dim()) {
        (Some(d), 1) => (
            Some(ann.neuron_count() + depth * (2 * d + 3) - (2 * d + 2)),
            Some(3 * depth - 2),
        ),
        _ => (None, None),
    };
    let report = CompileReport {
        neuron_count: compiled.neuron_count(),
        layer_count: compiled.depth(),
        predicted_neurons,
        predicted_layers,
        per_stage_refs,
        per_layer_domains,
    };
    if let Some(predicted) = report.predicted_neurons {
        if predicted != report.neuron_count {
            return Err(Error::ComplexityMismatch {
                what: "neurons",
                actual: report.neuron_count,
                predicted,
            });
        }
    }
    if let Some(predicted) = report.predicted_layers {
        if predicted != report.layer_count {
            return Err(Error::ComplexityMismatch {
                what: "layers",
                actual: report.layer_count,
                predicted,
            });
        }
    }
    Ok((compiled, report))
}

/// One neuron with a payload and an auxiliary input, both of weight 1.
///
/// Realizes the ramp `x` for `x ≤ -θ`, `(x - θ)/2` on `[-θ, θ]` and `0` for
/// `x ≥ θ`, with 3 neurons in 1 layer.
pub fn build_ramp_neuron(theta: f64, domain: &Hyperbox, t_in_ref: f64) -> Result<TypedSnn> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "ramp threshold must be positive, got {theta}"
        )));
    }
    let layer = Layer::without_delays(array![[1.0], [1.0]], array![theta])?;
    let net = single_layer_net(1, t_in_ref, layer)?;
    TypedSnn::new(net, EncodingSpec::new(t_in_ref, t_in_ref + theta, domain.clone())?)
}

/// The smallest ReLU network for the same ramp: 4 units in 2 layers.
pub fn ramp_relu_network(theta: f64) -> Result<ReluNetwork> {
    ReluNetwork::new(vec![
        AffineLayer::new(array![[-1.0], [-1.0]], array![-theta, theta])?,
        AffineLayer::new(array![[-0.5, -0.5]], array![0.0])?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ann::ann_forward;
    use crate::snn::{network_forward, resolve_firing_time};

    fn relu(x: f64) -> f64 {
        x.max(0.0)
    }

    fn max_grid_error(snn: &TypedSnn, f: impl Fn(&[f64]) -> Vec<f64>, n: usize) -> f64 {
        snn.domain()
            .grid(n)
            .iter()
            .map(|x| {
                let got = snn.realize(x).unwrap();
                got.iter().zip(f(x)).fold(0.0_f64, |m, (g, e)| m.max((g - e).abs()))
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn relu_gadget_values() {
        let g = build_relu_gadget(-1.0, 1.0, 0.0).unwrap();
        assert_eq!(g.t_out_ref(), 4.0);
        assert_eq!(g.realize(&[0.5]).unwrap(), vec![0.5]);
        assert_eq!(g.realize(&[-0.7]).unwrap(), vec![0.0]);
        assert_eq!(g.realize(&[0.0]).unwrap(), vec![0.0]);
        assert!(matches!(build_relu_gadget(0.0, 1.0, 0.0), Err(Error::InvalidDomain(_))));
    }

    #[test]
    fn affine_gadget_example() {
        let g = build_affine_gadget(&[2.0, -1.0], 3.0, &Hyperbox::cube(2, -1.0, 1.0), 0.0).unwrap();
        assert_eq!(g.net.layers()[0].thresholds()[0], 11.0);
        assert_eq!(g.t_out_ref(), 8.0);
        assert_eq!(g.realize(&[1.0, -1.0]).unwrap(), vec![6.0]);
        assert!(max_grid_error(&g, |x| vec![2.0 * x[0] - x[1] + 3.0], 11) < 1e-12);
    }

    #[test]
    fn zero_affine_map_is_constant() {
        let g = build_affine_gadget(&[0.0, 0.0], 0.0, &Hyperbox::cube(2, -2.0, 2.0), 1.0).unwrap();
        assert!(max_grid_error(&g, |_| vec![0.0], 5) < 1e-12);
    }

    #[test]
    fn affine_gadget_uses_every_input() {
        let domain = Hyperbox::cube(3, -2.0, 2.0);
        let c = [0.7, -1.3, 0.2];
        let g = build_affine_gadget(&c, -0.4, &domain, 0.5).unwrap();
        let layer = &g.net.layers()[0];
        for x in domain.grid(4) {
            let mut times = g.enc.encode(&x);
            times.push(crate::snn::FiringTime::Finite(0.5));
            let cert = resolve_firing_time(&layer.arrivals(&times, 0), layer.thresholds()[0]).unwrap();
            assert_eq!(cert.contributing.len(), 4, "at {x:?}");
        }
    }

    #[test]
    fn neuron_gadget_counts_and_values() {
        let domain = Hyperbox::cube(2, -1.0, 1.0);
        let g = build_neuron_gadget(&[2.0, -1.0], 3.0, &domain, 0.0).unwrap();
        assert_eq!(g.neuron_count(), 8);
        assert_eq!(g.depth(), 3);
        assert!(max_grid_error(&g, |x| vec![relu(2.0 * x[0] - x[1] + 3.0)], 11) < 1e-9);
        let zero = build_neuron_gadget(&[0.0, 0.0], 0.0, &domain, 0.0).unwrap();
        assert!(max_grid_error(&zero, |_| vec![0.0], 5) < 1e-12);
    }

    #[test]
    fn layer_gadget_counts_and_values() {
        let domain = Hyperbox::cube(2, -1.0, 1.0);
        let g = build_layer_gadget(&Array2::eye(2), &Array1::zeros(2), &domain, 0.0).unwrap();
        assert_eq!(g.neuron_count(), 11);
        assert_eq!(g.depth(), 3);
        assert!(max_grid_error(&g, |x| x.iter().map(|v| relu(*v)).collect(), 11) < 1e-9);
    }

    #[test]
    fn dedup_preserves_realization() {
        let domain = Hyperbox::cube(3, -1.0, 1.0);
        let a = array![[0.5, -0.2, 0.9], [-1.0, 0.3, 0.1], [0.0, 0.8, -0.6]];
        let b = array![0.1, -0.3, 0.2];
        let (full, _) = layer_gadget(&a, &b, &domain, 0.0, false).unwrap();
        let (merged, _) = layer_gadget(&a, &b, &domain, 0.0, true).unwrap();
        assert_eq!(full.neuron_count() - merged.neuron_count(), 4);
        assert_eq!(merged.neuron_count(), 4 * 3 + 3);
        for x in domain.grid(5) {
            let lhs = network_forward(&full.net, &full.enc.encode(&x)).unwrap();
            let rhs = network_forward(&merged.net, &merged.enc.encode(&x)).unwrap();
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn two_layer_compile_counts() {
        let ann = ReluNetwork::new(vec![
            AffineLayer::new(array![[0.5, -0.25], [1.0, 0.75]], array![0.1, -0.2]).unwrap(),
            AffineLayer::new(array![[1.0, -1.0]], array![0.3]).unwrap(),
        ])
        .unwrap();
        let domain = Hyperbox::cube(2, -1.0, 1.0);
        let (snn, report) = compile_ann(&ann, &domain, 0.0).unwrap();
        assert_eq!((report.neuron_count, report.layer_count), (13, 4));
        assert_eq!(report.predicted_neurons, Some(13));
        assert_eq!(report.per_stage_refs[0].1, report.per_stage_refs[1].0);
        assert!(max_grid_error(&snn, |x| ann_forward(&ann, x).unwrap(), 11) < 1e-9);
    }

    #[test]
    fn affine_only_compile_is_one_layer() {
        let ann = ReluNetwork::new(vec![AffineLayer::new(
            array![[1.0, 2.0], [0.0, -1.0]],
            array![0.0, 1.0],
        )
        .unwrap()])
        .unwrap();
        let domain = Hyperbox::cube(2, -1.0, 1.0);
        let (snn, report) = compile_ann(&ann, &domain, 0.0).unwrap();
        assert_eq!(snn.depth(), 1);
        assert_eq!(report.predicted_neurons, None);
        assert!(max_grid_error(&snn, |x| ann_forward(&ann, x).unwrap(), 7) < 1e-9);
    }

    #[test]
    fn ramp_network_compiles() {
        let ann = ramp_relu_network(1.0).unwrap();
        let (snn, report) = compile_ann(&ann, &Hyperbox::cube(1, -3.0, 3.0), 0.0).unwrap();
        assert_eq!(report.predicted_neurons, None);
        for (x, y) in [(-2.0, -2.0), (0.0, -0.5), (2.0, 0.0)] {
            assert!((snn.realize(&[x]).unwrap()[0] - y).abs() < 1e-9);
        }
    }

    #[test]
    fn ramp_neuron_matches_relu_network() {
        let domain = Hyperbox::cube(1, -3.0, 3.0);
        let snn = build_ramp_neuron(1.0, &domain, 0.0).unwrap();
        let ann = ramp_relu_network(1.0).unwrap();
        assert_eq!((snn.neuron_count(), snn.depth()), (3, 1));
        assert_eq!((ann.neuron_count(), ann.depth()), (4, 2));
        assert!(max_grid_error(&snn, |x| ann_forward(&ann, x).unwrap(), 201) < 1e-12);
        assert!(build_ramp_neuron(0.0, &domain, 0.0).is_err());
    }
}
