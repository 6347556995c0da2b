//! Layered spiking networks and their exact firing-time semantics.

mod neuron;

pub use neuron::{
    oracle_firing_time, resolve_firing_time, Arrival, ContributionCertificate, FiringTime, CERTIFICATE_TOLERANCE,
    ORACLE_HORIZON_MARGIN,
};

use ndarray::{Array1, Array2, Axis};

use crate::ann::Hyperbox;
use crate::error::{Error, Result};

/// Firing times of the neurons of one layer, in neuron order.
pub type SpikeVector = Vec<FiringTime>;

/// One layer of synapses and the thresholds of the neurons they feed.
///
/// `weights` and `delays` are `fan_in × fan_out`: entry `(u, v)` belongs to
/// the synapse from presynaptic neuron `u` to neuron `v`. Weights carry the
/// excitatory/inhibitory sign. A zero weight means "no synapse".
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    weights: Array2<f64>,
    delays: Array2<f64>,
    thresholds: Array1<f64>,
}

impl Layer {
    pub fn new(weights: Array2<f64>, delays: Array2<f64>, thresholds: Array1<f64>) -> Result<Self> {
        if weights.dim() != delays.dim() {
            return Err(Error::InvalidParameter(format!(
                "weight shape {:?} differs from delay shape {:?}",
                weights.dim(),
                delays.dim()
            )));
        }
        if thresholds.len() != weights.ncols() {
            return Err(Error::DimensionMismatch {
                context: "layer thresholds",
                expected: weights.ncols(),
                found: thresholds.len(),
            });
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidParameter("weights must be finite".into()));
        }
        if delays.iter().any(|d| !(*d >= 0.0 && d.is_finite())) {
            return Err(Error::InvalidParameter("delays must be finite and nonnegative".into()));
        }
        if thresholds.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return Err(Error::InvalidParameter("thresholds must be finite and positive".into()));
        }
        Ok(Layer {
            weights,
            delays,
            thresholds,
        })
    }

    /// Layer with all delays zero.
    pub fn without_delays(weights: Array2<f64>, thresholds: Array1<f64>) -> Result<Self> {
        let delays = Array2::zeros(weights.raw_dim());
        Layer::new(weights, delays, thresholds)
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn delays(&self) -> &Array2<f64> {
        &self.delays
    }

    pub fn thresholds(&self) -> &Array1<f64> {
        &self.thresholds
    }

    pub fn fan_in(&self) -> usize {
        self.weights.nrows()
    }

    pub fn fan_out(&self) -> usize {
        self.weights.ncols()
    }

    /// Arrivals seen by neuron `v` given presynaptic firing times; silent
    /// presynaptic neurons produce no arrival.
    pub fn arrivals(&self, inputs: &[FiringTime], v: usize) -> Vec<Arrival> {
        inputs
            .iter()
            .enumerate()
            .filter_map(|(u, t)| {
                t.finite()
                    .map(|t| Arrival::new(t + self.delays[[u, v]], self.weights[[u, v]]))
            })
            .collect()
    }

    pub fn forward(&self, inputs: &[FiringTime]) -> Result<SpikeVector> {
        if inputs.len() != self.fan_in() {
            return Err(Error::DimensionMismatch {
                context: "layer input",
                expected: self.fan_in(),
                found: inputs.len(),
            });
        }
        (0..self.fan_out())
            .map(|v| {
                let arrivals = self.arrivals(inputs, v);
                Ok(resolve_firing_time(&arrivals, self.thresholds[v])?.firing_time)
            })
            .collect()
    }

    pub(crate) fn remove_neuron(&mut self, v: usize) {
        self.weights.remove_index(Axis(1), v);
        self.delays.remove_index(Axis(1), v);
        self.thresholds.remove_index(Axis(0), v);
    }

    pub(crate) fn remove_input(&mut self, u: usize) {
        self.weights.remove_index(Axis(0), u);
        self.delays.remove_index(Axis(0), u);
    }

    pub(crate) fn set_synapse(&mut self, u: usize, v: usize, weight: f64, delay: f64) {
        self.weights[[u, v]] = weight;
        self.delays[[u, v]] = delay;
    }

    /// Appends a neuron fed by the given `(presynaptic, weight, delay)` synapses.
    pub(crate) fn push_neuron(&mut self, synapses: &[(usize, f64, f64)], threshold: f64) -> Result<()> {
        let fan_in = self.fan_in();
        let mut w = Array1::zeros(fan_in);
        let mut d = Array1::zeros(fan_in);
        for &(u, weight, delay) in synapses {
            w[u] = weight;
            d[u] = delay;
        }
        let mut weights = self.weights.clone();
        let mut delays = self.delays.clone();
        let mut thresholds = self.thresholds.to_vec();
        weights.push_column(w.view()).expect("column length matches fan-in");
        delays.push_column(d.view()).expect("column length matches fan-in");
        thresholds.push(threshold);
        *self = Layer::new(weights, delays, Array1::from(thresholds))?;
        Ok(())
    }

    /// New neuron `k` is old neuron `order[k]`.
    pub(crate) fn permute_neurons(&mut self, order: &[usize]) {
        self.weights = self.weights.select(Axis(1), order);
        self.delays = self.delays.select(Axis(1), order);
        self.thresholds = self.thresholds.select(Axis(0), order);
    }
}

/// A feed-forward spiking network.
///
/// The first layer's presynaptic neurons are the `input_dim` payload inputs
/// followed by one auxiliary input per entry of `aux_input_times`; auxiliary
/// inputs fire at their fixed time regardless of the data. The last
/// `aux_outputs` neurons of the final layer are auxiliary outputs: they exist
/// to drive the auxiliary inputs of a network concatenated after this one and
/// are not part of the realization.
#[derive(Clone, Debug, PartialEq)]
pub struct SpikingNetwork {
    input_dim: usize,
    aux_input_times: Vec<f64>,
    layers: Vec<Layer>,
    aux_outputs: usize,
}

impl SpikingNetwork {
    pub fn new(input_dim: usize, aux_input_times: Vec<f64>, layers: Vec<Layer>) -> Result<Self> {
        SpikingNetwork::with_aux_outputs(input_dim, aux_input_times, layers, 0)
    }

    pub fn with_aux_outputs(
        input_dim: usize,
        aux_input_times: Vec<f64>,
        layers: Vec<Layer>,
        aux_outputs: usize,
    ) -> Result<Self> {
        let net = SpikingNetwork {
            input_dim,
            aux_input_times,
            layers,
            aux_outputs,
        };
        net.validate()?;
        Ok(net)
    }

    fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::InvalidParameter(
                "a spiking network needs at least one layer".into(),
            ));
        }
        if self.aux_input_times.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidParameter("auxiliary input times must be finite".into()));
        }
        let mut width = self.input_dim + self.aux_input_times.len();
        for layer in &self.layers {
            if layer.fan_in() != width {
                return Err(Error::DimensionMismatch {
                    context: "layer fan-in",
                    expected: width,
                    found: layer.fan_in(),
                });
            }
            width = layer.fan_out();
        }
        if self.aux_outputs > width {
            return Err(Error::InvalidParameter(format!(
                "{} auxiliary outputs exceed output width {width}",
                self.aux_outputs
            )));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn aux_input_times(&self) -> &[f64] {
        &self.aux_input_times
    }

    /// Payload plus auxiliary inputs.
    pub fn total_inputs(&self) -> usize {
        self.input_dim + self.aux_input_times.len()
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn aux_outputs(&self) -> usize {
        self.aux_outputs
    }

    /// Width of the final layer, auxiliary outputs included.
    pub fn total_outputs(&self) -> usize {
        self.layers.last().map_or(0, Layer::fan_out)
    }

    pub fn output_dim(&self) -> usize {
        self.total_outputs() - self.aux_outputs
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// All neurons, input and auxiliary neurons included.
    pub fn neuron_count(&self) -> usize {
        self.total_inputs() + self.layers.iter().map(Layer::fan_out).sum::<usize>()
    }

    pub(crate) fn layers_mut(&mut self) -> &mut Vec<Layer> {
        &mut self.layers
    }

    pub(crate) fn set_aux_outputs(&mut self, aux_outputs: usize) -> Result<()> {
        self.aux_outputs = aux_outputs;
        self.validate()
    }

    /// Payload inputs followed by the auxiliary inputs.
    fn presynaptic_times(&self, inputs: &[FiringTime]) -> Result<SpikeVector> {
        if inputs.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                context: "network input",
                expected: self.input_dim,
                found: inputs.len(),
            });
        }
        let mut times = inputs.to_vec();
        times.extend(self.aux_input_times.iter().map(|&t| FiringTime::Finite(t)));
        Ok(times)
    }

    /// Firing times of every layer, starting with the (extended) input layer.
    pub fn trace(&self, inputs: &[FiringTime]) -> Result<Vec<SpikeVector>> {
        let mut trace = vec![self.presynaptic_times(inputs)?];
        for layer in &self.layers {
            let next = layer.forward(trace.last().expect("trace starts non-empty"))?;
            trace.push(next);
        }
        Ok(trace)
    }
}

/// Propagates input spikes through all layers; returns the final layer's
/// firing times, auxiliary outputs included.
pub fn network_forward(net: &SpikingNetwork, inputs: &[FiringTime]) -> Result<SpikeVector> {
    let mut times = net.presynaptic_times(inputs)?;
    for layer in net.layers() {
        times = layer.forward(&times)?;
    }
    Ok(times)
}

/// Reference times and input domain of the temporal code: a value `x` is
/// sent as a spike at `t_in_ref + x` and read back as `t - t_out_ref`.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodingSpec {
    pub t_in_ref: f64,
    pub t_out_ref: f64,
    pub domain: Hyperbox,
}

impl EncodingSpec {
    pub fn new(t_in_ref: f64, t_out_ref: f64, domain: Hyperbox) -> Result<Self> {
        if !(t_in_ref.is_finite() && t_out_ref.is_finite()) {
            return Err(Error::InvalidParameter("reference times must be finite".into()));
        }
        if !(t_out_ref > t_in_ref) {
            return Err(Error::InvalidParameter(format!(
                "output reference {t_out_ref} must exceed input reference {t_in_ref}"
            )));
        }
        Ok(EncodingSpec {
            t_in_ref,
            t_out_ref,
            domain,
        })
    }

    pub fn encode(&self, x: &[f64]) -> Vec<FiringTime> {
        x.iter().map(|&xi| FiringTime::Finite(self.t_in_ref + xi)).collect()
    }
}

/// The input-output map computed by `net` under the encoding `enc`.
pub fn realize(net: &SpikingNetwork, enc: &EncodingSpec, x: &[f64]) -> Result<Vec<f64>> {
    if enc.domain.dim() != net.input_dim() {
        return Err(Error::DimensionMismatch {
            context: "encoding domain",
            expected: net.input_dim(),
            found: enc.domain.dim(),
        });
    }
    enc.domain.check_contains(x)?;
    let out = network_forward(net, &enc.encode(x))?;
    out[..net.output_dim()]
        .iter()
        .enumerate()
        .map(|(neuron, t)| match t {
            FiringTime::Finite(t) => Ok(t - enc.t_out_ref),
            FiringTime::Never => Err(Error::NoFire { neuron }),
        })
        .collect()
}
