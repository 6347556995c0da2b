//! Composition of spiking networks that share the temporal code.
//!
//! Networks are typed by their [`EncodingSpec`]: reference times act as the
//! calling convention, so two networks compose exactly when the output
//! reference of one equals the input reference of the next.

use ndarray::{concatenate as stack, s, Array1, Array2, Axis};

use crate::ann::Hyperbox;
use crate::error::{Error, Result};
use crate::snn::{network_forward, realize, EncodingSpec, FiringTime, Layer, SpikingNetwork};

/// Number of sample points for the empirical range-containment check.
pub const RANGE_CHECK_SAMPLES: usize = 1000;

/// Absolute slack allowed when comparing realized values against a domain.
pub const RANGE_CHECK_TOLERANCE: f64 = 1e-9;

/// What [`concatenate`] does about the requirement that the inner network
/// maps its domain into the outer network's domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RangeCheck {
    Skip,
    Warn,
    Error,
}

/// A spiking network together with the encoding it realizes a function under.
#[derive(Clone, Debug, PartialEq)]
pub struct TypedSnn {
    pub net: SpikingNetwork,
    pub enc: EncodingSpec,
}

impl TypedSnn {
    pub fn new(net: SpikingNetwork, enc: EncodingSpec) -> Result<Self> {
        if enc.domain.dim() != net.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "encoding domain",
                expected: net.input_dim(),
                found: enc.domain.dim(),
            });
        }
        Ok(TypedSnn { net, enc })
    }

    pub fn realize(&self, x: &[f64]) -> Result<Vec<f64>> {
        realize(&self.net, &self.enc, x)
    }

    pub fn neuron_count(&self) -> usize {
        self.net.neuron_count()
    }

    pub fn depth(&self) -> usize {
        self.net.depth()
    }

    pub fn t_in_ref(&self) -> f64 {
        self.enc.t_in_ref
    }

    pub fn t_out_ref(&self) -> f64 {
        self.enc.t_out_ref
    }

    pub fn domain(&self) -> &Hyperbox {
        &self.enc.domain
    }
}

fn same_time(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

/// Deterministic space-filling sample of `n` points: the box corners
/// (when there are few enough) followed by a Kronecker sequence.
pub fn sample_points(domain: &Hyperbox, n: usize) -> Vec<Vec<f64>> {
    let d = domain.dim();
    let mut points = Vec::with_capacity(n);
    if d < 10 && (1usize << d) <= n / 2 {
        points.extend(domain.grid(2));
    }
    let steps: Vec<f64> = primes(d).into_iter().map(|p| (p as f64).sqrt().fract()).collect();
    let mut k = 1usize;
    while points.len() < n {
        let p = (0..d)
            .map(|i| {
                let u = (k as f64 * steps[i]).fract();
                domain.lo()[i] + u * (domain.hi()[i] - domain.lo()[i])
            })
            .collect();
        points.push(p);
        k += 1;
    }
    points
}

fn primes(count: usize) -> Vec<u64> {
    let mut primes = Vec::with_capacity(count);
    let mut candidate = 2u64;
    while primes.len() < count {
        if primes
            .iter()
            .take_while(|&&p| p * p <= candidate)
            .all(|&p| !candidate.is_multiple_of(p))
        {
            primes.push(candidate);
        }
        candidate += 1;
    }
    primes
}

fn check_range(outer: &TypedSnn, inner: &TypedSnn) -> Result<()> {
    let payload = inner.net.output_dim();
    for x in sample_points(inner.domain(), RANGE_CHECK_SAMPLES) {
        let times = network_forward(&inner.net, &inner.enc.encode(&x))?;
        for (k, t) in times.iter().enumerate() {
            let t = match t {
                FiringTime::Finite(t) => *t,
                FiringTime::Never => {
                    return Err(Error::RangeViolation(format!("inner output {k} never fires at {x:?}")));
                }
            };
            if k < payload {
                let y = t - inner.t_out_ref();
                let (lo, hi) = (outer.domain().lo()[k], outer.domain().hi()[k]);
                if y < lo - RANGE_CHECK_TOLERANCE || y > hi + RANGE_CHECK_TOLERANCE {
                    return Err(Error::RangeViolation(format!(
                        "inner output {k} = {y} at {x:?} leaves the outer domain [{lo}, {hi}]"
                    )));
                }
            } else {
                let expected = outer.net.aux_input_times()[k - payload];
                if (t - expected).abs() > RANGE_CHECK_TOLERANCE {
                    return Err(Error::RangeViolation(format!(
                        "auxiliary output {k} fires at {t}, the outer network expects {expected}"
                    )));
                }
            }
        }
    }
    Ok(())
}

/// `outer • inner`: run `inner`, feed its output spikes into `outer`.
///
/// The inner network's auxiliary outputs drive the outer network's auxiliary
/// inputs position by position. The result has
/// `N(outer) + N(inner) - (inputs of outer)` neurons.
pub fn concatenate(outer: &TypedSnn, inner: &TypedSnn, check: RangeCheck) -> Result<TypedSnn> {
    if inner.net.total_outputs() != outer.net.total_inputs() {
        return Err(Error::DimensionMismatch {
            context: "concatenation interface",
            expected: outer.net.total_inputs(),
            found: inner.net.total_outputs(),
        });
    }
    if inner.net.aux_outputs() != outer.net.aux_input_times().len() {
        return Err(Error::IncompatibleNetworks(format!(
            "inner network has {} auxiliary outputs, outer network has {} auxiliary inputs",
            inner.net.aux_outputs(),
            outer.net.aux_input_times().len()
        )));
    }
    if !same_time(inner.t_out_ref(), outer.t_in_ref()) {
        return Err(Error::ReferenceTimeMismatch {
            inner_out: inner.t_out_ref(),
            outer_in: outer.t_in_ref(),
        });
    }
    match check {
        RangeCheck::Skip => {}
        RangeCheck::Error => check_range(outer, inner)?,
        RangeCheck::Warn => {
            if let Err(e) = check_range(outer, inner) {
                log::warn!("concatenation: {e}");
            }
        }
    }
    let mut layers = inner.net.layers().to_vec();
    layers.extend_from_slice(outer.net.layers());
    let net = SpikingNetwork::with_aux_outputs(
        inner.net.input_dim(),
        inner.net.aux_input_times().to_vec(),
        layers,
        outer.net.aux_outputs(),
    )?;
    let enc = EncodingSpec::new(inner.t_in_ref(), outer.t_out_ref(), inner.domain().clone())?;
    TypedSnn::new(net, enc)
}

fn block_diagonal(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    let (ra, ca) = a.dim();
    let (rb, cb) = b.dim();
    let mut out = Array2::zeros((ra + rb, ca + cb));
    out.slice_mut(s![..ra, ..ca]).assign(a);
    out.slice_mut(s![ra.., ca..]).assign(b);
    out
}

fn side_by_side(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    stack(Axis(1), &[a.view(), b.view()]).expect("equal row counts")
}

fn joined(a: &Array1<f64>, b: &Array1<f64>) -> Array1<f64> {
    stack(Axis(0), &[a.view(), b.view()]).expect("vectors concatenate")
}

/// `P(a, b)`: both networks read the same inputs and run side by side.
///
/// The first layers are placed next to each other, deeper layers
/// block-diagonally with zero-weight padding. Payload outputs come first
/// (`a`'s, then `b`'s), auxiliary outputs after them in the same order.
pub fn parallelize(a: &TypedSnn, b: &TypedSnn) -> Result<TypedSnn> {
    let incompatible = |what: &str| {
        Err(Error::IncompatibleNetworks(format!(
            "parallelization needs equal {what}"
        )))
    };
    if a.depth() != b.depth() {
        return incompatible("depth");
    }
    if a.net.input_dim() != b.net.input_dim() {
        return incompatible("input dimension");
    }
    if a.net.aux_input_times() != b.net.aux_input_times() {
        return incompatible("auxiliary inputs");
    }
    if !same_time(a.t_in_ref(), b.t_in_ref()) || !same_time(a.t_out_ref(), b.t_out_ref()) {
        return incompatible("reference times");
    }
    if a.domain() != b.domain() {
        return incompatible("domains");
    }

    let mut layers = Vec::with_capacity(a.depth());
    for (l, (la, lb)) in a.net.layers().iter().zip(b.net.layers()).enumerate() {
        let (weights, delays) = if l == 0 {
            (
                side_by_side(la.weights(), lb.weights()),
                side_by_side(la.delays(), lb.delays()),
            )
        } else {
            (
                block_diagonal(la.weights(), lb.weights()),
                block_diagonal(la.delays(), lb.delays()),
            )
        };
        layers.push(Layer::new(weights, delays, joined(la.thresholds(), lb.thresholds()))?);
    }

    let (pa, pb) = (a.net.output_dim(), b.net.output_dim());
    let (wa, wb) = (a.net.total_outputs(), b.net.total_outputs());
    let order: Vec<usize> = (0..pa)
        .chain(wa..wa + pb)
        .chain(pa..wa)
        .chain(wa + pb..wa + wb)
        .collect();
    layers.last_mut().expect("depth ≥ 1").permute_neurons(&order);

    let net = SpikingNetwork::with_aux_outputs(
        a.net.input_dim(),
        a.net.aux_input_times().to_vec(),
        layers,
        a.net.aux_outputs() + b.net.aux_outputs(),
    )?;
    TypedSnn::new(net, a.enc.clone())
}

/// Left fold of [`parallelize`] over a nonempty list.
pub fn parallelize_all(nets: &[TypedSnn]) -> Result<TypedSnn> {
    let (first, rest) = nets
        .split_first()
        .ok_or_else(|| Error::InvalidParameter("nothing to parallelize".into()))?;
    rest.iter().try_fold(first.clone(), |acc, n| parallelize(&acc, n))
}
