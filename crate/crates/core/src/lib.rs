//! Single-spike temporal-coded spiking neural networks under the Spike
//! Response Model with linear response kernels.
//!
//! The crate is organised bottom-up:
//!
//! * [`snn`]: exact event-driven firing-time semantics plus a dense
//!   time-stepping oracle used to cross-check it.
//! * [`ann`]: feed-forward ReLU networks, the source language of the compiler.
//! * [`calculus`]: concatenation and parallelization of spiking networks
//!   together with their reference-time bookkeeping.
//! * [`compiler`]: lowering of ReLU networks into spiking networks that
//!   reproduce them exactly on a bounded domain.
//! * [`regions`]: enumeration of the linear regions induced by a single
//!   spiking neuron, and a brute-force grid counter for arbitrary networks.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ann;
pub mod calculus;
pub mod compiler;
mod error;
pub mod regions;
pub mod snn;

pub use ann::{ann_forward, layer_range_bound, AffineLayer, Hyperbox, ReluNetwork};
pub use calculus::{concatenate, parallelize, parallelize_all, sample_points, RangeCheck, TypedSnn};
pub use compiler::{
    build_affine_gadget, build_hidden_stage, build_layer_gadget, build_neuron_gadget, build_ramp_neuron,
    build_relu_gadget, compile_ann, ramp_relu_network, CompileReport,
};
pub use error::{Error, Result};
pub use regions::{
    affine_piece, count_feasible, empirical_region_count, enumerate_regions, single_neuron_parameters,
    stabilized_region_count, EmpiricalRegions, Halfspace, RegionDescriptor,
};
pub use snn::{
    network_forward, oracle_firing_time, realize, resolve_firing_time, Arrival, ContributionCertificate, EncodingSpec,
    FiringTime, Layer, SpikeVector, SpikingNetwork,
};
