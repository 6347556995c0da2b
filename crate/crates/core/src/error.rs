use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("input component {index} = {value} lies outside the domain [{lo}, {hi}]")]
    DomainViolation { index: usize, value: f64, lo: f64, hi: f64 },

    /// An output neuron never reached its threshold, so the realization is undefined.
    #[error("output neuron {neuron} never fires")]
    NoFire { neuron: usize },

    #[error("incompatible networks: {0}")]
    IncompatibleNetworks(String),

    #[error("reference time mismatch: inner output reference {inner_out} != outer input reference {outer_in}")]
    ReferenceTimeMismatch { inner_out: f64, outer_in: f64 },

    #[error("range violation: {0}")]
    RangeViolation(String),

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("problem too large: {0}")]
    TooLarge(String),

    #[error("compiled network has {actual} {what}, construction predicts {predicted}")]
    ComplexityMismatch {
        what: &'static str,
        actual: usize,
        predicted: usize,
    },
}
