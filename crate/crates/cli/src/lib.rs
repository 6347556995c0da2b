//! Command-line front end for the `spikec` tool.
//!
//! Every command prints one JSON document on stdout. Exit codes:
//! 0 success, 1 malformed input or other failure, 2 an output neuron never
//! fires, 3 an input lies outside the network's domain.

pub mod commands;
pub mod files;

use serde_json::{json, Value};
use spikec_core::Error;

pub use commands::{run, Cli, Command};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_NO_FIRE: i32 = 2;
pub const EXIT_DOMAIN: i32 = 3;

/// A failure with its exit code and the JSON body reported for it.
#[derive(Clone, Debug, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub body: Value,
}

impl CliError {
    pub fn malformed(message: String) -> Self {
        CliError {
            code: EXIT_FAILURE,
            body: json!({ "error": "malformed-input", "message": message }),
        }
    }

    pub fn general(message: String) -> Self {
        CliError {
            code: EXIT_FAILURE,
            body: json!({ "error": "failure", "message": message }),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::NoFire { neuron } => CliError {
                code: EXIT_NO_FIRE,
                body: json!({ "error": "no-fire", "neuron": neuron }),
            },
            Error::DomainViolation { index, value, lo, hi } => CliError {
                code: EXIT_DOMAIN,
                body: json!({
                    "error": "domain-violation",
                    "index": index,
                    "value": value,
                    "lo": lo,
                    "hi": hi,
                }),
            },
            other => CliError::general(other.to_string()),
        }
    }
}
