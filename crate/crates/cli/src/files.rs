//! JSON file formats for ReLU and spiking networks, and canonical output.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use spikec_core::{AffineLayer, EncodingSpec, Hyperbox, Layer, ReluNetwork, SpikingNetwork, TypedSnn};

use crate::CliError;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct AnnLayerFile {
    #[serde(rename = "W")]
    pub w: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<f64>,
}

/// `{ "layers": [ { "W": [[..]], "B": [..] } ] }`, `W` stored `out × in`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct AnnFile {
    pub layers: Vec<AnnLayerFile>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct AuxInputFile {
    pub time: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SnnLayerFile {
    #[serde(rename = "W")]
    pub w: Vec<Vec<f64>>,
    #[serde(rename = "D")]
    pub d: Vec<Vec<f64>>,
    pub theta: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DomainFile {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

/// Spiking network with its encoding. `W` and `D` are stored
/// `fan_in × fan_out`; `aux_outputs` counts trailing final-layer neurons
/// that are not part of the realization and is omitted when zero.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SnnFile {
    pub input_dim: usize,
    pub aux_inputs: Vec<AuxInputFile>,
    pub layers: Vec<SnnLayerFile>,
    pub t_in_ref: f64,
    pub t_out_ref: f64,
    pub domain: DomainFile,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub aux_outputs: usize,
}

fn is_zero(n: &usize) -> bool {
    *n == 0
}

fn malformed(msg: impl std::fmt::Display) -> CliError {
    CliError::malformed(msg.to_string())
}

fn matrix(rows: &[Vec<f64>], what: &str) -> Result<Array2<f64>, CliError> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(malformed(format!("{what} has rows of different lengths")));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Array2::from_shape_vec((rows.len(), ncols), flat).map_err(malformed)
}

fn rows(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

impl AnnFile {
    pub fn to_network(&self) -> Result<ReluNetwork, CliError> {
        let layers = self
            .layers
            .iter()
            .enumerate()
            .map(|(l, layer)| {
                AffineLayer::new(
                    matrix(&layer.w, &format!("layer {l} W"))?,
                    Array1::from(layer.b.clone()),
                )
                .map_err(malformed)
            })
            .collect::<Result<Vec<_>, _>>()?;
        ReluNetwork::new(layers).map_err(malformed)
    }

    pub fn from_network(net: &ReluNetwork) -> Self {
        AnnFile {
            layers: net
                .layers()
                .iter()
                .map(|l| AnnLayerFile {
                    w: rows(&l.weights),
                    b: l.biases.to_vec(),
                })
                .collect(),
        }
    }
}

impl SnnFile {
    pub fn to_typed(&self) -> Result<TypedSnn, CliError> {
        let layers = self
            .layers
            .iter()
            .enumerate()
            .map(|(l, layer)| {
                Layer::new(
                    matrix(&layer.w, &format!("layer {l} W"))?,
                    matrix(&layer.d, &format!("layer {l} D"))?,
                    Array1::from(layer.theta.clone()),
                )
                .map_err(malformed)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let aux = self.aux_inputs.iter().map(|a| a.time).collect();
        let net = SpikingNetwork::with_aux_outputs(self.input_dim, aux, layers, self.aux_outputs).map_err(malformed)?;
        let domain = Hyperbox::new(self.domain.lo.clone(), self.domain.hi.clone()).map_err(malformed)?;
        let enc = EncodingSpec::new(self.t_in_ref, self.t_out_ref, domain).map_err(malformed)?;
        TypedSnn::new(net, enc).map_err(malformed)
    }

    pub fn from_typed(snn: &TypedSnn) -> Self {
        SnnFile {
            input_dim: snn.net.input_dim(),
            aux_inputs: snn
                .net
                .aux_input_times()
                .iter()
                .map(|&time| AuxInputFile { time })
                .collect(),
            layers: snn
                .net
                .layers()
                .iter()
                .map(|l| SnnLayerFile {
                    w: rows(l.weights()),
                    d: rows(l.delays()),
                    theta: l.thresholds().to_vec(),
                })
                .collect(),
            t_in_ref: snn.t_in_ref(),
            t_out_ref: snn.t_out_ref(),
            domain: DomainFile {
                lo: snn.domain().lo().to_vec(),
                hi: snn.domain().hi().to_vec(),
            },
            aux_outputs: snn.net.aux_outputs(),
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| malformed(format!("cannot read {}: {e}", path.display())))
}

pub fn load_ann(path: &Path) -> Result<ReluNetwork, CliError> {
    let file: AnnFile =
        serde_json::from_str(&read(path)?).map_err(|e| malformed(format!("{}: {e}", path.display())))?;
    file.to_network()
}

pub fn load_snn(path: &Path) -> Result<TypedSnn, CliError> {
    let file: SnnFile =
        serde_json::from_str(&read(path)?).map_err(|e| malformed(format!("{}: {e}", path.display())))?;
    file.to_typed()
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = to_canonical_string(value)?;
    std::fs::write(path, text).map_err(|e| CliError::general(format!("cannot write {}: {e}", path.display())))
}

/// Serializes `value` with sorted keys, two-space indentation, arrays of
/// scalars on one line, and every float written with 17 significant digits.
pub fn to_canonical_string(value: &impl Serialize) -> Result<String, CliError> {
    let value = serde_json::to_value(value).map_err(|e| CliError::general(e.to_string()))?;
    Ok(canonicalize(&value))
}

/// Canonical text of an already parsed JSON value.
pub fn canonicalize(value: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, value, 0);
    out.push('\n');
    out
}

fn write_number(out: &mut String, n: &serde_json::Number) {
    if let Some(i) = n.as_i64() {
        let _ = write!(out, "{i}");
    } else if let Some(u) = n.as_u64() {
        let _ = write!(out, "{u}");
    } else {
        let f = n.as_f64().expect("JSON numbers are finite");
        let _ = write!(out, "{f:.16e}");
    }
}

fn is_scalar(v: &Value) -> bool {
    !matches!(v, Value::Array(_) | Value::Object(_))
}

fn write_value(out: &mut String, value: &Value, indent: usize) {
    let pad = |n: usize| "  ".repeat(n);
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => write_number(out, n),
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) if items.iter().all(is_scalar) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_value(out, item, indent);
            }
            out.push(']');
        }
        Value::Array(items) => {
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                write_value(out, item, indent + 1);
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push(']');
        }
        Value::Object(map) if map.is_empty() => out.push_str("{}"),
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push_str("{\n");
            for (i, key) in keys.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                out.push_str(&Value::String((*key).clone()).to_string());
                out.push_str(": ");
                write_value(out, &map[key.as_str()], indent + 1);
                out.push_str(if i + 1 < keys.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push('}');
        }
    }
}
