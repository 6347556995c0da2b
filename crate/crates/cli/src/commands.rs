use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde_json::{json, Value};
use spikec_core::regions::feasible_point;
use spikec_core::{
    ann_forward, compile_ann, count_feasible, empirical_region_count, enumerate_regions, oracle_firing_time,
    single_neuron_parameters, stabilized_region_count, CompileReport, FiringTime, Hyperbox, TypedSnn,
};

use crate::files::{load_ann, load_snn, write_json, SnnFile};
use crate::CliError;

/// Largest number of grid points `verify` will evaluate.
pub const MAX_VERIFY_POINTS: usize = 10_000_000;

#[derive(Debug, Parser)]
#[command(
    name = "spikec",
    version,
    about = "Simulate, compile and analyze temporal-coded spiking networks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Realize a spiking network at one input point.
    Simulate {
        #[arg(long)]
        network: PathBuf,
        /// Comma-separated input values.
        #[arg(long, allow_hyphen_values = true)]
        input: String,
        /// Also report the firing time of every neuron, layer by layer.
        #[arg(long)]
        trace: bool,
    },
    /// Compile a ReLU network into an emulating spiking network.
    Compile {
        #[arg(long)]
        ann: PathBuf,
        /// Input interval `a,b`, applied to every input coordinate.
        #[arg(long, allow_hyphen_values = true)]
        domain: String,
        #[arg(short = 'o', long = "output")]
        output: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        /// Input reference time of the compiled network.
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        t_in: f64,
    },
    /// Compare a spiking network against a ReLU network on a grid.
    Verify {
        #[arg(long)]
        ann: PathBuf,
        #[arg(long)]
        snn: PathBuf,
        /// Points per axis.
        #[arg(long, default_value_t = 11)]
        grid: usize,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        /// Write `x1,…,xd,ann,snn,err` rows to this CSV file.
        #[arg(long)]
        dump_grid: Option<PathBuf>,
    },
    /// Enumerate the linear regions of a single spiking neuron.
    Regions {
        #[arg(long)]
        network: PathBuf,
        /// Also count affine pieces on a grid by finite differences.
        #[arg(long)]
        empirical: bool,
        /// Cells per axis for the empirical count.
        #[arg(long, default_value_t = 100)]
        grid: usize,
        /// Double the domain until the analytic count stops changing.
        #[arg(long)]
        stabilize: bool,
    },
    /// Firing times by dense time stepping.
    Oracle {
        #[arg(long)]
        network: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        input: String,
        #[arg(long, default_value_t = 1e-5)]
        dt: f64,
    },
}

pub fn run(cli: &Cli) -> Result<Value, CliError> {
    match &cli.command {
        Command::Simulate { network, input, trace } => simulate(network, input, *trace),
        Command::Compile {
            ann,
            domain,
            output,
            report,
            t_in,
        } => compile(ann, domain, output, report.as_deref(), *t_in),
        Command::Verify {
            ann,
            snn,
            grid,
            tol,
            dump_grid,
        } => verify(ann, snn, *grid, *tol, dump_grid.as_deref()),
        Command::Regions {
            network,
            empirical,
            grid,
            stabilize,
        } => regions(network, *empirical, *grid, *stabilize),
        Command::Oracle { network, input, dt } => oracle(network, input, *dt),
    }
}

fn parse_values(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| CliError::malformed(format!("`{s}` is not a finite number")))
        })
        .collect()
}

fn times_json(times: &[FiringTime]) -> Value {
    Value::Array(
        times
            .iter()
            .map(|t| t.finite().map_or(Value::Null, |v| json!(v)))
            .collect(),
    )
}

fn simulate(network: &Path, input: &str, trace: bool) -> Result<Value, CliError> {
    let snn = load_snn(network)?;
    let x = parse_values(input)?;
    if !trace {
        return Ok(json!({ "output": snn.realize(&x)? }));
    }
    snn.domain().check_contains(&x)?;
    let layers = snn.net.trace(&snn.enc.encode(&x))?;
    let trace_json = Value::Array(layers.iter().map(|l| times_json(l)).collect());
    match snn.realize(&x) {
        Ok(y) => Ok(json!({ "output": y, "trace": trace_json })),
        Err(e) => {
            let mut err = CliError::from(e);
            err.body["trace"] = trace_json;
            Err(err)
        }
    }
}

fn parse_interval(text: &str) -> Result<(f64, f64), CliError> {
    match parse_values(text)?.as_slice() {
        &[a, b] if a <= b => Ok((a, b)),
        _ => Err(CliError::malformed(format!(
            "domain `{text}` is not an interval `a,b` with a ≤ b"
        ))),
    }
}

fn box_json(b: &Hyperbox) -> Value {
    json!({ "lo": b.lo(), "hi": b.hi() })
}

fn report_json(report: &CompileReport, snn: &TypedSnn) -> Value {
    let counts_match = report
        .predicted_neurons
        .zip(report.predicted_layers)
        .map(|(n, l)| n == report.neuron_count && l == report.layer_count);
    json!({
        "neurons": report.neuron_count,
        "layers": report.layer_count,
        "predicted_neurons": report.predicted_neurons,
        "predicted_layers": report.predicted_layers,
        "counts_match": counts_match,
        "per_stage_refs": report.per_stage_refs.iter().map(|(a, b)| vec![*a, *b]).collect::<Vec<_>>(),
        "per_layer_domains": report.per_layer_domains.iter().map(box_json).collect::<Vec<_>>(),
        "t_in_ref": snn.t_in_ref(),
        "t_out_ref": snn.t_out_ref(),
    })
}

fn compile(ann: &Path, domain: &str, output: &Path, report: Option<&Path>, t_in: f64) -> Result<Value, CliError> {
    let ann = load_ann(ann)?;
    let (lo, hi) = parse_interval(domain)?;
    let domain = Hyperbox::cube(ann.input_dim(), lo, hi);
    let (snn, compile_report) = compile_ann(&ann, &domain, t_in)?;
    write_json(output, &SnnFile::from_typed(&snn))?;
    let value = report_json(&compile_report, &snn);
    if let Some(path) = report {
        write_json(path, &value)?;
    }
    Ok(value)
}

fn verify(ann: &Path, snn: &Path, grid: usize, tol: f64, dump: Option<&Path>) -> Result<Value, CliError> {
    let ann = load_ann(ann)?;
    let snn = load_snn(snn)?;
    if ann.input_dim() != snn.net.input_dim() || ann.output_dim() != snn.net.output_dim() {
        return Err(CliError::malformed(format!(
            "ReLU network is {} → {}, spiking network is {} → {}",
            ann.input_dim(),
            ann.output_dim(),
            snn.net.input_dim(),
            snn.net.output_dim()
        )));
    }
    if grid == 0 || (grid as f64).powi(snn.net.input_dim() as i32) > MAX_VERIFY_POINTS as f64 {
        return Err(CliError::malformed(format!(
            "grid of {grid} points per axis is empty or too large"
        )));
    }
    let points = snn.domain().grid(grid);
    let rows = points
        .par_iter()
        .map(|x| -> Result<(Vec<f64>, Vec<f64>, f64), CliError> {
            let expected = ann_forward(&ann, x)?;
            let got = snn.realize(x).map_err(|e| {
                let mut err = CliError::from(e);
                err.body["point"] = json!(x);
                err
            })?;
            let err = expected
                .iter()
                .zip(&got)
                .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
            Ok((expected, got, err))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let (argmax, max_err) = rows
        .iter()
        .enumerate()
        .fold((0, 0.0_f64), |(i, m), (j, r)| if r.2 > m { (j, r.2) } else { (i, m) });
    if let Some(path) = dump {
        dump_grid(path, &points, &rows)?;
    }
    Ok(json!({
        "max_err": max_err,
        "argmax_point": points[argmax],
        "pass": max_err <= tol,
        "points": points.len(),
        "tol": tol,
    }))
}

fn dump_grid(path: &Path, points: &[Vec<f64>], rows: &[(Vec<f64>, Vec<f64>, f64)]) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::general(format!("cannot write {}: {e}", path.display()));
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    let d = points.first().map_or(0, Vec::len);
    let m = rows.first().map_or(0, |r| r.0.len());
    let mut header: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
    if m == 1 {
        header.extend(["ann".into(), "snn".into()]);
    } else {
        header.extend((1..=m).map(|k| format!("ann{k}")));
        header.extend((1..=m).map(|k| format!("snn{k}")));
    }
    header.push("err".into());
    writeln!(out, "{}", header.join(",")).map_err(io)?;
    for (x, (ann, snn, err)) in points.iter().zip(rows) {
        let fields: Vec<String> = x
            .iter()
            .chain(ann)
            .chain(snn)
            .chain(std::iter::once(err))
            .map(|v| format!("{v:e}"))
            .collect();
        writeln!(out, "{}", fields.join(",")).map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Input-time box of a single neuron: the payload domain shifted to the
/// input reference, auxiliary inputs pinned to their firing times.
fn input_time_box(snn: &TypedSnn) -> Hyperbox {
    let shifted = snn.domain().shifted(snn.t_in_ref());
    let aux = snn.net.aux_input_times();
    let lo = shifted.lo().iter().chain(aux).copied().collect();
    let hi = shifted.hi().iter().chain(aux).copied().collect();
    Hyperbox::new(lo, hi).expect("shifted domain stays ordered")
}

fn regions(network: &Path, empirical: bool, grid: usize, stabilize: bool) -> Result<Value, CliError> {
    let snn = load_snn(network)?;
    let (weights, delays, theta) = single_neuron_parameters(&snn.net)?;
    let initial = input_time_box(&snn);
    let (count, bx) = if stabilize {
        stabilized_region_count(&weights, &delays, theta, &initial)?
    } else {
        let descriptors = enumerate_regions(&weights, &delays, theta, &initial)?;
        (count_feasible(&descriptors, &initial), initial)
    };
    let descriptors = enumerate_regions(&weights, &delays, theta, &bx)?;
    let regions: Vec<Value> = descriptors
        .iter()
        .map(|r| {
            json!({
                "subset": r.subset,
                "gradient": r.gradient,
                "offset": r.offset,
                "feasible": feasible_point(&r.halfspaces, &bx).is_some(),
                "halfspaces": r.halfspaces.iter().map(|h| json!({
                    "normal": h.normal,
                    "bound": h.bound,
                    "strict": h.strict,
                })).collect::<Vec<_>>(),
            })
        })
        .collect();
    let mut out = json!({
        "analytic_count": count,
        "box": box_json(&bx),
        "regions": regions,
    });
    if empirical {
        let d = snn.net.input_dim();
        let payload = Hyperbox::new(bx.lo()[..d].to_vec(), bx.hi()[..d].to_vec()).expect("sub-box of a box");
        let found = empirical_region_count(&snn.net, &payload, grid)?;
        out["empirical_count"] = json!(found.regions);
        out["no_fire_cells"] = json!(found.no_fire_cells);
        out["discarded_cells"] = json!(found.discarded_cells);
    }
    Ok(out)
}

fn oracle(network: &Path, input: &str, dt: f64) -> Result<Value, CliError> {
    let snn = load_snn(network)?;
    let x = parse_values(input)?;
    snn.domain().check_contains(&x)?;
    if x.len() != snn.net.input_dim() {
        return Err(CliError::malformed(format!(
            "expected {} inputs, got {}",
            snn.net.input_dim(),
            x.len()
        )));
    }
    let mut times = snn.enc.encode(&x);
    times.extend(snn.net.aux_input_times().iter().map(|&t| FiringTime::Finite(t)));
    for layer in snn.net.layers() {
        times = (0..layer.fan_out())
            .map(|v| oracle_firing_time(&layer.arrivals(&times, v), layer.thresholds()[v], dt))
            .collect::<Result<Vec<_>, _>>()?;
    }
    let payload = &times[..snn.net.output_dim()];
    let output = payload
        .iter()
        .enumerate()
        .map(|(neuron, t)| {
            t.finite()
                .map(|t| t - snn.t_out_ref())
                .ok_or(CliError::from(spikec_core::Error::NoFire { neuron }))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(json!({ "times": times_json(&times), "output": output, "dt": dt }))
}
