//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spikec::files::{write_json, AnnFile, SnnFile};
use spikec::{run, Cli, Command};
use spikec_core::{
    affine_piece, ann_forward, build_hidden_stage, build_ramp_neuron, build_relu_gadget, compile_ann, concatenate,
    count_feasible, empirical_region_count, enumerate_regions, network_forward, oracle_firing_time, parallelize,
    ramp_relu_network, resolve_firing_time, sample_points, stabilized_region_count, AffineLayer, Arrival, EncodingSpec,
    FiringTime, Hyperbox, Layer, RangeCheck, ReluNetwork, SpikingNetwork, TypedSnn,
};
use tempfile::TempDir;

type Outcome = Result<String, String>;
type Check<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || format!("took {elapsed:.2?}, limit {limit:?}"))
}

fn single_neuron(weights: &[f64], delays: &[f64], theta: f64) -> SpikingNetwork {
    let d = weights.len();
    let layer = Layer::new(
        Array2::from_shape_vec((d, 1), weights.to_vec()).unwrap(),
        Array2::from_shape_vec((d, 1), delays.to_vec()).unwrap(),
        Array1::from(vec![theta]),
    )
    .unwrap();
    SpikingNetwork::new(d, vec![], vec![layer]).unwrap()
}

fn random_layer(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize) -> AffineLayer {
    let w = Array2::from_shape_fn((fan_out, fan_in), |_| rng.gen_range(-1.0..=1.0));
    let b = Array1::from_shape_fn(fan_out, |_| rng.gen_range(-1.0..=1.0));
    AffineLayer::new(w, b).unwrap()
}

fn two_input_branches() -> Outcome {
    let start = Instant::now();
    let net = single_neuron(&[1.0, 1.0], &[2.0, 1.0], 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0_f64;
    for branch in 0..3 {
        for _ in 0..300 {
            let t1: f64 = rng.gen_range(-5.0..5.0);
            let (t2, expected, set) = match branch {
                0 => {
                    let t2 = t1 + 2.0 + rng.gen_range(0.0..3.0);
                    (t2, t1 + 3.0, vec![0])
                }
                1 => {
                    let t2 = t1 - rng.gen_range(0.0..3.0);
                    (t2, t2 + 2.0, vec![1])
                }
                _ => {
                    let t2 = t1 + rng.gen_range(1e-6..2.0 - 1e-6);
                    (t2, (t1 + t2) / 2.0 + 2.0, vec![0, 1])
                }
            };
            let out = network_forward(&net, &[FiringTime::Finite(t1), FiringTime::Finite(t2)]).unwrap();
            let t = out[0].finite().ok_or_else(|| format!("silent at ({t1}, {t2})"))?;
            worst = worst.max((t - expected).abs());
            let arrivals = [Arrival::new(t1 + 2.0, 1.0), Arrival::new(t2 + 1.0, 1.0)];
            let cert = resolve_firing_time(&arrivals, 1.0).unwrap();
            ensure(cert.contributing_set() == set, || {
                format!("branch {branch} at ({t1}, {t2}): set {:?}", cert.contributing)
            })?;
        }
    }
    ensure(worst <= 1e-12, || format!("max error {worst:e}"))?;
    within(start.elapsed(), Duration::from_secs(1))?;
    Ok(format!("900 points, max error {worst:.1e}, {:.2?}", start.elapsed()))
}

/// The 100 random fixed-width networks shared by the emulation and count
/// criteria.
fn random_anns() -> Vec<ReluNetwork> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    (0..100)
        .map(|_| {
            let d = rng.gen_range(1..=4);
            let depth = rng.gen_range(1..=3);
            let layers = (0..depth)
                .map(|l| random_layer(&mut rng, d, if l + 1 == depth { 1 } else { d }))
                .collect();
            ReluNetwork::new(layers).unwrap()
        })
        .collect()
}

fn verify_via_cli(dir: &TempDir, i: usize, ann: &ReluNetwork) -> Result<f64, String> {
    let d = ann.input_dim();
    let (snn, _) = compile_ann(ann, &Hyperbox::cube(d, -1.0, 1.0), 0.0).map_err(|e| e.to_string())?;
    let ann_path: PathBuf = dir.path().join(format!("ann{i}.json"));
    let snn_path: PathBuf = dir.path().join(format!("snn{i}.json"));
    write_json(&ann_path, &AnnFile::from_network(ann)).map_err(|e| e.body.to_string())?;
    write_json(&snn_path, &SnnFile::from_typed(&snn)).map_err(|e| e.body.to_string())?;
    let cli = Cli {
        command: Command::Verify {
            ann: ann_path,
            snn: snn_path,
            grid: 11,
            tol: 1e-9,
            dump_grid: None,
        },
    };
    let report = run(&cli).map_err(|e| e.body.to_string())?;
    ensure(report["pass"] == true, || format!("network {i}: {report}"))?;
    Ok(report["max_err"].as_f64().unwrap())
}

fn emulation(anns: &[ReluNetwork]) -> Outcome {
    let start = Instant::now();
    let dir = TempDir::new().unwrap();
    let mut worst = 0.0_f64;
    for (i, ann) in anns.iter().enumerate() {
        worst = worst.max(verify_via_cli(&dir, i, ann)?);
    }
    within(start.elapsed(), Duration::from_secs(60))?;
    Ok(format!(
        "100 networks verified, max error {worst:.1e}, {:.2?}",
        start.elapsed()
    ))
}

fn complexity(anns: &[ReluNetwork]) -> Outcome {
    for (i, ann) in anns.iter().enumerate() {
        let d = ann.input_dim();
        let l = ann.depth();
        let (snn, report) = compile_ann(ann, &Hyperbox::cube(d, -1.0, 1.0), 0.0).unwrap();
        let neurons = ann.neuron_count() + l * (2 * d + 3) - (2 * d + 2);
        let layers = 3 * l - 2;
        ensure(snn.neuron_count() == neurons && snn.depth() == layers, || {
            format!(
                "network {i}: got ({}, {}), expected ({neurons}, {layers})",
                snn.neuron_count(),
                snn.depth()
            )
        })?;
        ensure(report.neuron_count == neurons && report.layer_count == layers, || {
            format!("network {i}: report disagrees")
        })?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let spot = ReluNetwork::new(vec![random_layer(&mut rng, 2, 2), random_layer(&mut rng, 2, 1)]).unwrap();
    let (snn, _) = compile_ann(&spot, &Hyperbox::cube(2, -1.0, 1.0), 0.0).unwrap();
    ensure((snn.neuron_count(), snn.depth()) == (13, 4), || {
        format!("spot value ({}, {})", snn.neuron_count(), snn.depth())
    })?;
    Ok("100 networks exact, spot value (13, 4)".into())
}

fn region_counts() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut counts = Vec::new();
    for d in 2..=10 {
        let weights: Vec<f64> = (0..d).map(|_| rng.gen_range(0.5..2.0)).collect();
        let delays: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..1.0)).collect();
        let theta = rng.gen_range(0.5..2.0);
        let (count, _) = stabilized_region_count(&weights, &delays, theta, &Hyperbox::cube(d, -1.0, 1.0))
            .map_err(|e| e.to_string())?;
        ensure(count == (1 << d) - 1, || format!("d = {d}: {count} regions"))?;
        counts.push(count);
    }
    for _ in 0..20 {
        let d = rng.gen_range(2..=6);
        let weights: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let delays: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..1.0)).collect();
        let regions = enumerate_regions(&weights, &delays, 1.0, &Hyperbox::cube(d, -10.0, 10.0)).unwrap();
        for mask in 1usize..(1 << d) {
            let subset: Vec<usize> = (0..d).filter(|i| mask & (1 << i) != 0).collect();
            let positive = subset.iter().map(|&i| weights[i]).sum::<f64>() > 0.0;
            let listed = regions.iter().any(|r| r.subset == subset);
            ensure(listed == positive, || {
                format!("subset {subset:?} of {weights:?}: listed {listed}")
            })?;
        }
    }
    for i in 0..20 {
        let d = rng.gen_range(1..=3);
        let weights: Vec<f64> = (0..d).map(|_| rng.gen_range(0.5..2.0)).collect();
        let delays: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..1.0)).collect();
        let theta = rng.gen_range(0.5..2.0);
        let bx = Hyperbox::cube(d, -6.0, 6.0);
        let analytic = count_feasible(&enumerate_regions(&weights, &delays, theta, &bx).unwrap(), &bx);
        let grid = [0, 200, 200, 60][d];
        let empirical = empirical_region_count(&single_neuron(&weights, &delays, theta), &bx, grid).unwrap();
        ensure(empirical.regions == analytic, || {
            format!("instance {i}: analytic {analytic}, empirical {}", empirical.regions)
        })?;
    }
    within(start.elapsed(), Duration::from_secs(30))?;
    Ok(format!(
        "counts {counts:?}, 20 grid comparisons equal, {:.2?}",
        start.elapsed()
    ))
}

fn relu_gadget() -> Outcome {
    let gadget = build_relu_gadget(-1.0, 1.0, 0.0).unwrap();
    let mut worst = 0.0_f64;
    for i in 0..=10_000 {
        let x = -1.0 + 2.0 * i as f64 / 10_000.0;
        let y = gadget.realize(&[x]).map_err(|e| format!("x = {x}: {e}"))?[0];
        worst = worst.max((y - x.max(0.0)).abs());
    }
    ensure(worst <= 1e-12, || format!("max error {worst:e}"))?;
    Ok(format!("10001 points, max error {worst:.1e}"))
}

fn ramp_equivalence() -> Outcome {
    let theta = 1.0_f64;
    let relu = |z: f64| z.max(0.0);
    let ramp = |x: f64| -0.5 * relu(-x - theta) - 0.5 * relu(-x + theta);
    let snn = build_ramp_neuron(theta, &Hyperbox::cube(1, -3.0, 3.0), 0.0).unwrap();
    let ann = ramp_relu_network(theta).unwrap();
    let mut worst = 0.0_f64;
    for i in 0..=200 {
        let x = -3.0 + 6.0 * i as f64 / 200.0;
        let s = snn.realize(&[x]).map_err(|e| e.to_string())?[0];
        let a = ann_forward(&ann, &[x]).unwrap()[0];
        worst = worst.max((s - ramp(x)).abs()).max((a - ramp(x)).abs());
    }
    ensure(worst <= 1e-12, || format!("max error {worst:e}"))?;
    let counts = (snn.neuron_count(), snn.depth(), ann.neuron_count(), ann.depth());
    ensure(counts == (3, 1, 4, 2), || format!("counts {counts:?}"))?;
    Ok(format!(
        "201 points, max error {worst:.1e}, spiking 3 units/1 layer, ReLU 4 units/2 layers"
    ))
}

fn oracle_equivalence() -> Outcome {
    const DT: f64 = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut fired, mut silent) = (0, 0);
    for i in 0..1000 {
        let n = rng.gen_range(1..=8);
        let arrivals: Vec<Arrival> = (0..n)
            .map(|_| Arrival::new(rng.gen_range(0.0..5.0), rng.gen_range(-2.0..2.0)))
            .collect();
        let theta = rng.gen_range(0.01..3.0);
        let cert = resolve_firing_time(&arrivals, theta).unwrap();
        cert.verify(&arrivals, theta)
            .map_err(|e| format!("instance {i}: certificate {e}"))?;
        let oracle = oracle_firing_time(&arrivals, theta, DT).unwrap();
        let tol = 2.0 * DT * (1.0 + arrivals.iter().map(|a| a.weight.abs()).sum::<f64>());
        match (cert.firing_time, oracle) {
            (FiringTime::Never, FiringTime::Never) => silent += 1,
            (FiringTime::Finite(a), FiringTime::Finite(b)) if (a - b).abs() <= tol => fired += 1,
            (a, b) => return Err(format!("instance {i}: event {a:?}, oracle {b:?}")),
        }
    }
    Ok(format!(
        "1000 instances agree ({fired} fire, {silent} silent), certificates valid"
    ))
}

fn excitatory_net(rng: &mut ChaCha8Rng, input_dim: usize, widths: &[usize]) -> SpikingNetwork {
    let mut fan_in = input_dim;
    let layers = widths
        .iter()
        .map(|&w| {
            let weights = Array2::from_shape_fn((fan_in, w), |_| rng.gen_range(0.1..1.5));
            let delays = Array2::from_shape_fn((fan_in, w), |_| rng.gen_range(0.0..1.0));
            let thresholds = Array1::from_shape_fn(w, |_| rng.gen_range(0.2..2.0));
            fan_in = w;
            Layer::new(weights, delays, thresholds).unwrap()
        })
        .collect();
    SpikingNetwork::new(input_dim, vec![], layers).unwrap()
}

fn typed(net: SpikingNetwork, t_in: f64, domain: Hyperbox) -> TypedSnn {
    TypedSnn::new(net, EncodingSpec::new(t_in, t_in + 3.0, domain).unwrap()).unwrap()
}

fn covering_box(inner: &TypedSnn) -> Hyperbox {
    let mut points = sample_points(inner.domain(), 1000);
    points.extend(inner.domain().grid(5));
    let k = inner.net.output_dim();
    let (mut lo, mut hi) = (vec![f64::INFINITY; k], vec![f64::NEG_INFINITY; k]);
    for x in points {
        for (i, y) in inner.realize(&x).unwrap().into_iter().enumerate() {
            lo[i] = lo[i].min(y - 0.5);
            hi[i] = hi[i].max(y + 0.5);
        }
    }
    Hyperbox::new(lo, hi).unwrap()
}

fn concat_pair(rng: &mut ChaCha8Rng, i: usize) -> (TypedSnn, TypedSnn) {
    let d = rng.gen_range(1..=3);
    let k = rng.gen_range(1..=3);
    if i.is_multiple_of(2) {
        let inner = typed(excitatory_net(rng, d, &[k]), 0.5, Hyperbox::cube(d, -1.0, 1.0));
        let m = rng.gen_range(1..=2);
        let outer = typed(excitatory_net(rng, k, &[m]), inner.t_out_ref(), covering_box(&inner));
        (outer, inner)
    } else {
        let (inner, bound) = build_hidden_stage(&random_layer(rng, d, k), &Hyperbox::cube(d, -1.0, 1.0), 0.0).unwrap();
        let ann = ReluNetwork::new(vec![random_layer(rng, k, 1)]).unwrap();
        let (outer, _) = compile_ann(&ann, &Hyperbox::cube(k, 0.0, bound), inner.t_out_ref()).unwrap();
        (outer, inner)
    }
}

fn calculus_laws() -> Outcome {
    const TOL: f64 = 1e-9;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0_f64;
    for i in 0..50 {
        let (outer, inner) = concat_pair(&mut rng, i);
        let both = concatenate(&outer, &inner, RangeCheck::Error).map_err(|e| format!("pair {i}: {e}"))?;
        let expected = outer.neuron_count() + inner.neuron_count() - outer.net.total_inputs();
        ensure(both.neuron_count() == expected, || {
            format!("pair {i}: {} neurons, expected {expected}", both.neuron_count())
        })?;
        for x in inner.domain().grid(5) {
            let direct = both.realize(&x).unwrap();
            let staged = outer.realize(&inner.realize(&x).unwrap()).unwrap();
            for (a, b) in direct.iter().zip(&staged) {
                worst = worst.max((a - b).abs());
            }
        }

        let d = rng.gen_range(1..=3);
        let depth = rng.gen_range(1..=3);
        let domain = Hyperbox::cube(d, -1.0, 1.0);
        let wa: Vec<usize> = (0..depth).map(|_| rng.gen_range(1..=3)).collect();
        let wb: Vec<usize> = (0..depth).map(|_| rng.gen_range(1..=3)).collect();
        let a = typed(excitatory_net(&mut rng, d, &wa), 0.0, domain.clone());
        let b = typed(excitatory_net(&mut rng, d, &wb), 0.0, domain.clone());
        let p = parallelize(&a, &b).map_err(|e| format!("pair {i}: {e}"))?;
        let expected = a.neuron_count() + b.neuron_count() - d;
        ensure(p.neuron_count() == expected, || {
            format!("pair {i}: {} neurons, expected {expected}", p.neuron_count())
        })?;
        for x in domain.grid(5) {
            let mut stacked = a.realize(&x).unwrap();
            stacked.extend(b.realize(&x).unwrap());
            for (g, e) in p.realize(&x).unwrap().iter().zip(&stacked) {
                worst = worst.max((g - e).abs());
            }
        }
    }
    ensure(worst <= TOL, || format!("max error {worst:e}"))?;
    Ok(format!(
        "50 concatenation and 50 parallel pairs, counts exact, max error {worst:.1e}"
    ))
}

/// Contributing set of a single neuron at input times `t`.
fn subset_at(w: &[f64], d: &[f64], theta: f64, t: &[f64]) -> Option<Vec<usize>> {
    let arrivals: Vec<Arrival> = t
        .iter()
        .zip(w.iter().zip(d))
        .map(|(t, (w, d))| Arrival::new(t + d, *w))
        .collect();
    let cert = resolve_firing_time(&arrivals, theta).unwrap();
    cert.firing_time.finite().map(|_| cert.contributing_set())
}

/// Largest disagreement of the one-sided affine pieces at `wanted`
/// bisected region-boundary points, and the number above `tol`.
fn boundary_jumps(rng: &mut ChaCha8Rng, mixed: bool, wanted: usize, tol: f64) -> (f64, usize) {
    let (mut worst, mut jumps, mut found) = (0.0_f64, 0, 0);
    while found < wanted {
        let n = rng.gen_range(2..=4);
        let w: Vec<f64> = (0..n)
            .map(|_| {
                if mixed {
                    rng.gen_range(-1.5..2.0)
                } else {
                    rng.gen_range(0.5..2.0)
                }
            })
            .collect();
        let d: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let theta = rng.gen_range(0.5..2.0);
        let p: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let q: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let at = |s: f64| -> Vec<f64> { p.iter().zip(&q).map(|(a, b)| a + s * (b - a)).collect() };
        for k in 0..32 {
            let (mut lo, mut hi) = (k as f64 / 32.0, (k + 1) as f64 / 32.0);
            let left = subset_at(&w, &d, theta, &at(lo));
            if left.is_none() || left == subset_at(&w, &d, theta, &at(hi)) {
                continue;
            }
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if subset_at(&w, &d, theta, &at(mid)) == left {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            if let (Some(l), Some(r)) = (left, subset_at(&w, &d, theta, &at(hi))) {
                let x = at(0.5 * (lo + hi));
                let value = |s: &[usize]| {
                    let (g, off) = affine_piece(&w, &d, theta, s).unwrap();
                    g.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() + off
                };
                let (a, b) = (value(&l), value(&r));
                let gap = (a - b).abs() / (1.0 + a.abs());
                worst = worst.max(gap);
                jumps += usize::from(gap > tol);
                found += 1;
            }
            break;
        }
    }
    (worst, jumps)
}

fn continuity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (worst, jumps) = boundary_jumps(&mut rng, false, 200, 1e-9);
    ensure(jumps == 0, || {
        format!("{jumps}/200 boundary points jump, worst {worst:e}")
    })?;
    let (_, mixed) = boundary_jumps(&mut rng, true, 200, 1e-9);
    Ok(format!(
        "200 boundary points of positive-weight neurons agree, worst {worst:.1e} \
         (mixed-sign weights, informational: {mixed}/200 points jump)"
    ))
}

fn main() {
    let anns = random_anns();
    let criteria: Vec<Check> = vec![
        ("two-input neuron branches", Box::new(two_input_branches)),
        ("ReLU network emulation", Box::new(|| emulation(&anns))),
        ("compiled network size", Box::new(|| complexity(&anns))),
        ("single-neuron region counts", Box::new(region_counts)),
        ("ReLU gadget", Box::new(relu_gadget)),
        ("ramp neuron vs ReLU network", Box::new(ramp_equivalence)),
        ("event solver vs dense stepping", Box::new(oracle_equivalence)),
        ("concatenation and parallelization", Box::new(calculus_laws)),
        ("continuity across region boundaries", Box::new(continuity)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("[PASS] {} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] {} {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
