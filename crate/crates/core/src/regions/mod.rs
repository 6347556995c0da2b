//! Linear regions of the firing-time map of a single spiking neuron.
//!
//! For a neuron with input times `t`, the firing time is affine on each set
//! where a fixed subset `I` of inputs contributes:
//! `t_v = Σ_{i∈I} w_i (t_i + d_i) / W_I + θ / W_I` with `W_I = Σ_{i∈I} w_i > 0`.
//! Each region is cut out by one halfspace per input: contributing arrivals
//! strictly precede `t_v`, the others do not.

mod lp;

use rayon::prelude::*;

use crate::ann::Hyperbox;
use crate::error::{Error, Result};
use crate::snn::{network_forward, FiringTime, SpikingNetwork};

use lp::{find_feasible_point, Row};

/// Largest input count accepted by [`enumerate_regions`].
pub const MAX_REGION_INPUTS: usize = 20;

/// Largest number of grid cells accepted by [`empirical_region_count`].
pub const MAX_GRID_CELLS: usize = 10_000_000;

/// Relative shrink applied to strict inequalities before the LP.
pub const STRICT_SHRINK: f64 = 1e-7;

/// Tolerance used when clustering gradients and offsets.
pub const CLUSTER_TOLERANCE: f64 = 1e-6;

/// `normal · t ≤ bound`, or `<` when `strict`.
#[derive(Clone, Debug, PartialEq)]
pub struct Halfspace {
    pub normal: Vec<f64>,
    pub bound: f64,
    pub strict: bool,
}

impl Halfspace {
    pub fn contains(&self, t: &[f64]) -> bool {
        let lhs: f64 = self.normal.iter().zip(t).map(|(a, x)| a * x).sum();
        if self.strict {
            lhs < self.bound
        } else {
            lhs <= self.bound
        }
    }
}

/// One candidate linear region: contributing subset, affine map, and the
/// halfspaces on which that subset is the contributing set.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionDescriptor {
    /// Contributing inputs, ascending.
    pub subset: Vec<usize>,
    pub gradient: Vec<f64>,
    pub offset: f64,
    pub halfspaces: Vec<Halfspace>,
    pub feasible_in_box: bool,
    /// A point satisfying the (shrunk) system, when feasible.
    pub witness: Option<Vec<f64>>,
}

impl RegionDescriptor {
    pub fn firing_time(&self, t: &[f64]) -> f64 {
        self.gradient.iter().zip(t).map(|(g, x)| g * x).sum::<f64>() + self.offset
    }

    pub fn contains(&self, t: &[f64]) -> bool {
        self.halfspaces.iter().all(|h| h.contains(t))
    }
}

/// Gradient and offset of the firing time when exactly `subset` contributes.
/// `None` if the subset's weight sum is not positive.
pub fn affine_piece(weights: &[f64], delays: &[f64], theta: f64, subset: &[usize]) -> Option<(Vec<f64>, f64)> {
    let total: f64 = subset.iter().map(|&i| weights[i]).sum();
    if !(total > 0.0) {
        return None;
    }
    let mut gradient = vec![0.0; weights.len()];
    let mut moment = theta;
    for &i in subset {
        gradient[i] = weights[i] / total;
        moment += weights[i] * delays[i];
    }
    Some((gradient, moment / total))
}

fn halfspaces(gradient: &[f64], offset: f64, delays: &[f64], in_subset: &[bool]) -> Vec<Halfspace> {
    let d = gradient.len();
    (0..d)
        .map(|k| {
            if in_subset[k] {
                // t_k + d_k < g·t + offset
                let mut normal: Vec<f64> = gradient.iter().map(|g| -g).collect();
                normal[k] += 1.0;
                let mut bound = offset - delays[k];
                let scale = normal[k].abs();
                if scale > 0.0 {
                    normal.iter_mut().for_each(|a| *a /= scale);
                    bound /= scale;
                }
                Halfspace {
                    normal,
                    bound,
                    strict: true,
                }
            } else {
                // g·t + offset ≤ t_k + d_k
                let mut normal = gradient.to_vec();
                normal[k] -= 1.0;
                Halfspace {
                    normal,
                    bound: delays[k] - offset,
                    strict: false,
                }
            }
        })
        .collect()
}

/// Decides whether `halfspaces ∩ bx` is nonempty, with strict rows tightened
/// by `1e-7 · diameter · ‖normal‖`. Returns a witness point.
pub fn feasible_point(halfspaces: &[Halfspace], bx: &Hyperbox) -> Option<Vec<f64>> {
    let eps = STRICT_SHRINK * bx.diameter();
    let rows: Vec<Row> = halfspaces
        .iter()
        .map(|h| {
            let norm = h.normal.iter().map(|a| a * a).sum::<f64>().sqrt();
            Row {
                normal: h.normal.clone(),
                bound: if h.strict { h.bound - eps * norm } else { h.bound },
            }
        })
        .collect();
    find_feasible_point(&rows, bx.lo(), bx.hi())
}

fn check_neuron(weights: &[f64], delays: &[f64], theta: f64, bx: &Hyperbox) -> Result<()> {
    let d = weights.len();
    if delays.len() != d || bx.dim() != d {
        return Err(Error::DimensionMismatch {
            context: "region analysis",
            expected: d,
            found: if delays.len() != d { delays.len() } else { bx.dim() },
        });
    }
    if d == 0 {
        return Err(Error::InvalidParameter("a neuron needs at least one input".into()));
    }
    if d > MAX_REGION_INPUTS {
        return Err(Error::TooLarge(format!(
            "{d} inputs means 2^{d} subsets; at most {MAX_REGION_INPUTS} inputs are supported"
        )));
    }
    if !(theta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "threshold must be positive, got {theta}"
        )));
    }
    Ok(())
}

/// One descriptor per nonempty input subset with positive weight sum, each
/// tested for feasibility inside `bx`. Inputs are the presynaptic firing
/// times; `delays` are added before arrival.
pub fn enumerate_regions(weights: &[f64], delays: &[f64], theta: f64, bx: &Hyperbox) -> Result<Vec<RegionDescriptor>> {
    check_neuron(weights, delays, theta, bx)?;
    let d = weights.len();
    let descriptors = (1u32..(1u32 << d))
        .into_par_iter()
        .filter_map(|mask| {
            let in_subset: Vec<bool> = (0..d).map(|i| mask & (1 << i) != 0).collect();
            let subset: Vec<usize> = (0..d).filter(|&i| in_subset[i]).collect();
            let (gradient, offset) = affine_piece(weights, delays, theta, &subset)?;
            let halfspaces = halfspaces(&gradient, offset, delays, &in_subset);
            let witness = feasible_point(&halfspaces, bx);
            Some(RegionDescriptor {
                subset,
                gradient,
                offset,
                halfspaces,
                feasible_in_box: witness.is_some(),
                witness,
            })
        })
        .collect();
    Ok(descriptors)
}

/// Number of descriptors whose system meets `bx`.
pub fn count_feasible(descriptors: &[RegionDescriptor], bx: &Hyperbox) -> usize {
    descriptors
        .par_iter()
        .filter(|r| feasible_point(&r.halfspaces, bx).is_some())
        .count()
}

/// Feasible-region count on boxes doubled around `bx` until the count is the
/// same for two consecutive doublings. Returns the count and the final box.
pub fn stabilized_region_count(
    weights: &[f64],
    delays: &[f64],
    theta: f64,
    bx: &Hyperbox,
) -> Result<(usize, Hyperbox)> {
    const MAX_DOUBLINGS: usize = 40;
    let descriptors = enumerate_regions(weights, delays, theta, bx)?;
    let mut current = bx.clone();
    let mut counts = vec![count_feasible(&descriptors, &current)];
    for _ in 0..MAX_DOUBLINGS {
        current = current.scaled(2.0);
        counts.push(count_feasible(&descriptors, &current));
        let n = counts.len();
        if n >= 3 && counts[n - 1] == counts[n - 2] && counts[n - 2] == counts[n - 3] {
            break;
        }
    }
    Ok((*counts.last().expect("at least one count"), current))
}

/// Weights, delays and threshold of a one-layer, one-neuron network, with
/// auxiliary inputs treated as ordinary inputs after the payload.
pub fn single_neuron_parameters(net: &SpikingNetwork) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    if net.depth() != 1 || net.total_outputs() != 1 {
        return Err(Error::InvalidParameter(format!(
            "region enumeration needs a single neuron, got {} layers with {} outputs",
            net.depth(),
            net.total_outputs()
        )));
    }
    let layer = &net.layers()[0];
    Ok((
        layer.weights().column(0).to_vec(),
        layer.delays().column(0).to_vec(),
        layer.thresholds()[0],
    ))
}

/// Outcome of [`empirical_region_count`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EmpiricalRegions {
    /// Distinct affine pieces seen in clean cells.
    pub regions: usize,
    /// Cells whose centre produces no output spike.
    pub no_fire_cells: usize,
    /// Cells skipped because their stencil crossed a kink.
    pub discarded_cells: usize,
}

enum CellOutcome {
    Piece(Vec<f64>),
    NoFire,
    Discarded,
}

/// Counts affine pieces of the firing-time map of `net` over the payload
/// input times in `bx`, by finite differences at the centres of a
/// `grid_n^d` cell grid. Auxiliary inputs keep their fixed times.
///
/// A cell is used only if its central-difference stencil sees no kink, i.e.
/// all second differences along the axes vanish.
pub fn empirical_region_count(net: &SpikingNetwork, bx: &Hyperbox, grid_n: usize) -> Result<EmpiricalRegions> {
    let d = net.input_dim();
    if bx.dim() != d {
        return Err(Error::DimensionMismatch {
            context: "empirical region box",
            expected: d,
            found: bx.dim(),
        });
    }
    if grid_n == 0 {
        return Err(Error::InvalidParameter("grid needs at least one cell per axis".into()));
    }
    let cells = (grid_n as f64).powi(d as i32);
    if cells > MAX_GRID_CELLS as f64 {
        return Err(Error::TooLarge(format!(
            "{grid_n}^{d} grid cells exceed {MAX_GRID_CELLS}"
        )));
    }
    let cells = cells as usize;
    let width: Vec<f64> = (0..d).map(|i| (bx.hi()[i] - bx.lo()[i]) / grid_n as f64).collect();
    let scale = 1.0 + bx.radius();

    let eval = |t: &[f64]| -> Result<Option<Vec<f64>>> {
        let times: Vec<FiringTime> = t.iter().map(|&v| FiringTime::Finite(v)).collect();
        let out = network_forward(net, &times)?;
        Ok(out.iter().map(|f| f.finite()).collect())
    };

    let outcomes = (0..cells)
        .into_par_iter()
        .map(|cell| -> Result<CellOutcome> {
            let mut rest = cell;
            let centre: Vec<f64> = (0..d)
                .map(|i| {
                    let k = rest % grid_n;
                    rest /= grid_n;
                    bx.lo()[i] + (k as f64 + 0.5) * width[i]
                })
                .collect();
            let Some(f0) = eval(&centre)? else {
                return Ok(CellOutcome::NoFire);
            };
            let mut key = Vec::with_capacity(f0.len() * (d + 1));
            let mut gradients = vec![vec![0.0; d]; f0.len()];
            for i in 0..d {
                let h = width[i] / 4.0;
                if h == 0.0 {
                    continue;
                }
                let mut probe = centre.clone();
                probe[i] = centre[i] + h;
                let plus = eval(&probe)?;
                probe[i] = centre[i] - h;
                let minus = eval(&probe)?;
                let (Some(plus), Some(minus)) = (plus, minus) else {
                    return Ok(CellOutcome::Discarded);
                };
                for o in 0..f0.len() {
                    let curvature = plus[o] + minus[o] - 2.0 * f0[o];
                    if curvature.abs() > 1e-9 * (scale + f0[o].abs()) {
                        return Ok(CellOutcome::Discarded);
                    }
                    gradients[o][i] = (plus[o] - minus[o]) / (2.0 * h);
                }
            }
            for (o, g) in gradients.iter().enumerate() {
                let offset = f0[o] - g.iter().zip(&centre).map(|(a, x)| a * x).sum::<f64>();
                key.extend_from_slice(g);
                key.push(offset / scale);
            }
            Ok(CellOutcome::Piece(key))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut pieces: Vec<Vec<f64>> = Vec::new();
    let mut no_fire_cells = 0;
    let mut discarded_cells = 0;
    for outcome in outcomes {
        match outcome {
            CellOutcome::NoFire => no_fire_cells += 1,
            CellOutcome::Discarded => discarded_cells += 1,
            CellOutcome::Piece(key) => {
                let known = pieces
                    .iter()
                    .any(|p| p.iter().zip(&key).all(|(a, b)| (a - b).abs() <= CLUSTER_TOLERANCE));
                if !known {
                    pieces.push(key);
                }
            }
        }
    }
    Ok(EmpiricalRegions {
        regions: pieces.len(),
        no_fire_cells,
        discarded_cells,
    })
}
