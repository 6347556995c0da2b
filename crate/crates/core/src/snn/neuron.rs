//! Firing time of a single postsynaptic neuron.
//!
//! With an unbounded linear response window the membrane potential is
//! `P(t) = Σ_{a_i < t} w_i (t - a_i)`, a continuous piecewise-linear function
//! with kinks at the arrival times `a_i`. The neuron fires at the first `t`
//! where `P(t)` reaches the threshold. Contributing sets are always prefixes
//! of the arrivals sorted by time, so the event solver only needs to scan
//! those prefixes.

use crate::error::{Error, Result};

/// Relative tolerance for the residual `Σ w (t - a) = θ` in a certificate.
pub const CERTIFICATE_TOLERANCE: f64 = 1e-10;

/// Extra time simulated by the dense oracle beyond the latest possible crossing.
pub const ORACLE_HORIZON_MARGIN: f64 = 1.0;

const ORACLE_MAX_STEPS: f64 = 5e8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FiringTime {
    Finite(f64),
    Never,
}

impl FiringTime {
    pub fn finite(self) -> Option<f64> {
        match self {
            FiringTime::Finite(t) => Some(t),
            FiringTime::Never => None,
        }
    }

    pub fn is_never(self) -> bool {
        matches!(self, FiringTime::Never)
    }

    pub fn shifted(self, delta: f64) -> FiringTime {
        match self {
            FiringTime::Finite(t) => FiringTime::Finite(t + delta),
            FiringTime::Never => FiringTime::Never,
        }
    }
}

impl From<f64> for FiringTime {
    fn from(t: f64) -> Self {
        FiringTime::Finite(t)
    }
}

/// A presynaptic spike as seen by the postsynaptic neuron: the firing time of
/// the presynaptic neuron plus the synaptic delay, and the signed weight.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Arrival {
    pub time: f64,
    pub weight: f64,
}

impl Arrival {
    pub fn new(time: f64, weight: f64) -> Self {
        Arrival { time, weight }
    }
}

/// The set of arrivals that shaped a firing time, together with that time.
///
/// `contributing` holds indices into the arrival slice passed to
/// [`resolve_firing_time`], in ascending order of arrival time.
#[derive(Clone, Debug, PartialEq)]
pub struct ContributionCertificate {
    pub contributing: Vec<usize>,
    pub firing_time: FiringTime,
}

impl ContributionCertificate {
    fn never() -> Self {
        ContributionCertificate {
            contributing: Vec::new(),
            firing_time: FiringTime::Never,
        }
    }

    /// Sorted copy of the contributing indices.
    pub fn contributing_set(&self) -> Vec<usize> {
        let mut set = self.contributing.clone();
        set.sort_unstable();
        set
    }

    /// Checks the certificate against the arrivals it was issued for:
    /// contributing arrivals strictly precede the firing time, the others do
    /// not, the contributing weights sum to a positive value and the
    /// threshold equation holds up to [`CERTIFICATE_TOLERANCE`].
    pub fn verify(&self, arrivals: &[Arrival], threshold: f64) -> std::result::Result<(), String> {
        let t = match self.firing_time {
            FiringTime::Never => {
                return if self.contributing.is_empty() {
                    Ok(())
                } else {
                    Err("a Never certificate must have an empty contributing set".into())
                };
            }
            FiringTime::Finite(t) => t,
        };
        let mut member = vec![false; arrivals.len()];
        for &i in &self.contributing {
            if i >= arrivals.len() {
                return Err(format!("contributing index {i} out of range"));
            }
            member[i] = true;
        }
        let mut weight_sum = 0.0;
        let mut potential = 0.0;
        let mut scale = threshold;
        for (i, a) in arrivals.iter().enumerate() {
            if member[i] {
                if !(a.time < t) {
                    return Err(format!("contributing arrival {i} at {} is not before t = {t}", a.time));
                }
                weight_sum += a.weight;
                potential += a.weight * (t - a.time);
                scale += (a.weight * (t - a.time)).abs();
            } else if a.time < t {
                return Err(format!("non-contributing arrival {i} at {} precedes t = {t}", a.time));
            }
        }
        if !(weight_sum > 0.0) {
            return Err(format!("contributing weight sum {weight_sum} is not positive"));
        }
        let residual = (potential - threshold).abs();
        if residual > CERTIFICATE_TOLERANCE * scale {
            return Err(format!("threshold residual {residual} exceeds tolerance"));
        }
        Ok(())
    }
}

fn check_threshold(threshold: f64) -> Result<()> {
    if threshold > 0.0 && threshold.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "threshold must be positive and finite, got {threshold}"
        )))
    }
}

fn check_arrivals(arrivals: &[Arrival]) -> Result<()> {
    match arrivals
        .iter()
        .position(|a| !a.time.is_finite() || !a.weight.is_finite())
    {
        Some(i) => Err(Error::InvalidParameter(format!("arrival {i} is not finite"))),
        None => Ok(()),
    }
}

fn sorted_order(arrivals: &[Arrival]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..arrivals.len()).collect();
    order.sort_by(|&a, &b| arrivals[a].time.total_cmp(&arrivals[b].time));
    order
}

/// Event-driven firing time.
///
/// Arrivals are scanned in ascending time order, equal times as one group.
/// After each group the candidate `t = (θ + Σ w a) / Σ w` of the current
/// prefix is accepted if the prefix weight is positive and `t` does not
/// exceed the next arrival; an arrival landing exactly on `t` therefore does
/// not contribute. The first accepted prefix is the first threshold crossing.
pub fn resolve_firing_time(arrivals: &[Arrival], threshold: f64) -> Result<ContributionCertificate> {
    check_threshold(threshold)?;
    check_arrivals(arrivals)?;
    let order = sorted_order(arrivals);

    let mut slope = 0.0;
    let mut moment = 0.0;
    let mut prev_slope = 0.0;
    let mut start = 0;
    while start < order.len() {
        let group_time = arrivals[order[start]].time;
        let mut end = start;
        while end < order.len() && arrivals[order[end]].time == group_time {
            slope += arrivals[order[end]].weight;
            moment += arrivals[order[end]].weight * group_time;
            end += 1;
        }
        let next = order.get(end).map_or(f64::INFINITY, |&i| arrivals[i].time);
        if slope > 0.0 {
            let t = (threshold + moment) / slope;
            if t <= next {
                if t > group_time {
                    return Ok(ContributionCertificate {
                        contributing: order[..end].to_vec(),
                        firing_time: FiringTime::Finite(t),
                    });
                }
                // Rounding placed the crossing on or before this group even
                // though the previous prefix did not reach the threshold: the
                // potential hits θ exactly at `group_time`, so the group sits
                // on the boundary and is excluded.
                let contributing = if prev_slope > 0.0 {
                    &order[..start]
                } else {
                    &order[..end]
                };
                return Ok(ContributionCertificate {
                    contributing: contributing.to_vec(),
                    firing_time: FiringTime::Finite(group_time),
                });
            }
        }
        prev_slope = slope;
        start = end;
    }
    Ok(ContributionCertificate::never())
}

/// Brute-force firing time by dense time stepping of the membrane potential.
///
/// Starting at the earliest arrival, the potential is evaluated on the grid
/// `t_k = t_0 + k dt` and the first grid time with `P(t_k) ≥ θ` is returned.
/// The result overshoots the true crossing by less than `dt`.
pub fn oracle_firing_time(arrivals: &[Arrival], threshold: f64, dt: f64) -> Result<FiringTime> {
    check_threshold(threshold)?;
    check_arrivals(arrivals)?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
    }
    if arrivals.is_empty() {
        return Ok(FiringTime::Never);
    }
    let mut sorted: Vec<Arrival> = arrivals.to_vec();
    sorted.sort_by(|a, b| a.time.total_cmp(&b.time));

    // The potential can only rise while some prefix has positive slope.
    let mut prefix_slope = 0.0;
    let mut rises = false;
    for a in &sorted {
        prefix_slope += a.weight;
        rises |= prefix_slope > 0.0;
    }
    if !rises {
        return Ok(FiringTime::Never);
    }

    let start = sorted[0].time;
    let latest = sorted[sorted.len() - 1].time;
    let total_slope = prefix_slope;
    let potential_at_latest: f64 = sorted.iter().map(|a| a.weight * (latest - a.time)).sum();
    // Past the latest arrival the potential is affine with the total slope.
    let horizon = if total_slope > 0.0 {
        latest + (threshold - potential_at_latest).max(0.0) / total_slope + ORACLE_HORIZON_MARGIN
    } else {
        latest + ORACLE_HORIZON_MARGIN
    };
    let steps = ((horizon - start) / dt).ceil();
    if steps > ORACLE_MAX_STEPS {
        return Err(Error::TooLarge(format!(
            "{steps} oracle steps exceed the limit; increase dt"
        )));
    }

    let steps = steps as u64;
    let mut next = 0;
    let mut slope = 0.0;
    let mut moment = 0.0;
    for k in 0..=steps {
        let t = start + k as f64 * dt;
        while next < sorted.len() && sorted[next].time < t {
            slope += sorted[next].weight;
            moment += sorted[next].weight * sorted[next].time;
            next += 1;
        }
        if slope * t - moment >= threshold {
            return Ok(FiringTime::Finite(t));
        }
    }
    Ok(FiringTime::Never)
}
