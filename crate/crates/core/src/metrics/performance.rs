//! Performance-based metrics: functions of delivered flow and head relative
//! to demand and required head.

use std::collections::HashMap;

use itertools::Itertools;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hydraulic::{allocate, BinaryStateSeries, Conditions, HydraulicSeries, State};
use crate::network::{Network, Pipe};
use crate::report::{MetricValue, NominalRange};

/// Specific weight of water, N/m³.
pub const SPECIFIC_WEIGHT_WATER: f64 = 9810.0;

/// Default search depth for [`buffering_capacity`].
pub const DEFAULT_MAX_K: usize = 2;

/// Average recovery rate γ = ρ / (1 − α) estimated from one trajectory.
///
/// α is the share of satisfactory states over all `T` states and ρ the
/// share of S→F transitions over the `T − 1` consecutive pairs. Short
/// series can push γ above 1; the raw value is returned with a warning.
/// A series with no failure returns 1 flagged "no failure observed".
pub fn hashimoto_recovery(states: &BinaryStateSeries) -> Result<MetricValue> {
    let s = states.states();
    if s.len() < 2 {
        return Err(Error::validation(
            "recovery rate needs at least two states",
        ));
    }
    let n = s.len() as f64;
    let satisfactory = s.iter().filter(|&&x| x == State::Satisfactory).count();
    if satisfactory == s.len() {
        return Ok(MetricValue::new("hashimoto_recovery", 1.0, NominalRange::UNIT)?
            .with_warning("no failure observed; recovery rate defined as 1"));
    }
    let s_to_f = s
        .iter()
        .tuple_windows()
        .filter(|&(a, b)| *a == State::Satisfactory && *b == State::Failure)
        .count();
    let alpha = satisfactory as f64 / n;
    let rho = s_to_f as f64 / (n - 1.0);
    MetricValue::new("hashimoto_recovery", rho / (1.0 - alpha), NominalRange::UNIT)
}

/// Integral water service availability: total delivered over total demand
/// across all nodes and window timesteps.
pub fn zhuang_availability(series: &HydraulicSeries) -> Result<MetricValue> {
    let (mut supplied, mut demanded) = (0.0, 0.0);
    for t in series.window() {
        supplied += series.total_delivered(t);
        demanded += series.total_demand(t);
    }
    if demanded <= 0.0 {
        return Err(Error::UndefinedInput(
            "availability undefined for zero total demand".into(),
        ));
    }
    Ok(
        MetricValue::new("zhuang_availability", supplied / demanded, NominalRange::UNIT)?
            .with_digest(series.digest()),
    )
}

/// Probability that the pipe fails: 1 − exp(−RR·L).
pub fn pipe_fragility(pipe: &Pipe) -> f64 {
    fragility(pipe.repair_rate, pipe.length)
}

pub fn fragility(repair_rate: f64, length: f64) -> f64 {
    -(-repair_rate * length).exp_m1()
}

/// Map each series node to its junction index, requiring identical sets.
fn junction_positions(net: &Network, series: &HydraulicSeries) -> Result<Vec<usize>> {
    let lookup: HashMap<&str, usize> = net
        .junctions()
        .iter()
        .enumerate()
        .map(|(i, j)| (j.id.as_str(), i))
        .collect();
    if series.nodes().len() != lookup.len() {
        return Err(Error::validation(format!(
            "series has {} nodes, network has {} junctions",
            series.nodes().len(),
            lookup.len()
        )));
    }
    series
        .nodes()
        .iter()
        .map(|id| {
            lookup
                .get(id.as_str())
                .copied()
                .ok_or_else(|| Error::validation(format!("series node `{id}` is not a junction")))
        })
        .collect()
}

/// Flow-based resilience: head surplus weighted by demand and by the summed
/// reliability (1 − P_f) of each node's incident pipes, normalised by four
/// times the required power.
pub fn flow_based_resilience(net: &Network, series: &HydraulicSeries) -> Result<MetricValue> {
    let positions = junction_positions(net, series)?;
    let reliability: Vec<f64> = positions
        .iter()
        .map(|&j| {
            net.incident(j)
                .iter()
                .map(|&(p, _)| 1.0 - pipe_fragility(&net.pipes()[p]))
                .sum()
        })
        .collect();
    let (mut numerator, mut denominator) = (0.0, 0.0);
    for t in series.window() {
        for (i, weight) in reliability.iter().enumerate() {
            let q = series.demand(t, i);
            let required = series.required_head(t, i);
            numerator += weight * q * (series.head(t, i) - required);
            denominator += q * required;
        }
    }
    if denominator <= 0.0 {
        return Err(Error::UndefinedInput(
            "flow-based resilience denominator is zero".into(),
        ));
    }
    Ok(MetricValue::new(
        "flow_based_resilience",
        numerator / (4.0 * denominator),
        NominalRange::UNIT,
    )?
    .with_digest(net.digest())
    .with_digest(series.digest()))
}

/// Supply over demand, uncapped.
pub fn user_functionality(supply: f64, demand: f64) -> Result<f64> {
    if demand <= 0.0 {
        return Err(Error::UndefinedInput(
            "user functionality undefined for zero demand".into(),
        ));
    }
    Ok(supply / demand)
}

/// Minimum user functionality of one node over the analysis window.
pub fn user_severity(series: &HydraulicSeries, node_id: &str) -> Result<MetricValue> {
    let i = series.node_position(node_id)?;
    let mut worst = f64::INFINITY;
    for t in series.window() {
        worst = worst.min(user_functionality(series.delivered(t, i), series.demand(t, i))?);
    }
    Ok(MetricValue::new("user_severity", worst, NominalRange::UNIT)?
        .with_digest(series.digest()))
}

/// Todini resilience index for a single-timestep state.
///
/// Surplus head power at the junctions over the power available beyond the
/// required minimum. Head deficits contribute negatively.
pub fn todini_index(net: &Network, state: &HydraulicSeries) -> Result<MetricValue> {
    let window = state.window();
    if window.len() != 1 {
        return Err(Error::validation(format!(
            "Todini index needs a single-timestep state, got {} steps",
            window.len()
        )));
    }
    junction_positions(net, state)?;
    let t = window.start;
    let (mut surplus, mut required) = (0.0, 0.0);
    for i in 0..state.nodes().len() {
        let q = state.demand(t, i);
        let h_req = state.required_head(t, i);
        surplus += q * (state.head(t, i) - h_req);
        required += q * h_req;
    }
    let supplied: f64 = net.sources().iter().map(|s| s.outflow * s.total_head).sum();
    let pumped: f64 = net
        .pumps()
        .iter()
        .map(|p| p.power / SPECIFIC_WEIGHT_WATER)
        .sum();
    let denominator = supplied + pumped - required;
    if denominator <= 0.0 {
        return Err(Error::Infeasible(format!(
            "available power does not exceed required power (denominator {denominator})"
        )));
    }
    Ok(
        MetricValue::new("todini_index", surplus / denominator, NominalRange::UNIT)?
            .with_digest(net.digest())
            .with_digest(state.digest()),
    )
}

/// A component that can fail in a structural-change analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Component {
    Pipe(usize),
    Pump(usize),
}

/// Per-component failure masks handed to a feasibility oracle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FailureSet {
    pub pipes: Vec<bool>,
    pub pumps: Vec<bool>,
}

impl FailureSet {
    pub fn none(net: &Network) -> Self {
        FailureSet {
            pipes: vec![false; net.pipes().len()],
            pumps: vec![false; net.pumps().len()],
        }
    }

    pub fn from_components(net: &Network, components: &[Component]) -> Self {
        let mut set = FailureSet::none(net);
        for c in components {
            match *c {
                Component::Pipe(p) => set.pipes[p] = true,
                Component::Pump(p) => set.pumps[p] = true,
            }
        }
        set
    }
}

/// Pipes (ascending id) followed by pumps (ascending id).
pub fn failable_components(net: &Network) -> Vec<Component> {
    let mut pumps: Vec<usize> = (0..net.pumps().len()).collect();
    pumps.sort_by(|&a, &b| net.pumps()[a].id.cmp(&net.pumps()[b].id));
    net.pipes_by_id()
        .iter()
        .map(|&p| Component::Pipe(p))
        .chain(pumps.into_iter().map(Component::Pump))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BufferingCapacity {
    /// Largest k such that every failure set of size ≤ k is feasible.
    pub k: usize,
    pub max_k: usize,
    /// First infeasible set of size k + 1 in enumeration order, if k < max_k.
    #[serde(skip)]
    pub witness: Option<Vec<Component>>,
}

/// Buffering capacity (k-resilience) by exhaustive enumeration of failure
/// sets up to `max_k` components. Cost grows as C(m, k); keep `max_k` small.
///
/// The oracle must be pure; sets of equal size are evaluated in parallel
/// and the reported witness is the first violation in enumeration order.
pub fn buffering_capacity<F>(net: &Network, feasibility: F, max_k: usize) -> Result<BufferingCapacity>
where
    F: Fn(&FailureSet) -> bool + Sync,
{
    let components = failable_components(net);
    if max_k > components.len() {
        return Err(Error::validation(format!(
            "max_k {max_k} exceeds the {} failable components",
            components.len()
        )));
    }
    if !feasibility(&FailureSet::none(net)) {
        return Err(Error::BaselineInfeasible);
    }
    for size in 1..=max_k {
        let sets: Vec<Vec<Component>> = components.iter().copied().combinations(size).collect();
        let violation = sets
            .par_iter()
            .find_first(|set| !feasibility(&FailureSet::from_components(net, set)));
        if let Some(set) = violation {
            return Ok(BufferingCapacity {
                k: size - 1,
                max_k,
                witness: Some(set.clone()),
            });
        }
    }
    Ok(BufferingCapacity {
        k: max_k,
        max_k,
        witness: None,
    })
}

/// Feasible when every junction stays connected to an active source.
pub fn connectivity_oracle(net: &Network) -> impl Fn(&FailureSet) -> bool + Sync + '_ {
    move |failures| {
        let active = net.active_sources(&failures.pumps);
        let reach = net.reachable_from_sources(&failures.pipes, Some(&active));
        (0..net.junctions().len()).all(|j| reach[j])
    }
}

/// Feasible when the surrogate allocator delivers at least `threshold` of
/// total demand.
pub fn supply_oracle(net: &Network, threshold: f64) -> impl Fn(&FailureSet) -> bool + Sync + '_ {
    move |failures| {
        let conditions = Conditions {
            failed_pipes: failures.pipes.clone(),
            failed_pumps: failures.pumps.clone(),
            ..Conditions::intact(net)
        };
        let demand = net.total_demand();
        let alloc = allocate(net, &conditions).expect("intact-shaped conditions");
        demand == 0.0 || alloc.total_delivered() >= threshold * demand * (1.0 - 1e-12)
    }
}
