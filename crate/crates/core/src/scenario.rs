//! Critical-event timelines and seeded Monte Carlo evaluation.
//!
//! A [`ScenarioSpec`] lists events (pipe failures, pump failures, demand and
//! supply scaling), each active on timesteps `onset <= t < repair`. Events
//! that pick pipes at random are realised from the spec's seed; Monte Carlo
//! replicate `r` uses seed `seed ^ r`, so replicates are independent of
//! evaluation order and can run in parallel.

use std::fs;
use std::path::Path;

use itertools::Itertools;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hydraulic::{allocate, classify_states, Conditions, HydraulicSeries};
use crate::metrics::performance::{
    flow_based_resilience, hashimoto_recovery, user_severity, zhuang_availability,
};
use crate::network::Network;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    /// Listed pipes fail, plus `random_count` further pipes drawn at random.
    PipeFailure {
        #[serde(default)]
        pipes: Vec<String>,
        #[serde(default)]
        random_count: usize,
    },
    PumpFailure { pumps: Vec<String> },
    /// Scale demand at the listed junctions (all junctions if empty).
    DemandScale {
        factor: f64,
        #[serde(default)]
        nodes: Vec<String>,
    },
    /// Scale outflow at the listed sources (all sources if empty).
    SupplyScale {
        factor: f64,
        #[serde(default)]
        sources: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    #[serde(flatten)]
    pub kind: EventKind,
    #[serde(default)]
    pub onset: usize,
    /// First timestep after restoration; `None` means never restored.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repair: Option<usize>,
}

impl Event {
    fn active(&self, t: usize) -> bool {
        t >= self.onset && self.repair.is_none_or(|r| t < r)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ScenarioSpec {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub events: Vec<Event>,
}

/// How random event elements are realised in Monte Carlo runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// Draw from the replicate's seeded RNG.
    #[default]
    Random,
    /// Replicate r takes the r-th combination (mod the total count) of the
    /// random elements in lexicographic pipe-id order.
    Exhaustive,
}

/// An event with ids resolved to indices and random picks made.
#[derive(Debug, Clone)]
struct Resolved {
    pipes: Vec<usize>,
    pumps: Vec<usize>,
    demand: Option<(f64, Vec<usize>)>,
    supply: Option<(f64, Vec<usize>)>,
    event: Event,
}

fn check_factor(factor: f64) -> Result<()> {
    if factor.is_finite() && factor > 0.0 {
        Ok(())
    } else {
        Err(Error::validation(format!("scale factor {factor} must be > 0")))
    }
}

impl ScenarioSpec {
    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::parse("scenario JSON", e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("scenario serializes");
        out.push('\n');
        out
    }

    /// Pipes eligible for the random part of each event, sorted by id.
    fn random_pools(&self, net: &Network) -> Result<Vec<(Vec<usize>, usize)>> {
        let mut pools = Vec::new();
        for e in &self.events {
            if let EventKind::PipeFailure { pipes, random_count } = &e.kind {
                if *random_count > 0 {
                    let listed = pipes
                        .iter()
                        .map(|id| net.pipe_index(id))
                        .collect::<Result<Vec<_>>>()?;
                    let pool: Vec<usize> = net
                        .pipes_by_id()
                        .iter()
                        .copied()
                        .filter(|p| !listed.contains(p))
                        .collect();
                    if *random_count > pool.len() {
                        return Err(Error::validation(format!(
                            "cannot fail {random_count} random pipes out of {}",
                            pool.len()
                        )));
                    }
                    pools.push((pool, *random_count));
                }
            }
        }
        Ok(pools)
    }

    /// Number of distinct realisations of the random elements.
    pub fn combination_count(&self, net: &Network) -> Result<u128> {
        Ok(self
            .random_pools(net)?
            .iter()
            .map(|(pool, k)| binomial(pool.len(), *k))
            .product())
    }

    fn resolve(&self, net: &Network, picks: &[Vec<usize>]) -> Result<Vec<Resolved>> {
        let mut picks = picks.iter();
        self.events
            .iter()
            .map(|e| {
                if let Some(r) = e.repair {
                    if r <= e.onset {
                        return Err(Error::validation(format!(
                            "event repair {r} not after onset {}",
                            e.onset
                        )));
                    }
                }
                let mut out = Resolved {
                    pipes: Vec::new(),
                    pumps: Vec::new(),
                    demand: None,
                    supply: None,
                    event: e.clone(),
                };
                match &e.kind {
                    EventKind::PipeFailure { pipes, random_count } => {
                        out.pipes = pipes
                            .iter()
                            .map(|id| net.pipe_index(id))
                            .collect::<Result<_>>()?;
                        if *random_count > 0 {
                            out.pipes.extend(picks.next().expect("one pick per random event"));
                        }
                    }
                    EventKind::PumpFailure { pumps } => {
                        out.pumps = pumps
                            .iter()
                            .map(|id| net.pump_index(id))
                            .collect::<Result<_>>()?;
                    }
                    EventKind::DemandScale { factor, nodes } => {
                        check_factor(*factor)?;
                        let targets = if nodes.is_empty() {
                            (0..net.junctions().len()).collect()
                        } else {
                            nodes
                                .iter()
                                .map(|id| {
                                    let n = net.node_index(id)?;
                                    if net.is_source(n) {
                                        Err(Error::validation(format!("`{id}` is not a junction")))
                                    } else {
                                        Ok(n)
                                    }
                                })
                                .collect::<Result<_>>()?
                        };
                        out.demand = Some((*factor, targets));
                    }
                    EventKind::SupplyScale { factor, sources } => {
                        check_factor(*factor)?;
                        let targets = if sources.is_empty() {
                            (0..net.sources().len()).collect()
                        } else {
                            sources
                                .iter()
                                .map(|id| {
                                    let n = net.node_index(id)?;
                                    if net.is_source(n) {
                                        Ok(n - net.junctions().len())
                                    } else {
                                        Err(Error::validation(format!("`{id}` is not a source")))
                                    }
                                })
                                .collect::<Result<_>>()?
                        };
                        out.supply = Some((*factor, targets));
                    }
                }
                Ok(out)
            })
            .collect()
    }

    fn random_picks(&self, net: &Network, seed: u64) -> Result<Vec<Vec<usize>>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(self
            .random_pools(net)?
            .into_iter()
            .map(|(pool, k)| {
                let mut pick: Vec<usize> = pool.choose_multiple(&mut rng, k).copied().collect();
                pick.sort_unstable();
                pick
            })
            .collect())
    }

    fn exhaustive_picks(&self, net: &Network, replicate: usize) -> Result<Vec<Vec<usize>>> {
        let pools = self.random_pools(net)?;
        let mut index = replicate as u128 % self.combination_count(net)?.max(1);
        Ok(pools
            .into_iter()
            .map(|(pool, k)| {
                let count = binomial(pool.len(), k);
                let nth = (index % count) as usize;
                index /= count;
                pool.into_iter()
                    .combinations(k)
                    .nth(nth)
                    .expect("index below combination count")
            })
            .collect())
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

fn conditions_at(net: &Network, events: &[Resolved], t: usize) -> Conditions {
    let mut c = Conditions::intact(net);
    for r in events.iter().filter(|r| r.event.active(t)) {
        for &p in &r.pipes {
            c.failed_pipes[p] = true;
        }
        for &p in &r.pumps {
            c.failed_pumps[p] = true;
        }
        if let Some((factor, nodes)) = &r.demand {
            for &j in nodes {
                c.demand_scale[j] *= factor;
            }
        }
        if let Some((factor, sources)) = &r.supply {
            for &s in sources {
                c.supply_scale[s] *= factor;
            }
        }
    }
    c
}

fn run_timeline(net: &Network, events: &[Resolved], horizon: usize) -> Result<HydraulicSeries> {
    if horizon == 0 {
        return Err(Error::validation("horizon must be at least one timestep"));
    }
    let mut steps: Vec<HydraulicSeries> = Vec::with_capacity(horizon);
    let mut last: Option<Conditions> = None;
    for t in 0..horizon {
        let c = conditions_at(net, events, t);
        let step = match (&last, steps.last()) {
            (Some(prev), Some(series)) if *prev == c => series.clone(),
            _ => allocate(net, &c)?.to_series(net),
        };
        steps.push(step);
        last = Some(c);
    }
    HydraulicSeries::concat(&steps)
}

/// Surrogate series over `horizon` timesteps under the spec's events, with
/// random elements drawn from `spec.seed`.
pub fn apply_scenario(net: &Network, spec: &ScenarioSpec, horizon: usize) -> Result<HydraulicSeries> {
    let picks = spec.random_picks(net, spec.seed)?;
    run_timeline(net, &spec.resolve(net, &picks)?, horizon)
}

/// Metric evaluated per Monte Carlo replicate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum McMetric {
    Zhuang,
    Hashimoto { threshold: f64 },
    FlowBasedResilience,
    /// Smallest user severity over junctions with demand at every step.
    UserSeverityMin,
}

pub const MC_METRIC_NAMES: [&str; 4] = ["zhuang", "hashimoto", "fr", "user_severity_min"];

impl McMetric {
    pub fn parse(name: &str, threshold: f64) -> Result<Self> {
        match name {
            "zhuang" | "zhuang_availability" => Ok(McMetric::Zhuang),
            "hashimoto" | "hashimoto_recovery" => Ok(McMetric::Hashimoto { threshold }),
            "fr" | "flow_based_resilience" => Ok(McMetric::FlowBasedResilience),
            "user_severity_min" => Ok(McMetric::UserSeverityMin),
            other => Err(Error::UnknownMetric {
                name: other.to_owned(),
                valid: MC_METRIC_NAMES.join(", "),
            }),
        }
    }

    /// Metric value and whether it carried warnings.
    fn evaluate(&self, net: &Network, series: &HydraulicSeries) -> Result<(f64, bool)> {
        let v = match *self {
            McMetric::Zhuang => zhuang_availability(series)?,
            McMetric::Hashimoto { threshold } => {
                hashimoto_recovery(&classify_states(series, threshold)?)?
            }
            McMetric::FlowBasedResilience => flow_based_resilience(net, series)?,
            McMetric::UserSeverityMin => {
                let mut worst: Option<crate::report::MetricValue> = None;
                for (i, node) in series.nodes().iter().enumerate() {
                    if series.window().all(|t| series.demand(t, i) > 0.0) {
                        let v = user_severity(series, node)?;
                        if worst.as_ref().is_none_or(|w| v.value < w.value) {
                            worst = Some(v);
                        }
                    }
                }
                worst.ok_or_else(|| {
                    Error::UndefinedInput("no junction has demand at every step".into())
                })?
            }
        };
        Ok((v.value, !v.warnings.is_empty()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonteCarloConfig {
    pub replicates: usize,
    pub horizon: usize,
    pub metric: McMetric,
    pub sampling: Sampling,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub p05: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub p95: f64,
}

impl Summary {
    /// Summary of values taken in replicate order. Quantiles interpolate
    /// linearly between order statistics.
    pub fn of(values: &[f64]) -> Self {
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let pos = p * (sorted.len() - 1) as f64;
            let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
            sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
        };
        Summary {
            mean: values.iter().sum::<f64>() / values.len() as f64,
            min: sorted[0],
            max: sorted[sorted.len() - 1],
            p05: q(0.05),
            p25: q(0.25),
            p50: q(0.5),
            p75: q(0.75),
            p95: q(0.95),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloResult {
    pub config: MonteCarloConfig,
    pub seed: u64,
    pub values: Vec<f64>,
    /// Replicates whose metric value carried a warning.
    pub flagged: Vec<usize>,
    pub summary: Summary,
}

impl MonteCarloResult {
    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("result serializes");
        out.push('\n');
        out
    }

    /// `replicate,seed,value` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("replicate,seed,value\n");
        for (r, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{r},{},{v}\n", self.seed ^ r as u64));
        }
        out
    }
}

/// Evaluate `config.metric` over `config.replicates` realisations of the
/// template's random events.
pub fn monte_carlo(
    net: &Network,
    template: &ScenarioSpec,
    config: &MonteCarloConfig,
) -> Result<MonteCarloResult> {
    if config.replicates == 0 {
        return Err(Error::validation("need at least one replicate"));
    }
    template.resolve(net, &template.random_picks(net, template.seed)?)?;

    let outcomes: Vec<Result<(f64, bool)>> = (0..config.replicates)
        .into_par_iter()
        .map(|r| {
            let picks = match config.sampling {
                Sampling::Random => template.random_picks(net, template.seed ^ r as u64)?,
                Sampling::Exhaustive => template.exhaustive_picks(net, r)?,
            };
            let series = run_timeline(net, &template.resolve(net, &picks)?, config.horizon)?;
            config.metric.evaluate(net, &series)
        })
        .collect();

    let mut values = Vec::with_capacity(outcomes.len());
    let mut flagged = Vec::new();
    for (r, outcome) in outcomes.into_iter().enumerate() {
        let (v, warned) = outcome?;
        values.push(v);
        if warned {
            flagged.push(r);
        }
    }
    Ok(MonteCarloResult {
        config: *config,
        seed: template.seed,
        summary: Summary::of(&values),
        values,
        flagged,
    })
}
