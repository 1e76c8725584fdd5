//! Water distribution network model.
//!
//! A [`Network`] is an undirected multigraph whose nodes are junctions and
//! sources (reservoirs) and whose edges are pipes. Pumps are failable
//! components that add power to the system; a pump may be attached to a
//! source, in which case the source cannot deliver while the pump is down.
//!
//! Parallel pipes are allowed, self-loops are rejected. Once constructed a
//! network is immutable.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Unit used for volumetric flows in a network file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowUnits {
    /// Litres per second.
    Lps,
    /// Cubic metres per second.
    #[default]
    M3s,
}

impl FlowUnits {
    fn to_m3s(self, value: f64) -> f64 {
        match self {
            FlowUnits::Lps => value / 1000.0,
            FlowUnits::M3s => value,
        }
    }
}

impl std::str::FromStr for FlowUnits {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lps" => Ok(FlowUnits::Lps),
            "m3s" => Ok(FlowUnits::M3s),
            other => Err(Error::validation(format!(
                "unknown flow unit `{other}` (expected lps or m3s)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Junction {
    pub id: String,
    /// m
    pub elevation: f64,
    /// Design demand q*, m³/s.
    pub design_demand: f64,
    /// Minimum required total head h*, m.
    pub required_head: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Source {
    pub id: String,
    /// Total head H, m.
    pub total_head: f64,
    /// Outflow Q, m³/s. Also the supply cap used by the surrogate allocator.
    pub outflow: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pump {
    pub id: String,
    /// Power introduced to the network, W.
    pub power: f64,
    /// Source fed by this pump, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pipe {
    pub id: String,
    pub from: String,
    pub to: String,
    /// m
    pub length: f64,
    /// m
    pub diameter: f64,
    pub friction_factor: f64,
    /// Repairs per metre.
    #[serde(default)]
    pub repair_rate: f64,
    /// Maximum conveyed flow, m³/s. Only the surrogate allocator reads it.
    pub capacity: f64,
}

impl Pipe {
    /// Hydraulic resistance term f·L/D.
    pub fn resistance(&self) -> f64 {
        self.friction_factor * self.length / self.diameter
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Junction(usize),
    Source(usize),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    units: Option<FlowUnits>,
    junctions: Vec<Junction>,
    sources: Vec<Source>,
    #[serde(default)]
    pumps: Vec<Pump>,
    pipes: Vec<Pipe>,
}

/// Validated water distribution network.
///
/// Nodes are indexed junctions first, then sources. Incidence lists are kept
/// in ascending pipe-id order so every traversal is deterministic.
#[derive(Debug, Clone)]
pub struct Network {
    junctions: Vec<Junction>,
    sources: Vec<Source>,
    pumps: Vec<Pump>,
    pipes: Vec<Pipe>,
    node_lookup: HashMap<String, usize>,
    pipe_lookup: HashMap<String, usize>,
    pump_lookup: HashMap<String, usize>,
    endpoints: Vec<(usize, usize)>,
    incidence: Vec<Vec<(usize, usize)>>,
    pipe_order: Vec<usize>,
    pump_source: Vec<Option<usize>>,
}

fn check(cond: bool, message: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::validation(message()))
    }
}

impl Network {
    pub fn new(
        junctions: Vec<Junction>,
        sources: Vec<Source>,
        pumps: Vec<Pump>,
        pipes: Vec<Pipe>,
    ) -> Result<Self> {
        check(!junctions.is_empty(), || "network has no junctions".into())?;
        check(!sources.is_empty(), || "network has no sources".into())?;

        let mut node_lookup = HashMap::new();
        let mut seen = HashSet::new();
        let node_ids = junctions
            .iter()
            .map(|j| &j.id)
            .chain(sources.iter().map(|s| &s.id));
        for (idx, id) in node_ids.enumerate() {
            check(!id.is_empty(), || "empty node id".into())?;
            check(seen.insert(id.clone()), || format!("duplicate id `{id}`"))?;
            node_lookup.insert(id.clone(), idx);
        }
        let mut pump_lookup = HashMap::new();
        for (idx, pump) in pumps.iter().enumerate() {
            check(!pump.id.is_empty(), || "empty pump id".into())?;
            check(seen.insert(pump.id.clone()), || {
                format!("duplicate id `{}`", pump.id)
            })?;
            pump_lookup.insert(pump.id.clone(), idx);
        }

        for j in &junctions {
            check(j.elevation.is_finite(), || {
                format!("junction `{}`: elevation must be finite", j.id)
            })?;
            check(j.design_demand.is_finite() && j.design_demand >= 0.0, || {
                format!("junction `{}`: design demand must be >= 0", j.id)
            })?;
            check(j.required_head.is_finite() && j.required_head >= 0.0, || {
                format!("junction `{}`: required head must be >= 0", j.id)
            })?;
        }
        for s in &sources {
            check(s.total_head.is_finite() && s.total_head > 0.0, || {
                format!("source `{}`: total head must be > 0", s.id)
            })?;
            check(s.outflow.is_finite() && s.outflow >= 0.0, || {
                format!("source `{}`: outflow must be >= 0", s.id)
            })?;
        }
        let n_junctions = junctions.len();
        let mut pump_source = Vec::with_capacity(pumps.len());
        for p in &pumps {
            check(p.power.is_finite() && p.power >= 0.0, || {
                format!("pump `{}`: power must be >= 0", p.id)
            })?;
            let src = match &p.source {
                None => None,
                Some(sid) => match node_lookup.get(sid) {
                    Some(&n) if n >= n_junctions => Some(n - n_junctions),
                    _ => {
                        return Err(Error::validation(format!(
                            "pump `{}` references unknown source `{sid}`",
                            p.id
                        )))
                    }
                },
            };
            pump_source.push(src);
        }

        let mut pipe_lookup = HashMap::new();
        let mut endpoints = Vec::with_capacity(pipes.len());
        for (idx, p) in pipes.iter().enumerate() {
            check(!p.id.is_empty(), || "empty pipe id".into())?;
            check(pipe_lookup.insert(p.id.clone(), idx).is_none(), || {
                format!("duplicate pipe id `{}`", p.id)
            })?;
            let a = *node_lookup.get(&p.from).ok_or_else(|| {
                Error::validation(format!("pipe `{}` references unknown node `{}`", p.id, p.from))
            })?;
            let b = *node_lookup.get(&p.to).ok_or_else(|| {
                Error::validation(format!("pipe `{}` references unknown node `{}`", p.id, p.to))
            })?;
            check(a != b, || format!("pipe `{}` is a self-loop", p.id))?;
            check(p.length.is_finite() && p.length > 0.0, || {
                format!("pipe `{}`: length must be > 0", p.id)
            })?;
            check(p.diameter.is_finite() && p.diameter > 0.0, || {
                format!("pipe `{}`: diameter must be > 0", p.id)
            })?;
            check(p.friction_factor.is_finite() && p.friction_factor > 0.0, || {
                format!("pipe `{}`: friction factor must be > 0", p.id)
            })?;
            check(p.repair_rate.is_finite() && p.repair_rate >= 0.0, || {
                format!("pipe `{}`: repair rate must be >= 0", p.id)
            })?;
            check(p.capacity.is_finite() && p.capacity >= 0.0, || {
                format!("pipe `{}`: capacity must be >= 0", p.id)
            })?;
            endpoints.push((a, b));
        }

        let mut pipe_order: Vec<usize> = (0..pipes.len()).collect();
        pipe_order.sort_by(|&x, &y| pipes[x].id.cmp(&pipes[y].id));
        let mut incidence = vec![Vec::new(); n_junctions + sources.len()];
        for &p in &pipe_order {
            let (a, b) = endpoints[p];
            incidence[a].push((p, b));
            incidence[b].push((p, a));
        }

        Ok(Network {
            junctions,
            sources,
            pumps,
            pipes,
            node_lookup,
            pipe_lookup,
            pump_lookup,
            endpoints,
            incidence,
            pipe_order,
            pump_source,
        })
    }

    /// Parse a network from JSON. Flows are converted to m³/s using the
    /// file's `units` key, falling back to `default_units` when absent.
    pub fn from_json_str(text: &str, default_units: FlowUnits) -> Result<Self> {
        let file: NetworkFile =
            serde_json::from_str(text).map_err(|e| Error::parse("network JSON", e))?;
        let units = file.units.unwrap_or(default_units);
        let junctions = file
            .junctions
            .into_iter()
            .map(|j| Junction {
                design_demand: units.to_m3s(j.design_demand),
                ..j
            })
            .collect();
        let sources = file
            .sources
            .into_iter()
            .map(|s| Source {
                outflow: units.to_m3s(s.outflow),
                ..s
            })
            .collect();
        let pipes = file
            .pipes
            .into_iter()
            .map(|p| Pipe {
                capacity: units.to_m3s(p.capacity),
                ..p
            })
            .collect();
        Network::new(junctions, sources, file.pumps, pipes)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::load_with_units(path, FlowUnits::M3s)
    }

    pub fn load_with_units(path: impl AsRef<Path>, default_units: FlowUnits) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text, default_units).map_err(|e| match e {
            Error::Parse { message, .. } => Error::parse(path.display().to_string(), message),
            other => other,
        })
    }

    /// Canonical JSON form: SI units, explicit `units` key, input order kept.
    pub fn to_json_string(&self) -> String {
        let file = NetworkFile {
            units: Some(FlowUnits::M3s),
            junctions: self.junctions.clone(),
            sources: self.sources.clone(),
            pumps: self.pumps.clone(),
            pipes: self.pipes.clone(),
        };
        let mut out = serde_json::to_string_pretty(&file).expect("network serializes");
        out.push('\n');
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json_string()).map_err(|e| Error::io(path, e))
    }

    /// SHA-256 of the canonical JSON, hex encoded.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_json_string().as_bytes()))
    }

    pub fn junctions(&self) -> &[Junction] {
        &self.junctions
    }

    pub fn sources(&self) -> &[Source] {
        &self.sources
    }

    pub fn pumps(&self) -> &[Pump] {
        &self.pumps
    }

    pub fn pipes(&self) -> &[Pipe] {
        &self.pipes
    }

    pub fn node_count(&self) -> usize {
        self.junctions.len() + self.sources.len()
    }

    pub fn node_index(&self, id: &str) -> Result<usize> {
        self.node_lookup
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownId(id.to_owned()))
    }

    pub fn pipe_index(&self, id: &str) -> Result<usize> {
        self.pipe_lookup
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownId(id.to_owned()))
    }

    pub fn pump_index(&self, id: &str) -> Result<usize> {
        self.pump_lookup
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownId(id.to_owned()))
    }

    pub fn node_kind(&self, node: usize) -> NodeKind {
        if node < self.junctions.len() {
            NodeKind::Junction(node)
        } else {
            NodeKind::Source(node - self.junctions.len())
        }
    }

    pub fn node_id(&self, node: usize) -> &str {
        match self.node_kind(node) {
            NodeKind::Junction(j) => &self.junctions[j].id,
            NodeKind::Source(s) => &self.sources[s].id,
        }
    }

    /// Node index of the `k`-th source.
    pub fn source_node(&self, source: usize) -> usize {
        self.junctions.len() + source
    }

    pub fn is_source(&self, node: usize) -> bool {
        node >= self.junctions.len()
    }

    /// Endpoint node indices of a pipe, in file order (from, to).
    pub fn endpoints(&self, pipe: usize) -> (usize, usize) {
        self.endpoints[pipe]
    }

    /// `(pipe, neighbour)` pairs incident to `node`, ascending by pipe id.
    pub fn incident(&self, node: usize) -> &[(usize, usize)] {
        &self.incidence[node]
    }

    /// Pipe indices sorted by pipe id.
    pub fn pipes_by_id(&self) -> &[usize] {
        &self.pipe_order
    }

    /// Source index fed by each pump, if attached.
    pub fn pump_source(&self, pump: usize) -> Option<usize> {
        self.pump_source[pump]
    }

    /// Total design demand over all junctions.
    pub fn total_demand(&self) -> f64 {
        self.junctions.iter().map(|j| j.design_demand).sum()
    }

    /// Number of incident pipes; parallel pipes count individually.
    pub fn node_degree(&self, node_id: &str) -> Result<usize> {
        Ok(self.incidence[self.node_index(node_id)?].len())
    }

    /// Convert a set of pipe ids into a per-pipe failure mask.
    pub fn pipe_mask(&self, ids: &BTreeSet<String>) -> Result<Vec<bool>> {
        let mut mask = vec![false; self.pipes.len()];
        for id in ids {
            mask[self.pipe_index(id)?] = true;
        }
        Ok(mask)
    }

    pub fn pump_mask(&self, ids: &BTreeSet<String>) -> Result<Vec<bool>> {
        let mut mask = vec![false; self.pumps.len()];
        for id in ids {
            mask[self.pump_index(id)?] = true;
        }
        Ok(mask)
    }

    /// Whether a path of non-failed pipes links `node_id` to any source.
    pub fn is_connected_to_source(
        &self,
        node_id: &str,
        failed_pipes: &BTreeSet<String>,
    ) -> Result<bool> {
        let node = self.node_index(node_id)?;
        let mask = self.pipe_mask(failed_pipes)?;
        Ok(self.reachable_from_sources(&mask, None)[node])
    }

    /// Nodes reachable from any active source over pipes not marked failed.
    /// `active_sources` defaults to all sources.
    pub fn reachable_from_sources(
        &self,
        failed_pipes: &[bool],
        active_sources: Option<&[bool]>,
    ) -> Vec<bool> {
        let mut seen = vec![false; self.node_count()];
        let mut queue = VecDeque::new();
        for s in 0..self.sources.len() {
            if active_sources.is_none_or(|a| a[s]) {
                let n = self.source_node(s);
                seen[n] = true;
                queue.push_back(n);
            }
        }
        while let Some(n) = queue.pop_front() {
            for &(pipe, next) in &self.incidence[n] {
                if !failed_pipes[pipe] && !seen[next] {
                    seen[next] = true;
                    queue.push_back(next);
                }
            }
        }
        seen
    }

    /// Sources that can deliver given a pump failure mask.
    pub fn active_sources(&self, failed_pumps: &[bool]) -> Vec<bool> {
        let mut active = vec![true; self.sources.len()];
        for (pump, &down) in failed_pumps.iter().enumerate() {
            if down {
                if let Some(s) = self.pump_source[pump] {
                    active[s] = false;
                }
            }
        }
        active
    }
}
