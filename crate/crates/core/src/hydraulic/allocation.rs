//! Max-flow surrogate for a hydraulic solver.
//!
//! Sources feed a super-source with capacity equal to their outflow, pipes
//! are undirected arcs with their `capacity`, and junctions drain into a
//! super-sink with capacity equal to their (scaled) demand. Delivered flow
//! is the junction's share of an Edmonds–Karp maximum flow. Arcs are
//! inserted in ascending pipe-id order, so ties resolve deterministically.
//!
//! Heads are not modelled: a fully supplied junction reports `h = h*`, any
//! other junction reports `h = 0`.

use std::collections::{BTreeSet, VecDeque};

use crate::error::{Error, Result};
use crate::hydraulic::HydraulicSeries;
use crate::network::Network;

/// Operating conditions for one allocation.
#[derive(Debug, Clone, PartialEq)]
pub struct Conditions {
    /// Per-junction demand multiplier.
    pub demand_scale: Vec<f64>,
    /// Per-source outflow multiplier.
    pub supply_scale: Vec<f64>,
    pub failed_pipes: Vec<bool>,
    pub failed_pumps: Vec<bool>,
}

impl Conditions {
    pub fn intact(net: &Network) -> Self {
        Conditions {
            demand_scale: vec![1.0; net.junctions().len()],
            supply_scale: vec![1.0; net.sources().len()],
            failed_pipes: vec![false; net.pipes().len()],
            failed_pumps: vec![false; net.pumps().len()],
        }
    }

    fn check(&self, net: &Network) -> Result<()> {
        if self.demand_scale.len() != net.junctions().len()
            || self.supply_scale.len() != net.sources().len()
            || self.failed_pipes.len() != net.pipes().len()
            || self.failed_pumps.len() != net.pumps().len()
        {
            return Err(Error::validation("conditions do not match network shape"));
        }
        if self
            .demand_scale
            .iter()
            .chain(&self.supply_scale)
            .any(|s| !(s.is_finite() && *s > 0.0))
        {
            return Err(Error::validation("scale factors must be > 0"));
        }
        Ok(())
    }
}

/// Result of one allocation.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    /// Per-junction delivered flow, m³/s.
    pub delivered: Vec<f64>,
    /// Per-junction scaled demand, m³/s.
    pub demand: Vec<f64>,
    /// Signed per-pipe flow, positive in the pipe's from→to direction.
    pub pipe_flow: Vec<f64>,
    /// Per-source outflow used.
    pub source_flow: Vec<f64>,
}

impl Allocation {
    pub fn total_delivered(&self) -> f64 {
        self.delivered.iter().sum()
    }

    /// Whether junction `j` receives its full demand.
    pub fn is_supplied(&self, j: usize) -> bool {
        self.delivered[j] >= self.demand[j] * (1.0 - 1e-9)
    }

    /// Single-timestep series with surrogate heads.
    pub fn to_series(&self, net: &Network) -> HydraulicSeries {
        let junctions = net.junctions();
        let head = (0..junctions.len())
            .map(|j| {
                if self.is_supplied(j) {
                    junctions[j].required_head
                } else {
                    0.0
                }
            })
            .collect();
        HydraulicSeries::new(
            1.0,
            junctions.iter().map(|j| j.id.clone()).collect(),
            vec![self.delivered.clone()],
            vec![self.demand.clone()],
            vec![head],
            vec![junctions.iter().map(|j| j.required_head).collect()],
        )
        .expect("allocation produces a valid series")
    }
}

struct Arc {
    to: usize,
    cap: f64,
    flow: f64,
}

struct FlowGraph {
    arcs: Vec<Arc>,
    adj: Vec<Vec<usize>>,
}

impl FlowGraph {
    fn new(nodes: usize) -> Self {
        FlowGraph {
            arcs: Vec::new(),
            adj: vec![Vec::new(); nodes],
        }
    }

    /// Directed arc with a zero-capacity reverse; returns the forward arc id.
    fn directed(&mut self, a: usize, b: usize, cap: f64) -> usize {
        self.pair(a, b, cap, 0.0)
    }

    /// Undirected edge: both directions carry `cap`.
    fn undirected(&mut self, a: usize, b: usize, cap: f64) -> usize {
        self.pair(a, b, cap, cap)
    }

    fn pair(&mut self, a: usize, b: usize, cap_ab: f64, cap_ba: f64) -> usize {
        let id = self.arcs.len();
        self.arcs.push(Arc { to: b, cap: cap_ab, flow: 0.0 });
        self.arcs.push(Arc { to: a, cap: cap_ba, flow: 0.0 });
        self.adj[a].push(id);
        self.adj[b].push(id + 1);
        id
    }

    fn residual(&self, arc: usize) -> f64 {
        self.arcs[arc].cap - self.arcs[arc].flow
    }

    fn max_flow(&mut self, s: usize, t: usize, eps: f64) -> f64 {
        let mut total = 0.0;
        loop {
            let mut via = vec![usize::MAX; self.adj.len()];
            let mut queue = VecDeque::from([s]);
            let mut reached = false;
            'bfs: while let Some(u) = queue.pop_front() {
                for &arc in &self.adj[u] {
                    let v = self.arcs[arc].to;
                    if v != s && via[v] == usize::MAX && self.residual(arc) > eps {
                        via[v] = arc;
                        if v == t {
                            reached = true;
                            break 'bfs;
                        }
                        queue.push_back(v);
                    }
                }
            }
            if !reached {
                return total;
            }
            let mut push = f64::INFINITY;
            let mut v = t;
            while v != s {
                let arc = via[v];
                push = push.min(self.residual(arc));
                v = self.arcs[arc ^ 1].to;
            }
            let mut v = t;
            while v != s {
                let arc = via[v];
                self.arcs[arc].flow += push;
                self.arcs[arc ^ 1].flow -= push;
                v = self.arcs[arc ^ 1].to;
            }
            total += push;
        }
    }
}

/// Maximum-flow allocation under the given conditions.
pub fn allocate(net: &Network, conditions: &Conditions) -> Result<Allocation> {
    conditions.check(net)?;
    let n = net.node_count();
    let (s, t) = (n, n + 1);
    let mut g = FlowGraph::new(n + 2);

    let active = net.active_sources(&conditions.failed_pumps);
    let source_arcs: Vec<usize> = net
        .sources()
        .iter()
        .enumerate()
        .map(|(k, src)| {
            let cap = if active[k] {
                src.outflow * conditions.supply_scale[k]
            } else {
                0.0
            };
            g.directed(s, net.source_node(k), cap)
        })
        .collect();

    let mut pipe_arcs = vec![None; net.pipes().len()];
    for &p in net.pipes_by_id() {
        if !conditions.failed_pipes[p] {
            let (a, b) = net.endpoints(p);
            pipe_arcs[p] = Some(g.undirected(a, b, net.pipes()[p].capacity));
        }
    }

    let demand: Vec<f64> = net
        .junctions()
        .iter()
        .zip(&conditions.demand_scale)
        .map(|(j, scale)| j.design_demand * scale)
        .collect();
    let sink_arcs: Vec<usize> = demand
        .iter()
        .enumerate()
        .map(|(j, &d)| g.directed(j, t, d))
        .collect();

    let scale = g.arcs.iter().map(|a| a.cap).fold(0.0_f64, f64::max);
    g.max_flow(s, t, scale * 1e-12);

    // Rounding can leave a junction a hair above its cap; the sink arc is the bound.
    let delivered = sink_arcs
        .iter()
        .zip(&demand)
        .map(|(&arc, &d)| g.arcs[arc].flow.clamp(0.0, d))
        .collect();
    let pipe_flow = pipe_arcs
        .iter()
        .map(|arc| arc.map_or(0.0, |a| g.arcs[a].flow))
        .collect();
    let source_flow = source_arcs.iter().map(|&a| g.arcs[a].flow).collect();
    Ok(Allocation {
        delivered,
        demand,
        pipe_flow,
        source_flow,
    })
}

/// Single-timestep surrogate series with all demands scaled uniformly.
pub fn surrogate_allocation(
    net: &Network,
    demand_scale: f64,
    failed_pipes: &BTreeSet<String>,
    failed_pumps: &BTreeSet<String>,
) -> Result<HydraulicSeries> {
    if !(demand_scale.is_finite() && demand_scale > 0.0) {
        return Err(Error::validation("demand scale must be > 0"));
    }
    let conditions = Conditions {
        demand_scale: vec![demand_scale; net.junctions().len()],
        failed_pipes: net.pipe_mask(failed_pipes)?,
        failed_pumps: net.pump_mask(failed_pumps)?,
        ..Conditions::intact(net)
    };
    Ok(allocate(net, &conditions)?.to_series(net))
}
