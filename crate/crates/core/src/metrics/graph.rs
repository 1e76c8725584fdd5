//! Graph-theoretic resilience: K shortest source paths weighted by
//! hydraulic resistance, aggregated per node and per district.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};
use std::fmt;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::network::Network;

/// Paths per source when not specified.
pub const DEFAULT_K: usize = 5;

/// Fraction trimmed from each tail when not specified.
pub const DEFAULT_TRIM: f64 = 0.1;

/// A simple path between two nodes and its resistance Σ f·L/D.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightedPath {
    pub pipes: Vec<String>,
    pub nodes: Vec<String>,
    pub resistance: f64,
}

/// Node sequence of a pipe sequence, or an error if it is not a simple path.
/// Without a fixed start either end of the first pipe may begin the walk.
fn walk(net: &Network, pipes: &[usize], start: Option<usize>) -> Result<Vec<usize>> {
    let Some(&first) = pipes.first() else {
        return Ok(start.into_iter().collect());
    };
    let (a, b) = net.endpoints(first);
    let starts = match start {
        Some(s) => vec![s],
        None => vec![a, b],
    };
    'start: for start in starts {
        let mut nodes = vec![start];
        let mut at = start;
        for &p in pipes {
            let (x, y) = net.endpoints(p);
            at = if x == at {
                y
            } else if y == at {
                x
            } else {
                continue 'start;
            };
            if nodes.contains(&at) {
                continue 'start;
            }
            nodes.push(at);
        }
        return Ok(nodes);
    }
    Err(Error::validation("pipes do not form a connected simple path"))
}

fn resistance_of(net: &Network, pipes: &[usize]) -> f64 {
    pipes.iter().map(|&p| net.pipes()[p].resistance()).sum()
}

/// Resistance Σ f(m)·L_m/D_m of a path given as pipe ids.
pub fn path_resistance(net: &Network, path: &[String]) -> Result<f64> {
    let pipes = path
        .iter()
        .map(|id| net.pipe_index(id))
        .collect::<Result<Vec<_>>>()?;
    walk(net, &pipes, None)?;
    Ok(resistance_of(net, &pipes))
}

/// Ordering key: resistance, then pipe ids lexicographically (as id ranks).
#[derive(Debug, Clone, PartialEq)]
struct Key {
    cost: f64,
    ranks: Vec<usize>,
}

impl Eq for Key {}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.cost
            .total_cmp(&other.cost)
            .then_with(|| self.ranks.cmp(&other.ranks))
    }
}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct PathSearch<'a> {
    net: &'a Network,
    rank: Vec<usize>,
}

impl<'a> PathSearch<'a> {
    fn new(net: &'a Network) -> Self {
        let mut rank = vec![0; net.pipes().len()];
        for (r, &p) in net.pipes_by_id().iter().enumerate() {
            rank[p] = r;
        }
        PathSearch { net, rank }
    }

    fn key(&self, pipes: &[usize]) -> Key {
        Key {
            cost: resistance_of(self.net, pipes),
            ranks: pipes.iter().map(|&p| self.rank[p]).collect(),
        }
    }

    /// Least-key path avoiding banned nodes and pipes. Keys extend
    /// monotonically along a path, so settling nodes in key order yields
    /// the minimum under (resistance, id sequence).
    fn shortest(
        &self,
        from: usize,
        to: usize,
        banned_nodes: &[bool],
        banned_pipes: &[bool],
    ) -> Option<Vec<usize>> {
        let n = self.net.node_count();
        let mut settled = vec![false; n];
        let mut best: Vec<Option<Key>> = vec![None; n];
        let mut heap = BinaryHeap::new();
        let start = Key {
            cost: 0.0,
            ranks: Vec::new(),
        };
        best[from] = Some(start.clone());
        heap.push(std::cmp::Reverse((start, from)));
        while let Some(std::cmp::Reverse((key, node))) = heap.pop() {
            if settled[node] {
                continue;
            }
            settled[node] = true;
            if node == to {
                let order = self.net.pipes_by_id();
                return Some(key.ranks.iter().map(|&r| order[r]).collect());
            }
            for &(pipe, next) in self.net.incident(node) {
                if settled[next] || banned_nodes[next] || banned_pipes[pipe] {
                    continue;
                }
                let mut ranks = key.ranks.clone();
                ranks.push(self.rank[pipe]);
                let cand = Key {
                    cost: key.cost + self.net.pipes()[pipe].resistance(),
                    ranks,
                };
                if best[next].as_ref().is_none_or(|b| cand < *b) {
                    best[next] = Some(cand.clone());
                    heap.push(std::cmp::Reverse((cand, next)));
                }
            }
        }
        None
    }

    /// Yen's algorithm over pipe-index paths.
    fn k_shortest(&self, from: usize, to: usize, k: usize) -> Vec<Vec<usize>> {
        let n = self.net.node_count();
        let m = self.net.pipes().len();
        if from == to {
            return vec![Vec::new()];
        }
        let Some(first) = self.shortest(from, to, &vec![false; n], &vec![false; m]) else {
            return Vec::new();
        };
        let mut accepted = vec![first];
        let mut candidates: BTreeSet<(Key, Vec<usize>)> = BTreeSet::new();
        while accepted.len() < k {
            let prev = accepted.last().expect("non-empty").clone();
            let prev_nodes = walk(self.net, &prev, Some(from)).expect("accepted paths are simple");
            for i in 0..prev.len() {
                let spur = prev_nodes[i];
                let root = &prev[..i];
                let mut banned_pipes = vec![false; m];
                for path in &accepted {
                    if path.len() > i && path[..i] == *root {
                        banned_pipes[path[i]] = true;
                    }
                }
                let mut banned_nodes = vec![false; n];
                for &node in &prev_nodes[..i] {
                    banned_nodes[node] = true;
                }
                if let Some(tail) = self.shortest(spur, to, &banned_nodes, &banned_pipes) {
                    let mut full = root.to_vec();
                    full.extend(tail);
                    if !accepted.contains(&full) {
                        candidates.insert((self.key(&full), full));
                    }
                }
            }
            match candidates.pop_first() {
                Some((_, path)) => accepted.push(path),
                None => break,
            }
        }
        accepted
    }

    fn weighted(&self, pipes: Vec<usize>, from: usize) -> WeightedPath {
        let nodes = walk(self.net, &pipes, Some(from)).expect("search yields simple paths");
        WeightedPath {
            resistance: resistance_of(self.net, &pipes),
            nodes: nodes.iter().map(|&x| self.net.node_id(x).to_owned()).collect(),
            pipes: pipes.iter().map(|&p| self.net.pipes()[p].id.clone()).collect(),
        }
    }
}

/// Up to `k` simple paths from `from` to `to` of least resistance, in
/// ascending resistance with ties broken by pipe-id sequence. Disconnected
/// pairs give an empty list.
pub fn k_shortest_paths(net: &Network, from: &str, to: &str, k: usize) -> Result<Vec<WeightedPath>> {
    if k == 0 {
        return Err(Error::validation("K must be at least 1"));
    }
    let (a, b) = (net.node_index(from)?, net.node_index(to)?);
    let search = PathSearch::new(net);
    Ok(search
        .k_shortest(a, b, k)
        .into_iter()
        .map(|p| search.weighted(p, a))
        .collect())
}

/// How the per-source path average is normalised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PathAveraging {
    /// Always divide by K, even when fewer paths exist.
    #[default]
    FixedK,
    /// Divide by the number of paths actually found.
    Available,
}

/// Path-based node index. Sources have no finite value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NodeIndex {
    Source,
    Value(f64),
}

impl NodeIndex {
    pub fn value(self, node_id: &str) -> Result<f64> {
        match self {
            NodeIndex::Value(v) => Ok(v),
            NodeIndex::Source => Err(Error::InfiniteResilience(node_id.to_owned())),
        }
    }
}

impl fmt::Display for NodeIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeIndex::Source => f.write_str("inf"),
            NodeIndex::Value(v) => write!(f, "{v}"),
        }
    }
}

fn node_index_at(search: &PathSearch, node: usize, k: usize, averaging: PathAveraging) -> NodeIndex {
    let net = search.net;
    if net.is_source(node) {
        return NodeIndex::Source;
    }
    let total = (0..net.sources().len())
        .map(|s| {
            let paths = search.k_shortest(node, net.source_node(s), k);
            let inverse: f64 = paths.iter().map(|p| 1.0 / resistance_of(net, p)).sum();
            match averaging {
                PathAveraging::FixedK => inverse / k as f64,
                PathAveraging::Available if paths.is_empty() => 0.0,
                PathAveraging::Available => inverse / paths.len() as f64,
            }
        })
        .sum();
    NodeIndex::Value(total)
}

/// I(i) = Σ_s (1/K) Σ_k 1/r(k, s). Unreachable sources contribute 0.
pub fn herrera_node_index(net: &Network, node_id: &str, k: usize) -> Result<NodeIndex> {
    herrera_node_index_with(net, node_id, k, PathAveraging::FixedK)
}

pub fn herrera_node_index_with(
    net: &Network,
    node_id: &str,
    k: usize,
    averaging: PathAveraging,
) -> Result<NodeIndex> {
    if k == 0 {
        return Err(Error::validation("K must be at least 1"));
    }
    let node = net.node_index(node_id)?;
    Ok(node_index_at(&PathSearch::new(net), node, k, averaging))
}

fn demand_share(net: &Network, node: usize) -> Result<f64> {
    let total = net.total_demand();
    if total <= 0.0 {
        return Err(Error::UndefinedInput("total network demand is zero".into()));
    }
    Ok(match net.node_kind(node) {
        crate::network::NodeKind::Junction(j) => net.junctions()[j].design_demand / total,
        crate::network::NodeKind::Source(_) => 0.0,
    })
}

/// Node index weighted by the node's share q/Q of total demand.
pub fn demand_weighted_node_index(net: &Network, node_id: &str, k: usize) -> Result<NodeIndex> {
    let share = demand_share(net, net.node_index(node_id)?)?;
    Ok(match herrera_node_index(net, node_id, k)? {
        NodeIndex::Value(v) => NodeIndex::Value(v * share),
        NodeIndex::Source => NodeIndex::Source,
    })
}

/// Mean after discarding ⌊trim·n⌋ values from each end of the sorted list.
pub fn trimmed_mean_index(values: &[f64], trim_fraction: f64) -> Result<f64> {
    if !(0.0..0.5).contains(&trim_fraction) {
        return Err(Error::validation(format!(
            "trim fraction {trim_fraction} outside [0, 0.5)"
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("trimmed mean needs finite values"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    // Guard against products like 0.29 * 100 = 28.999…
    let cut = (trim_fraction * sorted.len() as f64 + 1e-9).floor() as usize;
    let kept = sorted.get(cut..sorted.len().saturating_sub(cut)).unwrap_or(&[]);
    if kept.is_empty() {
        return Err(Error::UndefinedInput("no values left after trimming".into()));
    }
    Ok(kept.iter().sum::<f64>() / kept.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeIndexRow {
    pub node_id: String,
    pub index: NodeIndex,
    pub weighted: NodeIndex,
}

/// Index and demand-weighted index for every node, computed in parallel.
pub fn node_index_table(net: &Network, k: usize, averaging: PathAveraging) -> Result<Vec<NodeIndexRow>> {
    if k == 0 {
        return Err(Error::validation("K must be at least 1"));
    }
    let search = PathSearch::new(net);
    (0..net.node_count())
        .into_par_iter()
        .map(|node| {
            let index = node_index_at(&search, node, k, averaging);
            let weighted = match index {
                NodeIndex::Value(v) => NodeIndex::Value(v * demand_share(net, node)?),
                NodeIndex::Source => NodeIndex::Source,
            };
            Ok(NodeIndexRow {
                node_id: net.node_id(node).to_owned(),
                index,
                weighted,
            })
        })
        .collect()
}

/// CSV with header `node_id,I,weighted_I`; sources are written as `inf`.
pub fn node_index_csv(rows: &[NodeIndexRow]) -> String {
    let mut out = String::from("node_id,I,weighted_I\n");
    for r in rows {
        out.push_str(&format!("{},{},{}\n", r.node_id, r.index, r.weighted));
    }
    out
}

pub fn write_node_index_csv(rows: &[NodeIndexRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, node_index_csv(rows)).map_err(|e| Error::io(path, e))
}

/// Trimmed mean of the node index over a district's member junctions.
pub fn district_index(net: &Network, members: &[String], k: usize, trim_fraction: f64) -> Result<f64> {
    let values = members
        .iter()
        .map(|id| herrera_node_index(net, id, k)?.value(id))
        .collect::<Result<Vec<_>>>()?;
    trimmed_mean_index(&values, trim_fraction)
}
