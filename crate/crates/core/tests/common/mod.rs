//! Brute-force reference implementations used as test oracles, and checks
//! comparing the library against them. The references themselves only read
//! the network's public fields.
#![allow(dead_code)]

pub mod props;

use std::path::PathBuf;

use proptest::prelude::*;
use wds_resilience::hydraulic::{allocate, Conditions};
use wds_resilience::metrics::graph::k_shortest_paths;
use wds_resilience::metrics::performance::{buffering_capacity, connectivity_oracle, supply_oracle};
use wds_resilience::network::FlowUnits;
use wds_resilience::Network;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures")
        .join(name)
}

pub fn load(name: &str) -> Network {
    Network::load(fixture(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// Fixture networks small enough for exhaustive checks.
pub const SMALL_NETWORKS: [&str; 7] = [
    "ring.json",
    "ring_tight.json",
    "tree.json",
    "triangle.json",
    "two_paths.json",
    "single_node.json",
    "mesh.json",
];

fn node_ids(net: &Network) -> Vec<String> {
    net.junctions()
        .iter()
        .map(|j| j.id.clone())
        .chain(net.sources().iter().map(|s| s.id.clone()))
        .collect()
}

fn pos(ids: &[String], id: &str) -> usize {
    ids.iter().position(|x| x == id).expect("pipe endpoint exists")
}

/// Pipe endpoints as positions in `node_ids` order (junctions, then sources).
fn edges(net: &Network) -> Vec<(usize, usize)> {
    let ids = node_ids(net);
    net.pipes()
        .iter()
        .map(|p| (pos(&ids, &p.from), pos(&ids, &p.to)))
        .collect()
}

/// Every simple path from `from` to `to` as (resistance, pipe ids), sorted
/// by resistance then by pipe-id sequence.
pub fn all_simple_paths(net: &Network, from: &str, to: &str) -> Vec<(f64, Vec<String>)> {
    let ids = node_ids(net);
    let edges = edges(net);
    let (a, b) = (pos(&ids, from), pos(&ids, to));
    let mut out = Vec::new();
    let mut visited = vec![false; ids.len()];
    let mut stack = Vec::new();

    fn dfs(
        net: &Network,
        edges: &[(usize, usize)],
        at: usize,
        to: usize,
        visited: &mut Vec<bool>,
        stack: &mut Vec<usize>,
        out: &mut Vec<(f64, Vec<String>)>,
    ) {
        if at == to {
            let r = stack
                .iter()
                .map(|&p| {
                    let pipe = &net.pipes()[p];
                    pipe.friction_factor * pipe.length / pipe.diameter
                })
                .sum();
            out.push((r, stack.iter().map(|&p| net.pipes()[p].id.clone()).collect()));
            return;
        }
        visited[at] = true;
        for (p, &(u, v)) in edges.iter().enumerate() {
            let next = if u == at {
                v
            } else if v == at {
                u
            } else {
                continue;
            };
            if !visited[next] {
                stack.push(p);
                dfs(net, edges, next, to, visited, stack, out);
                stack.pop();
            }
        }
        visited[at] = false;
    }

    if a == b {
        return vec![(0.0, Vec::new())];
    }
    dfs(net, &edges, a, b, &mut visited, &mut stack, &mut out);
    out.sort_by(|x, y| x.0.total_cmp(&y.0).then_with(|| x.1.cmp(&y.1)));
    out
}

/// Component failure state for brute-force checks: pipe mask and pump mask.
#[derive(Debug, Clone)]
pub struct Failures {
    pub pipes: Vec<bool>,
    pub pumps: Vec<bool>,
}

fn source_active(net: &Network, source: usize, failed_pumps: &[bool]) -> bool {
    let id = &net.sources()[source].id;
    !net
        .pumps()
        .iter()
        .zip(failed_pumps)
        .any(|(p, &down)| down && p.source.as_deref() == Some(id.as_str()))
}

/// Whether every junction reaches an active source through intact pipes.
pub fn all_connected(net: &Network, f: &Failures) -> bool {
    let nj = net.junctions().len();
    let n = nj + net.sources().len();
    let edges = edges(net);
    let mut reached = vec![false; n];
    for s in 0..net.sources().len() {
        if source_active(net, s, &f.pumps) {
            reached[nj + s] = true;
        }
    }
    // relax until fixed point
    loop {
        let mut changed = false;
        for (p, &(u, v)) in edges.iter().enumerate() {
            if !f.pipes[p] && reached[u] != reached[v] {
                reached[u] = true;
                reached[v] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    reached[..nj].iter().all(|&r| r)
}

/// Maximum deliverable flow as the minimum over all s–t cuts of the
/// super-source / super-sink graph.
pub fn min_cut_max_flow(
    net: &Network,
    f: &Failures,
    demand_scale: &[f64],
    supply_scale: &[f64],
) -> f64 {
    let nj = net.junctions().len();
    let n = nj + net.sources().len();
    assert!(n <= 16, "min-cut enumeration is exponential");
    let edges = edges(net);
    let mut best = f64::INFINITY;
    for side in 0u32..(1 << n) {
        let in_s = |v: usize| side & (1 << v) != 0;
        let mut cut = 0.0;
        for (k, src) in net.sources().iter().enumerate() {
            if !in_s(nj + k) && source_active(net, k, &f.pumps) {
                cut += src.outflow * supply_scale[k];
            }
        }
        for (j, junction) in net.junctions().iter().enumerate() {
            if in_s(j) {
                cut += junction.design_demand * demand_scale[j];
            }
        }
        for (p, &(u, v)) in edges.iter().enumerate() {
            if !f.pipes[p] && in_s(u) != in_s(v) {
                cut += net.pipes()[p].capacity;
            }
        }
        best = best.min(cut);
    }
    best
}

/// All failure sets of at most `max_k` components (pipes then pumps).
pub fn failure_sets(net: &Network, max_k: usize) -> Vec<Failures> {
    let (np, nq) = (net.pipes().len(), net.pumps().len());
    let m = np + nq;
    assert!(m <= 20, "subset enumeration is exponential");
    (0u32..(1 << m))
        .filter(|mask| mask.count_ones() as usize <= max_k)
        .map(|mask| Failures {
            pipes: (0..np).map(|i| mask & (1 << i) != 0).collect(),
            pumps: (0..nq).map(|i| mask & (1 << (np + i)) != 0).collect(),
        })
        .collect()
}

/// Largest k ≤ max_k such that every set of at most k failures is feasible,
/// or `None` if the intact system is infeasible.
pub fn brute_buffering(
    net: &Network,
    max_k: usize,
    feasible: impl Fn(&Failures) -> bool,
) -> Option<usize> {
    let mut smallest_violation = None::<usize>;
    for f in failure_sets(net, max_k) {
        if !feasible(&f) {
            let size = f.pipes.iter().chain(&f.pumps).filter(|&&x| x).count();
            smallest_violation = Some(smallest_violation.map_or(size, |s| s.min(size)));
        }
    }
    match smallest_violation {
        Some(0) => None,
        Some(s) => Some(s - 1),
        None => Some(max_k),
    }
}

/// Random connected network with at most `max_nodes` nodes (at least one
/// source), optional parallel pipes and up to one pump per source.
pub fn arb_network(max_nodes: usize) -> impl Strategy<Value = Network> {
    (2..=max_nodes)
        .prop_flat_map(|n| {
            let sources = 1..=(n - 1).min(2);
            (Just(n), sources, any::<u64>())
        })
        .prop_map(|(n, ns, seed)| random_network(n, ns, seed))
}

/// Deterministic pseudo-random network built from a seed (xorshift), so
/// the same seed always yields the same network.
pub fn random_network(n: usize, sources: usize, seed: u64) -> Network {
    let mut state = seed | 1;
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        state
    };
    let nj = n - sources;
    let node = |i: usize| {
        if i < nj {
            format!("J{i}")
        } else {
            format!("S{}", i - nj)
        }
    };
    let mut pipes = Vec::new();
    let mut add = |a: usize, b: usize, next: &mut dyn FnMut() -> u64| {
        let id = format!("p{:02}", pipes.len());
        let length = 50.0 + (next() % 400) as f64;
        let diameter = [0.1, 0.15, 0.2, 0.3][(next() % 4) as usize];
        let capacity = 0.002 + (next() % 30) as f64 * 0.001;
        let rr = (next() % 5) as f64 * 1e-4;
        pipes.push(format!(
            r#"{{"id": "{id}", "from": "{}", "to": "{}", "length": {length}, "diameter": {diameter}, "friction_factor": 0.02, "repair_rate": {rr}, "capacity": {capacity}}}"#,
            node(a),
            node(b)
        ));
    };
    // spanning tree, then extra edges (parallel pipes allowed)
    for i in 1..n {
        let parent = (next() % i as u64) as usize;
        add(parent, i, &mut next);
    }
    let extra = next() % (n as u64 + 1);
    for _ in 0..extra {
        let a = (next() % n as u64) as usize;
        let b = (next() % n as u64) as usize;
        if a != b {
            add(a, b, &mut next);
        }
    }
    let junctions: Vec<String> = (0..nj)
        .map(|i| {
            let demand = (next() % 15) as f64 * 0.001;
            format!(
                r#"{{"id": "J{i}", "elevation": {}, "design_demand": {demand}, "required_head": 30}}"#,
                next() % 20
            )
        })
        .collect();
    let srcs: Vec<String> = (0..sources)
        .map(|k| {
            format!(
                r#"{{"id": "S{k}", "total_head": {}, "outflow": {}}}"#,
                60 + next() % 60,
                0.005 + (next() % 40) as f64 * 0.001
            )
        })
        .collect();
    let pumps: Vec<String> = (0..sources)
        .filter(|_| next() % 2 == 0)
        .map(|k| format!(r#"{{"id": "P{k}", "power": 3000, "source": "S{k}"}}"#))
        .collect();
    let text = format!(
        r#"{{"junctions": [{}], "sources": [{}], "pumps": [{}], "pipes": [{}]}}"#,
        junctions.join(","),
        srcs.join(","),
        pumps.join(","),
        pipes.join(",")
    );
    Network::from_json_str(&text, FlowUnits::M3s).unwrap_or_else(|e| panic!("{e}\n{text}"))
}

fn node_names(net: &Network) -> Vec<String> {
    net.junctions()
        .iter()
        .map(|j| j.id.clone())
        .chain(net.sources().iter().map(|s| s.id.clone()))
        .collect()
}

/// k_shortest_paths against simple-path enumeration for every node and source.
pub fn check_paths(net: &Network) {
    let names = node_names(net);
    for from in &names {
        for src in net.sources() {
            let expected = all_simple_paths(net, from, &src.id);
            for k in 1..=expected.len() + 1 {
                let got = k_shortest_paths(net, from, &src.id, k).unwrap();
                let want = &expected[..k.min(expected.len())];
                assert_eq!(got.len(), want.len(), "{from}->{} k={k}", src.id);
                for (g, (r, pipes)) in got.iter().zip(want) {
                    assert_eq!(&g.pipes, pipes, "{from}->{} k={k}", src.id);
                    assert_eq!(g.resistance, *r);
                }
            }
        }
    }
}


/// buffering_capacity against subset search, for the connectivity and supply oracles.
pub fn check_buffering(net: &Network) {
    let m = net.pipes().len() + net.pumps().len();
    for max_k in 0..=m.min(3) {
        let got = buffering_capacity(net, connectivity_oracle(net), max_k);
        match brute_buffering(net, max_k, |f| all_connected(net, f)) {
            Some(k) => {
                let got = got.unwrap();
                assert_eq!(got.k, k, "connectivity max_k={max_k}");
                if let Some(w) = &got.witness {
                    assert_eq!(w.len(), k + 1);
                }
            }
            None => assert!(got.is_err()),
        }

        let total: f64 = net.junctions().iter().map(|j| j.design_demand).sum();
        let ones_d = vec![1.0; net.junctions().len()];
        let ones_s = vec![1.0; net.sources().len()];
        for threshold in [0.5, 1.0] {
            let got = buffering_capacity(net, supply_oracle(net, threshold), max_k);
            let brute = brute_buffering(net, max_k, |f| {
                total == 0.0
                    || min_cut_max_flow(net, f, &ones_d, &ones_s)
                        >= threshold * total * (1.0 - 1e-9)
            });
            match brute {
                Some(k) => assert_eq!(got.unwrap().k, k, "supply {threshold} max_k={max_k}"),
                None => assert!(got.is_err()),
            }
        }
    }
}


/// Allocated total flow against min-cut enumeration for every failure set of
/// at most two components.
pub fn check_max_flow(net: &Network, demand_scale: f64, supply_scale: f64) {
    let ds = vec![demand_scale; net.junctions().len()];
    let ss = vec![supply_scale; net.sources().len()];
    for f in failure_sets(net, 2) {
        let conditions = Conditions {
            demand_scale: ds.clone(),
            supply_scale: ss.clone(),
            failed_pipes: f.pipes.clone(),
            failed_pumps: f.pumps.clone(),
        };
        let got = allocate(net, &conditions).unwrap().total_delivered();
        let want = min_cut_max_flow(net, &f, &ds, &ss);
        assert!(
            (got - want).abs() <= 1e-12 * want.max(1e-3),
            "allocated {got}, min cut {want}, failures {f:?}"
        );
    }
}
