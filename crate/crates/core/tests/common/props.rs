//! Property checks shared by the property tests and the acceptance suite.

use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use wds_resilience::metrics::performance::{fragility, todini_index, zhuang_availability};
use wds_resilience::metrics::score::{wpr_score, WprAnswers, WprChecklist};
use wds_resilience::network::FlowUnits;
use wds_resilience::{HydraulicSeries, Network};

/// Single-timestep Todini input: junctions (q*, h*, h), sources (Q, H) and
/// pump powers in W.
#[derive(Debug, Clone)]
pub struct TodiniCase {
    pub junctions: Vec<(f64, f64, f64)>,
    pub sources: Vec<(f64, f64)>,
    pub pumps: Vec<f64>,
}

pub fn arb_todini_case() -> impl Strategy<Value = TodiniCase> {
    (
        prop::collection::vec((0.001f64..0.05, 10.0f64..40.0, 0.0f64..60.0), 1..7),
        prop::collection::vec((0.2f64..1.0, 50.0f64..150.0), 1..3),
        prop::collection::vec(0.0f64..20_000.0, 0..3),
    )
        .prop_map(|(junctions, shares, pumps)| {
            // sources together supply at least the total demand, so the
            // denominator stays positive (H ≥ 50 > h*)
            let demand: f64 = junctions.iter().map(|j| j.0).sum();
            let weight: f64 = shares.iter().map(|s| s.0).sum();
            let sources = shares
                .iter()
                .map(|&(w, h)| (demand * (1.0 + w) * shares.len() as f64 * w / weight, h))
                .collect();
            TodiniCase {
                junctions,
                sources,
                pumps,
            }
        })
}

impl TodiniCase {
    /// Network and state with junctions listed in `order`, flows scaled by
    /// `c` and heads by `d` (pump power by c·d, as power is flow × head).
    pub fn build(&self, order: &[usize], c: f64, d: f64) -> (Network, HydraulicSeries) {
        let n = self.junctions.len();
        let junctions: Vec<String> = order
            .iter()
            .map(|&i| {
                let (q, hr, _) = self.junctions[i];
                format!(
                    r#"{{"id": "J{i}", "elevation": 0, "design_demand": {}, "required_head": {}}}"#,
                    q * c,
                    hr * d
                )
            })
            .collect();
        let sources: Vec<String> = self
            .sources
            .iter()
            .enumerate()
            .map(|(k, &(q, h))| {
                format!(r#"{{"id": "S{k}", "total_head": {}, "outflow": {}}}"#, h * d, q * c)
            })
            .collect();
        let pumps: Vec<String> = self
            .pumps
            .iter()
            .enumerate()
            .map(|(k, &p)| format!(r#"{{"id": "P{k}", "power": {}}}"#, p * c * d))
            .collect();
        let mut pipes = Vec::new();
        for i in 0..n {
            let from = if i == 0 { "S0".to_owned() } else { format!("J{}", i - 1) };
            pipes.push(format!(
                r#"{{"id": "p{i}", "from": "{from}", "to": "J{i}", "length": 100, "diameter": 0.1, "friction_factor": 0.02, "capacity": 1}}"#
            ));
        }
        for k in 1..self.sources.len() {
            pipes.push(format!(
                r#"{{"id": "s{k}", "from": "S{k}", "to": "J0", "length": 100, "diameter": 0.1, "friction_factor": 0.02, "capacity": 1}}"#
            ));
        }
        let text = format!(
            r#"{{"junctions": [{}], "sources": [{}], "pumps": [{}], "pipes": [{}]}}"#,
            junctions.join(","),
            sources.join(","),
            pumps.join(","),
            pipes.join(",")
        );
        let net = Network::from_json_str(&text, FlowUnits::M3s).unwrap();
        let row = |f: &dyn Fn(&(f64, f64, f64)) -> f64| -> Vec<Vec<f64>> {
            vec![order.iter().map(|&i| f(&self.junctions[i])).collect()]
        };
        let series = HydraulicSeries::new(
            1.0,
            order.iter().map(|i| format!("J{i}")).collect(),
            row(&|j| j.0 * c),
            row(&|j| j.0 * c),
            row(&|j| j.2 * d),
            row(&|j| j.1 * d),
        )
        .unwrap();
        (net, series)
    }

    pub fn identity(&self) -> Vec<usize> {
        (0..self.junctions.len()).collect()
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

pub fn check_todini_relabel(case: &TodiniCase, order: &[usize]) -> Result<(), TestCaseError> {
    let (net, s) = case.build(&case.identity(), 1.0, 1.0);
    let (pnet, ps) = case.build(order, 1.0, 1.0);
    let a = todini_index(&net, &s).unwrap().value;
    let b = todini_index(&pnet, &ps).unwrap().value;
    prop_assert!(close(a, b, 1e-12), "{a} vs {b} under {order:?}");
    Ok(())
}

pub fn check_todini_scaling(case: &TodiniCase, c: f64, d: f64) -> Result<(), TestCaseError> {
    let (net, s) = case.build(&case.identity(), 1.0, 1.0);
    let (snet, ss) = case.build(&case.identity(), c, d);
    let a = todini_index(&net, &s).unwrap().value;
    let b = todini_index(&snet, &ss).unwrap().value;
    prop_assert!(close(a, b, 1e-9), "{a} vs {b} at c={c}, d={d}");
    Ok(())
}

/// Delivered/demand matrices with delivered ≤ demand pointwise.
pub fn arb_flows() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    (1usize..5, 1usize..6)
        .prop_flat_map(|(nodes, steps)| {
            prop::collection::vec(
                prop::collection::vec((0.001f64..0.1, 0.0f64..=1.0), nodes),
                steps,
            )
        })
        .prop_map(|rows| {
            let demand = rows.iter().map(|r| r.iter().map(|x| x.0).collect()).collect();
            let delivered = rows
                .iter()
                .map(|r| r.iter().map(|x| x.0 * x.1).collect())
                .collect();
            (delivered, demand)
        })
}

fn flow_series(delivered: Vec<Vec<f64>>, demand: Vec<Vec<f64>>) -> HydraulicSeries {
    let nodes = demand[0].len();
    let zeros = vec![vec![0.0; nodes]; demand.len()];
    HydraulicSeries::new(
        1.0,
        (0..nodes).map(|i| format!("n{i}")).collect(),
        delivered,
        demand,
        zeros.clone(),
        zeros,
    )
    .unwrap()
}

/// Raising one delivered entry (up to its demand) never lowers R_sys, and
/// R_sys stays in [0, 1].
pub fn check_zhuang_monotone(
    delivered: &[Vec<f64>],
    demand: &[Vec<f64>],
    pick: (usize, usize),
    bump: f64,
) -> Result<(), TestCaseError> {
    let t = pick.0 % demand.len();
    let i = pick.1 % demand[0].len();
    let before = zhuang_availability(&flow_series(delivered.to_vec(), demand.to_vec()))
        .unwrap()
        .value;
    let mut raised = delivered.to_vec();
    raised[t][i] += bump * (demand[t][i] - raised[t][i]);
    let after = zhuang_availability(&flow_series(raised, demand.to_vec()))
        .unwrap()
        .value;
    prop_assert!((0.0..=1.0).contains(&before) && (0.0..=1.0).contains(&after));
    prop_assert!(after >= before, "{after} < {before}");
    Ok(())
}

/// Strictly increasing and inside [0, 1) over exposures where the result
/// is representable below one.
pub fn check_fragility_increasing(x: f64, dx: f64) -> Result<(), TestCaseError> {
    let (a, b) = (fragility(1.0, x), fragility(1.0, x + dx));
    prop_assert!((0.0..1.0).contains(&a) && (0.0..1.0).contains(&b), "{a} {b}");
    prop_assert!(b > a, "P_f({}) = {b} not above P_f({x}) = {a}", x + dx);
    // RR and L enter only through their product
    prop_assert!(close(fragility(x, 1.0), a, 1e-15));
    Ok(())
}

/// Flipping one false answer to true raises the score by exactly one.
pub fn check_wpr_flip(bits: &[bool], pick: usize) -> Result<(), TestCaseError> {
    let checklist = WprChecklist::default_checklist();
    let names: Vec<String> = checklist.criteria().map(|c| c.name.clone()).collect();
    let mut answers: WprAnswers = names.iter().cloned().zip(bits.iter().copied()).collect();
    let before = wpr_score(&checklist, &answers).unwrap();
    prop_assert_eq!(before, bits.iter().filter(|&&b| b).count());
    let falses: Vec<&String> = names.iter().zip(bits).filter(|(_, &b)| !b).map(|(n, _)| n).collect();
    if falses.is_empty() {
        prop_assert_eq!(before, names.len());
        return Ok(());
    }
    answers.insert(falses[pick % falses.len()].clone(), true);
    prop_assert_eq!(wpr_score(&checklist, &answers).unwrap(), before + 1);
    Ok(())
}
