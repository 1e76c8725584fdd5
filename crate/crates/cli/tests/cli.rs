#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::fixture;
use wds_resilience::metrics::performance::todini_index;
use wds_resilience::taxonomy::{adjusted_rand_index, summary_counts, Catalog};
use wds_resilience::{HydraulicSeries, Network};

fn wdsres(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wdsres"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn fx(name: &str) -> String {
    fixture(name).to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn value(o: &Output) -> f64 {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    v["value"].as_f64().unwrap()
}

#[test]
fn todini_report_equals_library() {
    let o = wdsres(&["metric", "todini", "--network", &fx("single_node.json"), "--state", &fx("single_node_state.csv")]);
    let net = Network::load(fixture("single_node.json")).unwrap();
    let state = HydraulicSeries::load(fixture("single_node_state.csv")).unwrap();
    assert_eq!(value(&o), todini_index(&net, &state).unwrap().value);
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["name"], "todini_index");
    assert_eq!(report["inputs_digest"].as_array().unwrap().len(), 2);
}

#[test]
fn every_metric_runs_from_fixtures() {
    let cases: Vec<(Vec<String>, f64)> = vec![
        (vec!["hashimoto".into(), "--series".into(), fx("ten_step.csv"), "--threshold".into(), "0.9".into()], 20.0 / 27.0),
        (vec!["hashimoto".into(), "--states".into(), "SSFSSFFSSS".into()], 20.0 / 27.0),
        (vec!["zhuang".into(), "--series".into(), fx("zhuang.csv")], 0.825),
        (vec!["fragility".into(), "--repair-rate".into(), "0.005".into(), "--length".into(), "100".into()], 1.0 - (-0.5f64).exp()),
        (vec!["fr".into(), "--network".into(), fx("single_node.json"), "--series".into(), fx("single_node_state.csv")], 1.0 / 12.0),
        (vec!["user_severity".into(), "--series".into(), fx("zhuang.csv"), "--node".into(), "n1".into()], 0.5),
        (vec!["herrera".into(), "--network".into(), fx("two_paths.json"), "--node".into(), "A".into(), "--K".into(), "2".into()], 0.01875),
        (vec!["balaei".into(), "--indicators".into(), fx("indicators.csv")], 0.625),
        (vec!["wpr".into(), "--answers".into(), fx("answers_all_true.json")], 36.0),
        (vec!["wpr".into(), "--answers".into(), fx("answers_all_false.json")], 0.0),
    ];
    for (args, want) in cases {
        let mut full = vec!["metric"];
        full.extend(args.iter().map(String::as_str));
        let got = value(&wdsres(&full));
        assert!((got - want).abs() < 1e-9, "{args:?}: {got} vs {want}");
    }
}

#[test]
fn table_outputs() {
    let o = wdsres(&["metric", "buffering", "--network", &fx("ring.json")]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["k"], 1);
    assert_eq!(v["witness"].as_array().unwrap().len(), 2);

    let o = wdsres(&["metric", "herrera", "--network", &fx("triangle.json"), "--K", "2"]);
    assert!(o.status.success());
    let csv = stdout(&o);
    assert!(csv.starts_with("node_id,I,weighted_I\n"));
    assert!(csv.contains("S,inf,inf"));

    let o = wdsres(&["metric", "fragility", "--network", &fx("tree.json")]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 3);
}

#[test]
fn exit_codes() {
    let o = wdsres(&["metric", "nonsense"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    for name in ["hashimoto", "todini", "herrera", "wpr"] {
        assert!(err.contains(name), "{err}");
    }

    let o = wdsres(&["metric", "zhuang", "--series", "/definitely/missing.csv"]);
    assert_eq!(o.status.code(), Some(1));
    let o = wdsres(&["metric", "zhuang"]);
    assert_eq!(o.status.code(), Some(1));
    let o = wdsres(&["catalog", "frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(wdsres(&["--help"]).status.code(), Some(0));

    // valid inputs, but available power cannot cover the required head
    let dir = tempfile::tempdir().unwrap();
    let starved = dir.path().join("starved.json");
    let text = std::fs::read_to_string(fixture("single_node.json"))
        .unwrap()
        .replace(r#""outflow": 0.01"#, r#""outflow": 0.001"#);
    std::fs::write(&starved, text).unwrap();
    let o = wdsres(&["metric", "todini", "--network", starved.to_str().unwrap(), "--state", &fx("single_node_state.csv")]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));

    // a source node has no finite path index
    let o = wdsres(&["metric", "herrera", "--network", &fx("triangle.json"), "--node", "S"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn units_flag_applies_to_unlabelled_files() {
    let run = |units: &str| {
        let o = wdsres(&["scenario", "run", "--network", &fx("tree.json"), "--units", units]);
        assert!(o.status.success());
        HydraulicSeries::from_csv_reader(o.stdout.as_slice(), "stdout").unwrap()
    };
    let (m3s, lps) = (run("m3s"), run("lps"));
    assert!((m3s.total_demand(0) - 1000.0 * lps.total_demand(0)).abs() < 1e-12);
}

#[test]
fn scenario_run_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let o = wdsres(&["scenario", "run", "--network", &fx("ring.json"), "--spec", &fx("empty_scenario.json"), "--horizon", "2"]);
    let s = HydraulicSeries::from_csv_reader(o.stdout.as_slice(), "stdout").unwrap();
    for t in 0..2 {
        assert!((s.total_delivered(t) - s.total_demand(t)).abs() < 1e-15);
    }

    let out = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    for file in ["a.csv", "b.csv"] {
        let o = wdsres(&["scenario", "run", "--network", &fx("mesh.json"), "--spec", &fx("timeline.json"), "--horizon", "10", "--out", &out(file)]);
        assert!(o.status.success());
    }
    assert_eq!(std::fs::read(out("a.csv")).unwrap(), std::fs::read(out("b.csv")).unwrap());

    for file in ["a.json", "b.json"] {
        let o = wdsres(&[
            "scenario", "mc", "--network", &fx("mesh.json"), "--spec", &fx("timeline.json"),
            "--horizon", "10", "--n", "50", "--seed", "99", "--metric", "fr", "--out", &out(file),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(std::fs::read(out("a.json")).unwrap(), std::fs::read(out("b.json")).unwrap());
}

#[test]
fn exhaustive_mc_matches_per_pipe_mean() {
    let o = wdsres(&[
        "scenario", "mc", "--network", &fx("ring_tight.json"), "--spec", &fx("random_pipe.json"),
        "--n", "100", "--metric", "zhuang", "--exhaustive",
    ]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let mean = v["summary"]["mean"].as_f64().unwrap();
    assert!((mean - 5.0 / 6.0).abs() < 1e-12, "{mean}");
    assert_eq!(v["values"].as_array().unwrap().len(), 100);

    let o = wdsres(&["scenario", "mc", "--network", &fx("ring.json"), "--metric", "bogus"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn catalog_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let path = |n: &str| dir.path().join(n);

    let o = wdsres(&["catalog", "counts"]);
    let expected = summary_counts(&Catalog::shipped().records).unwrap().to_string();
    assert_eq!(stdout(&o).trim_end(), expected.trim_end());

    let o = wdsres(&["catalog", "correlate", "--out", path("m.csv").to_str().unwrap()]);
    assert!(o.status.success());
    let csv = std::fs::read_to_string(path("m.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 14);
    assert!(rows.iter().all(|r| r.len() == 14));
    for i in 1..14 {
        for j in 1..14 {
            assert_eq!(rows[i][j], rows[j][i]);
        }
        assert_eq!(rows[i][i], "1");
    }

    let o = wdsres(&["catalog", "cluster", "--k", "5", "--out", path("labels.csv").to_str().unwrap()]);
    assert!(o.status.success());
    let labels = read_labels(&path("labels.csv"));
    let reference: Vec<usize> = Catalog::shipped().records.iter().map(|r| r.cluster.unwrap() as usize).collect();
    assert_eq!(adjusted_rand_index(&labels, &reference).unwrap(), 1.0);

    let o = wdsres(&["catalog", "dendrogram", "--out", path("tree.json").to_str().unwrap(), "--text", path("tree.txt").to_str().unwrap()]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(path("tree.txt")).unwrap();
    assert_eq!(stdout(&o), text);
    assert_eq!(text.matches("[CL").count(), 59);
    let tree = wds_resilience::taxonomy::ClusteringResult::from_json(&std::fs::read_to_string(path("tree.json")).unwrap()).unwrap();
    assert_eq!(tree.labels, labels);

    let o = wdsres(&["list-metrics"]);
    assert_eq!(stdout(&o).lines().count(), 59);
    assert!(stdout(&o).contains("resilience index (EzioTodini.2000) [A TI PB BF RD] CL=3"));
}

fn read_labels(path: &Path) -> Vec<usize> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    rdr.records().map(|r| r.unwrap()[2].parse().unwrap()).collect()
}

#[test]
fn subcommands_are_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let runs: Vec<Vec<String>> = vec![
        vec!["catalog".into(), "counts".into(), "--out".into()],
        vec!["catalog".into(), "correlate".into(), "--out".into()],
        vec!["catalog".into(), "cluster".into(), "--out".into()],
        vec!["catalog".into(), "dendrogram".into(), "--out".into()],
        vec!["metric".into(), "herrera".into(), "--network".into(), fx("mesh.json"), "--out".into()],
        vec!["metric".into(), "buffering".into(), "--network".into(), fx("mesh.json"), "--oracle".into(), "supply".into(), "--threshold".into(), "0.5".into(), "--out".into()],
    ];
    for (i, args) in runs.iter().enumerate() {
        let files: Vec<_> = ["x", "y"].iter().map(|s| dir.path().join(format!("{i}{s}"))).collect();
        for f in &files {
            let mut full: Vec<&str> = args.iter().map(String::as_str).collect();
            full.push(f.to_str().unwrap());
            assert!(wdsres(&full).status.success(), "{args:?}");
        }
        assert_eq!(std::fs::read(&files[0]).unwrap(), std::fs::read(&files[1]).unwrap(), "{args:?}");
    }
}
