//! `wdsres`: batch front end for the wds-resilience toolkit.
//!
//! Exit status is 0 on success, 1 for input errors (bad arguments, missing
//! or malformed files) and 2 when a metric is undefined for valid inputs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use wds_resilience::hydraulic::classify_states;
use wds_resilience::metrics::graph::{
    demand_weighted_node_index, district_index, herrera_node_index, node_index_csv,
    node_index_table, PathAveraging, DEFAULT_K, DEFAULT_TRIM,
};
use wds_resilience::metrics::performance::{
    buffering_capacity, connectivity_oracle, flow_based_resilience, fragility,
    hashimoto_recovery, pipe_fragility, supply_oracle, todini_index, user_severity,
    zhuang_availability, Component, DEFAULT_MAX_K,
};
use wds_resilience::metrics::score::{
    balaei_aggregate, load_indicators, parse_answers, wpr_score, WprChecklist,
};
use wds_resilience::network::FlowUnits;
use wds_resilience::scenario::{
    apply_scenario, monte_carlo, McMetric, MonteCarloConfig, Sampling, ScenarioSpec,
};
use wds_resilience::taxonomy::{
    partition_agreement, pearson_matrix, summary_counts, ward_clustering, Catalog, Category,
    ALL_FLAG_FEATURES, CLUSTER_FEATURES,
};
use wds_resilience::{
    BinaryStateSeries, Error, HydraulicSeries, MetricValue, Network, NominalRange, Result,
};

const METRIC_NAMES: [&str; 10] = [
    "hashimoto",
    "zhuang",
    "fragility",
    "fr",
    "user_severity",
    "todini",
    "buffering",
    "herrera",
    "balaei",
    "wpr",
];

/// Baseline functionality threshold used when none is given: any shortfall
/// counts as failure.
const DEFAULT_THRESHOLD: f64 = 1.0;

#[derive(Parser)]
#[command(name = "wdsres", version, about = "Water distribution system resilience metrics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute one metric and write a JSON report.
    Metric(MetricArgs),
    /// Run critical-event scenarios on the surrogate allocator.
    Scenario {
        #[command(subcommand)]
        action: ScenarioCommand,
    },
    /// Meta-analysis over a metric catalog.
    Catalog {
        #[command(subcommand)]
        action: CatalogCommand,
    },
    /// Print each catalog metric with its taxonomy flags.
    ListMetrics {
        #[arg(long)]
        catalog: Option<PathBuf>,
    },
}

#[derive(Args)]
struct MetricArgs {
    /// One of: hashimoto, zhuang, fragility, fr, user_severity, todini,
    /// buffering, herrera, balaei, wpr.
    name: String,
    #[arg(long)]
    network: Option<PathBuf>,
    /// Hydraulic series CSV (a single-step state for todini).
    #[arg(long, visible_alias = "state")]
    series: Option<PathBuf>,
    /// State sequence such as `SSFFS` (hashimoto, instead of --series).
    #[arg(long)]
    states: Option<String>,
    /// Baseline functionality threshold as a supply/demand ratio.
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
    /// Paths per source (herrera).
    #[arg(long = "K", default_value_t = DEFAULT_K)]
    k_paths: usize,
    /// Fraction trimmed from each tail for district averages (herrera).
    #[arg(long, default_value_t = DEFAULT_TRIM)]
    trim: f64,
    /// Largest failure-set size examined (buffering).
    #[arg(long, default_value_t = DEFAULT_MAX_K)]
    max_k: usize,
    /// Feasibility check for buffering.
    #[arg(long, value_enum, default_value_t = Oracle::Connectivity)]
    oracle: Oracle,
    /// Node id (user_severity, herrera).
    #[arg(long)]
    node: Option<String>,
    /// Weight the herrera node index by its demand share.
    #[arg(long)]
    weighted: bool,
    /// Comma-separated district members for a trimmed-mean herrera index.
    #[arg(long, value_delimiter = ',')]
    members: Vec<String>,
    /// Pipe id (fragility).
    #[arg(long)]
    pipe: Option<String>,
    /// Repair rate per metre (fragility without a network).
    #[arg(long)]
    repair_rate: Option<f64>,
    /// Pipe length in metres (fragility without a network).
    #[arg(long)]
    length: Option<f64>,
    /// Indicator CSV (balaei).
    #[arg(long)]
    indicators: Option<PathBuf>,
    /// Checklist JSON (wpr); defaults to the shipped 36-criterion list.
    #[arg(long)]
    checklist: Option<PathBuf>,
    /// Answers JSON mapping criterion name to true/false (wpr).
    #[arg(long)]
    answers: Option<PathBuf>,
    /// Flow units assumed for network files that do not declare them.
    #[arg(long, value_enum, default_value_t = Units::M3s)]
    units: Units,
    /// Output file; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Oracle {
    Connectivity,
    Supply,
}

#[derive(Clone, Copy, ValueEnum)]
enum Units {
    Lps,
    M3s,
}

impl From<Units> for FlowUnits {
    fn from(u: Units) -> Self {
        match u {
            Units::Lps => FlowUnits::Lps,
            Units::M3s => FlowUnits::M3s,
        }
    }
}

#[derive(Args)]
struct ScenarioCommon {
    #[arg(long)]
    network: PathBuf,
    /// Scenario JSON; no events if omitted.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Overrides the seed in the scenario file.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    horizon: usize,
    #[arg(long, value_enum, default_value_t = Units::M3s)]
    units: Units,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum ScenarioCommand {
    /// Write the series produced by one realisation of the scenario.
    Run {
        #[command(flatten)]
        common: ScenarioCommon,
    },
    /// Monte Carlo summary of a metric over scenario realisations.
    Mc {
        #[command(flatten)]
        common: ScenarioCommon,
        #[arg(long, default_value_t = 100)]
        n: usize,
        /// One of: zhuang, hashimoto, fr, user_severity_min.
        #[arg(long, default_value = "zhuang")]
        metric: String,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold: f64,
        /// Enumerate random pipe choices instead of sampling them.
        #[arg(long)]
        exhaustive: bool,
        /// Also write per-replicate values as CSV.
        #[arg(long)]
        values: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FeaturePreset {
    /// All flags except composite.
    Cluster,
    /// All thirteen flags.
    All,
}

#[derive(Args)]
struct CatalogCommon {
    /// Catalog CSV; the shipped catalog if omitted.
    #[arg(long)]
    catalog: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ClusterArgs {
    #[command(flatten)]
    common: CatalogCommon,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, value_enum, default_value_t = FeaturePreset::Cluster)]
    features: FeaturePreset,
}

#[derive(Subcommand)]
enum CatalogCommand {
    /// Category counts and percentages.
    Counts {
        #[command(flatten)]
        common: CatalogCommon,
    },
    /// Pearson correlation matrix over the thirteen flags (CSV).
    Correlate {
        #[command(flatten)]
        common: CatalogCommon,
    },
    /// Ward clustering cut into k flat clusters (label CSV).
    Cluster(ClusterArgs),
    /// Ward merge tree (JSON) with a text rendering on stdout.
    Dendrogram {
        #[command(flatten)]
        args: ClusterArgs,
        /// Also write the text rendering to this file.
        #[arg(long)]
        text: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input() { 1 } else { 2 })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Metric(args) => cmd_metric(&args),
        Command::Scenario { action } => cmd_scenario(action),
        Command::Catalog { action } => cmd_catalog(action),
        Command::ListMetrics { catalog } => list_metrics(catalog.as_deref()),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn required<'a, T: ?Sized>(value: Option<&'a T>, flag: &str, metric: &str) -> Result<&'a T> {
    value.ok_or_else(|| Error::Validation(format!("metric `{metric}` requires --{flag}")))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })
}

fn cmd_metric(a: &MetricArgs) -> Result<()> {
    let name = a.name.as_str();
    let network = || -> Result<Network> {
        Network::load_with_units(required(a.network.as_deref(), "network", name)?, a.units.into())
    };
    let series =
        || -> Result<HydraulicSeries> { HydraulicSeries::load(required(a.series.as_deref(), "series", name)?) };

    let report = match name {
        "hashimoto" => {
            let states = match (&a.states, &a.series) {
                (Some(s), _) => BinaryStateSeries::parse(s)?,
                (None, Some(_)) => classify_states(&series()?, a.threshold)?,
                (None, None) => {
                    return Err(Error::Validation(
                        "metric `hashimoto` requires --states or --series".into(),
                    ))
                }
            };
            hashimoto_recovery(&states)?
        }
        "zhuang" => zhuang_availability(&series()?)?,
        "fragility" => match (a.repair_rate, a.length) {
            (Some(rr), Some(len)) => {
                MetricValue::new("fragility", fragility(rr, len), NominalRange::UNIT)?
            }
            _ => {
                let net = network()?;
                match &a.pipe {
                    Some(id) => {
                        let pipe = &net.pipes()[net.pipe_index(id)?];
                        MetricValue::new("fragility", pipe_fragility(pipe), NominalRange::UNIT)?
                            .with_digest(net.digest())
                    }
                    None => {
                        let rows: Vec<_> = net
                            .pipes_by_id()
                            .iter()
                            .map(|&p| {
                                let pipe = &net.pipes()[p];
                                json!({"pipe": pipe.id, "fragility": pipe_fragility(pipe)})
                            })
                            .collect();
                        return emit(a.out.as_deref(), &pretty(&json!(rows)));
                    }
                }
            }
        },
        "fr" => flow_based_resilience(&network()?, &series()?)?,
        "user_severity" => user_severity(&series()?, required(a.node.as_deref(), "node", name)?)?,
        "todini" => todini_index(&network()?, &series()?)?,
        "buffering" => {
            let net = network()?;
            let result = match a.oracle {
                Oracle::Connectivity => buffering_capacity(&net, connectivity_oracle(&net), a.max_k)?,
                Oracle::Supply => buffering_capacity(&net, supply_oracle(&net, a.threshold), a.max_k)?,
            };
            let witness = result.witness.as_ref().map(|set| {
                set.iter()
                    .map(|c| match *c {
                        Component::Pipe(p) => net.pipes()[p].id.clone(),
                        Component::Pump(p) => net.pumps()[p].id.clone(),
                    })
                    .collect::<Vec<_>>()
            });
            let value = json!({
                "name": "buffering_capacity",
                "k": result.k,
                "max_k": result.max_k,
                "witness": witness,
                "inputs_digest": [net.digest()],
            });
            return emit(a.out.as_deref(), &pretty(&value));
        }
        "herrera" => {
            let net = network()?;
            if !a.members.is_empty() {
                let v = district_index(&net, &a.members, a.k_paths, a.trim)?;
                MetricValue::new("district_index", v, NominalRange::Unbounded)?
                    .with_digest(net.digest())
            } else if let Some(node) = &a.node {
                let index = if a.weighted {
                    demand_weighted_node_index(&net, node, a.k_paths)?
                } else {
                    herrera_node_index(&net, node, a.k_paths)?
                };
                MetricValue::new("herrera_node_index", index.value(node)?, NominalRange::Unbounded)?
                    .with_digest(net.digest())
            } else {
                let rows = node_index_table(&net, a.k_paths, PathAveraging::FixedK)?;
                return emit(a.out.as_deref(), &node_index_csv(&rows));
            }
        }
        "balaei" => {
            let path = required(a.indicators.as_deref(), "indicators", name)?;
            let v = balaei_aggregate(&load_indicators(path)?)?;
            MetricValue::new("balaei_aggregate", v, NominalRange::UNIT)?
        }
        "wpr" => {
            let checklist = match &a.checklist {
                Some(p) => WprChecklist::load(p)?,
                None => WprChecklist::default_checklist(),
            };
            let answers = parse_answers(&read_text(required(a.answers.as_deref(), "answers", name)?)?)?;
            let score = wpr_score(&checklist, &answers)?;
            let range = NominalRange::Closed {
                lo: 0.0,
                hi: checklist.len() as f64,
            };
            MetricValue::new("wpr", score as f64, range)?
        }
        other => {
            return Err(Error::UnknownMetric {
                name: other.to_owned(),
                valid: METRIC_NAMES.join(", "),
            })
        }
    };
    emit(a.out.as_deref(), &report.to_json())
}

fn pretty(value: &serde_json::Value) -> String {
    let mut out = serde_json::to_string_pretty(value).expect("json value serializes");
    out.push('\n');
    out
}

fn load_scenario(common: &ScenarioCommon) -> Result<(Network, ScenarioSpec)> {
    let net = Network::load_with_units(&common.network, common.units.into())?;
    let mut spec = match &common.spec {
        Some(p) => ScenarioSpec::load(p)?,
        None => ScenarioSpec::default(),
    };
    if let Some(seed) = common.seed {
        spec.seed = seed;
    }
    Ok((net, spec))
}

fn cmd_scenario(action: ScenarioCommand) -> Result<()> {
    match action {
        ScenarioCommand::Run { common } => {
            let (net, spec) = load_scenario(&common)?;
            let series = apply_scenario(&net, &spec, common.horizon)?;
            emit(common.out.as_deref(), &series.to_csv_string())
        }
        ScenarioCommand::Mc {
            common,
            n,
            metric,
            threshold,
            exhaustive,
            values,
        } => {
            let (net, spec) = load_scenario(&common)?;
            let config = MonteCarloConfig {
                replicates: n,
                horizon: common.horizon,
                metric: McMetric::parse(&metric, threshold)?,
                sampling: if exhaustive { Sampling::Exhaustive } else { Sampling::Random },
            };
            let result = monte_carlo(&net, &spec, &config)?;
            if let Some(path) = values {
                emit(Some(&path), &result.to_csv())?;
            }
            emit(common.out.as_deref(), &result.to_json())
        }
    }
}

fn load_catalog(path: Option<&Path>) -> Result<Catalog> {
    let catalog = match path {
        Some(p) => Catalog::load(p)?,
        None => Catalog::shipped(),
    };
    for w in &catalog.warnings {
        eprintln!("warning: {w}");
    }
    Ok(catalog)
}

fn preset(p: FeaturePreset) -> &'static [Category] {
    match p {
        FeaturePreset::Cluster => &CLUSTER_FEATURES,
        FeaturePreset::All => &ALL_FLAG_FEATURES,
    }
}

fn cmd_catalog(action: CatalogCommand) -> Result<()> {
    match action {
        CatalogCommand::Counts { common } => {
            let catalog = load_catalog(common.catalog.as_deref())?;
            let counts = summary_counts(&catalog.records)?;
            println!("{counts}");
            if let Some(out) = &common.out {
                emit(Some(out), &pretty(&json!(counts)))?;
            }
            Ok(())
        }
        CatalogCommand::Correlate { common } => {
            let catalog = load_catalog(common.catalog.as_deref())?;
            let matrix = pearson_matrix(&catalog.records, &Category::ALL)?;
            match &common.out {
                Some(out) => {
                    emit(Some(out), &matrix.to_csv())?;
                    print!("{}", correlation_table(&matrix));
                    Ok(())
                }
                None => emit(None, &matrix.to_csv()),
            }
        }
        CatalogCommand::Cluster(args) => {
            let catalog = load_catalog(args.common.catalog.as_deref())?;
            let result = ward_clustering(&catalog.records, preset(args.features), args.k)?;
            let mut csv = String::from("metric,citation,label\n");
            for (r, label) in catalog.records.iter().zip(&result.labels) {
                writeln!(csv, "{},{},{label}", quote(&r.metric), quote(&r.citation))
                    .expect("string write");
            }
            let reference: Option<Vec<usize>> = catalog
                .records
                .iter()
                .map(|r| r.cluster.map(usize::from))
                .collect();
            if let Some(reference) = reference {
                let agreement = partition_agreement(&result.labels, &reference)?;
                eprintln!(
                    "agreement with CL column: {}/{} records",
                    agreement.matched, agreement.total
                );
                for &i in &agreement.mismatches {
                    eprintln!("  mismatch: {}", result.leaves[i]);
                }
            }
            emit(args.common.out.as_deref(), &csv)
        }
        CatalogCommand::Dendrogram { args, text } => {
            let catalog = load_catalog(args.common.catalog.as_deref())?;
            let result = ward_clustering(&catalog.records, preset(args.features), args.k)?;
            if let Some(p) = &text {
                emit(Some(p), &result.render_text())?;
            }
            match &args.common.out {
                Some(out) => {
                    emit(Some(out), &result.to_json())?;
                    print!("{}", result.render_text());
                    Ok(())
                }
                None => emit(None, &result.to_json()),
            }
        }
    }
}

fn quote(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_owned()
    }
}

fn correlation_table(m: &wds_resilience::taxonomy::CorrelationMatrix) -> String {
    let mut out = String::from("    ");
    for c in &m.labels {
        write!(out, "{:>6}", c.code()).expect("string write");
    }
    out.push('\n');
    for (c, row) in m.labels.iter().zip(&m.values) {
        write!(out, "{:<4}", c.code()).expect("string write");
        for v in row {
            match v {
                Some(v) => write!(out, "{v:>6.2}"),
                None => write!(out, "{:>6}", "NA"),
            }
            .expect("string write");
        }
        out.push('\n');
    }
    out
}

fn list_metrics(catalog: Option<&Path>) -> Result<()> {
    let catalog = load_catalog(catalog)?;
    let mut out = String::new();
    for r in &catalog.records {
        let codes: Vec<_> = Category::ALL
            .into_iter()
            .filter(|&c| r.flag(c))
            .map(Category::code)
            .collect();
        let cl = r.cluster.map_or("-".to_owned(), |c| c.to_string());
        writeln!(out, "{} ({}) [{}] CL={cl}", r.metric, r.citation, codes.join(" "))
            .expect("string write");
    }
    emit(None, &out)
}
