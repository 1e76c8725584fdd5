//! Hydraulic time series and baseline-functionality classification.

mod allocation;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::io::Read;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use allocation::{allocate, surrogate_allocation, Allocation, Conditions};

/// Per-junction, per-timestep delivered flow, demand, head and required head.
///
/// Matrices are indexed `[t][node]`. Metrics only look at the analysis
/// window, a half-open timestep range that defaults to the whole series.
#[derive(Debug, Clone, PartialEq)]
pub struct HydraulicSeries {
    timestep: f64,
    nodes: Vec<String>,
    delivered: Vec<Vec<f64>>,
    demand: Vec<Vec<f64>>,
    head: Vec<Vec<f64>>,
    required_head: Vec<Vec<f64>>,
    window: Range<usize>,
}

impl HydraulicSeries {
    pub fn new(
        timestep: f64,
        nodes: Vec<String>,
        delivered: Vec<Vec<f64>>,
        demand: Vec<Vec<f64>>,
        head: Vec<Vec<f64>>,
        required_head: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if !(timestep.is_finite() && timestep > 0.0) {
            return Err(Error::validation("timestep duration must be > 0"));
        }
        if nodes.is_empty() {
            return Err(Error::validation("series has no nodes"));
        }
        let steps = delivered.len();
        if steps == 0 {
            return Err(Error::validation("series has no timesteps"));
        }
        let mut seen = std::collections::HashSet::new();
        for n in &nodes {
            if !seen.insert(n) {
                return Err(Error::validation(format!("duplicate series node `{n}`")));
            }
        }
        for (name, m) in [
            ("delivered", &delivered),
            ("demand", &demand),
            ("head", &head),
            ("required_head", &required_head),
        ] {
            if m.len() != steps || m.iter().any(|row| row.len() != nodes.len()) {
                return Err(Error::validation(format!("{name} matrix has wrong shape")));
            }
            if m.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::validation(format!("{name} contains non-finite values")));
            }
        }
        for (t, row) in delivered.iter().enumerate() {
            for (i, &q) in row.iter().enumerate() {
                if q < 0.0 || demand[t][i] < 0.0 {
                    return Err(Error::validation(format!(
                        "negative flow at t={t}, node `{}`",
                        nodes[i]
                    )));
                }
            }
        }
        Ok(HydraulicSeries {
            timestep,
            nodes,
            delivered,
            demand,
            head,
            required_head,
            window: 0..steps,
        })
    }

    /// Restrict the analysis window to timesteps `start..end`.
    pub fn with_window(mut self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.len() {
            return Err(Error::validation(format!(
                "analysis window {start}..{end} invalid for {} timesteps",
                self.len()
            )));
        }
        self.window = start..end;
        Ok(self)
    }

    pub fn timestep(&self) -> f64 {
        self.timestep
    }

    pub fn len(&self) -> usize {
        self.delivered.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delivered.is_empty()
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn node_position(&self, id: &str) -> Result<usize> {
        self.nodes
            .iter()
            .position(|n| n == id)
            .ok_or_else(|| Error::UnknownId(id.to_owned()))
    }

    pub fn window(&self) -> Range<usize> {
        self.window.clone()
    }

    pub fn delivered(&self, t: usize, node: usize) -> f64 {
        self.delivered[t][node]
    }

    pub fn demand(&self, t: usize, node: usize) -> f64 {
        self.demand[t][node]
    }

    pub fn head(&self, t: usize, node: usize) -> f64 {
        self.head[t][node]
    }

    pub fn required_head(&self, t: usize, node: usize) -> f64 {
        self.required_head[t][node]
    }

    pub fn total_delivered(&self, t: usize) -> f64 {
        self.delivered[t].iter().sum()
    }

    pub fn total_demand(&self, t: usize) -> f64 {
        self.demand[t].iter().sum()
    }

    /// Concatenate single- or multi-step series over the same node set.
    pub fn concat(parts: &[HydraulicSeries]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::validation("nothing to concatenate"))?;
        let mut out = first.clone();
        for p in &parts[1..] {
            if p.nodes != out.nodes {
                return Err(Error::validation("series node sets differ"));
            }
            out.delivered.extend(p.delivered.iter().cloned());
            out.demand.extend(p.demand.iter().cloned());
            out.head.extend(p.head.iter().cloned());
            out.required_head.extend(p.required_head.iter().cloned());
        }
        out.window = 0..out.len();
        Ok(out)
    }

    /// Parse the CSV layout
    /// `t,node_id,delivered_m3s,demand_m3s,head_m,required_head_m`.
    ///
    /// `t` values are integer timestep labels; they are sorted and mapped
    /// to consecutive positions. Node order follows first appearance.
    pub fn from_csv_reader(reader: impl Read, context: &str) -> Result<Self> {
        const HEADER: [&str; 6] = [
            "t",
            "node_id",
            "delivered_m3s",
            "demand_m3s",
            "head_m",
            "required_head_m",
        ];
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header = rdr.headers().map_err(|e| Error::parse(context, e))?.clone();
        if header.iter().collect::<Vec<_>>() != HEADER {
            return Err(Error::parse(
                context,
                format!("expected header `{}`", HEADER.join(",")),
            ));
        }

        #[derive(Deserialize)]
        struct Row {
            t: u64,
            node_id: String,
            delivered_m3s: f64,
            demand_m3s: f64,
            head_m: f64,
            required_head_m: f64,
        }

        let mut nodes: Vec<String> = Vec::new();
        let mut node_pos: HashMap<String, usize> = HashMap::new();
        let mut by_time: BTreeMap<u64, HashMap<usize, [f64; 4]>> = BTreeMap::new();
        for (line, row) in rdr.deserialize::<Row>().enumerate() {
            let row = row.map_err(|e| Error::parse(context, e))?;
            let pos = *node_pos.entry(row.node_id.clone()).or_insert_with(|| {
                nodes.push(row.node_id.clone());
                nodes.len() - 1
            });
            let values = [
                row.delivered_m3s,
                row.demand_m3s,
                row.head_m,
                row.required_head_m,
            ];
            if by_time.entry(row.t).or_default().insert(pos, values).is_some() {
                return Err(Error::validation(format!(
                    "{context}: duplicate row for t={}, node `{}` (data line {})",
                    row.t,
                    row.node_id,
                    line + 1
                )));
            }
        }
        if by_time.is_empty() {
            return Err(Error::parse(context, "no data rows"));
        }

        let mut delivered = Vec::new();
        let mut demand = Vec::new();
        let mut head = Vec::new();
        let mut required = Vec::new();
        for (t, rows) in &by_time {
            if rows.len() != nodes.len() {
                return Err(Error::validation(format!(
                    "{context}: timestep {t} covers {} of {} nodes",
                    rows.len(),
                    nodes.len()
                )));
            }
            let col = |k: usize| (0..nodes.len()).map(|i| rows[&i][k]).collect::<Vec<_>>();
            delivered.push(col(0));
            demand.push(col(1));
            head.push(col(2));
            required.push(col(3));
        }
        HydraulicSeries::new(1.0, nodes, delivered, demand, head, required)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_reader(file, &path.display().to_string())
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("t,node_id,delivered_m3s,demand_m3s,head_m,required_head_m\n");
        for t in 0..self.len() {
            for (i, node) in self.nodes.iter().enumerate() {
                out.push_str(&format!(
                    "{t},{node},{},{},{},{}\n",
                    self.delivered[t][i],
                    self.demand[t][i],
                    self.head[t][i],
                    self.required_head[t][i]
                ));
            }
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }

    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_csv_string().as_bytes()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum State {
    #[serde(rename = "S")]
    Satisfactory,
    #[serde(rename = "F")]
    Failure,
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            State::Satisfactory => "S",
            State::Failure => "F",
        })
    }
}

/// Satisfactory/failure sequence and the threshold that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryStateSeries {
    states: Vec<State>,
    threshold: Option<f64>,
}

impl BinaryStateSeries {
    pub fn new(states: Vec<State>, threshold: Option<f64>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::validation("state series is empty"));
        }
        Ok(BinaryStateSeries { states, threshold })
    }

    /// Parse a string of `S`/`F` characters, e.g. `"SSFS"`.
    pub fn parse(text: &str) -> Result<Self> {
        let states = text
            .chars()
            .filter(|c| !c.is_whitespace() && *c != ',')
            .map(|c| match c {
                'S' | 's' => Ok(State::Satisfactory),
                'F' | 'f' => Ok(State::Failure),
                other => Err(Error::parse("state string", format!("unexpected `{other}`"))),
            })
            .collect::<Result<Vec<_>>>()?;
        BinaryStateSeries::new(states, None)
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn threshold(&self) -> Option<f64> {
        self.threshold
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

impl fmt::Display for BinaryStateSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.states.iter().try_for_each(|s| write!(f, "{s}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Thresholding {
    /// Total delivered over total demand.
    #[default]
    System,
    /// Every junction with positive demand must meet the threshold.
    PerNode,
}

/// Classify each window timestep as satisfactory or failed against a
/// supply/demand ratio threshold. Zero-demand timesteps are satisfactory.
pub fn classify_states(series: &HydraulicSeries, threshold: f64) -> Result<BinaryStateSeries> {
    classify_states_with(series, threshold, Thresholding::System)
}

pub fn classify_states_with(
    series: &HydraulicSeries,
    threshold: f64,
    mode: Thresholding,
) -> Result<BinaryStateSeries> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::validation(format!(
            "threshold {threshold} outside (0, 1]"
        )));
    }
    let states = series
        .window()
        .map(|t| {
            let ok = match mode {
                Thresholding::System => {
                    let demand = series.total_demand(t);
                    demand == 0.0 || series.total_delivered(t) / demand >= threshold
                }
                Thresholding::PerNode => (0..series.nodes().len()).all(|i| {
                    let d = series.demand(t, i);
                    d == 0.0 || series.delivered(t, i) / d >= threshold
                }),
            };
            if ok {
                State::Satisfactory
            } else {
                State::Failure
            }
        })
        .collect();
    BinaryStateSeries::new(states, Some(threshold))
}
