//! Classification framework for resilience metrics and the meta-analysis
//! run over a catalog of classified metrics.
//!
//! Each metric is described by thirteen binary categories: the resilience
//! functions it assesses (monitor, react, learn, anticipate), its time
//! dependence, its quantification type (graph-theoretical, performance-based,
//! score-based, composite) and the resilient-system properties it considers
//! (baseline functionality, redundancy, recovery).

mod cluster;
mod correlation;

use std::fmt;
use std::fs;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use cluster::{
    adjusted_rand_index, cut_tree, partition_agreement, ward_clustering, ward_linkage,
    ClusteringResult, Merge, PartitionAgreement,
};
pub use correlation::{pearson, pearson_matrix, CorrelationMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Function {
    Monitor,
    React,
    Learn,
    Anticipate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Property {
    BaselineFunctionality,
    Redundancy,
    Recovery,
}

/// One of the thirteen binary catalog columns, in catalog column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    M,
    R,
    L,
    A,
    TI,
    TD,
    GT,
    PB,
    SB,
    CM,
    BF,
    RD,
    RC,
}

impl Category {
    pub const ALL: [Category; 13] = [
        Category::M,
        Category::R,
        Category::L,
        Category::A,
        Category::TI,
        Category::TD,
        Category::GT,
        Category::PB,
        Category::SB,
        Category::CM,
        Category::BF,
        Category::RD,
        Category::RC,
    ];

    pub const FUNCTIONS: [Category; 4] = [Category::M, Category::R, Category::L, Category::A];
    pub const PROPERTIES: [Category; 3] = [Category::BF, Category::RD, Category::RC];

    pub fn code(self) -> &'static str {
        match self {
            Category::M => "M",
            Category::R => "R",
            Category::L => "L",
            Category::A => "A",
            Category::TI => "TI",
            Category::TD => "TD",
            Category::GT => "GT",
            Category::PB => "PB",
            Category::SB => "SB",
            Category::CM => "CM",
            Category::BF => "BF",
            Category::RD => "RD",
            Category::RC => "RC",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Category::M => "monitor",
            Category::R => "react",
            Category::L => "learn",
            Category::A => "anticipate",
            Category::TI => "time-independent",
            Category::TD => "time-dependent",
            Category::GT => "graph-theoretical",
            Category::PB => "performance-based",
            Category::SB => "score-based",
            Category::CM => "composite",
            Category::BF => "baseline functionality",
            Category::RD => "redundancy",
            Category::RC => "recovery",
        }
    }

    fn position(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl std::str::FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Category::ALL
            .into_iter()
            .find(|c| c.code().eq_ignore_ascii_case(s) || c.label() == s)
            .ok_or_else(|| Error::validation(format!("unknown category `{s}`")))
    }
}

/// Columns of the published correlation matrix (all thirteen categories).
pub const CORRELATION_COLUMNS: [Category; 13] = Category::ALL;

/// Clustering features: functions, time dependence, quantification type
/// and properties. The composite flag is a modifier on top of a
/// quantification type and is left out; including it does not reproduce
/// the published cluster column (see [`ALL_FLAG_FEATURES`]).
pub const CLUSTER_FEATURES: [Category; 12] = [
    Category::M,
    Category::R,
    Category::L,
    Category::A,
    Category::TI,
    Category::TD,
    Category::GT,
    Category::PB,
    Category::SB,
    Category::BF,
    Category::RD,
    Category::RC,
];

/// All thirteen flags as clustering features.
pub const ALL_FLAG_FEATURES: [Category; 13] = Category::ALL;

/// One classified metric.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRecord {
    pub metric: String,
    pub citation: String,
    pub flags: [bool; 13],
    /// Published cluster label (1–5) when known.
    pub cluster: Option<u8>,
}

impl MetricRecord {
    pub fn flag(&self, c: Category) -> bool {
        self.flags[c.position()]
    }

    pub fn value(&self, c: Category) -> f64 {
        if self.flag(c) {
            1.0
        } else {
            0.0
        }
    }

    pub fn count(&self, cats: &[Category]) -> usize {
        cats.iter().filter(|&&c| self.flag(c)).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    pub records: Vec<MetricRecord>,
    /// Non-fatal irregularities found while loading.
    pub warnings: Vec<String>,
}

pub const CATALOG_HEADER: [&str; 16] = [
    "metric", "citation", "M", "R", "L", "A", "TI", "TD", "GT", "PB", "SB", "CM", "BF", "RD",
    "RC", "CL",
];

const SHIPPED_CATALOG: &str = include_str!("../../data/catalog.csv");

impl Catalog {
    /// Catalog CSV with header `metric,citation,M,…,RC,CL`; flags are 0/1
    /// and CL is 1–5 or empty.
    pub fn from_reader(reader: impl Read, context: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header = rdr.headers().map_err(|e| Error::parse(context, e))?;
        if let Some(bad) = header.iter().find(|h| !CATALOG_HEADER.contains(h)) {
            return Err(Error::parse(context, format!("unknown column `{bad}`")));
        }
        if header.iter().collect::<Vec<_>>() != CATALOG_HEADER {
            return Err(Error::parse(
                context,
                format!("expected header `{}`", CATALOG_HEADER.join(",")),
            ));
        }

        let mut records = Vec::new();
        let mut warnings = Vec::new();
        for (i, row) in rdr.records().enumerate() {
            let row = row.map_err(|e| Error::parse(context, e))?;
            let line = i + 2;
            let mut flags = [false; 13];
            for (k, flag) in flags.iter_mut().enumerate() {
                *flag = match &row[k + 2] {
                    "1" => true,
                    "0" => false,
                    other => {
                        return Err(Error::parse(
                            context,
                            format!("line {line}: flag {} is `{other}`, expected 0 or 1", CATALOG_HEADER[k + 2]),
                        ))
                    }
                };
            }
            let cluster = match &row[15] {
                "" => None,
                s => match s.parse::<u8>() {
                    Ok(c @ 1..=5) => Some(c),
                    _ => {
                        return Err(Error::parse(
                            context,
                            format!("line {line}: cluster `{s}` not in 1..5"),
                        ))
                    }
                },
            };
            let record = MetricRecord {
                metric: row[0].to_owned(),
                citation: row[1].to_owned(),
                flags,
                cluster,
            };
            if record.count(&Category::FUNCTIONS) == 0 {
                warnings.push(format!("`{}`: no function flag set", record.metric));
            }
            if record.count(&[Category::TI, Category::TD]) != 1 {
                warnings.push(format!(
                    "`{}`: expected exactly one of TI/TD",
                    record.metric
                ));
            }
            if record.count(&[Category::GT, Category::PB, Category::SB]) == 0 {
                warnings.push(format!("`{}`: no quantification flag set", record.metric));
            }
            records.push(record);
        }
        if records.is_empty() {
            return Err(Error::parse(context, "catalog has no records"));
        }
        Ok(Catalog { records, warnings })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(file, &path.display().to_string())
    }

    /// The 59-metric categorisation table shipped with the crate.
    pub fn shipped() -> Self {
        Self::from_reader(SHIPPED_CATALOG.as_bytes(), "shipped catalog")
            .expect("shipped catalog parses")
    }

    pub fn shipped_csv() -> &'static str {
        SHIPPED_CATALOG
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategoryCount {
    pub category: Category,
    pub label: &'static str,
    pub count: usize,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryCounts {
    pub total: usize,
    pub categories: Vec<CategoryCount>,
    /// Index n: metrics assessing exactly n of the four functions.
    pub functions_histogram: [usize; 5],
    /// Index n: metrics considering exactly n of the three properties.
    pub properties_histogram: [usize; 4],
}

impl SummaryCounts {
    pub fn count(&self, c: Category) -> usize {
        self.categories[c.position()].count
    }
}

impl fmt::Display for SummaryCounts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<4} {:<24} {:>5} {:>7}", "code", "category", "count", "percent")?;
        for c in &self.categories {
            writeln!(
                f,
                "{:<4} {:<24} {:>5} {:>6.1}%",
                c.category.code(),
                c.label,
                c.count,
                c.percent
            )?;
        }
        writeln!(f, "total {}", self.total)?;
        writeln!(f, "functions assessed (0..4): {:?}", self.functions_histogram)?;
        write!(f, "properties considered (0..3): {:?}", self.properties_histogram)
    }
}

/// Per-category counts and percentages, plus how many functions and
/// properties each metric covers.
pub fn summary_counts(records: &[MetricRecord]) -> Result<SummaryCounts> {
    if records.is_empty() {
        return Err(Error::validation("no records to summarise"));
    }
    let total = records.len();
    let categories = Category::ALL
        .into_iter()
        .map(|c| {
            let count = records.iter().filter(|r| r.flag(c)).count();
            CategoryCount {
                category: c,
                label: c.label(),
                count,
                percent: 100.0 * count as f64 / total as f64,
            }
        })
        .collect();
    let mut functions_histogram = [0; 5];
    let mut properties_histogram = [0; 4];
    for r in records {
        functions_histogram[r.count(&Category::FUNCTIONS)] += 1;
        properties_histogram[r.count(&Category::PROPERTIES)] += 1;
    }
    Ok(SummaryCounts {
        total,
        categories,
        functions_histogram,
        properties_histogram,
    })
}
