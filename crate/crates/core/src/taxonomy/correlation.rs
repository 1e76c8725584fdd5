use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::taxonomy::{Category, MetricRecord};

/// Symmetric Pearson matrix; `None` marks pairs involving a constant column.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationMatrix {
    pub labels: Vec<Category>,
    pub values: Vec<Vec<Option<f64>>>,
}

impl CorrelationMatrix {
    pub fn get(&self, a: Category, b: Category) -> Option<f64> {
        let i = self.labels.iter().position(|&c| c == a)?;
        let j = self.labels.iter().position(|&c| c == b)?;
        self.values[i][j]
    }

    /// CSV with a leading label column; undefined entries are `NA`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for c in &self.labels {
            out.push(',');
            out.push_str(c.code());
        }
        out.push('\n');
        for (c, row) in self.labels.iter().zip(&self.values) {
            out.push_str(c.code());
            for v in row {
                match v {
                    Some(v) => write!(out, ",{v}").expect("string write"),
                    None => out.push_str(",NA"),
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Pearson coefficient of two equal-length samples; `None` if either is
/// constant.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

pub fn pearson_matrix(records: &[MetricRecord], columns: &[Category]) -> Result<CorrelationMatrix> {
    if records.len() < 2 {
        return Err(Error::validation("correlation needs at least two records"));
    }
    let data: Vec<Vec<f64>> = columns
        .iter()
        .map(|&c| records.iter().map(|r| r.value(c)).collect())
        .collect();
    let k = columns.len();
    let mut values = vec![vec![None; k]; k];
    for i in 0..k {
        for j in i..k {
            let r = pearson(&data[i], &data[j]);
            let r = if i == j { r.map(|_| 1.0) } else { r };
            values[i][j] = r;
            values[j][i] = r;
        }
    }
    Ok(CorrelationMatrix {
        labels: columns.to_vec(),
        values,
    })
}
