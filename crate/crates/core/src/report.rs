use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NominalRange {
    Closed { lo: f64, hi: f64 },
    Unbounded,
}

impl NominalRange {
    pub const UNIT: NominalRange = NominalRange::Closed { lo: 0.0, hi: 1.0 };

    pub fn contains(&self, value: f64) -> bool {
        match *self {
            NominalRange::Closed { lo, hi } => (lo..=hi).contains(&value),
            NominalRange::Unbounded => true,
        }
    }
}

/// A computed metric plus the context needed to reproduce it.
///
/// Values outside a closed nominal range are kept as computed and flagged
/// in `warnings`; nothing is clamped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub name: String,
    pub value: f64,
    pub nominal_range: NominalRange,
    pub warnings: Vec<String>,
    pub inputs_digest: Vec<String>,
}

impl MetricValue {
    pub fn new(name: &str, value: f64, nominal_range: NominalRange) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::UndefinedInput(format!("{name} evaluated to {value}")));
        }
        let mut warnings = Vec::new();
        if !nominal_range.contains(value) {
            warnings.push(format!("value {value} outside nominal range"));
        }
        Ok(MetricValue {
            name: name.to_owned(),
            value,
            nominal_range,
            warnings,
            inputs_digest: Vec::new(),
        })
    }

    pub fn with_digest(mut self, digest: impl Into<String>) -> Self {
        self.inputs_digest.push(digest.into());
        self
    }

    pub fn with_warning(mut self, warning: impl Into<String>) -> Self {
        self.warnings.push(warning.into());
        self
    }

    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("metric value serializes");
        out.push('\n');
        out
    }
}
