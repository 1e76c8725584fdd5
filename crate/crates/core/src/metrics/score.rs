//! Score-based metrics: a weighted aggregate of scaled indicators and a
//! binary criteria checklist.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::taxonomy::{Function, Property};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Indicator {
    pub name: String,
    pub raw: f64,
    /// Largest observed value; the indicator is scaled by it.
    pub max_observed: f64,
    pub weight: f64,
}

impl Indicator {
    pub fn scaled(&self) -> f64 {
        self.raw / self.max_observed
    }
}

/// Read indicators from CSV with header `name,raw,max_observed,weight`.
pub fn read_indicators(reader: impl Read) -> Result<Vec<Indicator>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::parse("indicator CSV", e))?
        .iter()
        .map(str::to_owned)
        .collect();
    if header != ["name", "raw", "max_observed", "weight"] {
        return Err(Error::parse(
            "indicator CSV",
            "expected header `name,raw,max_observed,weight`",
        ));
    }
    rdr.deserialize()
        .map(|r| r.map_err(|e| Error::parse("indicator CSV", e)))
        .collect()
}

pub fn load_indicators(path: impl AsRef<Path>) -> Result<Vec<Indicator>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_indicators(file)
}

/// R = (1/Σw) Σ w·i², with i each indicator scaled by its maximum.
pub fn balaei_aggregate(indicators: &[Indicator]) -> Result<f64> {
    let mut weight_sum = 0.0;
    let mut acc = 0.0;
    for ind in indicators {
        if !(ind.max_observed.is_finite() && ind.max_observed > 0.0) {
            return Err(Error::validation(format!(
                "indicator `{}`: max_observed must be > 0",
                ind.name
            )));
        }
        if !(ind.weight.is_finite() && ind.weight >= 0.0) {
            return Err(Error::validation(format!(
                "indicator `{}`: weight must be >= 0",
                ind.name
            )));
        }
        let i = ind.scaled();
        if !(0.0..=1.0).contains(&i) {
            return Err(Error::validation(format!(
                "indicator `{}`: scaled value {i} outside [0, 1]",
                ind.name
            )));
        }
        weight_sum += ind.weight;
        acc += ind.weight * i * i;
    }
    if weight_sum <= 0.0 {
        return Err(Error::UndefinedInput("indicator weights sum to zero".into()));
    }
    Ok(acc / weight_sum)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    pub name: String,
    pub functions: Vec<Function>,
    pub properties: Vec<Property>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Category {
    pub name: String,
    pub criteria: Vec<Criterion>,
}

/// Water provision resilience checklist: binary criteria grouped into
/// categories, one point per fulfilled criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WprChecklist {
    pub categories: Vec<Category>,
}

const DEFAULT_CHECKLIST: &str = include_str!("../../data/wpr_checklist.json");

/// Category names of the default checklist, in order.
pub const WPR_CATEGORIES: [&str; 6] = [
    "supply",
    "finances",
    "infrastructure",
    "service provision",
    "water quality",
    "governance",
];

impl WprChecklist {
    pub fn new(categories: Vec<Category>) -> Result<Self> {
        let mut names = HashSet::new();
        for c in &categories {
            for k in &c.criteria {
                if !names.insert(k.name.as_str()) {
                    return Err(Error::validation(format!(
                        "duplicate criterion `{}`",
                        k.name
                    )));
                }
                if k.functions.is_empty() && k.properties.is_empty() {
                    return Err(Error::validation(format!(
                        "criterion `{}` carries no taxonomy tags",
                        k.name
                    )));
                }
            }
        }
        Ok(WprChecklist { categories })
    }

    /// The shipped 36-criterion checklist (six per category). Criterion
    /// names are placeholders; edit `data/wpr_checklist.json` or load
    /// a replacement with [`WprChecklist::load`].
    pub fn default_checklist() -> Self {
        Self::from_json_str(DEFAULT_CHECKLIST).expect("shipped checklist is valid")
    }

    /// Placeholder checklist with the given number of criteria per category.
    pub fn with_counts(counts: [usize; 6]) -> Self {
        let template = Self::default_checklist();
        let categories = template
            .categories
            .iter()
            .zip(counts)
            .map(|(cat, count)| Category {
                name: cat.name.clone(),
                criteria: (1..=count)
                    .map(|n| Criterion {
                        name: format!("{} {n}", cat.name),
                        ..cat.criteria[0].clone()
                    })
                    .collect(),
            })
            .collect();
        WprChecklist::new(categories).expect("generated names are unique")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let raw: WprChecklist =
            serde_json::from_str(text).map_err(|e| Error::parse("checklist JSON", e))?;
        WprChecklist::new(raw.categories)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn criteria(&self) -> impl Iterator<Item = &Criterion> {
        self.categories.iter().flat_map(|c| c.criteria.iter())
    }

    pub fn len(&self) -> usize {
        self.criteria().count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Answers keyed by criterion name.
pub type WprAnswers = BTreeMap<String, bool>;

pub fn parse_answers(text: &str) -> Result<WprAnswers> {
    serde_json::from_str(text).map_err(|e| Error::parse("answers JSON", e))
}

/// Number of fulfilled criteria. Every criterion must be answered and no
/// unknown criterion may appear.
pub fn wpr_score(checklist: &WprChecklist, answers: &WprAnswers) -> Result<usize> {
    let mut known = HashSet::new();
    let mut points = 0;
    for c in checklist.criteria() {
        known.insert(c.name.as_str());
        match answers.get(&c.name) {
            Some(true) => points += 1,
            Some(false) => {}
            None => {
                return Err(Error::validation(format!(
                    "criterion `{}` not answered",
                    c.name
                )))
            }
        }
    }
    if let Some(extra) = answers.keys().find(|k| !known.contains(k.as_str())) {
        return Err(Error::UnknownId(extra.clone()));
    }
    Ok(points)
}
