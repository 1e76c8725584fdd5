//! Resilience analytics for water distribution systems.
//!
//! The crate is organised around a small set of data types and the
//! metrics computed from them:
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`network`] | Junction/source/pump/pipe graph, JSON I/O, connectivity queries |
//! | [`hydraulic`] | Flow/head time series, satisfactory/failure classification, max-flow surrogate allocator |
//! | [`metrics::performance`] | Recovery rate, availability, fragility, flow-based resilience, user severity, Todini index, buffering capacity |
//! | [`metrics::graph`] | K-shortest paths, path resistance, node index, demand weighting, trimmed-mean aggregation |
//! | [`metrics::score`] | Weighted indicator aggregate, water provision resilience checklist |
//! | [`scenario`] | Critical-event timelines and seeded Monte Carlo runs |
//! | [`taxonomy`] | Metric catalog, summary counts, Pearson matrix, Ward clustering, dendrograms |
//!
//! All flows are m³/s, heads and lengths m, power W.

pub mod error;
pub mod hydraulic;
pub mod metrics;
pub mod network;
pub mod report;
pub mod scenario;
pub mod taxonomy;

pub use error::{Error, Result};
pub use hydraulic::{BinaryStateSeries, HydraulicSeries, State};
pub use network::Network;
pub use report::{MetricValue, NominalRange};
