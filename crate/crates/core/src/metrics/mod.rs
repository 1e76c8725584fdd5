//! Resilience metrics with closed-form definitions.

pub mod graph;
pub mod performance;
pub mod score;
