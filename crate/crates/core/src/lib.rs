//! Counting statistics of a four-level quantum heat engine and a KNN classifier
//! that recovers the hot-bath coherence interval from cumulant ratios.

pub mod counting;
pub mod dataset;
pub mod engine;
pub mod error;
pub mod experiments;
pub mod exec;
pub mod metrics;
pub mod ml;
pub mod trajectory;

pub use error::{Error, Result};
pub use exec::Exec;
