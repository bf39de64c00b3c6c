//! Fault localization families, tie-aware rank metrics, and a
//! learning-to-rank combiner that merges their outputs.
//!
//! The crate is organized around one data flow: a subject program and its
//! test suite ([`minilang`]) produce coverage, dependences, crash stacks,
//! mutant runs and predicate switches; each family turns its raw data into a
//! [`ScoredList`](model::ScoredList); [`metrics`] evaluates rankings with the
//! expected rank of the first faulty element; and [`combiner`] learns a
//! linear pairwise model over normalized technique scores.

pub mod combiner;
pub mod error;
pub mod harness;
pub mod ir_history;
pub mod mbfl;
pub mod metrics;
pub mod minilang;
pub mod model;
pub mod predswitch;
pub mod sbfl;
pub mod slicing;
pub mod stacktrace;
pub mod technique;

pub use error::{Error, Result};
