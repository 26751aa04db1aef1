//! Heterogeneous federated learning with width-pruned sub-models.
//!
//! A server keeps one dense global model, carves a pool of nested sub-models
//! out of it by width pruning, dispatches them to simulated clients picked
//! by a curiosity/resource reward table, lets each client shrink what it
//! received to fit its parameter budget, and aggregates the returned slices
//! coordinate by coordinate.
//!
//! Everything is deterministic given the experiment seed.

pub mod aggregation;
pub mod config;
pub mod error;
pub mod federation;
pub mod metrics;
pub mod nn;
pub mod pruning;
pub mod rng;
pub mod selection;
pub mod selftest;

pub use error::{Error, Result};
