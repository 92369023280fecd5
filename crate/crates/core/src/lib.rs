//! Post-deployment neural architecture adaptation at desk scale.
//!
//! A small pretrained chain network is elasticized into a multi-path
//! supernet on the "cloud" side: the chain is partitioned into basic
//! blocks, merged and shrunk block variants are grafted on, and the new
//! branches are trained by branch-wise distillation plus whole-model
//! tuning while the original weights stay frozen. On the simulated "edge"
//! the engine profiles per-block latency, searches for the most accurate
//! subnet under a latency budget with reuse-accelerated evaluation, and
//! swaps subnets at runtime as the environment drifts.
//!
//! Modules follow the pipeline: [`graph`] (partitioning, expansion,
//! encodings), [`engine`] (dense numerics), [`elastic`] (training),
//! [`latsim`] (latency model and environment simulator), [`search`]
//! (window-guided search), [`evalcache`] (prefix-tree feature reuse),
//! [`runtime`] (monitor, paging, serve loop), and [`persist`] (file
//! formats).

pub mod data;
pub mod elastic;
pub mod engine;
pub mod evalcache;
pub mod graph;
pub mod latsim;
pub mod persist;
pub mod runtime;
pub mod search;
pub mod seeds;

#[cfg(test)]
pub(crate) mod fixtures;
