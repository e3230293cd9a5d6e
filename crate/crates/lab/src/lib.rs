//! IO, file formats, training orchestration and the CLI for the
//! length-generalization lab. All algorithmic work lives in `lenxfer-core`;
//! this crate adds checkpoints, CSV/JSONL artifacts, run manifests, the
//! sweep driver and shard-parallel execution.

pub mod checkpoint;
pub mod config;
pub mod dataset;
pub mod evalio;
pub mod manifest;
pub mod mechio;
pub mod par;
pub mod report;
pub mod sweep;
pub mod trainer;
