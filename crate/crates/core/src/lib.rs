//! Algorithmic core for length-generalization transfer experiments.
//!
//! Everything in this crate is deterministic given explicit seeds: task
//! instance generators (arithmetic, string, maze), the shared token
//! vocabulary, the multi-task sampling protocol, a from-scratch decoder-only
//! transformer with manual backpropagation, and the evaluation / attention
//! ablation math. IO, file formats and the CLI live in the companion
//! `lenxfer` crate.
//!
//! The crate is `no_std`-compatible (requires `alloc`); the default `std`
//! feature enables runtime SIMD detection in the matrix kernels.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod corpus;
pub mod eval;
pub mod mech;
pub mod model;
pub mod numeric;
pub mod rng;
pub mod sampler;
pub mod tasks;

pub use corpus::{Sample, TaskId, Vocab};
pub use model::{ModelConfig, ModelParams, PosMode};
