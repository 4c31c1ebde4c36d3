//! Allocation-only core of the fraudlab pipeline.
//!
//! Everything in this crate is a pure function of its inputs and seeds: the
//! reverse-mode autodiff engine, the agent-based transaction simulator, the
//! feature pipeline, the three experts, the softmax gate and the evaluation
//! metrics. File formats, configuration and the command line live in the
//! `fraudlab` companion crate.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod datagen;
pub mod error;
pub mod eval;
pub mod experts;
pub(crate) mod math;
pub mod moe;
pub mod numerics;
pub mod preprocess;
pub mod rng;

pub use error::{Error, Result};
