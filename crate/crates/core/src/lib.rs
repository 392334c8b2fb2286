//! Benchmark compression: pick a small subset of benchmark samples whose
//! subset accuracies reconstruct every model's full-benchmark accuracy and
//! ranking. Stages: a coarse redundancy filter over sample pairs, a genetic
//! search for a fixed-size column mask, and attribution-guided refinement
//! rounds that shrink the candidate pool between searches.

pub mod cli;
pub mod error;
pub mod ga;
pub mod mask;
pub mod metrics;
pub mod pipeline;
pub mod predictor;
pub mod redundancy;
pub mod rng;
pub mod synth;
pub mod scorematrix;

pub use error::{Error, Result};
