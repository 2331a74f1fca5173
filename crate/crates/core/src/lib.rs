//! Diagnostics for distributional bias in LLM benchmark evaluation.
//!
//! The input is a prompt×model performance matrix (binary correctness or
//! continuous scores in `[0, 1]`). The crate answers three questions about it:
//!
//! 1. Are the per-prompt performance vectors non-randomly correlated?
//!    ([`stats::run_prompt_correlation_test`], [`clustering::clustering_comparison`])
//! 2. How stable are model rankings under non-uniform prompt weightings?
//!    ([`weighting`], [`growth`], [`sampling`])
//! 3. Is performance similarity explained by semantic similarity of the
//!    prompts? ([`regression`])
//!
//! Everything here is deterministic given the caller-supplied seeds, including
//! under the optional `parallel` feature: concurrent work is split into
//! sub-seeded tasks whose results merge in a fixed order.
//!
//! The crate is `no_std`-compatible (with `alloc`); file formats, the CLI, and
//! the embedding-service client live in the companion `benchbias` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod clustering;
pub mod error;
pub mod fixtures;
pub mod growth;
pub mod matrix;
pub mod regression;
pub mod sampling;
pub mod seed;
pub mod similarity;
pub mod special;
pub mod stats;
pub mod weighting;

mod math;
mod parallel;

pub use error::{Error, Result};
pub use matrix::{
    validate_alignment, DistanceMeasure, EmbeddingMatrix, MatrixKind, PerformanceMatrix,
    SimilarityMatrix, WeightVector,
};
pub use similarity::SimilarityMeasure;
