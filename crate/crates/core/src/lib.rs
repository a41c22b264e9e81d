//! Deterministic simulator for energy-aware runtime switching between
//! machine-learning models of different sizes.
//!
//! A MAPE-K controller watches a sliding window of per-request energy and
//! confidence, compares it to learned per-model rules and, through an
//! epsilon-greedy planner, picks the model that minimizes
//! `energy * (1 - confidence)`. The engine replays a request workload on a
//! virtual clock so that whole policy comparisons are reproducible from a
//! single seed.

pub mod cli;
pub mod config;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod knowledge;
pub mod learning;
pub mod mapek;
pub mod model_sim;
pub mod report;
pub mod seed;
pub mod workload;

pub use error::{Error, ErrorCategory, Result};
