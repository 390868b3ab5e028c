//! Experiment harness: splits, metrics, synthetic data, runs and reports.

pub mod config;
pub mod experiment;
pub mod metrics;
pub mod report;
pub mod split;
pub mod synth;
