//! Optimal-stopping policies for Bermudan option exercise.
//!
//! The crate learns exercise policies with a small convolutional network
//! trained by backward recursion over simulated price paths, benchmarks
//! them against a Longstaff-Schwartz least-squares Monte Carlo baseline,
//! and ships the path generators, data handling, metrics, and a `stopdeck`
//! CLI to run the full protocol end to end.
//!
//! Start with the runnable examples (`cargo run --example ...`); each one
//! exercises a single capability:
//!
//! - `simulate_paths` — the four path generators and their summary stats
//! - `fbm_covariance` — fractional Brownian motion against its covariance
//! - `grad_check` — the network gradients against finite differences
//! - `train_policy` — backward-recursive policy training on one generator
//! - `lsmc_baseline` — the least-squares Monte Carlo baseline
//! - `bootstrap_data` — CSV ingestion, splitting, and bootstrap paths
//! - `compare_cnn_lsmc` — policy vs baseline on shared held-out paths
//! - `payoff_vs_steps` — payoff as a function of the exercise-date count

pub mod bench;
pub mod cli;
pub mod config;
pub mod datafeed;
pub mod deepstop;
pub mod error;
pub mod lsmc;
pub mod market;
pub mod rng;
pub mod simulate;
pub mod tensornet;

pub use error::{Error, Result};
