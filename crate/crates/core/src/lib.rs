//! Multi-UAV NOMA downlink simulation with multi-agent deep Q-learning
//! trajectory and power control.

pub mod agent;
pub mod baselines;
pub mod channel;
pub mod clustering;
pub mod config;
pub mod env;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod mobility;
pub mod neural;
pub mod noma;
pub mod parallel;
pub mod rng;

pub use error::{Error, Result};
