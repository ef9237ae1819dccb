//! Reinforcement learning with reward machines under noisy symbolic sensors.
//!
//! The agent keeps a belief over the states of a reward machine, shapes its
//! rewards from that belief, and alternates tabular Q-learning with
//! cost-optimal machine induction from sampled traces.

pub mod agent;
pub mod config;
pub mod error;
pub mod events;
pub mod examples;
pub mod harness;
pub mod induction;
pub mod interleave;
pub mod machine;
pub mod sensors;
pub mod worlds;

pub use error::{Error, Result};
