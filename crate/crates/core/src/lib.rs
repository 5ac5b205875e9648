//! Simulation library for reward-poisoning attacks on UCB bandit learners.
//!
//! The library couples three actors over sub-Gaussian bandit instances: a UCB
//! learner (regret-style or best-arm-identification with a count-ratio
//! stopping rule), an oracle attacker injecting minimal reward perturbations
//! toward a target arm, and a Monte Carlo harness that measures how often the
//! analytic guarantees (pull caps, cost ceilings, guaranteed stop rounds)
//! hold empirically. A CLI exposes bound evaluation, single episodes,
//! campaigns, and parameter sweeps.

pub mod attacker;
pub mod bounds;
pub mod cli;
pub mod error;
pub mod harness;
pub mod learner;
pub mod model;

pub use error::{Error, Result};
