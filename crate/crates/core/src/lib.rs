//! Projected stochastic subgradient methods with momentum on strongly convex
//! problems, together with the mean-squared-error bounds they obey and a
//! Monte Carlo harness that checks one against the other.

pub mod bounds;
pub mod config;
pub mod estimators;
pub mod geometry;
pub mod harness;
pub mod optimizers;
pub mod problems;
pub mod rng;
pub mod schedules;
pub mod vector;
