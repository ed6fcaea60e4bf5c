//! Modular multi-copter lattices: structure, flexibility, dynamics,
//! adaptive control, thrust allocation, battery model and scenario harness.

pub mod allocation;
pub mod config;
pub mod control;
pub mod dynamics;
pub mod flexibility;
pub mod harness;
pub mod power;
pub mod structure;

/// Standard gravity, m/s².
pub const GRAVITY: f64 = 9.81;
