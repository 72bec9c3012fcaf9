//! Fixed-step electric-vehicle drivetrain simulator.
//!
//! Battery, Z-source inverter, brushless DC motor and a longitudinal vehicle
//! model, driven by open-loop, PID or sliding-mode speed control.

// Range checks are written as `!(x > lo)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod battery;
pub mod cli;
pub mod config;
pub mod controllers;
pub mod drivecycle;
pub mod engine;
pub mod error;
pub mod inverter;
pub mod metrics;
pub mod motor;
pub mod vehicle;

pub use error::{Result, SimError};
