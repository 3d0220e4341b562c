//! Population simulator for the growth processes.
//!
//! Every user draws from its own counter-based stream (initial balance first,
//! then one normal per step), so results are identical for any thread count.

pub mod config;
pub mod engine;
pub mod schedule;

pub use config::{parse_days, InitialLaw, Model, RegimeMode, RegimeParams, SimConfig};
pub use engine::{
    simulate, simulate_gbm_exact, simulate_paths, simulate_power_sde, simulate_two_regime, snapshot_series, strong_convergence, user_id,
    ConvergencePoint, SimReport, MAX_BALANCE,
};
pub use schedule::Schedule;
