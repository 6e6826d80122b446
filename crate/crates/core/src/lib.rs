//! Desk-scale robot air hockey stack.
//!
//! The crate is organized around the pipeline a hitting robot actually runs:
//!
//! * [`kinematics`] — 7-DoF serial chain forward kinematics, Jacobians and
//!   null-space bases;
//! * [`path_planner`] — Cartesian line–arc–line hit paths on the table plane
//!   with quartic arc-length profiles;
//! * [`solver`] — small dense box-constrained QP/LP solvers used by the
//!   trajectory optimizer;
//! * [`hit_optimizer`] — null-space joint trajectory generation, hitting
//!   configuration optimization and maximum hit velocity computation;
//! * [`puck_dynamics`] — planar puck simulator with rim and mallet collisions;
//! * [`puck_tracker`] — extended Kalman filter for puck state estimation with
//!   collision-aware prediction and outlier gating;
//! * [`sysid`] — Gaussian-process Bayesian optimization that identifies the
//!   simulator parameters from observed traces;
//! * [`tactics`] — the high-level game state machine and its guard logic.
//!
//! Everything is deterministic under caller-provided RNG seeds; nothing in
//! the crate reads clocks or global state.

pub mod config;
pub mod hit_optimizer;
pub mod kinematics;
pub mod path_planner;
pub mod puck_dynamics;
pub mod puck_tracker;
pub mod solver;
pub mod sysid;
pub mod table;
pub mod tactics;
