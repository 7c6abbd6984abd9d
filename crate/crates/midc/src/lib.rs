//! Frequency-control toolkit for multi-infeed hybrid AC-DC (MIDC) power systems.
//!
//! An MIDC system is one AC grid fed by several LCC-HVDC links. After a large
//! disturbance (generator trip, DC block, load step) the links can support the
//! AC frequency through a P-f droop on their power orders, coordinated with the
//! generators' primary droop. This crate provides:
//!
//! - a validated network data model and a text scenario format ([`grid`]),
//! - the LCC droop controller with dead zone, signal selection/locking and
//!   order limits ([`droop`]),
//! - a semi-explicit index-1 DAE integrator for the closed-loop swing/LCC
//!   dynamics, plus droop-aware steady-state solving ([`dynamics`]),
//! - the emergency power-allocation problem, its closed-form optimal droop
//!   coefficients and an independent dual-bisection oracle ([`oefc`]),
//! - the partial primal-dual iteration the closed loop is equivalent to
//!   ([`pd`]),
//! - Lyapunov energy-function certificates checked along trajectories
//!   ([`stability`]).
//!
//! Batch layers (oracle sweeps, per-sample certificate evaluation) run on
//! rayon when the default `parallel` feature is enabled; `_serial` variants
//! are always available and a criterion bench compares the two.

// Parameter guards use `!(x > 0.0)` so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod droop;
pub mod dynamics;
pub mod grid;
pub mod oefc;
pub mod par;
pub mod pd;
pub mod report;
pub mod stability;

pub use grid::{Network, PerUnitBases, Scenario};
