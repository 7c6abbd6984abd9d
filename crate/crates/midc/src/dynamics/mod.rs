//! Closed-loop dynamics of the MIDC system.
//!
//! The model is a semi-explicit index-1 DAE. Differential states are the
//! generator angles and frequency deviations and the LCC DC powers:
//!
//! ```text
//!   θ̇ᵢ = ωᵢ                                            i generator
//!   Mᵢ ω̇ᵢ = Pᵢ − Σⱼ Bᵢⱼ sin(θᵢ−θⱼ) − kᴳᵢ ωᵢ            i generator
//!   0   = Pᵢ + pᵈᶜᵢ − Σⱼ Bᵢⱼ sin(θᵢ−θⱼ)                 i LCC bus
//!   0   = Pᵢ − Σⱼ Bᵢⱼ sin(θᵢ−θⱼ)                        i passive
//!   Tᴰᵢ ṗᵈᶜᵢ = −pᵈᶜᵢ + order(ωᵢ)                        i LCC
//! ```
//!
//! Angles at LCC and passive buses are algebraic: after each integrator
//! stage they are re-solved by Newton, and their frequencies come from the
//! time-differentiated constraints (an index-reduction linear solve — the
//! droop feedback `order(ωᵢ)` makes that system coupled, which is folded
//! into the solve). Events re-initialize the algebraic variables, which may
//! jump; differential states stay continuous.

mod algebraic;
mod integrator;
mod model;
mod reduced;
mod steady;
mod trajectory;

pub use algebraic::{
    algebraic_frequencies, algebraic_residual, branch_outflow, solve_algebraic, solve_flow,
    weighted_laplacian, NewtonOptions,
};
pub use integrator::{initial_state, simulate, simulate_model, step, SimulateError};
pub use model::{GenUnit, LccRegime, LccUnit, SimModel};
pub use reduced::simulate_reduced;
pub use steady::{steady_state, synchronous_frequency_of_model};
pub use trajectory::{Sample, Trajectory};

use thiserror::Error;

use crate::droop::LccDroopController;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error(
        "Newton iteration did not converge after {iterations} iterations (residual {residual:.3e})"
    )]
    NewtonDivergence { iterations: usize, residual: f64 },
    #[error("required flow exceeds line capacity at bus {bus}")]
    InfeasibleFlow { bus: usize },
    #[error("algebraic Jacobian is singular (security-region boundary)")]
    SingularJacobian,
    #[error("no angle solution inside the security region")]
    NoSecureSolution,
    #[error("total droop is zero; synchronous frequency undefined")]
    ZeroTotalDroop,
    #[error("no active generator remains; swing dynamics undefined")]
    NoActiveGenerator,
    #[error("steady-state active set did not stabilize")]
    ActiveSetCycle,
    #[error("iteration did not converge within the time budget")]
    NoConvergence,
    #[error("invalid event: {0}")]
    InvalidEvent(String),
}

/// Full system state at one instant. Angles are absolute (they drift with
/// the synchronous frequency); the relative frame subtracts the reference
/// bus angle.
#[derive(Debug, Clone)]
pub struct SystemState {
    pub time_s: f64,
    /// Phase angle per bus (rad).
    pub theta_rad: Vec<f64>,
    /// Frequency deviation per bus (p.u.); generator entries are states,
    /// the rest are index-reduced values from the last consistency solve.
    pub omega_pu: Vec<f64>,
    /// DC power per LCC unit (signed model frame).
    pub pdc_pu: Vec<f64>,
    /// Droop controller state per LCC unit (latches, lock, saturation).
    pub controllers: Vec<LccDroopController>,
    /// Saturation flag per LCC from the last order evaluation.
    pub saturated: Vec<bool>,
    /// Algebraic residual ∞-norm of the last consistency solve.
    pub residual_inf: f64,
}

/// A droop-aware equilibrium of the (post-event) system.
#[derive(Debug, Clone)]
pub struct Equilibrium {
    /// Relative angles (reference bus entry is exactly zero).
    pub theta_rel_rad: Vec<f64>,
    /// Common frequency deviation shared by all buses.
    pub omega_syn_pu: f64,
    /// Steady DC power per LCC unit.
    pub pdc_pu: Vec<f64>,
    /// Steady generator regulation −kᴳωₛ per active generator bus.
    pub u_gen_pu: Vec<(usize, f64)>,
    /// Steady DC regulation pᵈᶜ* − Pᴰ per LCC bus.
    pub u_lcc_pu: Vec<(usize, f64)>,
    /// Per-LCC saturation flags at the equilibrium.
    pub saturated: Vec<bool>,
}
