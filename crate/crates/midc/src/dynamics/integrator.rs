//! Fixed-step classical Runge-Kutta integration of the closed-loop DAE,
//! with an inner Newton solve of the algebraic block after each stage.
//!
//! Controller discrete state (dead-zone latches, channel lock) and the
//! per-LCC linearization regime are frozen over the four stages of a step
//! and advanced once at the step end; threshold crossings therefore
//! resolve at step granularity (1 ms by default). Events apply at the
//! first step boundary at or after their time stamp, followed by a
//! re-initialization solve of the algebraic variables, which may jump.

use nalgebra::DVector;
use thiserror::Error;

use super::algebraic::{
    algebraic_residual, branch_outflow, coupled_frequencies, solve_algebraic, solve_flow,
    NewtonOptions,
};
use super::model::{LccRegime, SimModel};
use super::trajectory::{Sample, Trajectory};
use super::{SolveError, SystemState};
use crate::grid::{Network, Scenario};
use crate::oefc::resolve_coefficients;

#[derive(Debug, Error)]
pub enum SimulateError {
    #[error(transparent)]
    Scenario(#[from] crate::grid::GridError),
    #[error(transparent)]
    Coefficients(#[from] crate::oefc::OefcError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// Pre-fault initial condition: droop corrections zero, flow solved at
/// nominal injections and nominal DC powers.
pub fn initial_state(model: &SimModel) -> Result<SystemState, SolveError> {
    let reference = model.reference_bus()?;
    let pdc: Vec<f64> = model
        .lccs
        .iter()
        .map(|l| if l.blocked { 0.0 } else { l.p_nominal_pu })
        .collect();
    let q = model.net_injections(&pdc);
    let free: Vec<usize> = (0..model.n).filter(|&i| i != reference).collect();
    let theta = solve_flow(
        &vec![0.0; model.n],
        &free,
        &q,
        &model.lines,
        model.n,
        &NewtonOptions::default(),
    )?;
    let controllers = model.lccs.iter().map(|l| l.controller).collect();
    let saturated = vec![false; model.lccs.len()];
    Ok(SystemState {
        time_s: 0.0,
        theta_rad: theta,
        omega_pu: vec![0.0; model.n],
        pdc_pu: pdc,
        controllers,
        saturated,
        residual_inf: 0.0,
    })
}

fn pack(model: &SimModel, state: &SystemState) -> DVector<f64> {
    let ng = model.gens.len();
    let nd = model.lccs.len();
    let mut x = DVector::zeros(2 * ng + nd);
    for (a, g) in model.gens.iter().enumerate() {
        x[a] = state.theta_rad[g.bus];
        x[ng + a] = state.omega_pu[g.bus];
    }
    for (a, _) in model.lccs.iter().enumerate() {
        x[2 * ng + a] = state.pdc_pu[a];
    }
    x
}

/// Evaluates the right-hand side at packed state `x`. `warm_theta` carries
/// the previous algebraic solution as the Newton warm start and receives
/// the new one.
fn eval_stage(
    model: &SimModel,
    state: &SystemState,
    regimes: &[LccRegime],
    x: &DVector<f64>,
    warm_theta: &mut [f64],
    opts: &NewtonOptions,
) -> Result<DVector<f64>, SolveError> {
    let ng = model.gens.len();
    let nd = model.lccs.len();
    for (a, g) in model.gens.iter().enumerate() {
        warm_theta[g.bus] = x[a];
    }
    let pdc: Vec<f64> = (0..nd).map(|a| x[2 * ng + a]).collect();

    let theta = solve_algebraic(model, warm_theta, &pdc, opts)?;
    warm_theta.copy_from_slice(&theta);

    let mut omega_gen = vec![0.0; model.n];
    for (a, g) in model.gens.iter().enumerate() {
        omega_gen[g.bus] = x[ng + a];
    }
    let (omega, _) = coupled_frequencies(model, &theta, &omega_gen, &pdc, regimes)?;

    let outflow = branch_outflow(model.n, &model.lines, &theta);
    let mut dx = DVector::zeros(2 * ng + nd);
    for (a, g) in model.gens.iter().enumerate() {
        let w = x[ng + a];
        dx[a] = w;
        dx[ng + a] = (model.injection_pu[g.bus] - outflow[g.bus] - g.k_eff * w) / g.inertia;
    }
    for (a, unit) in model.lccs.iter().enumerate() {
        if unit.blocked {
            continue;
        }
        let (target, _) = unit.model_target(&state.controllers[a], omega[unit.bus]);
        dx[2 * ng + a] = (-pdc[a] + target) / unit.t_d_s;
    }
    Ok(dx)
}

/// Advances the state one RK4 step of size `dt_s` and re-establishes
/// algebraic consistency at the new time.
pub fn step(
    model: &SimModel,
    state: &SystemState,
    dt_s: f64,
    opts: &NewtonOptions,
) -> Result<SystemState, SolveError> {
    let regimes = model.regimes(&state.omega_pu, &state.controllers);
    let x0 = pack(model, state);
    let mut warm = state.theta_rad.clone();

    let k1 = eval_stage(model, state, &regimes, &x0, &mut warm, opts)?;
    let k2 = eval_stage(
        model,
        state,
        &regimes,
        &(&x0 + &k1 * (dt_s / 2.0)),
        &mut warm,
        opts,
    )?;
    let k3 = eval_stage(
        model,
        state,
        &regimes,
        &(&x0 + &k2 * (dt_s / 2.0)),
        &mut warm,
        opts,
    )?;
    let k4 = eval_stage(model, state, &regimes, &(&x0 + &k3 * dt_s), &mut warm, opts)?;

    let x1 = &x0 + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt_s / 6.0);
    finalize_state(model, state, &x1, &mut warm, state.time_s + dt_s, opts)
}

/// Consistency solve plus controller discrete-state advance at a new
/// packed state.
fn finalize_state(
    model: &SimModel,
    previous: &SystemState,
    x: &DVector<f64>,
    warm_theta: &mut [f64],
    time_s: f64,
    opts: &NewtonOptions,
) -> Result<SystemState, SolveError> {
    let ng = model.gens.len();
    let nd = model.lccs.len();
    for (a, g) in model.gens.iter().enumerate() {
        warm_theta[g.bus] = x[a];
    }
    let pdc: Vec<f64> = (0..nd).map(|a| x[2 * ng + a]).collect();
    let theta = solve_algebraic(model, warm_theta, &pdc, opts)?;
    warm_theta.copy_from_slice(&theta);

    let mut omega_gen = vec![0.0; model.n];
    for (a, g) in model.gens.iter().enumerate() {
        omega_gen[g.bus] = x[ng + a];
    }
    let regimes = model.regimes(&previous.omega_pu, &previous.controllers);
    let (omega, _) = coupled_frequencies(model, &theta, &omega_gen, &pdc, &regimes)?;

    let mut controllers = Vec::with_capacity(nd);
    let mut saturated = Vec::with_capacity(nd);
    for (a, unit) in model.lccs.iter().enumerate() {
        if unit.blocked {
            controllers.push(previous.controllers[a]);
            saturated.push(false);
            continue;
        }
        let (w_re, w_se) = unit.channel_inputs(omega[unit.bus]);
        let (order, next_ctrl) = previous.controllers[a].power_order(w_re, w_se);
        controllers.push(next_ctrl);
        saturated.push(order.saturated);
    }

    let residual_inf = algebraic_residual(model, &theta, &pdc)
        .iter()
        .fold(0.0f64, |m, r| m.max(r.abs()));

    Ok(SystemState {
        time_s,
        theta_rad: theta,
        omega_pu: omega,
        pdc_pu: pdc,
        controllers,
        saturated,
        residual_inf,
    })
}

fn record_sample(model: &SimModel, trajectory: &Trajectory, state: &SystemState) -> Sample {
    let flow_pu = trajectory
        .lines
        .iter()
        .map(|&(i, j, b)| -b * (state.theta_rad[i] - state.theta_rad[j]).sin())
        .collect();
    let u_gen_pu = trajectory
        .gen_buses
        .iter()
        .map(|&bus| {
            model
                .gens
                .iter()
                .find(|g| g.bus == bus)
                .map(|g| -g.k_eff * state.omega_pu[bus])
                .unwrap_or(0.0)
        })
        .collect();
    Sample {
        time_s: state.time_s,
        omega_pu: state.omega_pu.clone(),
        theta_rad: state.theta_rad.clone(),
        pdc_pu: state.pdc_pu.clone(),
        saturated: state.saturated.clone(),
        u_gen_pu,
        flow_pu,
    }
}

/// Runs a scenario against a network: resolves droop coefficients, builds
/// the model and integrates over the horizon.
pub fn simulate(network: &Network, scenario: &Scenario) -> Result<Trajectory, SimulateError> {
    let mut scenario = scenario.clone();
    scenario.normalize()?;
    scenario.validate_against(network)?;
    let coefficients = resolve_coefficients(network, &scenario.control)?;
    let model = SimModel::build(network, &coefficients, scenario.control.dead_zone_pu);
    Ok(simulate_model(model, &scenario)?)
}

/// Integrates an already-built model over the scenario horizon. Events
/// must be sorted by time ([`Scenario::normalize`] does this). Mid-run
/// solver failures terminate integration and are recorded on the returned
/// trajectory.
pub fn simulate_model(mut model: SimModel, scenario: &Scenario) -> Result<Trajectory, SolveError> {
    let opts = NewtonOptions::default();
    let dt = scenario.sim.dt_s;
    let n_steps = (scenario.sim.horizon_s / dt).round() as usize;
    let steps_per_sample = ((scenario.sim.output_every_s / dt).round() as usize).max(1);

    let mut state = initial_state(&model)?;
    let mut trajectory = Trajectory::new(&model, dt, scenario.sim.output_every_s);

    let mut event_idx = 0;
    let events = &scenario.events;

    // Events due at t = 0 apply before the first sample.
    let apply_due_events = |model: &mut SimModel,
                            state: &mut SystemState,
                            trajectory: &mut Trajectory,
                            event_idx: &mut usize|
     -> Result<(), SolveError> {
        let mut changed = false;
        while *event_idx < events.len() && events[*event_idx].time_s <= state.time_s + 0.5 * dt {
            let event = &events[*event_idx];
            model.apply_event(&event.kind)?;
            if let crate::grid::EventKind::DcBlock { bus } = event.kind {
                if let Some(idx) = model.lcc_index_of_bus(bus) {
                    state.pdc_pu[idx] = 0.0;
                }
            }
            trajectory
                .events
                .push((state.time_s, event.kind.to_string()));
            *event_idx += 1;
            changed = true;
        }
        if changed {
            // Re-initialize the algebraic variables after the jump.
            let theta = solve_algebraic(model, &state.theta_rad, &state.pdc_pu, &opts)?;
            state.theta_rad = theta;
            let mut omega_gen = vec![0.0; model.n];
            for g in &model.gens {
                omega_gen[g.bus] = state.omega_pu[g.bus];
            }
            let regimes = model.regimes(&state.omega_pu, &state.controllers);
            let (omega, _) =
                coupled_frequencies(model, &state.theta_rad, &omega_gen, &state.pdc_pu, &regimes)?;
            state.omega_pu = omega;
            state.residual_inf = algebraic_residual(model, &state.theta_rad, &state.pdc_pu)
                .iter()
                .fold(0.0f64, |m, r| m.max(r.abs()));
        }
        Ok(())
    };

    if let Err(e) = apply_due_events(&mut model, &mut state, &mut trajectory, &mut event_idx) {
        trajectory.failure = Some(e.to_string());
        return Ok(trajectory);
    }
    let first = record_sample(&model, &trajectory, &state);
    trajectory.samples.push(first);

    for k in 0..n_steps {
        match step(&model, &state, dt, &opts) {
            Ok(next) => state = next,
            Err(e) => {
                trajectory.failure = Some(format!("at t={:.3}s: {e}", state.time_s));
                return Ok(trajectory);
            }
        }
        if let Err(e) = apply_due_events(&mut model, &mut state, &mut trajectory, &mut event_idx) {
            trajectory.failure = Some(format!("at t={:.3}s: {e}", state.time_s));
            return Ok(trajectory);
        }
        if (k + 1) % steps_per_sample == 0 {
            let sample = record_sample(&model, &trajectory, &state);
            trajectory.samples.push(sample);
        }
    }
    Ok(trajectory)
}
